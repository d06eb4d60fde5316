"""Dynamic control limits and the streaming BTBE monitoring engine.

Each event vector contributes one or two plotted points.  The first event
of a vector is judged against fixed limits taken from the in-control law of
``X(1)``.  The second event is judged against limits computed from the
conditional law of ``X(2)`` given the first event that was just observed, so
those limits move from vector to vector.  A tie (both events at the same
time) is a single point judged against the first-event limits.

Tail masses: a one-sided (upper) chart puts ``alpha`` in the upper tail, a
two-sided chart puts ``alpha / 2`` in each tail.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional


from .lifetimes import (
    GbeParams,
    LifetimeModel,
    MobwParams,
    OrderBranch,
    OrderedEvent,
    Source,
    _branch_probability,
    as_array,
    expected_tbe,
    superimpose,
)
from .numerics import BtbeError, DomainError

__all__ = [
    "Side",
    "ChartConfig",
    "LimitPair",
    "ChartPoint",
    "alpha_from_ats0",
    "default_side",
    "first_event_limits",
    "second_event_limits",
    "monitor",
    "export_chart",
    "write_chart_csv",
    "EXPORT_COLUMNS",
]

EXPORT_COLUMNS = (
    "vector_index",
    "event_index",
    "rank",
    "source",
    "value",
    "lcl",
    "ucl",
    "signal",
    "signal_rank",
)


class Side(enum.Enum):
    UPPER_ONE_SIDED = "upper"
    TWO_SIDED = "two-sided"

    @classmethod
    def parse(cls, text: str) -> "Side":
        key = text.strip().lower().replace("_", "-")
        aliases = {"upper": cls.UPPER_ONE_SIDED, "one-sided": cls.UPPER_ONE_SIDED,
                   "upper-one-sided": cls.UPPER_ONE_SIDED, "two-sided": cls.TWO_SIDED,
                   "two": cls.TWO_SIDED}
        try:
            return aliases[key]
        except KeyError:
            raise DomainError(f"unknown chart side {text!r}") from None


def default_side(model: LifetimeModel) -> Side:
    """Upper one-sided for the exponential families, two-sided for MOBW."""
    return Side.TWO_SIDED if isinstance(model, MobwParams) else Side.UPPER_ONE_SIDED


def alpha_from_ats0(model: LifetimeModel, ats0: float) -> float:
    """Per-point false alarm rate giving in-control ATS ``ats0``: ``E[TBE] / ats0``."""
    tbe = expected_tbe(model)
    if not ats0 > tbe:
        raise DomainError(f"ats0 must exceed E[TBE] = {tbe:.6g}")
    return tbe / ats0


@dataclass(frozen=True)
class ChartConfig:
    """In-control model plus the false alarm specification.

    Exactly one of ``ats0`` and ``alpha_override`` must be given.  ``side``
    defaults to :func:`default_side` of the model.
    """

    model: LifetimeModel
    ats0: Optional[float] = None
    alpha_override: Optional[float] = None
    side: Optional[Side] = None

    def __post_init__(self):
        if (self.ats0 is None) == (self.alpha_override is None):
            raise DomainError("give exactly one of ats0 and alpha_override")
        if self.alpha_override is not None and not 0 < self.alpha_override < 1:
            raise DomainError("alpha_override must lie in (0, 1)")
        if self.ats0 is not None:
            alpha_from_ats0(self.model, self.ats0)
        if self.side is None:
            object.__setattr__(self, "side", default_side(self.model))

    @property
    def alpha(self) -> float:
        if self.alpha_override is not None:
            return self.alpha_override
        return alpha_from_ats0(self.model, self.ats0)

    @property
    def tails(self) -> tuple:
        """Survival probabilities at (lcl, ucl); lcl entry is None when one-sided."""
        a = self.alpha
        if self.side is Side.TWO_SIDED:
            return (1.0 - a / 2, a / 2)
        return (None, a)


@dataclass(frozen=True)
class LimitPair:
    ucl: float
    lcl: Optional[float] = None

    def __post_init__(self):
        if self.lcl is not None and not 0 <= self.lcl < self.ucl:
            raise DomainError("limits must satisfy 0 <= lcl < ucl")

    def signals(self, value: float) -> bool:
        return value > self.ucl or (self.lcl is not None and value < self.lcl)


@dataclass(frozen=True)
class ChartPoint:
    event: OrderedEvent
    limits: LimitPair
    signal: bool
    event_index: int = 0

    @property
    def signal_rank(self) -> Optional[int]:
        return self.event.rank if self.signal else None


def first_event_limits(config: ChartConfig) -> LimitPair:
    """Limits for ``X(1)``, the same for every vector."""
    p_lo, p_hi = config.tails
    m = config.model
    ucl = float(m.first_event_quantile(p_hi))
    lcl = None if p_lo is None else float(m.first_event_quantile(p_lo))
    return LimitPair(ucl=ucl, lcl=lcl)


def _second_limit(model, p, x_first, branch):
    if isinstance(model, GbeParams) and model.delta < 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            u = float(model.second_event_quantile(p, x_first, branch))
        if not math.isfinite(u):
            warnings.warn("second-event limit overflowed; returning +inf", RuntimeWarning)
            return math.inf
        return u
    return float(model.second_event_quantile(p, x_first, branch))


def second_event_limits(config: ChartConfig, x_first: float, branch: OrderBranch) -> LimitPair:
    """Limits for ``X(2)`` given the observed first event and its branch."""
    if branch is OrderBranch.X1_EQ_X2:
        raise BtbeError("ties have no second event")
    if x_first < 0:
        raise DomainError("x_first must be >= 0")
    m = config.model
    _branch_probability(m, branch)
    p_lo, p_hi = config.tails
    ucl = _second_limit(m, p_hi, x_first, branch)
    lcl = None if p_lo is None else _second_limit(m, p_lo, x_first, branch)
    return LimitPair(ucl=ucl, lcl=lcl)


def _branch_of_first(first: OrderedEvent) -> OrderBranch:
    if first.source is Source.SUBPROCESS1:
        return OrderBranch.X1_LT_X2
    if first.source is Source.SUBPROCESS2:
        return OrderBranch.X1_GT_X2
    return OrderBranch.X1_EQ_X2


def monitor(config: ChartConfig, vectors: Iterable) -> Iterator[ChartPoint]:
    """Run the chart over event vectors in observation order.

    Yields one :class:`ChartPoint` per observed event.  A point depends only
    on its own vector and the in-control configuration, so the output for a
    prefix of the stream never changes when more data arrive.
    """
    lim1 = first_event_limits(config)
    event_index = 0
    for k, vec in enumerate(vectors):
        row = as_array([tuple(vec)])
        events = superimpose(row)
        first = events[0]
        first = OrderedEvent(first.value, first.rank, first.source, k)
        event_index += 1
        yield ChartPoint(first, lim1, lim1.signals(first.value), event_index)
        if len(events) == 2:
            second = events[1]
            second = OrderedEvent(second.value, second.rank, second.source, k)
            lim2 = second_event_limits(config, first.value, _branch_of_first(first))
            event_index += 1
            yield ChartPoint(second, lim2, lim2.signals(second.value), event_index)


def export_chart(points: Iterable[ChartPoint]) -> list:
    """Tabular rows (header first) in :data:`EXPORT_COLUMNS` order.

    Indices are 1-based.  The ``lcl`` cell is empty for a one-sided chart and
    ``signal_rank`` is empty when there is no signal.
    """
    rows = [list(EXPORT_COLUMNS)]
    for i, p in enumerate(points, start=1):
        ev = p.event
        rows.append([
            ev.vector_index + 1,
            p.event_index or i,
            ev.rank,
            ev.source.value,
            repr(float(ev.value)),
            "" if p.limits.lcl is None else repr(p.limits.lcl),
            repr(p.limits.ucl),
            int(p.signal),
            "" if p.signal_rank is None else p.signal_rank,
        ])
    return rows


def write_chart_csv(points: Iterable[ChartPoint], fh=None) -> str:
    """Write :func:`export_chart` rows as CSV to ``fh`` (or return the text)."""
    buf = io.StringIO() if fh is None else fh
    csv.writer(buf, lineterminator="\n").writerows(export_chart(points))
    return buf.getvalue() if fh is None else ""
