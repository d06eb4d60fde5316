"""Bivariate lifetime models and the order-statistic laws used by the chart.

Three families are supported:

* :class:`GbeParams` - Gumbel's bivariate exponential (type B, Hougaard form),
  ``S(x1, x2) = exp(-C(x1, x2)**delta)`` with
  ``C(x1, x2) = (x1/theta1)**(1/delta) + (x2/theta2)**(1/delta)``.
* :class:`MobeParams` - Marshall-Olkin bivariate exponential,
  ``S(x1, x2) = exp(-l1*x1 - l2*x2 - l12*max(x1, x2))``.
* :class:`MobwParams` - Marshall-Olkin bivariate Weibull, the same shock
  model on the time scale ``x**eta``.

For a single event vector the chart first sees ``X(1) = min(X1, X2)`` and,
unless both events coincide, later ``X(2) = max(X1, X2)``.  The functions
here give the law of ``X(1)`` within each ordering branch and the law of
``X(2)`` given the realised ``X(1)`` and branch.  The conditional laws are
defined through the partial survival functions

    S_1(x1, x2) = dS/dx1,   S_2(x1, x2) = dS/dx2

so that ``P(X(2) > y | X(1) = x, X1 < X2) = S_1(x, y) / S_1(x, x)``.
For the Marshall-Olkin families ``S`` has a kink on the diagonal; ``S_1``
is evaluated on the ``x1 <= x2`` side and ``S_2`` on the ``x2 <= x1`` side,
which is what the branch-conditional laws require.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .numerics import (
    BtbeError,
    DomainError,
    Tolerance,
    integrate_semiinf,
    lambert_w0_log,
)

__all__ = [
    "GbeParams",
    "MobeParams",
    "MobwParams",
    "LifetimeModel",
    "EventVector",
    "OrderedEvent",
    "OrderBranch",
    "Source",
    "BranchError",
    "as_array",
    "survival",
    "partial_survival",
    "density",
    "sample",
    "event_probabilities",
    "expected_tbe",
    "first_event_cdf",
    "first_event_survival",
    "first_event_survival_quadrature",
    "second_event_conditional",
    "second_event_quantile",
    "superimpose",
]


class BranchError(BtbeError, ValueError):
    """Requested order branch is inconsistent, unsupported or has probability zero."""


class OrderBranch(enum.Enum):
    X1_LT_X2 = "x1<x2"
    X1_GT_X2 = "x1>x2"
    X1_EQ_X2 = "x1=x2"

    @classmethod
    def of(cls, x1: float, x2: float) -> "OrderBranch":
        if x1 < x2:
            return cls.X1_LT_X2
        if x1 > x2:
            return cls.X1_GT_X2
        return cls.X1_EQ_X2


class Source(enum.Enum):
    SUBPROCESS1 = "subprocess1"
    SUBPROCESS2 = "subprocess2"
    TIE = "tie"


class EventVector(NamedTuple):
    x1: float
    x2: float


@dataclass(frozen=True)
class OrderedEvent:
    """One plotted point of the superimposed stream."""

    value: float
    rank: int  # 1 = first event of its vector, 2 = second
    source: Source
    vector_index: int

    @property
    def branch(self) -> OrderBranch:
        if self.source is Source.TIE:
            return OrderBranch.X1_EQ_X2
        first_is_1 = (self.source is Source.SUBPROCESS1) == (self.rank == 1)
        return OrderBranch.X1_LT_X2 if first_is_1 else OrderBranch.X1_GT_X2


def as_array(vectors) -> np.ndarray:
    """Coerce event vectors to a float array of shape ``(n, 2)``."""
    arr = np.asarray(vectors, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("event vectors must have shape (n, 2)")
    return arr


def _check_times(*xs):
    for x in xs:
        if np.any(np.asarray(x) < 0):
            raise DomainError("event times must be nonnegative")


# ----------------------------------------------------------------------------
# Gumbel bivariate exponential


@dataclass(frozen=True)
class GbeParams:
    theta1: float
    theta2: float
    delta: float = 1.0

    family = "gbe"

    def __post_init__(self):
        if not (self.theta1 > 0 and self.theta2 > 0):
            raise DomainError("GBE scales must be positive")
        if not 0 < self.delta <= 1:
            raise DomainError("GBE delta must lie in (0, 1]")

    @property
    def params(self) -> tuple:
        return (self.theta1, self.theta2, self.delta)

    @property
    def rate1(self) -> float:
        """``theta1**(-1/delta)``, the first term of ``C(1, 1)``."""
        return self.theta1 ** (-1.0 / self.delta)

    @property
    def rate2(self) -> float:
        return self.theta2 ** (-1.0 / self.delta)

    @property
    def c11(self) -> float:
        return self.rate1 + self.rate2

    @property
    def min_rate(self) -> float:
        """Rate of the exponential law of ``X(1)``: ``C(1, 1)**delta``."""
        return self.c11**self.delta

    def _c(self, x1, x2):
        d = self.delta
        return (np.asarray(x1) / self.theta1) ** (1 / d) + (np.asarray(x2) / self.theta2) ** (1 / d)

    def survival(self, x1, x2):
        return np.exp(-self._c(x1, x2) ** self.delta)

    def partial_survival(self, x1, x2, wrt: int):
        d = self.delta
        c = self._c(x1, x2)
        x, theta = (x1, self.theta1) if wrt == 1 else (x2, self.theta2)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -np.exp(-(c**d)) * c ** (d - 1) * (np.asarray(x) / theta) ** (1 / d - 1) / theta
        return np.where(c > 0, val, -1.0 / theta if d == 1 else 0.0)

    def density(self, x1, x2, branch: OrderBranch):
        if branch is OrderBranch.X1_EQ_X2:
            raise BranchError("GBE has no probability mass on x1 = x2")
        d = self.delta
        c = self._c(x1, x2)
        u, v = np.asarray(x1) / self.theta1, np.asarray(x2) / self.theta2
        cd = c**d
        return (u * v) ** (1 / d - 1) * c ** (d - 2) * (cd + 1 / d - 1) * np.exp(-cd) / (self.theta1 * self.theta2)

    def log_density(self, x1, x2, branch: OrderBranch):
        """``log density`` evaluated in log space; stays finite as ``delta -> 0``."""
        if branch is OrderBranch.X1_EQ_X2:
            raise BranchError("GBE has no probability mass on x1 = x2")
        d = self.delta
        with np.errstate(divide="ignore"):
            lu = np.log(np.asarray(x1, dtype=float) / self.theta1)
            lv = np.log(np.asarray(x2, dtype=float) / self.theta2)
        lc = np.logaddexp(lu / d, lv / d)
        cd = np.exp(d * lc)
        return ((1 / d - 1) * (lu + lv) + (d - 2) * lc + np.log(cd + 1 / d - 1) - cd
                - math.log(self.theta1 * self.theta2))

    def sample_uniforms(self, u: np.ndarray) -> np.ndarray:
        # columns: mixing weight Q, two unit exponentials, Bernoulli(delta) draw
        q = u[:, 0]
        r = -np.log1p(-u[:, 1]) - np.log1p(-u[:, 2]) * (u[:, 3] < self.delta)
        d = self.delta
        return np.column_stack((self.theta1 * q**d * r, self.theta2 * (1.0 - q) ** d * r))

    n_uniforms = 4

    def event_probabilities(self):
        c = self.c11
        return (self.rate1 / c, self.rate2 / c, 0.0)

    def expected_tbe(self) -> float:
        if self.delta == 1:
            # independent exponentials: the same law, and the same float, as MOBE without a shock
            return MobeParams(self.rate1, self.rate2, 0.0).expected_tbe()
        return 0.5 * (self.theta1 + self.theta2 - self.c11 ** (-self.delta))

    def first_event_survival(self, x):
        return np.exp(-self.min_rate * np.asarray(x, dtype=float))

    def first_event_quantile(self, surv_prob):
        return -np.log(surv_prob) / self.min_rate

    def second_event_survival(self, y, x_first, branch: OrderBranch):
        d = self.delta
        x_first = np.asarray(x_first, dtype=float)
        y = np.asarray(y, dtype=float)
        if branch is OrderBranch.X1_LT_X2:
            c, c0 = self._c(x_first, y), self._c(x_first, x_first)
        else:
            c, c0 = self._c(y, x_first), self._c(x_first, x_first)
        if d == 1:
            return np.exp(-(c - c0))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.exp(-(c**d - c0**d) + (d - 1) * np.log(c / c0))
        return np.where(y == x_first, 1.0, out)

    def second_event_quantile(self, surv_prob, x_first, branch: OrderBranch):
        """Solve ``P(X(2) > u | X(1) = x_first, branch) = surv_prob`` for ``u``."""
        d = self.delta
        x_first = np.asarray(x_first, dtype=float)
        surv_prob = np.asarray(surv_prob, dtype=float)
        if branch is OrderBranch.X1_LT_X2:
            th_first, th_other = self.theta1, self.theta2
        else:
            th_first, th_other = self.theta2, self.theta1
        if d == 1:
            return x_first - th_other * np.log(surv_prob)
        k = (1 - d) / d
        y0 = x_first * self.min_rate
        with np.errstate(divide="ignore"):
            # log of the Lambert argument G; G itself overflows for small tails
            log_g = math.log(d / (1 - d)) + np.log(y0) + (y0 - np.log(surv_prob)) / k
        y = k * np.asarray(lambert_w0_log(np.where(y0 > 0, log_g, 0.0)))
        # (th*y)**(1/d) - (th/th_first*x)**(1/d), raised to d, in overflow-safe form
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.clip(x_first / (th_first * y), 0.0, 1.0) ** (1 / d)
            out = th_other * y * np.exp(d * np.log1p(-ratio))
        out = np.where(y0 > 0, out, 0.0)
        return np.maximum(out, x_first)


# ----------------------------------------------------------------------------
# Marshall-Olkin shock models


class _MarshallOlkin:
    """Shared formulas for the MOBE (``eta = 1``) and MOBW families."""

    lambda1: float
    lambda2: float
    lambda12: float

    n_uniforms = 3

    @property
    def eta(self) -> float:  # overridden by MobwParams
        return 1.0

    def _validate(self):
        for v in (self.lambda1, self.lambda2, self.lambda12):
            if not (v >= 0 and math.isfinite(v)):
                raise DomainError("Marshall-Olkin rates must be finite and >= 0")
        if not (self.lambda1 + self.lambda12 > 0 and self.lambda2 + self.lambda12 > 0):
            raise DomainError("both margins need a positive rate (lambda_i + lambda12 > 0)")

    @property
    def total_rate(self) -> float:
        return self.lambda1 + self.lambda2 + self.lambda12

    @property
    def rate_after1(self) -> float:
        """Rate driving ``X2`` once ``X1`` happened first: ``lambda2 + lambda12``."""
        return self.lambda2 + self.lambda12

    @property
    def rate_after2(self) -> float:
        return self.lambda1 + self.lambda12

    def _t(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.eta == 1 else x**self.eta

    def survival(self, x1, x2):
        t1, t2 = self._t(x1), self._t(x2)
        return np.exp(-self.lambda1 * t1 - self.lambda2 * t2 - self.lambda12 * np.maximum(t1, t2))

    def partial_survival(self, x1, x2, wrt: int):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        s = self.survival(x1, x2)
        eta = self.eta
        if wrt == 1:
            rate = np.where(x1 <= x2, self.lambda1, self.rate_after2)
            dt = eta * x1 ** (eta - 1) if eta != 1 else 1.0
        else:
            rate = np.where(x2 <= x1, self.lambda2, self.rate_after1)
            dt = eta * x2 ** (eta - 1) if eta != 1 else 1.0
        return -rate * dt * s

    def density(self, x1, x2, branch: OrderBranch):
        eta = self.eta
        t1, t2 = self._t(x1), self._t(x2)
        j1 = eta * np.asarray(x1, dtype=float) ** (eta - 1)
        if branch is OrderBranch.X1_EQ_X2:
            return self.lambda12 * j1 * np.exp(-self.total_rate * t1)
        j2 = eta * np.asarray(x2, dtype=float) ** (eta - 1)
        if branch is OrderBranch.X1_LT_X2:
            return self.lambda1 * self.rate_after1 * j1 * j2 * np.exp(-self.lambda1 * t1 - self.rate_after1 * t2)
        return self.lambda2 * self.rate_after2 * j1 * j2 * np.exp(-self.rate_after2 * t1 - self.lambda2 * t2)

    def sample_uniforms(self, u: np.ndarray) -> np.ndarray:
        # three independent shocks by inversion; a zero rate never fires
        e = -np.log1p(-u)
        with np.errstate(divide="ignore"):
            p = e[:, 0] / self.lambda1 if self.lambda1 > 0 else np.full(len(u), np.inf)
            q = e[:, 1] / self.lambda2 if self.lambda2 > 0 else np.full(len(u), np.inf)
            r = e[:, 2] / self.lambda12 if self.lambda12 > 0 else np.full(len(u), np.inf)
        x = np.column_stack((np.minimum(p, r), np.minimum(q, r)))
        return x if self.eta == 1 else x ** (1.0 / self.eta)

    def event_probabilities(self):
        lam = self.total_rate
        return (self.lambda1 / lam, self.lambda2 / lam, self.lambda12 / lam)

    def first_event_survival(self, x):
        return np.exp(-self.total_rate * self._t(x))

    def first_event_quantile(self, surv_prob):
        t = -np.log(surv_prob) / self.total_rate
        return t if self.eta == 1 else t ** (1.0 / self.eta)

    def _after(self, branch: OrderBranch) -> float:
        return self.rate_after1 if branch is OrderBranch.X1_LT_X2 else self.rate_after2

    def second_event_survival(self, y, x_first, branch: OrderBranch):
        return np.exp(-self._after(branch) * (self._t(y) - self._t(x_first)))

    def second_event_quantile(self, surv_prob, x_first, branch: OrderBranch):
        t = self._t(x_first) - np.log(surv_prob) / self._after(branch)
        return t if self.eta == 1 else t ** (1.0 / self.eta)


@dataclass(frozen=True)
class MobeParams(_MarshallOlkin):
    lambda1: float
    lambda2: float
    lambda12: float = 0.0

    family = "mobe"

    def __post_init__(self):
        self._validate()

    @property
    def params(self) -> tuple:
        return (self.lambda1, self.lambda2, self.lambda12)

    def expected_tbe(self) -> float:
        l1, l2, l12 = self.params
        lam = self.total_rate
        return 0.5 * ((l1 + l2) / lam**2 + l2 / (lam * (l1 + l12)) + l1 / (lam * (l2 + l12))) + l12 / lam**2


@dataclass(frozen=True)
class MobwParams(_MarshallOlkin):
    lambda1: float
    lambda2: float
    lambda12: float
    shape: float = 1.0

    family = "mobw"

    def __post_init__(self):
        self._validate()
        if not self.shape > 0:
            raise DomainError("MOBW shape must be positive")

    @property
    def eta(self) -> float:
        return self.shape

    @property
    def params(self) -> tuple:
        return (self.lambda1, self.lambda2, self.lambda12, self.shape)

    @classmethod
    def from_scales(cls, scale1: float, scale2: float, scale12: float, shape: float) -> "MobwParams":
        """Build from Weibull scales ``s``: each shock survives ``exp(-(x / s)**shape)``.

        A zero or infinite scale maps to a zero rate (the shock never fires).
        """
        if not shape > 0:
            raise DomainError("MOBW shape must be positive")

        def rate(s):
            if not s >= 0:
                raise DomainError("scales must be nonnegative")
            return 0.0 if s == 0 or math.isinf(s) else s ** (-shape)

        return cls(rate(scale1), rate(scale2), rate(scale12), shape)

    @property
    def scales(self) -> tuple:
        """Weibull scales ``rate**(-1/shape)``; ``inf`` for a zero rate."""
        return tuple(math.inf if r == 0 else r ** (-1.0 / self.shape)
                     for r in (self.lambda1, self.lambda2, self.lambda12))

    def expected_tbe(self) -> float:
        l1, l2, l12, eta = self.params
        lam = self.total_rate
        a, b = l2 + l12, l1 + l12
        p = lam ** (1 + 1 / eta)
        return 0.5 * math.gamma(1 + 1 / eta) * (a ** (-1 / eta) - a / p + b ** (-1 / eta) - b / p + 2 * l12 / p)


LifetimeModel = Union[GbeParams, MobeParams, MobwParams]


# ----------------------------------------------------------------------------
# module-level API


def survival(model: LifetimeModel, x1, x2):
    """Joint survival ``P(X1 > x1, X2 > x2)``."""
    _check_times(x1, x2)
    return model.survival(x1, x2)


def partial_survival(model: LifetimeModel, x1, x2, wrt: int):
    """``dS/dx1`` (``wrt=1``) or ``dS/dx2`` (``wrt=2``); see the module notes."""
    _check_times(x1, x2)
    if wrt not in (1, 2):
        raise DomainError("wrt must be 1 or 2")
    return model.partial_survival(x1, x2, wrt)


def density(model: LifetimeModel, x1, x2, branch: OrderBranch):
    """Density of the absolutely continuous parts, or of the tie line.

    For ``X1_EQ_X2`` the result is the density of the common value along
    the diagonal (Marshall-Olkin families only).
    """
    _check_times(x1, x2)
    x1a, x2a = np.asarray(x1), np.asarray(x2)
    ok = {
        OrderBranch.X1_LT_X2: x1a < x2a,
        OrderBranch.X1_GT_X2: x1a > x2a,
        OrderBranch.X1_EQ_X2: x1a == x2a,
    }[branch]
    if not np.all(ok):
        raise BranchError(f"(x1, x2) not in branch {branch.value}")
    return model.density(x1, x2, branch)


def sample(model: LifetimeModel, rng, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. event vectors as an ``(n, 2)`` array.

    ``rng`` is an :class:`~btbe.numerics.RngStream` or a numpy ``Generator``.
    Exactly ``model.n_uniforms`` uniforms are consumed per vector, so draws
    stay aligned across parameter values.
    """
    if n < 0:
        raise DomainError("n must be >= 0")
    u = rng.random((int(n), model.n_uniforms))
    return model.sample_uniforms(u)


def event_probabilities(model: LifetimeModel) -> tuple:
    """``(P[X1 < X2], P[X1 > X2], P[X1 = X2])``."""
    return model.event_probabilities()


def expected_tbe(model: LifetimeModel) -> float:
    """Expected gap per plotted point of the superimposed stream."""
    return model.expected_tbe()


def _branch_probability(model, branch: OrderBranch) -> float:
    p_lt, p_gt, p_eq = model.event_probabilities()
    p = {OrderBranch.X1_LT_X2: p_lt, OrderBranch.X1_GT_X2: p_gt, OrderBranch.X1_EQ_X2: p_eq}[branch]
    if branch is OrderBranch.X1_EQ_X2 and isinstance(model, GbeParams):
        raise BranchError("GBE has no ties")
    if p == 0:
        raise BranchError(f"branch {branch.value} has probability zero under {model!r}")
    return p


def first_event_survival(model: LifetimeModel, x, branch: OrderBranch):
    """``P(X(1) > x | branch)``.

    In all three families the first event time is independent of which
    component produced it, so the branch only matters for validation.
    """
    _check_times(x)
    _branch_probability(model, branch)
    return model.first_event_survival(x)


def first_event_cdf(model: LifetimeModel, x, branch: OrderBranch):
    """``P(X(1) <= x | branch)``."""
    return 1.0 - first_event_survival(model, x, branch)


def _first_event_integrand(model, branch):
    if branch is OrderBranch.X1_LT_X2:
        return lambda t: -float(model.partial_survival(t, t, 1))
    if branch is OrderBranch.X1_GT_X2:
        return lambda t: -float(model.partial_survival(t, t, 2))
    return lambda t: float(model.density(t, t, OrderBranch.X1_EQ_X2))


def first_event_survival_quadrature(model: LifetimeModel, x: float, branch: OrderBranch,
                                    tol: Tolerance | None = None) -> float:
    """Branch-conditional survival of ``X(1)`` by direct quadrature.

    Integrates ``-S_1(t, t)``, ``-S_2(t, t)`` or the tie density along the
    diagonal and normalises by the same integral over ``[0, inf)``.  Works
    for any model exposing ``partial_survival`` and ``density``; used to
    cross-check the closed forms.
    """
    _branch_probability(model, branch)
    g = _first_event_integrand(model, branch)
    total = integrate_semiinf(g, 0.0, tol)
    tail = integrate_semiinf(g, float(x), tol)
    return tail / total


def second_event_conditional(model: LifetimeModel, x2_query, x_first, branch: OrderBranch):
    """``(cdf, survival)`` of ``X(2)`` at ``x2_query`` given ``X(1) = x_first``."""
    if branch is OrderBranch.X1_EQ_X2:
        raise BranchError("a tie has no second event")
    _check_times(x_first)
    if np.any(np.asarray(x2_query) < np.asarray(x_first)):
        raise DomainError("x2_query must be >= x_first")
    _branch_probability(model, branch)
    s = model.second_event_survival(x2_query, x_first, branch)
    return 1.0 - s, s


def second_event_quantile(model: LifetimeModel, surv_prob, x_first, branch: OrderBranch):
    """Threshold ``u >= x_first`` with conditional survival ``surv_prob``."""
    if branch is OrderBranch.X1_EQ_X2:
        raise BranchError("a tie has no second event")
    _branch_probability(model, branch)
    return model.second_event_quantile(surv_prob, x_first, branch)


def superimpose(vectors) -> list:
    """Interleave event vectors into the observed stream of :class:`OrderedEvent`.

    A vector with ``x1 != x2`` contributes its smaller time (rank 1) and then
    its larger time (rank 2); a tie contributes a single rank-1 event.
    """
    out = []
    for i, (x1, x2) in enumerate(as_array(vectors)):
        x1, x2 = float(x1), float(x2)
        if x1 == x2:
            out.append(OrderedEvent(x1, 1, Source.TIE, i))
        elif x1 < x2:
            out.append(OrderedEvent(x1, 1, Source.SUBPROCESS1, i))
            out.append(OrderedEvent(x2, 2, Source.SUBPROCESS2, i))
        else:
            out.append(OrderedEvent(x2, 1, Source.SUBPROCESS2, i))
            out.append(OrderedEvent(x1, 2, Source.SUBPROCESS1, i))
    return out
