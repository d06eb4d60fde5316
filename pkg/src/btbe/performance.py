"""Average time to signal of the BTBE chart.

Three routes are provided:

* :func:`ats_theorem3` - the renewal identity
  ``ATS = E*[TBE] (1 + P*[NS1, !=]) / (P*[S1] + P*[NS1, S2, !=])``
  evaluated from :func:`signal_probabilities` (closed form where the law
  allows it, quadrature otherwise).
* :func:`ats_corollary_gbe`, :func:`ats_corollary_mobe`,
  :func:`ats_corollary_mobw` - closed forms for the three families.
* :func:`ats_monte_carlo` - seeded simulation of the elapsed time until the
  first signal.

Control limits always come from the in-control model, and the shift is
present from the first monitored vector.

The renewal identity counts plotted points and multiplies by the mean gap,
so it is exact for ``ARL * E*[TBE]``.  The simulated elapsed time differs
from it whenever the signalling point is not a typical gap (for example an
upper-limit signal sits on an unusually long wait).  Both are reported,
see :class:`AtsEstimate`.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chart import ChartConfig, Side, default_side, first_event_limits
from .lifetimes import (
    GbeParams,
    LifetimeModel,
    MobeParams,
    MobwParams,
    OrderBranch,
    expected_tbe,
)
from .numerics import (
    BtbeError,
    DomainError,
    RngStream,
    Tolerance,
    integrate_interval,
    philox_generator,
)

__all__ = [
    "ShiftScenario",
    "SignalProbabilities",
    "AtsEstimate",
    "signal_probabilities",
    "ats_theorem3",
    "ats_corollary_gbe",
    "ats_corollary_mobe",
    "ats_corollary_mobw",
    "ats_closed_form",
    "ats_monte_carlo",
    "simulate_run_lengths",
    "MAX_EVENTS_PER_REP",
]

MAX_EVENTS_PER_REP = 10_000_000


@dataclass(frozen=True)
class ShiftScenario:
    ic_model: LifetimeModel
    oc_model: LifetimeModel
    side: Optional[Side] = None

    def __post_init__(self):
        if type(self.ic_model) is not type(self.oc_model):
            raise DomainError("in-control and out-of-control models must be the same family")
        if self.side is None:
            object.__setattr__(self, "side", default_side(self.ic_model))

    def config(self, alpha: float) -> ChartConfig:
        return ChartConfig(self.ic_model, alpha_override=alpha, side=self.side)


@dataclass(frozen=True)
class SignalProbabilities:
    p_s1: float
    p_ns1_neq: float
    p_ns1_s2_neq: float


@dataclass(frozen=True)
class AtsEstimate:
    """An ATS value and where it came from.

    For Monte Carlo runs ``stderr`` and ``reps`` are set, ``censored`` counts
    replications stopped by the runaway guard, and ``points_ats`` is the
    plotted-point count times ``E*[TBE]`` (the quantity the renewal identity
    computes) with its standard error ``points_stderr``.
    """

    value: float
    method: str
    stderr: Optional[float] = None
    reps: Optional[int] = None
    censored: int = 0
    points_ats: Optional[float] = None
    points_stderr: Optional[float] = None

    def __post_init__(self):
        if self.method not in ("closed_form", "theorem3_numeric", "monte_carlo"):
            raise DomainError(f"unknown method {self.method!r}")
        if (self.stderr is not None) != (self.method == "monte_carlo"):
            raise DomainError("stderr must be given exactly for Monte Carlo estimates")


# ----------------------------------------------------------------------------
# signal probabilities


def _second_tail_closed(ic, oc, p, branch):
    """``P*[X(2) > u(x) | X(1) = x, branch]`` where ``u`` is the IC quantile at ``p``.

    For the Marshall-Olkin families (and GBE with delta = 1) the conditional
    excess ``x2**eta - x**eta`` is exponential, so this does not depend on ``x``.
    """
    if isinstance(ic, GbeParams):
        th, th_oc = (ic.theta2, oc.theta2) if branch is OrderBranch.X1_LT_X2 else (ic.theta1, oc.theta1)
        return p ** (th / th_oc)
    return p ** (oc._after(branch) / ic._after(branch))


def _has_closed_form(model) -> bool:
    return not (isinstance(model, GbeParams) and model.delta < 1)


def _probabilities_closed(sc: ShiftScenario, alpha: float) -> SignalProbabilities:
    ic, oc = sc.ic_model, sc.oc_model
    p_lo, p_hi = sc.config(alpha).tails
    lim = first_event_limits(sc.config(alpha))
    s_hi = float(oc.first_event_survival(lim.ucl))
    s_lo = 1.0 if lim.lcl is None else float(oc.first_event_survival(lim.lcl))
    band = s_lo - s_hi
    p_lt, p_gt, _ = oc.event_probabilities()
    cond = 0.0
    for p_b, br in ((p_lt, OrderBranch.X1_LT_X2), (p_gt, OrderBranch.X1_GT_X2)):
        if p_b == 0:
            continue
        q = _second_tail_closed(ic, oc, p_hi, br)
        if p_lo is not None:
            q += 1.0 - _second_tail_closed(ic, oc, p_lo, br)
        cond += p_b * q
    return SignalProbabilities(p_s1=(1.0 - s_lo) + s_hi, p_ns1_neq=band * (p_lt + p_gt),
                               p_ns1_s2_neq=band * cond)


def _probabilities_quadrature(sc: ShiftScenario, alpha: float, tol) -> SignalProbabilities:
    ic, oc = sc.ic_model, sc.oc_model
    cfg = sc.config(alpha)
    p_lo, p_hi = cfg.tails
    lim = first_event_limits(cfg)
    a = 0.0 if lim.lcl is None else lim.lcl
    b = lim.ucl
    p_lt, p_gt, _ = oc.event_probabilities()

    def branch_density(t):
        # joint density of X(1) = t with X1 != X2
        return -float(oc.partial_survival(t, t, 1)) - float(oc.partial_survival(t, t, 2))

    def second_signal(t):
        # joint density of X(1) = t times the conditional second-event signal probability
        out = 0.0
        for p_b, br in ((p_lt, OrderBranch.X1_LT_X2), (p_gt, OrderBranch.X1_GT_X2)):
            if p_b == 0:
                continue
            u = float(ic.second_event_quantile(p_hi, t, br))
            if br is OrderBranch.X1_LT_X2:
                tail = lambda y: -float(oc.partial_survival(t, y, 1))
            else:
                tail = lambda y: -float(oc.partial_survival(y, t, 2))
            out += tail(u)
            if p_lo is not None:
                l_ = float(ic.second_event_quantile(p_lo, t, br))
                out += tail(t) - tail(l_)
        return out

    s_hi = float(oc.first_event_survival(b))
    s_lo = 1.0 if lim.lcl is None else float(oc.first_event_survival(a))
    p_ns1 = integrate_interval(branch_density, a, b, tol)
    p_s2 = integrate_interval(second_signal, a, b, tol)
    return SignalProbabilities(p_s1=(1.0 - s_lo) + s_hi, p_ns1_neq=p_ns1, p_ns1_s2_neq=p_s2)


def signal_probabilities(scenario: ShiftScenario, alpha: float, method: str = "auto",
                         tol: Tolerance | None = None) -> SignalProbabilities:
    """Out-of-control signal probabilities under in-control limits.

    ``method='auto'`` uses closed forms when the family has them (all but
    GBE with delta < 1) and falls back to quadrature over the first event.
    ``method='quadrature'`` forces the generic integral, which only uses the
    partial survival functions and the in-control limit functions.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if method not in ("auto", "quadrature"):
        raise DomainError(f"unknown method {method!r}")
    if method == "auto" and _has_closed_form(scenario.ic_model) and _has_closed_form(scenario.oc_model):
        return _probabilities_closed(scenario, alpha)
    tol = tol or Tolerance(1e-13, 1e-11, 500)
    return _probabilities_quadrature(scenario, alpha, tol)


def _renewal_ats(tbe: float, sp: SignalProbabilities) -> float:
    den = sp.p_s1 + sp.p_ns1_s2_neq
    if not den > 0:
        raise BtbeError("both signal probabilities vanish; the chart never signals")
    return tbe * (1.0 + sp.p_ns1_neq) / den


def ats_theorem3(scenario: ShiftScenario, alpha: float, method: str = "auto",
                 tol: Tolerance | None = None) -> AtsEstimate:
    """ATS from the renewal identity over plotted points."""
    sp = signal_probabilities(scenario, alpha, method, tol)
    return AtsEstimate(_renewal_ats(expected_tbe(scenario.oc_model), sp), "theorem3_numeric")


# ----------------------------------------------------------------------------
# closed forms


def ats_corollary_mobe(ic: MobeParams, oc: MobeParams, alpha: float) -> AtsEstimate:
    """Closed-form ATS of the upper one-sided chart for MOBE data."""
    if not (isinstance(ic, MobeParams) and isinstance(oc, MobeParams)):
        raise DomainError("ats_corollary_mobe needs MobeParams")
    l1, l2, l12 = oc.params
    lam_s = oc.total_rate
    a_s = alpha ** (lam_s / ic.total_rate)
    num = 1.0 + (l1 + l2) / lam_s * (1.0 - a_s)
    den = a_s + (1.0 - a_s) * (l1 / lam_s * alpha ** ((l2 + l12) / ic.rate_after1)
                               + l2 / lam_s * alpha ** ((l1 + l12) / ic.rate_after2))
    return AtsEstimate(num / den * oc.expected_tbe(), "closed_form")


def ats_corollary_gbe(ic: GbeParams, oc: GbeParams, alpha: float) -> AtsEstimate:
    """Closed-form ATS of the upper one-sided chart for independent GBE data.

    With ``delta = 1`` the model is a pair of independent exponentials, the
    same law as MOBE with rates ``1/theta`` and no common shock, so the
    MOBE expression is evaluated on that parameterization.
    """
    if not (isinstance(ic, GbeParams) and isinstance(oc, GbeParams)):
        raise DomainError("ats_corollary_gbe needs GbeParams")
    if ic.delta != 1 or oc.delta != 1:
        raise DomainError("the GBE closed form needs delta = 1; use ats_theorem3 or ats_monte_carlo")
    return ats_corollary_mobe(_gbe_as_mobe(ic), _gbe_as_mobe(oc), alpha)


def _gbe_as_mobe(m: GbeParams) -> MobeParams:
    return MobeParams(1.0 / m.theta1, 1.0 / m.theta2, 0.0)


def ats_corollary_mobw(ic: MobwParams, oc: MobwParams, alpha: float) -> AtsEstimate:
    """Closed-form ATS of the two-sided chart for MOBW data.

    ``alpha`` is the total false alarm rate; each tail carries ``alpha/2``.
    """
    if not (isinstance(ic, MobwParams) and isinstance(oc, MobwParams)):
        raise DomainError("ats_corollary_mobw needs MobwParams")
    if ic.shape != oc.shape:
        raise DomainError("in-control and out-of-control shapes must agree")
    a = alpha / 2.0
    l1, l2, l12, _ = oc.params
    lam_s = oc.total_rate
    ratio = lam_s / ic.total_rate
    a_star = (1.0 - (1.0 - a) ** ratio) + a**ratio
    r2 = (l2 + l12) / ic.rate_after1
    r1 = (l1 + l12) / ic.rate_after2
    num = 1.0 + (l1 + l2) / lam_s * (1.0 - a_star)
    den = a_star + (1.0 - a_star) * (
        l1 / lam_s * (1.0 - (1.0 - a) ** r2 + a**r2) + l2 / lam_s * (1.0 - (1.0 - a) ** r1 + a**r1)
    )
    return AtsEstimate(num / den * oc.expected_tbe(), "closed_form")


def ats_closed_form(scenario: ShiftScenario, alpha: float) -> AtsEstimate:
    """Dispatch to the family's closed form; the chart side must be the family default."""
    ic, oc = scenario.ic_model, scenario.oc_model
    if scenario.side is not default_side(ic):
        raise DomainError("closed forms exist only for the default chart side of the family")
    if isinstance(ic, GbeParams):
        return ats_corollary_gbe(ic, oc, alpha)
    if isinstance(ic, MobwParams):
        return ats_corollary_mobw(ic, oc, alpha)
    return ats_corollary_mobe(ic, oc, alpha)


# ----------------------------------------------------------------------------
# Monte Carlo


def _limits_vectorized(cfg: ChartConfig):
    ic = cfg.model
    lim1 = first_event_limits(cfg)
    p_lo, p_hi = cfg.tails
    lt, gt = OrderBranch.X1_LT_X2, OrderBranch.X1_GT_X2

    def second(xf, is_lt):
        with np.errstate(all="ignore"):
            hi = np.where(is_lt, ic.second_event_quantile(p_hi, xf, lt), ic.second_event_quantile(p_hi, xf, gt))
            if p_lo is None:
                return None, hi
            lo = np.where(is_lt, ic.second_event_quantile(p_lo, xf, lt), ic.second_event_quantile(p_lo, xf, gt))
        return lo, hi

    return lim1, second


def _block_signals(x, lim1, second):
    """Per-vector signal flags and timing for a block of event vectors."""
    x1, x2 = x[..., 0], x[..., 1]
    xf = np.minimum(x1, x2)
    xs = np.maximum(x1, x2)
    tie = x1 == x2
    s1 = xf > lim1.ucl
    if lim1.lcl is not None:
        s1 |= xf < lim1.lcl
    lo, hi = second(xf, x1 < x2)
    s2 = xs > hi
    if lo is not None:
        s2 |= xs < lo
    s2 &= ~tie & ~s1
    return s1, s2, xf, xs, tie


def _run_chunk(args):
    oc, cfg, master_seed, first_id, n, first_block = args
    lim1, second = _limits_vectorized(cfg)
    k = oc.n_uniforms
    gens = [philox_generator(master_seed, first_id + i) for i in range(n)]
    time = np.zeros(n)
    points = np.zeros(n, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    censored = np.zeros(n, dtype=bool)
    active = np.arange(n)
    block = first_block
    while active.size:
        u = np.stack([gens[i].random((block, k)) for i in active])
        x = oc.sample_uniforms(u.reshape(-1, k)).reshape(active.size, block, 2)
        s1, s2, xf, xs, tie = _block_signals(x, lim1, second)
        sig = s1 | s2
        hit = sig.any(axis=1)
        first = np.argmax(sig, axis=1)
        # time and points of the vectors before the signalling one
        csum_t = np.cumsum(xs, axis=1)
        csum_p = np.cumsum(2 - tie, axis=1)
        idx = np.arange(active.size)
        prev_t = np.where(first > 0, csum_t[idx, first - 1], 0.0)
        prev_p = np.where(first > 0, csum_p[idx, first - 1], 0)
        r1 = s1[idx, first]
        t_sig = prev_t + np.where(r1, xf[idx, first], xs[idx, first])
        p_sig = prev_p + np.where(r1, 1, 2)
        h = active[hit]
        time[h] += t_sig[hit]
        points[h] += p_sig[hit]
        done[h] = True
        m = active[~hit]
        time[m] += csum_t[~hit, -1]
        points[m] += csum_p[~hit, -1]
        over = points[m] >= MAX_EVENTS_PER_REP
        censored[m[over]] = True
        active = m[~over]
        block = min(2 * block, 1 << 14)
    return time, points, censored


def simulate_run_lengths(scenario: ShiftScenario, alpha: float, reps: int, rng: RngStream,
                         workers: int = 1, chunk: int = 10_000):
    """Per-replication elapsed time and plotted-point count until the first signal.

    Replication ``i`` draws from ``RngStream(rng.master_seed, rng.stream_id + i)``
    so its outcome does not depend on ``chunk`` or ``workers``.  Returns
    ``(times, points, censored)`` arrays in replication order.
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    if rng.stream_id + reps > 2**64:
        raise DomainError("stream ids would overflow")
    cfg = scenario.config(alpha)
    jobs = [(scenario.oc_model, cfg, rng.master_seed, rng.stream_id + s, min(chunk, reps - s), 64)
            for s in range(0, reps, chunk)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def _mean_se(v: np.ndarray):
    n = v.size
    mean = math.fsum(v.tolist()) / n
    var = math.fsum(((v - mean) ** 2).tolist()) / (n - 1) if n > 1 else 0.0
    return mean, math.sqrt(var / n)


def ats_monte_carlo(scenario: ShiftScenario, alpha: float, reps: int, rng: RngStream,
                    workers: int | None = None, min_reps: int = 1000) -> AtsEstimate:
    """Simulated mean elapsed time to the first signal.

    A vector with distinct events spans ``X(2)`` time units and holds two
    plotted points; a tie spans ``X(1)`` and holds one.  The elapsed time at
    a signal is the total span of the earlier vectors plus the time of the
    signalling event within its own vector.  Censored replications (runaway
    guard) enter the mean at their censoring time and are counted.
    """
    if reps < min_reps:
        raise DomainError(f"reps must be >= {min_reps}")
    workers = workers or 1
    times, points, censored = simulate_run_lengths(scenario, alpha, reps, rng, workers)
    mean, se = _mean_se(times)
    tbe = expected_tbe(scenario.oc_model)
    pm, pse = _mean_se(points.astype(float))
    return AtsEstimate(mean, "monte_carlo", stderr=se, reps=reps, censored=int(censored.sum()),
                       points_ats=pm * tbe, points_stderr=pse * tbe)


def default_workers() -> int:
    return os.cpu_count() or 1
