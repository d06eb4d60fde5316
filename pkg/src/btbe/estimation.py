"""Phase-I parameter estimation for the three lifetime families.

* :func:`fit_gbe` - closed-form estimators (sample means and a moment
  estimator of the dependence parameter).
* :func:`fit_mobe` - maximum likelihood for the Marshall-Olkin exponential.
* :func:`fit_mobw_em_i1` - EM for Marshall-Olkin Weibull data in which every
  subject has ``x1 < x2``.

Zero event times are rejected with :class:`ZeroTimeError`; callers that
want to drop such rows should do so first (see :func:`drop_zero_rows`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lifetimes import GbeParams, LifetimeModel, MobeParams, MobwParams, OrderBranch, as_array
from .numerics import BtbeError, ConvergenceError, DomainError, Tolerance, find_root

__all__ = [
    "FitResult",
    "OrderCounts",
    "ZeroTimeError",
    "DegenerateDataError",
    "EM_TOL",
    "order_counts",
    "drop_zero_rows",
    "loglik",
    "mobe_score",
    "mobw_i1_loglik",
    "mobw_pseudo_loglik",
    "fit_gbe",
    "fit_mobe",
    "fit_mobw_em_i1",
]

EM_TOL = Tolerance(abs_tol=1e-12, rel_tol=1e-8, max_iter=1000)


class ZeroTimeError(DomainError):
    """An event time equal to zero was passed to an estimator."""


class DegenerateDataError(BtbeError, ValueError):
    """The data cannot identify the model (too few points, all ties, zero means...)."""


@dataclass(frozen=True)
class FitResult:
    model: LifetimeModel
    n_used: int
    iterations: int
    converged: bool
    loglik: float


class OrderCounts(NamedTuple):
    n1: int  # x1 < x2
    n2: int  # x1 > x2
    n3: int  # x1 == x2


def order_counts(data) -> OrderCounts:
    x = as_array(data)
    return OrderCounts(int(np.sum(x[:, 0] < x[:, 1])), int(np.sum(x[:, 0] > x[:, 1])),
                       int(np.sum(x[:, 0] == x[:, 1])))


def drop_zero_rows(data):
    """``(kept, n_dropped)`` after removing vectors with an event time of zero."""
    x = as_array(data)
    keep = np.all(x > 0, axis=1)
    return x[keep], int(np.sum(~keep))


def _positive(data, n_min: int) -> np.ndarray:
    x = as_array(data)
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise DomainError("event times must be finite and nonnegative")
    if np.any(x == 0):
        raise ZeroTimeError(f"{int(np.sum(np.any(x == 0, axis=1)))} vector(s) contain a zero event time")
    if len(x) < n_min:
        raise DegenerateDataError(f"need at least {n_min} vectors, got {len(x)}")
    return x


def loglik(model: LifetimeModel, data) -> float:
    """Log-likelihood, with ties scored by the density along the diagonal."""
    x = as_array(data)
    out = 0.0
    for br in OrderBranch:
        if br is OrderBranch.X1_LT_X2:
            sel = x[:, 0] < x[:, 1]
        elif br is OrderBranch.X1_GT_X2:
            sel = x[:, 0] > x[:, 1]
        else:
            sel = x[:, 0] == x[:, 1]
        if not np.any(sel):
            continue
        if br is OrderBranch.X1_EQ_X2 and isinstance(model, GbeParams):
            return -math.inf
        if isinstance(model, GbeParams):
            terms = model.log_density(x[sel, 0], x[sel, 1], br)
        else:
            with np.errstate(divide="ignore"):
                terms = np.log(model.density(x[sel, 0], x[sel, 1], br))
        out += math.fsum(terms.tolist())
    return out


# ----------------------------------------------------------------------------
# GBE


def fit_gbe(data) -> FitResult:
    """Closed-form GBE estimates.

    ``theta_i`` are the sample means.  The minimum of the standardized
    margins ``min(x1/theta1, x2/theta2)`` is exponential with mean
    ``2**-delta``, so ``delta = -ln(m) / ln 2`` where ``m`` is its sample
    mean, clamped to ``[1e-6, 1]``.
    """
    x = _positive(data, 2)
    t1, t2 = float(np.mean(x[:, 0])), float(np.mean(x[:, 1]))
    if t1 <= 0 or t2 <= 0:
        raise DegenerateDataError("a sample mean is zero")
    m = float(np.mean(np.minimum(x[:, 0] / t1, x[:, 1] / t2)))
    delta = min(max(-math.log(m) / math.log(2.0), 1e-6), 1.0)
    model = GbeParams(t1, t2, delta)
    return FitResult(model, len(x), 0, True, loglik(model, x))


# ----------------------------------------------------------------------------
# MOBE


def mobe_score(params, data) -> np.ndarray:
    """Residuals of the three likelihood equations (left side minus right side)."""
    l1, l2, l12 = params
    x = as_array(data)
    n1, n2, n3 = order_counts(x)
    s1, s2, smax = float(np.sum(x[:, 0])), float(np.sum(x[:, 1])), float(np.sum(np.max(x, axis=1)))
    e3 = n1 / (l2 + l12) + n2 / (l1 + l12) + (n3 / l12 if n3 else 0.0)
    return np.array([n1 / l1 + n2 / (l1 + l12) - s1, n1 / (l2 + l12) + n2 / l2 - s2, e3 - smax])


def _positive_root(a, b, c):
    # a t^2 + b t + c = 0 with a > 0, c <= 0; cancellation-free positive root
    disc = math.sqrt(b * b - 4.0 * a * c)
    return (-b + disc) / (2.0 * a) if b < 0 else (-2.0 * c) / (b + disc)


def fit_mobe(data, tol: Tolerance | None = None) -> FitResult:
    """Marshall-Olkin exponential MLE.

    For a fixed ``lambda12`` the first two likelihood equations are
    quadratics with a single positive root each, which leaves a monotone
    one-dimensional equation for ``lambda12``.  With no ties the estimate
    is ``lambda12 = 0`` and the rates are the exponential-margin MLEs.
    """
    tol = tol or Tolerance(abs_tol=1e-300, rel_tol=1e-15, max_iter=500)
    x = _positive(data, 3)
    n1, n2, n3 = order_counts(x)
    n = len(x)
    if n1 == 0 or n2 == 0:
        raise DegenerateDataError("need at least one vector with x1 < x2 and one with x1 > x2")
    s1, s2, smax = float(np.sum(x[:, 0])), float(np.sum(x[:, 1])), float(np.sum(np.max(x, axis=1)))

    def rates(l12):
        l1 = _positive_root(s1, s1 * l12 - n1 - n2, -n1 * l12)
        l2 = _positive_root(s2, s2 * l12 - n1 - n2, -n2 * l12)
        return l1, l2

    if n3 == 0:
        params = (n / s1, n / s2, 0.0)
        iters = 0
    else:
        def third(l12):
            l1, l2 = rates(l12)
            return n1 / (l2 + l12) + n2 / (l1 + l12) + n3 / l12 - smax

        hi = n3 / smax
        iters = 0
        while third(hi) > 0:
            hi *= 2.0
            iters += 1
            if iters > 2000:
                raise ConvergenceError("could not bracket lambda12")
        lo = hi / 2.0
        while third(lo) < 0:
            lo /= 2.0
        l12 = find_root(third, lo, hi, tol)
        params = (*rates(l12), l12)
    resid = mobe_score(params, x)
    scale = np.array([s1, s2, smax])
    converged = bool(np.all(np.abs(resid) <= 1e-8 * scale))
    model = MobeParams(*params)
    return FitResult(model, n, iters, converged, loglik(model, x))


# ----------------------------------------------------------------------------
# MOBW, I1-only EM


def mobw_i1_loglik(params, data) -> float:
    """Log-likelihood of I1-only data as used by the EM (no truncation term)."""
    l1, l2, l12, eta = params
    x = as_array(data)
    n = len(x)
    lx = np.log(x)
    return (n * math.log(eta * l1) + n * math.log(eta * (l2 + l12)) + (eta - 1.0) * float(lx.sum())
            - l1 * float(np.sum(x[:, 0] ** eta)) - (l2 + l12) * float(np.sum(x[:, 1] ** eta)))


def mobw_pseudo_loglik(params, data, weights) -> float:
    """Complete-data pseudo log-likelihood given E-step weights ``(w12, w2)``.

    ``w12`` and ``w2`` are the conditional probabilities that the second
    event came from the common shock or from the second component.
    """
    l1, l2, l12, eta = params
    w12, w2 = weights
    x = as_array(data)
    n = len(x)
    lx = np.log(x)
    s1, s2 = float(np.sum(x[:, 0] ** eta)), float(np.sum(x[:, 1] ** eta))
    out = 2 * n * math.log(eta) + (eta - 1.0) * float(lx.sum()) - l1 * s1 + n * math.log(l1)
    out += -l12 * s2 + (n * w12 * math.log(l12) if w12 > 0 else 0.0)
    out += -l2 * s2 + (n * w2 * math.log(l2) if w2 > 0 else 0.0)
    return out


def _rel_change(new, old) -> float:
    new, old = np.asarray(new), np.asarray(old)
    return float(np.max(np.abs(new - old) / np.maximum(np.abs(old), 1e-300)))


def fit_mobw_em_i1(data, tol: Tolerance = EM_TOL, eta0: float = 1.0, split0: float = 0.5,
                   fixed_eta: float | None = None) -> FitResult:
    """EM estimates of MOBW parameters from vectors that all have ``x1 < x2``.

    Each iteration takes E-step weights ``w12 = l12 / (l2 + l12)`` and
    ``w2 = l2 / (l2 + l12)`` from the previous iterate, updates the rates
    (all from the previous iterate), then applies one step of
    ``eta <- g(eta)``.

    ``split0`` is the initial share ``l12 / (l2 + l12)``; I1-only data carry
    no information about it and the iteration keeps it.  ``fixed_eta``
    holds the shape at a given value and updates the rates only.

    Raises :class:`ConvergenceError` after ``tol.max_iter`` iterations or if
    the iterates fall into a two-cycle; the message carries the last two
    iterates.
    """
    x = _positive(data, 5)
    if np.any(x[:, 0] >= x[:, 1]):
        raise DomainError("every vector must satisfy x1 < x2")
    if not 0 < split0 < 1:
        raise DomainError("split0 must lie in (0, 1)")
    n = len(x)
    lx1, lx2 = np.log(x[:, 0]), np.log(x[:, 1])
    slog = float(lx1.sum() + lx2.sum())

    eta = float(fixed_eta if fixed_eta is not None else eta0)
    b = n / float(np.sum(x[:, 1] ** eta))
    theta = np.array([n / float(np.sum(x[:, 0] ** eta)), (1 - split0) * b, split0 * b, eta])
    history = [theta]
    for it in range(1, tol.max_iter + 1):
        l1, l2, l12, eta = theta
        w12, w2 = l12 / (l2 + l12), l2 / (l2 + l12)
        p1, p2 = x[:, 0] ** eta, x[:, 1] ** eta
        s1, s2 = float(p1.sum()), float(p2.sum())
        new_l1, new_l12, new_l2 = n / s1, n * w12 / s2, n * w2 / s2
        if fixed_eta is None:
            d = (new_l12 * float(p2 @ lx2) + new_l1 * float(p1 @ lx1) + new_l2 * float(p2 @ lx2) - slog)
            if not d > 0:
                raise ConvergenceError(f"shape update undefined at iterate {theta.tolist()}")
            new_eta = 2 * n / d
        else:
            new_eta = eta
        new = np.array([new_l1, new_l2, new_l12, new_eta])
        history.append(new)
        if _rel_change(new, theta) < tol.rel_tol:
            theta = new
            break
        # a genuine two-cycle returns to the same point while the step stays large
        if len(history) >= 3 and _rel_change(new, history[-3]) < tol.rel_tol \
                and _rel_change(new, theta) > 1e3 * tol.rel_tol:
            raise ConvergenceError(
                f"EM oscillates between {history[-2].tolist()} and {new.tolist()}")
        theta = new
    else:
        raise ConvergenceError(
            f"EM did not converge in {tol.max_iter} iterations; last iterates "
            f"{history[-2].tolist()} and {history[-1].tolist()}")
    model = MobwParams(float(theta[0]), float(theta[1]), float(theta[2]), float(theta[3]))
    return FitResult(model, n, it, True, mobw_i1_loglik(model.params, x))
