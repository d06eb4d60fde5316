"""Vector-based MEWMA comparator chart for GBE data.

The chart only updates once both events of a vector are observed:

    z_i = r (X_i - mu) + (1 - r) z_{i-1},   E_i = z_i' Sigma_Z^{-1} z_i,
    Sigma_Z = r / (2 - r) * Sigma_X

and signals when ``E_i > h``.  Each vector costs ``max(x1, x2)`` time units.
With ``r = 1`` the statistic is Hotelling's ``T^2`` on the raw vector.

Calibration of ``h`` uses common random numbers: each replication keeps
the record values of its running maximum of ``E`` with their elapsed
times, so the simulated ATS is an exact non-decreasing step function of
``h`` and can be bisected without resimulating.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .lifetimes import GbeParams
from .numerics import ConvergenceError, DomainError, RngStream, Tolerance, philox_generator
from .performance import MAX_EVENTS_PER_REP, AtsEstimate, _mean_se

__all__ = [
    "MewmaConfig",
    "MomentSpec",
    "gbe_moments",
    "mewma_step",
    "mewma_statistics",
    "calibrate_h",
    "mewma_ats",
    "MOMENT_SEED",
]

MOMENT_SEED = 20_231_114


@dataclass(frozen=True)
class MewmaConfig:
    r: float
    h: float = math.inf

    def __post_init__(self):
        if not 0 < self.r <= 1:
            raise DomainError("r must lie in (0, 1]")
        if not self.h > 0:
            raise DomainError("h must be positive")


@dataclass(frozen=True)
class MomentSpec:
    mu: np.ndarray
    sigma: np.ndarray
    sigma_se: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(2)
        sigma = np.asarray(self.sigma, dtype=float).reshape(2, 2)
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * np.abs(sigma).max()):
            raise DomainError("sigma must be symmetric")
        if np.any(np.linalg.eigvalsh(sigma) <= 0):
            raise DomainError("sigma must be positive definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def z_precision(self, r: float) -> np.ndarray:
        """Inverse of the asymptotic ``z`` covariance ``r / (2 - r) * sigma``."""
        return np.linalg.inv(self.sigma) * ((2.0 - r) / r)


@functools.lru_cache(maxsize=64)
def _gbe_cov_mc(theta1, theta2, delta, reps, master_seed, stream_id):
    m = GbeParams(theta1, theta2, delta)
    gen = philox_generator(master_seed, stream_id)
    mu = np.array([theta1, theta2])
    s = np.zeros(3)
    s2 = np.zeros(3)
    done = 0
    while done < reps:
        n = min(1_000_000, reps - done)
        d = m.sample_uniforms(gen.random((n, m.n_uniforms))) - mu
        prods = np.column_stack((d[:, 0] ** 2, d[:, 0] * d[:, 1], d[:, 1] ** 2))
        s += prods.sum(axis=0)
        s2 += (prods**2).sum(axis=0)
        done += n
    mean = s / reps
    se = np.sqrt(np.maximum(s2 / reps - mean**2, 0.0) / reps)
    return tuple(mean), tuple(se)


def gbe_moments(params: GbeParams, precision_reps: int = 10_000_000,
                rng: RngStream | None = None) -> MomentSpec:
    """Mean vector and covariance of GBE data.

    The means are exact.  With ``delta = 1`` the margins are independent
    and the covariance is ``diag(theta1**2, theta2**2)``.  Otherwise the
    covariance is estimated by simulation around the exact means, from a
    pinned stream unless ``rng`` is given; results are cached.
    """
    t1, t2, d = params.params
    mu = np.array([t1, t2])
    if d == 1:
        return MomentSpec(mu, np.diag([t1 * t1, t2 * t2]), np.zeros((2, 2)))
    seed, sid = (MOMENT_SEED, 0) if rng is None else (rng.master_seed, rng.stream_id)
    (v1, c, v2), (e1, ec, e2) = _gbe_cov_mc(t1, t2, d, int(precision_reps), seed, sid)
    return MomentSpec(mu, np.array([[v1, c], [c, v2]]), np.array([[e1, ec], [ec, e2]]))


def mewma_step(state, x, config: MewmaConfig, moments: MomentSpec):
    """One update from state ``z`` with vector ``x``; returns ``(z_new, E)``."""
    try:
        prec = moments.z_precision(config.r)
    except np.linalg.LinAlgError as exc:
        raise DomainError("singular covariance") from exc
    z = config.r * (np.asarray(x, dtype=float) - moments.mu) + (1.0 - config.r) * np.asarray(state, dtype=float)
    e = float(z @ prec @ z)
    return z, max(e, 0.0)


def _quad_form(z, prec):
    return prec[0, 0] * z[..., 0] ** 2 + 2.0 * prec[0, 1] * z[..., 0] * z[..., 1] + prec[1, 1] * z[..., 1] ** 2


def mewma_statistics(vectors, config: MewmaConfig, moments: MomentSpec) -> np.ndarray:
    """``E_i`` for a whole sequence of vectors starting from ``z_0 = 0``."""
    x = np.asarray(vectors, dtype=float).reshape(-1, 2)
    r = config.r
    z = lfilter([r], [1.0, -(1.0 - r)], x - moments.mu, axis=0)
    return np.maximum(_quad_form(z, moments.z_precision(r)), 0.0)


class _Runs:
    """Replications of the MEWMA chart kept alive so they can be extended.

    Each replication stores the successive records of ``max_j E_j`` and the
    elapsed time at which each record was set.
    """

    def __init__(self, model: GbeParams, moments: MomentSpec, r: float, rng: RngStream, reps: int):
        self.model = model
        self.mu = moments.mu
        self.prec = moments.z_precision(r)
        self.r = r
        self.gens = [philox_generator(rng.master_seed, rng.stream_id + i) for i in range(reps)]
        self.z = np.zeros((reps, 2))
        self.time = np.zeros(reps)
        self.count = np.zeros(reps, dtype=np.int64)
        self.best = np.full(reps, -np.inf)
        self.block = np.full(reps, 64)
        self.rec_rep, self.rec_val, self.rec_time = [], [], []
        self.censored = np.zeros(reps, dtype=bool)

    def advance(self, h: float):
        k = self.model.n_uniforms
        while True:
            active = np.flatnonzero((self.best <= h) & ~self.censored)
            if not active.size:
                return
            for b in np.unique(self.block[active]):
                grp = active[self.block[active] == b]
                u = np.stack([self.gens[i].random((b, k)) for i in grp])
                x = self.model.sample_uniforms(u.reshape(-1, k)).reshape(grp.size, b, 2)
                zi = ((1.0 - self.r) * self.z[grp])[:, None, :]
                z = lfilter([self.r], [1.0, -(1.0 - self.r)], x - self.mu, axis=1, zi=zi)[0]
                e = _quad_form(z, self.prec)
                t = self.time[grp, None] + np.cumsum(x.max(axis=2), axis=1)
                # running maximum, seeded with each replication's previous best
                run = np.maximum.accumulate(np.concatenate((self.best[grp, None], e), axis=1), axis=1)
                is_rec = run[:, 1:] > run[:, :-1]
                ri, ci = np.nonzero(is_rec)
                self.rec_rep.append(grp[ri])
                self.rec_val.append(e[ri, ci])
                self.rec_time.append(t[ri, ci])
                self.z[grp] = z[:, -1]
                self.time[grp] = t[:, -1]
                self.best[grp] = run[:, -1]
                self.count[grp] += b
                self.block[grp] = np.minimum(2 * b, 1 << 14)
                self.censored[grp] |= self.count[grp] >= MAX_EVENTS_PER_REP

    def _records(self):
        rep = np.concatenate(self.rec_rep) if self.rec_rep else np.zeros(0, dtype=np.int64)
        val = np.concatenate(self.rec_val) if self.rec_val else np.zeros(0)
        tim = np.concatenate(self.rec_time) if self.rec_time else np.zeros(0)
        order = np.lexsort((tim, rep))
        self.rec_rep, self.rec_val, self.rec_time = [rep[order]], [val[order]], [tim[order]]
        return rep[order], val[order], tim[order]

    def signal_times(self, h: float) -> np.ndarray:
        """Elapsed time of the first ``E > h`` in each replication (``advance(h)`` first)."""
        rep, val, tim = self._records()
        out = self.time.copy()  # censored replications: time at censoring
        ok = val > h
        rep_ok, t_ok = rep[ok], tim[ok]
        # records sorted by (rep, time): the first hit per replication
        first = np.ones(rep_ok.size, dtype=bool)
        first[1:] = rep_ok[1:] != rep_ok[:-1]
        out[rep_ok[first]] = t_ok[first]
        return out

    def ats(self, h: float) -> float:
        self.advance(h)
        return math.fsum(self.signal_times(h).tolist()) / self.time.size


def calibrate_h(model: GbeParams, r: float, ats0: float, reps: int, rng: RngStream,
                tol: Tolerance | None = None, moments: MomentSpec | None = None) -> float:
    """Threshold ``h`` giving in-control simulated ATS ``ats0``.

    The simulated ATS is a step function of ``h`` under common random
    numbers; the returned ``h`` sits at the crossing, found by bisection to
    relative width ``tol.rel_tol``.  Raises if the crossing cannot be
    bracketed within ``tol.max_iter`` doublings.
    """
    if not ats0 > 0:
        raise DomainError("ats0 must be positive")
    if reps < 1:
        raise DomainError("reps must be >= 1")
    tol = tol or Tolerance(abs_tol=1e-6, rel_tol=1e-6, max_iter=200)
    moments = moments or gbe_moments(model)
    runs = _Runs(model, moments, r, rng, reps)
    lo, hi = 0.0, 1.0
    for _ in range(tol.max_iter):
        if runs.ats(hi) >= ats0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ConvergenceError("could not bracket h")
    for _ in range(tol.max_iter):
        if hi - lo <= max(tol.abs_tol, tol.rel_tol * hi):
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if runs.ats(mid) >= ats0:
            hi = mid
        else:
            lo = mid
    raise ConvergenceError("bisection on h did not converge")


def mewma_ats(ic: GbeParams, oc: GbeParams, config: MewmaConfig, reps: int, rng: RngStream,
              moments: MomentSpec | None = None) -> AtsEstimate:
    """Simulated ATS of the MEWMA chart with in-control moments on ``oc`` data."""
    if not math.isfinite(config.h):
        raise DomainError("config.h must be set (see calibrate_h)")
    moments = moments or gbe_moments(ic)
    runs = _Runs(oc, moments, config.r, rng, reps)
    runs.advance(config.h)
    mean, se = _mean_se(runs.signal_times(config.h))
    return AtsEstimate(mean, "monte_carlo", stderr=se, reps=reps, censored=int(runs.censored.sum()))
