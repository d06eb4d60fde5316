"""Special functions, quadrature, root finding and random streams.

Everything else in the package builds on the small set of tools here:
the principal Lambert W branch (needed by the dependent Gumbel limits),
a semi-infinite quadrature used as an oracle for the closed forms, a
bracketing root finder and counter-based random streams for Monte Carlo.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "BtbeError",
    "DomainError",
    "ConvergenceError",
    "Tolerance",
    "RngStream",
    "philox_generator",
    "lambert_w0",
    "lambert_w0_log",
    "gamma_fn",
    "integrate_semiinf",
    "integrate_interval",
    "find_root",
]

_INV_E = math.exp(-1.0)


class BtbeError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(BtbeError, ValueError):
    """An argument lies outside the domain of a function or model."""


class ConvergenceError(BtbeError, ArithmeticError):
    """An iterative method failed to meet its tolerance."""


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("tolerances must be positive")
        if int(self.max_iter) < 1:
            raise DomainError("max_iter must be >= 1")


DEFAULT_TOL = Tolerance()


@dataclass
class RngStream:
    """Reproducible random stream identified by ``(master_seed, stream_id)``.

    Backed by numpy's counter-based Philox generator keyed on both numbers,
    so distinct ``stream_id`` values give independent sequences and a
    single replication can be regenerated without replaying the others.
    Instances are stateful: do not share one between concurrent tasks.
    """

    master_seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = int(getattr(self, name))
            if not 0 <= v < 2**64:
                raise DomainError(f"{name} must be a 64-bit unsigned integer")
            setattr(self, name, v)
        key = (self.stream_id << 64) | self.master_seed
        self._gen = np.random.Generator(np.random.Philox(key=key))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def random(self, size=None):
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def spawn(self, stream_id: int) -> "RngStream":
        """Stream with the same master seed and a different id."""
        return RngStream(self.master_seed, stream_id)


def philox_generator(master_seed: int, stream_id: int) -> np.random.Generator:
    """Bare generator for ``RngStream(master_seed, stream_id)``, without the wrapper."""
    return np.random.Generator(np.random.Philox(key=(int(stream_id) << 64) | int(master_seed)))


def _halley_w0(z: np.ndarray, tol: Tolerance) -> np.ndarray:
    # initial guess: branch-point series near -1/e, log asymptotics for large z
    w = np.empty_like(z)
    near = z < 1.0
    p = np.sqrt(np.maximum(2.0 * (math.e * z[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    big = ~near
    lz = np.log(z[big])
    w[big] = lz - np.log(np.maximum(lz, 1e-300)) * (z[big] > math.e)
    small = np.abs(z) < 1e-3
    w[small] = z[small] * (1.0 - z[small])

    for _ in range(tol.max_iter):
        ew = np.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * np.where(wp1 == 0, 1.0, wp1))
        step = np.where(denom != 0, f / np.where(denom == 0, 1.0, denom), 0.0)
        w = w - step
        # near the branch point the derivative vanishes, so also accept a
        # residual at roundoff level
        done = (np.abs(step) <= 4e-16 * (1.0 + np.abs(w))) | (np.abs(f) <= 2.3e-16 * np.abs(z))
        if np.all(done):
            return w
    raise ConvergenceError("lambert_w0: Halley iteration did not converge")


def lambert_w0(z, tol: Tolerance = DEFAULT_TOL):
    """Principal branch of the Lambert W function on the reals.

    Solves ``w * exp(w) = z`` for ``w >= -1``.  Accepts scalars or arrays;
    scalars come back as ``float``.

    Raises
    ------
    DomainError
        If any ``z < -1/e``.
    """
    arr = np.asarray(z, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(np.isnan(arr)):
        raise DomainError("lambert_w0: NaN argument")
    if np.any(arr < -_INV_E - 1e-15):
        raise DomainError("lambert_w0 is real only for z >= -1/e")
    arr = np.maximum(arr, -_INV_E)

    out = np.empty_like(arr)
    inf = np.isinf(arr)
    out[inf] = np.inf
    branch = arr == -_INV_E
    out[branch] = -1.0
    rest = ~(inf | branch)
    if np.any(rest):
        out[rest] = _halley_w0(arr[rest], tol)
    return float(out[0]) if scalar else out


def lambert_w0_log(log_z, tol: Tolerance = DEFAULT_TOL):
    """``W0(exp(log_z))`` for positive arguments given in log space.

    Useful when the argument itself overflows a double.  For moderate
    arguments this defers to :func:`lambert_w0`; otherwise it runs Newton
    on ``w + ln w = log_z`` started from ``log_z - ln(log_z)``.
    """
    lz = np.asarray(log_z, dtype=float)
    scalar = lz.ndim == 0
    lz = np.atleast_1d(lz)
    out = np.empty_like(lz)

    direct = lz < 50.0
    if np.any(direct):
        out[direct] = lambert_w0(np.exp(lz[direct]), tol)
    big = ~direct
    if np.any(big):
        L = lz[big]
        w = L - np.log(L)
        for _ in range(tol.max_iter):
            step = (w + np.log(w) - L) * w / (w + 1.0)
            w = w - step
            if np.all(np.abs(step) <= 4e-16 * np.abs(w)):
                break
        else:
            raise ConvergenceError("lambert_w0_log: Newton did not converge")
        out[big] = w
    return float(out[0]) if scalar else out


def gamma_fn(x: float) -> float:
    """Euler gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError("gamma_fn requires x > 0")
    return math.gamma(x)


def _quad(g, a, b, tol: Tolerance, what: str) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, abserr, _info, *failure = integrate.quad(
            g, a, b, epsabs=tol.abs_tol, epsrel=tol.rel_tol,
            limit=tol.max_iter, full_output=1,
        )
    if math.isnan(value):
        raise ConvergenceError(f"{what}: integrand produced NaN")
    # quad appends a message only when it flags a problem; accept it when the
    # reported error still meets the requested tolerance
    if failure and abserr > max(tol.abs_tol, tol.rel_tol * abs(value)):
        raise ConvergenceError(f"{what}: quadrature did not converge ({failure[0].splitlines()[0]})")
    return value


def integrate_semiinf(f, lower: float = 0.0, tol: Tolerance | None = None) -> float:
    """Integrate ``f`` over ``[lower, inf)``.

    Adaptive Gauss-Kronrod on the map ``x = lower + (1 - t) / t``, which
    handles exponential and algebraic tails alike.
    """
    tol = tol or Tolerance(1e-13, 1e-11, 500)
    if lower < 0:
        raise DomainError("lower must be >= 0")
    return _quad(f, float(lower), math.inf, tol, "integrate_semiinf")


def integrate_interval(f, a: float, b: float, tol: Tolerance | None = None) -> float:
    """Adaptive quadrature of ``f`` over the finite interval ``[a, b]``."""
    tol = tol or Tolerance(1e-13, 1e-11, 500)
    if b == a:
        return 0.0
    return _quad(f, a, b, tol, "integrate_interval")


def find_root(f, lo: float, hi: float, tol: Tolerance | None = None) -> float:
    """Root of a continuous scalar function on a sign-changing bracket.

    Brent's method: inverse quadratic interpolation with a bisection
    fallback, so convergence is guaranteed once the bracket is valid.
    """
    tol = tol or Tolerance(1e-14, 4 * np.finfo(float).eps, 500)
    flo, fhi = f(lo), f(hi)
    if math.isnan(flo) or math.isnan(fhi):
        raise DomainError("find_root: f is NaN at a bracket end")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise DomainError(f"find_root: invalid bracket, f({lo})={flo:.3g} and f({hi})={fhi:.3g} share a sign")
    try:
        return optimize.brentq(
            f, lo, hi, xtol=tol.abs_tol, rtol=max(tol.rel_tol, 4 * np.finfo(float).eps),
            maxiter=tol.max_iter,
        )
    except RuntimeError as exc:
        raise ConvergenceError(f"find_root: {exc}") from None
