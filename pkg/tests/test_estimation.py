import math

import numpy as np
import pytest

from btbe.estimation import (
    DegenerateDataError,
    ZeroTimeError,
    drop_zero_rows,
    fit_gbe,
    fit_mobe,
    fit_mobw_em_i1,
    loglik,
    mobe_score,
    mobw_pseudo_loglik,
    order_counts,
)
from btbe.lifetimes import GbeParams, MobeParams, MobwParams, sample
from btbe.numerics import ConvergenceError, DomainError, RngStream, Tolerance


def i1_sample(model, n, seed):
    """``n`` vectors with ``x1 < x2`` by rejection."""
    out, sid = [], 0
    got = 0
    while got < n:
        x = sample(model, RngStream(seed, sid), 4 * n)
        x = x[x[:, 0] < x[:, 1]]
        out.append(x)
        got += len(x)
        sid += 1
    return np.concatenate(out)[:n]


# --- order counts and hygiene ----------------------------------------------


def test_order_counts_examples():
    assert order_counts([(2, 3), (3, 1), (2, 2)]) == (1, 1, 1)
    assert order_counts(np.zeros((0, 2))) == (0, 0, 0)
    x = i1_sample(MobwParams(0.574, 0.905, 1.12, 4.31), 200, 1)
    assert order_counts(x) == (200, 0, 0)


def test_drop_zero_rows():
    kept, dropped = drop_zero_rows([(1, 2), (0, 3), (4, 0), (5, 6)])
    assert dropped == 2
    assert kept.tolist() == [[1, 2], [5, 6]]


def test_zero_time_rejected():
    with pytest.raises(ZeroTimeError):
        fit_gbe([(1, 2), (0, 3), (2, 2.5)])
    with pytest.raises(DomainError):
        fit_gbe([(1, 2), (-1, 3)])


# --- GBE --------------------------------------------------------------------


def test_fit_gbe_recovery():
    x = sample(GbeParams(5, 15, 0.5), RngStream(101, 0), 100_000)
    fit = fit_gbe(x)
    t1, t2, d = fit.model.params
    assert abs(t1 / 5 - 1) < 0.01 and abs(t2 / 15 - 1) < 0.01
    assert abs(d - 0.5) < 0.02
    assert fit.converged and fit.n_used == 100_000


def test_fit_gbe_independent():
    x = sample(GbeParams(5, 5, 1), RngStream(102, 0), 100_000)
    assert fit_gbe(x).model.delta == pytest.approx(1.0, abs=0.02)


def test_fit_gbe_comonotone_hits_clamp():
    x2 = np.linspace(1, 30, 50)
    fit = fit_gbe(np.column_stack((x2 * (5 / 15), x2)))
    assert fit.model.delta == pytest.approx(1e-6)
    assert not math.isnan(fit.loglik)


def test_fit_gbe_too_few():
    with pytest.raises(DegenerateDataError):
        fit_gbe([(1.0, 2.0)])


def test_fit_gbe_error_shrinks_with_n():
    truth = np.array([5.0, 15.0, 0.5])
    med = []
    for n in (1_000, 10_000, 100_000):
        errs = [np.abs(np.array(fit_gbe(sample(GbeParams(*truth), RngStream(7, s), n)).model.params) - truth) / truth
                for s in range(20)]
        med.append(np.median(np.max(errs, axis=1)))
    assert med[0] > med[1] > med[2]
    # roughly n^(-1/2): each tenfold increase cuts the error by about sqrt(10)
    assert 1.5 < med[0] / med[1] < 7 and 1.5 < med[1] / med[2] < 7


def test_gbe_loglik_tie_is_impossible():
    assert loglik(GbeParams(5, 15, 0.5), [(1, 2), (3, 3)]) == -math.inf


# --- MOBE -------------------------------------------------------------------


def test_fit_mobe_recovery_and_score():
    truth = (0.164, 0.164, 0.036)
    x = sample(MobeParams(*truth), RngStream(103, 0), 100_000)
    fit = fit_mobe(x)
    assert np.all(np.abs(np.array(fit.model.params) / truth - 1) < 0.05)
    s = np.array([x[:, 0].sum(), x[:, 1].sum(), x.max(axis=1).sum()])
    assert np.all(np.abs(mobe_score(fit.model.params, x)) < 1e-8 * s)
    assert fit.converged


def test_fit_mobe_zero_shock():
    x = sample(MobeParams(0.2, 0.067, 0.0), RngStream(104, 0), 100_000)
    fit = fit_mobe(x)
    assert order_counts(x).n3 == 0
    l1, l2, l12 = fit.model.params
    assert l12 == 0.0
    assert l1 == pytest.approx(len(x) / x[:, 0].sum(), rel=1e-15)
    assert l2 == pytest.approx(len(x) / x[:, 1].sum(), rel=1e-15)


def test_fit_mobe_degenerate():
    with pytest.raises(DegenerateDataError):
        fit_mobe([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(DegenerateDataError):
        fit_mobe([(1, 2), (2, 3), (3, 3)])


def test_fit_mobe_maximizes_likelihood():
    x = sample(MobeParams(0.176, 0.042, 0.024), RngStream(105, 0), 5_000)
    fit = fit_mobe(x)
    best = loglik(fit.model, x)
    assert best == pytest.approx(fit.loglik)
    p = np.array(fit.model.params)
    for k in range(3):
        for f in (0.99, 1.01):
            q = p.copy()
            q[k] *= f
            assert loglik(MobeParams(*q), x) < best


def test_fitters_are_deterministic():
    x = sample(MobeParams(0.164, 0.164, 0.036), RngStream(106, 0), 3_000)
    assert fit_mobe(x) == fit_mobe(x)
    assert fit_gbe(x) == fit_gbe(x)


# --- MOBW EM ----------------------------------------------------------------


def test_em_precondition():
    with pytest.raises(DomainError):
        fit_mobw_em_i1([(1, 2), (2, 1), (1, 3), (2, 4), (3, 5)])
    with pytest.raises(DegenerateDataError):
        fit_mobw_em_i1([(1, 2), (1, 3)])


def test_em_converges_and_is_stationary():
    x = i1_sample(MobwParams(0.5, 0.9, 1.1, 4), 2000, 200)
    fit = fit_mobw_em_i1(x)
    assert fit.converged and fit.iterations <= 1000
    l1, l2, l12, eta = fit.model.params
    # at the fixed point the shape satisfies 2n / eta = sum of weighted log terms
    lx1, lx2 = np.log(x[:, 0]), np.log(x[:, 1])
    lhs = 2 * len(x) / eta
    rhs = l1 * np.sum(x[:, 0] ** eta * lx1) + (l2 + l12) * np.sum(x[:, 1] ** eta * lx2) - np.sum(lx1 + lx2)
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_em_scale_equivariance():
    x = i1_sample(MobwParams(0.5, 0.9, 1.1, 4), 2000, 201)
    base = fit_mobw_em_i1(x).model
    c = 3.7
    scaled = fit_mobw_em_i1(x * c).model
    assert scaled.shape == pytest.approx(base.shape, rel=1e-6)
    for a, b in zip(scaled.params[:3], base.params[:3]):
        assert a == pytest.approx(b * c ** (-base.shape), rel=1e-6)


def test_em_fixed_shape_pseudo_loglik_non_decreasing():
    x = i1_sample(MobwParams(0.5, 0.9, 1.1, 4), 2000, 202)
    values = []
    for it in range(1, 6):
        tol = Tolerance(1e-12, 1e-300, it)
        try:
            fit = fit_mobw_em_i1(x, tol=tol, fixed_eta=4.0, split0=0.3)
            params = fit.model.params
        except ConvergenceError as exc:
            params = tuple(float(v) for v in str(exc).rsplit("[", 1)[1].rstrip("]").split(","))
        l1, l2, l12, eta = params
        values.append(mobw_pseudo_loglik(params, x, (l12 / (l2 + l12), l2 / (l2 + l12))))
    assert all(np.diff(values) >= -1e-9 * abs(values[0]))


def test_em_fixed_shape_keeps_it():
    x = i1_sample(MobwParams(0.5, 0.9, 1.1, 4), 500, 203)
    fit = fit_mobw_em_i1(x, fixed_eta=4.0)
    assert fit.model.shape == 4.0
    assert fit.model.lambda1 == pytest.approx(len(x) / np.sum(x[:, 0] ** 4), rel=1e-12)


def test_em_iteration_limit_reports_iterates():
    x = i1_sample(MobwParams(0.5, 0.9, 1.1, 4), 500, 204)
    with pytest.raises(ConvergenceError, match="last iterates"):
        fit_mobw_em_i1(x, tol=Tolerance(1e-12, 1e-14, 3))


def test_em_on_case_study_stand_in_runs():
    x = i1_sample(MobwParams(0.574, 0.905, 1.12, 4.31), 300, 205) * 100
    fit = fit_mobw_em_i1(x / 100)
    assert fit.converged
    assert all(v > 0 for v in fit.model.params)
