import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from btbe.lifetimes import (
    BranchError,
    GbeParams,
    MobeParams,
    MobwParams,
    OrderBranch,
    Source,
    density,
    event_probabilities,
    expected_tbe,
    first_event_cdf,
    first_event_survival,
    first_event_survival_quadrature,
    sample,
    second_event_conditional,
    second_event_quantile,
    superimpose,
    survival,
)
from btbe.numerics import DomainError, RngStream

LT, GT, EQ = OrderBranch.X1_LT_X2, OrderBranch.X1_GT_X2, OrderBranch.X1_EQ_X2


# ---------------------------------------------------------------- survival


def test_survival_examples():
    assert survival(GbeParams(1, 1, 1), 1, 1) == pytest.approx(math.exp(-2), rel=1e-15)
    assert survival(MobeParams(0.2, 0.2, 0), 5, 5) == pytest.approx(math.exp(-2), rel=1e-15)
    assert survival(MobwParams(0.0314, 0.0314, 0, 2), 5, 5) == pytest.approx(math.exp(-2 * 0.0314 * 25), rel=1e-15)


def test_survival_mobw_matches_mc_exceedance():
    m = MobwParams(0.0314, 0.0314, 0, 2)
    x = sample(m, RngStream(3), 1_000_000)
    frac = np.mean((x[:, 0] > 5) & (x[:, 1] > 5))
    p = survival(m, 5, 5)
    assert abs(frac - p) < 4 * math.sqrt(p * (1 - p) / len(x))


def test_survival_domain():
    with pytest.raises(DomainError):
        survival(GbeParams(1, 1, 1), -1, 1)


@pytest.mark.parametrize("model", [GbeParams(5, 15, 0.5), MobeParams(0.2, 0.3, 0.1), MobwParams(0.2, 0.3, 0.1, 2)])
def test_survival_basic_shape(model):
    assert survival(model, 0, 0) == 1.0
    grid = np.linspace(0, 20, 30)
    s = survival(model, grid, 3.0)
    assert np.all(np.diff(s) <= 0) and np.all((0 <= s) & (s <= 1))


@pytest.mark.parametrize("model", [GbeParams(5, 15, 0.5), GbeParams(4, 9, 1), MobeParams(0.2, 0.3, 0.1),
                                   MobwParams(0.2, 0.3, 0.1, 2.5)])
def test_partial_survival_matches_finite_difference(model):
    h = 1e-6
    for x1, x2 in [(1.0, 2.5), (3.0, 1.2), (0.7, 4.0)]:
        d1 = (survival(model, x1 + h, x2) - survival(model, x1 - h, x2)) / (2 * h)
        d2 = (survival(model, x1, x2 + h) - survival(model, x1, x2 - h)) / (2 * h)
        assert model.partial_survival(x1, x2, 1) == pytest.approx(d1, rel=1e-6)
        assert model.partial_survival(x1, x2, 2) == pytest.approx(d2, rel=1e-6)


# ---------------------------------------------------------------- density


def test_density_examples():
    assert density(MobeParams(0.2, 0.2, 0.1), 1, 1, EQ) == pytest.approx(0.1 * math.exp(-0.5), rel=1e-14)
    assert density(GbeParams(1, 1, 1), 1, 2, LT) == pytest.approx(math.exp(-3), rel=1e-14)


def test_density_errors():
    with pytest.raises(BranchError):
        density(GbeParams(1, 1, 1), 1, 1, EQ)
    with pytest.raises(BranchError):
        density(MobeParams(0.2, 0.2, 0.1), 2, 1, LT)


def _total_mass(m):
    lt = integrate.dblquad(lambda x2, x1: m.density(x1, x2, LT), 0, np.inf, lambda x1: x1, lambda x1: np.inf,
                           epsabs=1e-11, epsrel=1e-11)[0]
    gt = integrate.dblquad(lambda x1, x2: m.density(x1, x2, GT), 0, np.inf, lambda x2: x2, lambda x2: np.inf,
                           epsabs=1e-11, epsrel=1e-11)[0]
    tie = 0.0
    if not isinstance(m, GbeParams):
        tie = integrate.quad(lambda t: m.density(t, t, EQ), 0, np.inf, epsabs=1e-12, epsrel=1e-12)[0]
    return lt, gt, tie


@pytest.mark.parametrize("model", [MobwParams(0.2, 0.3, 0.1, 2), MobwParams(0.0257, 0.0257, 0.0057, 2),
                                   MobeParams(0.164, 0.164, 0.036), GbeParams(5, 15, 0.5), GbeParams(2, 3, 0.8)])
def test_density_integrates_to_one(model):
    lt, gt, tie = _total_mass(model)
    assert lt + gt + tie == pytest.approx(1.0, abs=1e-6)
    p_lt, p_gt, p_eq = event_probabilities(model)
    assert lt == pytest.approx(p_lt, abs=1e-6)
    assert tie == pytest.approx(p_eq, abs=1e-6)


# ---------------------------------------------------------------- sampler


def test_sampler_gbe_means():
    x = sample(GbeParams(5, 5, 1), RngStream(11), 1_000_000)
    se = x.std(axis=0) / 1000
    assert np.all(np.abs(x.mean(axis=0) - 5) < 3 * se)


@pytest.mark.parametrize("delta", [0.3, 0.5, 0.8])
def test_sampler_gbe_dependent_law(delta):
    m = GbeParams(5, 15, delta)
    x = sample(m, RngStream(12), 400_000)
    assert np.all(np.abs(x.mean(axis=0) - [5, 15]) < 4 * x.std(axis=0) / math.sqrt(len(x)))
    for a, b in [(2, 5), (5, 15), (8, 3)]:
        frac = np.mean((x[:, 0] > a) & (x[:, 1] > b))
        p = survival(m, a, b)
        assert abs(frac - p) < 4 * math.sqrt(p * (1 - p) / len(x))


def test_sampler_mobe_tie_fraction():
    m = MobeParams(0.164, 0.164, 0.036)
    x = sample(m, RngStream(13), 1_000_000)
    ties = np.mean(x[:, 0] == x[:, 1])
    p = 0.036 / 0.364
    assert abs(ties - p) < 3 * math.sqrt(p * (1 - p) / len(x))


def test_sampler_mobw_eta1_matches_mobe():
    a = sample(MobwParams(0.2, 0.3, 0.1, 1.0), RngStream(14), 1_000_000)
    b = sample(MobeParams(0.2, 0.3, 0.1), RngStream(15), 1_000_000)
    assert stats.ks_2samp(a.min(axis=1), b.min(axis=1)).statistic < 0.003
    assert stats.ks_2samp(a.max(axis=1), b.max(axis=1)).statistic < 0.003


def test_sampler_mobw_moments():
    m = MobwParams(0.0314, 0.0035, 0, 2)
    x = sample(m, RngStream(16), 1_000_000)
    g = math.gamma(1.5)
    expect = [g * 0.0314**-0.5, g * 0.0035**-0.5]
    assert np.all(np.abs(x.mean(axis=0) - expect) < 3 * x.std(axis=0) / 1000)


def test_sampler_deterministic_and_stream_aligned():
    a = sample(GbeParams(5, 15, 0.5), RngStream(1, 2), 100)
    b = sample(GbeParams(5, 15, 0.5), RngStream(1, 2), 100)
    assert np.array_equal(a, b)
    # the Bernoulli draw is consumed even when delta = 1, so the mixing weight stays aligned
    c = sample(GbeParams(5, 15, 1.0), RngStream(1, 2), 100)

    def weight(x, d):
        u, v = (x[:, 0] / 5) ** (1 / d), (x[:, 1] / 15) ** (1 / d)
        return u / (u + v)

    assert np.allclose(weight(a, 0.5), weight(c, 1.0), rtol=1e-12)


# ---------------------------------------------------------------- probabilities and moments


def test_event_probabilities_examples():
    assert event_probabilities(MobeParams(0.2, 0.2, 0)) == (0.5, 0.5, 0.0)
    p = event_probabilities(GbeParams(5, 15, 1))
    assert p[0] == pytest.approx(0.75) and p[1] == pytest.approx(0.25) and p[2] == 0
    p = event_probabilities(MobwParams(0.0257, 0.0257, 0.0057, 2))
    lam = 0.0257 + 0.0257 + 0.0057
    assert np.allclose(p, (0.0257 / lam, 0.0257 / lam, 0.0057 / lam), rtol=1e-14)
    assert np.allclose(p, (0.4501, 0.4501, 0.0998), atol=1e-4)


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 5))
@settings(max_examples=100, deadline=None)
def test_event_probabilities_sum_to_one(a, b, c):
    for m in (MobeParams(a, b, c), MobwParams(a, b, c, 1.7), GbeParams(a, b, min(1.0, c / 5 + 0.01))):
        p = event_probabilities(m)
        assert sum(p) == pytest.approx(1.0, abs=1e-15)
        assert min(p) >= 0


def test_expected_tbe_examples():
    assert expected_tbe(GbeParams(5, 5, 1)) == pytest.approx(3.75)
    assert expected_tbe(MobeParams(0.2, 0.2, 0)) == pytest.approx(3.75)
    for p in [(0.2, 0.3, 0.1), (0.164, 0.164, 0.036), (0.1, 0.067, 0)]:
        assert expected_tbe(MobwParams(*p, 1.0)) == pytest.approx(expected_tbe(MobeParams(*p)), rel=1e-14)


def test_expected_tbe_gbe_is_mean_gap_of_stream():
    m = GbeParams(5, 15, 0.5)
    x = sample(m, RngStream(17), 1_000_000)
    # each vector spans X(2) and holds two plotted points
    gap = x.max(axis=1) / 2
    assert abs(gap.mean() - expected_tbe(m)) < 3 * gap.std() / 1000


def test_expected_tbe_mo_accounts_ties_by_first_event():
    # with ties the tabulated value is 0.5 E[X(2)] + 0.5 P[tie] E[X(1)]
    m = MobeParams(0.164, 0.164, 0.036)
    x = sample(m, RngStream(18), 1_000_000)
    tie = x[:, 0] == x[:, 1]
    v = 0.5 * x.max(axis=1) + 0.5 * tie.mean() * x.min(axis=1)
    assert abs(v.mean() - expected_tbe(m)) < 4 * v.std() / 1000


# ---------------------------------------------------------------- first event


MODELS = [GbeParams(5, 15, 0.5), GbeParams(5, 15, 1), MobeParams(0.2, 0.3, 0.1), MobwParams(0.2, 0.3, 0.1, 2)]


@pytest.mark.parametrize("model", MODELS)
def test_first_event_at_zero(model):
    assert first_event_cdf(model, 0.0, LT) == 0.0
    assert first_event_survival(model, 0.0, LT) == 1.0


def test_first_event_mobe_example():
    assert first_event_survival(MobeParams(0.2, 0.2, 0), 2.5, LT) == pytest.approx(math.exp(-1), rel=1e-15)
    q = first_event_survival_quadrature(MobeParams(0.2, 0.2, 0), 2.5, LT)
    assert q == pytest.approx(math.exp(-1), abs=1e-10)


def test_first_event_gbe_dependent_vs_empirical():
    m = GbeParams(5, 15, 0.5)
    x = sample(m, RngStream(19), 1_000_000)
    sel = x[:, 0] > x[:, 1]
    emp = np.mean(x[sel, 1] > 10)
    assert abs(emp - first_event_survival(m, 10.0, GT)) < 0.005
    assert first_event_survival_quadrature(m, 10.0, GT) == pytest.approx(first_event_survival(m, 10.0, GT), abs=1e-10)


@pytest.mark.parametrize("model", MODELS)
def test_first_event_cdf_plus_survival(model):
    for x in (0.3, 2.0, 9.0):
        for br in (LT, GT):
            assert first_event_cdf(model, x, br) + first_event_survival(model, x, br) == pytest.approx(1.0, abs=1e-15)


def test_first_event_branch_errors():
    with pytest.raises(BranchError):
        first_event_survival(GbeParams(5, 5, 1), 1.0, EQ)
    with pytest.raises(BranchError):
        first_event_survival(MobeParams(0.0, 0.2, 0.1), 1.0, LT)
    with pytest.raises(BranchError):
        first_event_survival(MobeParams(0.2, 0.2, 0.0), 1.0, EQ)


# ---------------------------------------------------------------- second event


@pytest.mark.parametrize("model", MODELS)
def test_second_event_survival_one_at_first(model):
    for br in (LT, GT):
        cdf, s = second_event_conditional(model, 1.7, 1.7, br)
        assert s == pytest.approx(1.0, abs=1e-15) and cdf + s == 1.0


def test_second_event_examples():
    _, s = second_event_conditional(MobeParams(0.2, 0.3, 0.1), 2.0, 1.0, LT)
    assert s == pytest.approx(math.exp(-0.4), rel=1e-14)
    _, s = second_event_conditional(GbeParams(5, 5, 1), 3.0, 1.0, LT)
    assert s == pytest.approx(math.exp(-0.4), rel=1e-14)


def test_second_event_errors():
    with pytest.raises(BranchError):
        second_event_conditional(MobeParams(0.2, 0.3, 0.1), 2.0, 1.0, EQ)
    with pytest.raises(DomainError):
        second_event_conditional(MobeParams(0.2, 0.3, 0.1), 0.5, 1.0, LT)


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.parametrize("branch", [LT, GT])
def test_second_event_quantile_inverts_survival(model, branch):
    xf = np.array([0.01, 0.5, 2.0, 7.0, 20.0])
    for p in (1e-6, 0.01, 0.5, 0.99, 1 - 1e-6):
        u = second_event_quantile(model, p, xf, branch)
        assert np.all(u >= xf)
        s = model.second_event_survival(u, xf, branch)
        assert np.allclose(s, p, rtol=1e-9, atol=1e-14)


def test_second_event_quantile_gbe_tiny_tail_is_finite():
    m = GbeParams(5, 15, 0.9)
    u = second_event_quantile(m, 1e-300, 3.0, LT)
    assert math.isfinite(u) and u > 3.0
    assert m.second_event_survival(u, 3.0, LT) == pytest.approx(1e-300, rel=1e-6)


def test_second_event_mobe_vs_empirical():
    m = MobeParams(0.2, 0.3, 0.1)
    x = sample(m, RngStream(20), 2_000_000)
    sel = (x[:, 0] < x[:, 1]) & (np.abs(x[:, 0] - 1.0) < 0.05)
    emp = np.mean(x[sel, 1] > x[sel, 0] + 1.0)
    _, s = second_event_conditional(m, 2.0, 1.0, LT)
    assert abs(emp - s) < 4 * math.sqrt(s * (1 - s) / sel.sum())


# ---------------------------------------------------------------- reductions


@pytest.mark.parametrize("p", [(0.2, 0.3, 0.1), (0.164, 0.164, 0.036), (0.0, 0.2, 0.1)])
def test_mobw_eta1_reduces_to_mobe(p):
    w, e = MobwParams(*p, 1.0), MobeParams(*p)
    g = np.linspace(0.1, 10, 20)
    assert np.allclose(w.survival(g, g[::-1]), e.survival(g, g[::-1]), rtol=1e-12, atol=0)
    assert np.allclose(w.density(g, g, EQ), e.density(g, g, EQ), rtol=1e-12)
    assert np.allclose(w.first_event_survival(g), e.first_event_survival(g), rtol=1e-12)
    assert w.expected_tbe() == pytest.approx(e.expected_tbe(), rel=1e-12)
    for br in (LT, GT):
        assert np.allclose(w.second_event_survival(g + 1, g, br), e.second_event_survival(g + 1, g, br), rtol=1e-12)
        assert np.allclose(w.second_event_quantile(0.01, g, br), e.second_event_quantile(0.01, g, br), rtol=1e-12)


def test_gbe_delta1_equals_mobe_independent():
    g_, e = GbeParams(5, 15, 1), MobeParams(1 / 5, 1 / 15, 0)
    t = np.linspace(0.1, 30, 20)
    assert np.allclose(g_.first_event_survival(t), e.first_event_survival(t), rtol=1e-12)
    assert np.allclose(event_probabilities(g_), event_probabilities(e), rtol=1e-12)
    for br in (LT, GT):
        assert np.allclose(g_.second_event_survival(t + 2, t, br), e.second_event_survival(t + 2, t, br), rtol=1e-12)
        assert np.allclose(g_.second_event_quantile(0.02, t, br), e.second_event_quantile(0.02, t, br), rtol=1e-12)
    assert g_.expected_tbe() == pytest.approx(e.expected_tbe(), rel=1e-12)


def test_parameter_validation():
    with pytest.raises(DomainError):
        GbeParams(0, 1, 1)
    with pytest.raises(DomainError):
        GbeParams(1, 1, 1.5)
    with pytest.raises(DomainError):
        MobeParams(0.0, 0.1, 0.0)
    with pytest.raises(DomainError):
        MobwParams(0.1, 0.1, 0.0, 0.0)


# ---------------------------------------------------------------- superimposed stream


def test_superimpose_example():
    ev = superimpose([(2, 3), (3, 1), (2, 2), (5, 1)])
    assert [e.value for e in ev] == [2, 3, 1, 3, 2, 1, 5]
    assert [e.rank for e in ev] == [1, 2, 1, 2, 1, 1, 2]
    assert ev[4].source is Source.TIE and ev[4].branch is EQ
    assert ev[2].source is Source.SUBPROCESS2 and ev[2].branch is GT
    assert [e.vector_index for e in ev] == [0, 0, 1, 1, 2, 3, 3]


def test_superimpose_single_tie():
    ev = superimpose([(4, 4)])
    assert len(ev) == 1 and ev[0].value == 4 and ev[0].source is Source.TIE


def test_superimpose_length_counts_ties():
    x = sample(MobeParams(0.164, 0.164, 0.036), RngStream(21), 10_000)
    n_tie = int(np.sum(x[:, 0] == x[:, 1]))
    assert n_tie > 0
    assert len(superimpose(x)) == 2 * len(x) - n_tie


def test_superimpose_empty():
    assert superimpose([]) == []


@pytest.mark.parametrize("delta", [0.3, 0.5, 1.0])
def test_gbe_log_density_matches_density(delta):
    m = GbeParams(5, 15, delta)
    x1 = np.array([0.1, 1.0, 4.0, 20.0])
    x2 = np.array([3.0, 0.5, 40.0, 2.0])
    for br in (OrderBranch.X1_LT_X2, OrderBranch.X1_GT_X2):
        assert np.allclose(m.log_density(x1, x2, br), np.log(m.density(x1, x2, br)), rtol=1e-12)


def test_gbe_log_density_finite_near_zero_delta():
    m = GbeParams(5, 15, 1e-6)
    assert np.all(np.isfinite(m.log_density([1.0, 2.0], [3.1, 5.0], OrderBranch.X1_LT_X2)))


def test_mobw_scale_form_round_trip():
    m = MobwParams.from_scales(0.574, 0.905, 1.12, 4.31)
    assert m.lambda1 == pytest.approx(0.574 ** -4.31, rel=1e-15)
    assert np.allclose(m.scales, (0.574, 0.905, 1.12), rtol=1e-14)
    assert MobwParams(0.2, 0.0, 0.1, 2).scales[1] == math.inf
    # with shape 1 a scale is the mean of its exponential shock
    assert MobwParams.from_scales(2.0, 4.0, 0.0, 1.0).params == (0.5, 0.25, 0.0, 1.0)
