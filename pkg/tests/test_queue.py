import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkes_regen.errors import DegenerateDenominator, Divergent, OutOfDomain, PoleAt
from hawkes_regen.queue import (
    Degenerate,
    Empirical,
    ExpDom,
    compensator,
    convergence_abscissa,
    delay_bound,
    exp_moment_tau,
    integral_I,
    kummer_J,
    laplace_busy,
    laplace_busy_ratio,
    laplace_tau,
    mean_tau,
    second_moment_tau,
    shift_relations,
)
from hawkes_regen.simulate import sample_cluster_stats
from hawkes_regen.transfer import Exponential, UniformBox, theta_star
from hawkes_regen.validate import batch_se, queue_cycle_lengths, service_sampler, simulate_cycle_lengths

# reference values computed once with mpmath (hyp1f1 and quad at 40 digits)
TAU_EXPDOM_1 = 0.2090116465653367878
J_MINUS_HALF = 0.1523180276510736765
TAU_MINUS_03 = 3.528814703129633038
M2_EXPDOM_1 = 12.601422596889264
EXP_MOMENT_02 = 1.9994490912652725
ABSCISSA_111 = -0.45026502749598118
DELAY_111 = 2.3179021514544039
BUSY_RATIO_1 = 0.41802329313067358
TAU_SHIFT_HALF = 0.088596507866338452


def _v(res):
    return float(np.real(res.value))


def _mc_mean(x):
    return x.mean(), x.std(ddof=1) / math.sqrt(x.size)


def test_compensator_closed_forms():
    assert compensator(Degenerate(1.0), 3.0) == 1.0
    assert compensator(Degenerate(1.0), 0.4) == pytest.approx(0.4)
    assert compensator(ExpDom(1.0, 0.0), 80.0) == pytest.approx(1.0, rel=1e-15)
    assert compensator(ExpDom(2.0, 1.0), 1.5) == pytest.approx(1 + 0.5 * (1 - math.exp(-1)), rel=1e-14)


def test_empirical_compensator_is_step_sum():
    svc = Empirical(np.array([0.5, 1.0, 1.0, 3.0]), A=0.25)
    # 1 - F^A(u) is 1 on [0, 0.75), 3/4 to 1.25, 1/4 to 3.25, then 0
    assert compensator(svc, 0.5) == pytest.approx(0.5)
    assert compensator(svc, 1.0) == pytest.approx(0.75 + 0.25 * 0.75)
    assert compensator(svc, 10.0) == pytest.approx(0.75 + 0.5 * 0.75 + 2.0 * 0.25)
    assert compensator(svc, 10.0) == pytest.approx(svc.mean_L + 0.25)
    assert svc.cdf(1.25) == 0.75 and svc.cdf(1.2499) == 0.25


def test_integral_I_examples():
    assert _v(integral_I(Degenerate(1.0), 1.0, 1.0)) == pytest.approx(
        (1 - math.exp(-2)) / 2 + math.exp(-2), rel=1e-12
    )
    assert _v(integral_I(ExpDom(1.0), 1.0, 1.0)) == pytest.approx(1 - math.exp(-1), rel=1e-12)
    for svc in (Degenerate(1.0), ExpDom(1.0, 0.5), Empirical(np.array([1.0, 2.0]), 0.3)):
        assert _v(integral_I(svc, 1e-12, 2.0)) == pytest.approx(0.5, rel=1e-9)


def test_integral_I_rejects_nonpositive_s_without_continuation():
    with pytest.raises(Divergent):
        integral_I(Degenerate(0.5), 1.0, -0.1)
    with pytest.raises(Divergent):
        integral_I(Empirical(np.array([1.0])), 1.0, 0.0)


def test_kummer_values():
    assert _v(kummer_J(0.0, 1.0, 2.0)) == pytest.approx(0.5, rel=1e-15)
    assert _v(kummer_J(1.0, 1.0, 1.0)) == pytest.approx(1 - math.exp(-1), rel=1e-14)
    assert _v(kummer_J(1.0, 1.0, -0.5)) == pytest.approx(J_MINUS_HALF, rel=1e-12)
    r = kummer_J(1.0, 1.0, 0.7)
    assert r.abs_error_estimate >= 0


@pytest.mark.parametrize("s", [0.0, -2.0, -4.0, -12.0])
def test_kummer_poles(s):
    with pytest.raises(PoleAt):
        kummer_J(1.0, 2.0, s)


@pytest.mark.parametrize("s", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("ratio", [0.5, 2.0])
def test_series_matches_quadrature(s, ratio):
    theta = 1.3
    lam = ratio * theta
    series = _v(kummer_J(lam, theta, s))
    quad = _v(integral_I(ExpDom(theta), lam, s, method="quad"))
    assert abs(series - quad) < 1e-8


def test_series_matches_quadrature_complex():
    s = 1.0 + 2.0j
    a = complex(kummer_J(1.0, 1.0, s).value)
    b = complex(integral_I(ExpDom(1.0), 1.0, s, method="quad").value)
    assert abs(a - b) < 1e-8


def test_laplace_tau_examples():
    assert _v(laplace_tau(ExpDom(1.0), 1.0, 1.0)) == pytest.approx(TAU_EXPDOM_1, rel=1e-12)
    I = (1 - math.exp(-2)) / 2 + math.exp(-2)
    assert _v(laplace_tau(Degenerate(1.0), 1.0, 1.0)) == pytest.approx(1 - 0.5 / I, rel=1e-12)
    assert _v(laplace_tau(ExpDom(1.0), 1.0, -0.3)) == pytest.approx(TAU_MINUS_03, rel=1e-11)
    for svc in (Degenerate(1.0), ExpDom(2.0, 0.5), Empirical(np.array([0.2, 3.0]), 1.0)):
        assert abs(_v(laplace_tau(svc, 1.0, 1e-8)) - 1.0) < 1e-6


def test_laplace_tau_negative_s_only_for_expdom():
    with pytest.raises(OutOfDomain):
        laplace_tau(Degenerate(1.0), 1.0, -0.1)
    with pytest.raises(OutOfDomain):
        laplace_tau(Empirical(np.array([1.0])), 1.0, -0.1)
    with pytest.raises(Divergent):
        laplace_tau(ExpDom(1.0), 1.0, -0.5)


def test_laplace_tau_matches_monte_carlo():
    rng = np.random.default_rng(20)
    x = np.exp(-queue_cycle_lengths(1.0, Degenerate(1.0), 100_000, rng))
    m, se = _mc_mean(x)
    assert abs(m - _v(laplace_tau(Degenerate(1.0), 1.0, 1.0))) < 3 * se


_svcs = st.one_of(
    st.builds(Degenerate, st.floats(0.05, 2.0)),
    st.builds(ExpDom, st.floats(0.2, 5.0), st.floats(0.0, 2.0)),
)


@settings(max_examples=40, deadline=None)
@given(svc=_svcs, lam=st.floats(0.2, 3.0))
def test_transform_bounds_and_monotonicity(svc, lam):
    grid = np.geomspace(0.01, 20.0, 15)
    vals = np.array([_v(laplace_tau(svc, lam, s)) for s in grid])
    assert np.all(vals > 0)
    assert np.all(vals < lam / (lam + grid))
    assert np.all(np.diff(vals) < 0)


def test_point_service_attains_idle_bound():
    grid = np.array([0.1, 1.0, 10.0])
    vals = np.array([_v(laplace_tau(Degenerate(0.0), 1.5, s)) for s in grid])
    assert np.allclose(vals, 1.5 / (1.5 + grid), rtol=1e-12)


def test_busy_transform_examples():
    for s in (0.1, 1.0, 7.0):
        assert _v(laplace_busy(Degenerate(0.0), 1.3, s)) == pytest.approx(1.0, rel=1e-12)
    for svc in (Degenerate(1.0), ExpDom(1.0, 0.7), Empirical(np.array([0.4, 2.0]), 0.5)):
        for s in (0.2, 1.0, 4.0):
            assert _v(laplace_busy(svc, 1.0, s)) <= math.exp(-s * svc.A) * (1 + 1e-12)


def test_busy_two_forms_agree():
    a = _v(laplace_busy(ExpDom(1.0), 1.0, 1.0))
    b = _v(laplace_busy_ratio(ExpDom(1.0), 1.0, 1.0))
    assert abs(a - b) < 1e-8
    assert b == pytest.approx(BUSY_RATIO_1, rel=1e-10)
    for svc in (Degenerate(1.0), Empirical(np.array([0.3, 1.1, 2.0]), 0.4)):
        assert abs(_v(laplace_busy(svc, 0.8, 0.6)) - _v(laplace_busy_ratio(svc, 0.8, 0.6))) < 1e-8


def test_shift_relations_examples():
    t0 = _v(laplace_tau(ExpDom(1.0), 1.0, 1.0))
    assert shift_relations(1.0, 0.0, 1.0, t0)[0] == pytest.approx(t0, rel=1e-14)
    tau_A, _ = shift_relations(1.0, 1.0, 1.0, _v(laplace_tau(Degenerate(0.0), 1.0, 1.0)))
    assert abs(tau_A - _v(laplace_tau(Degenerate(1.0), 1.0, 1.0))) < 1e-12
    tau_A, _ = shift_relations(1.0, 0.5, 1.0, t0)
    assert abs(tau_A - _v(laplace_tau(ExpDom(1.0, 0.5), 1.0, 1.0))) < 1e-10
    assert tau_A == pytest.approx(TAU_SHIFT_HALF, rel=1e-10)
    with pytest.raises(DegenerateDenominator):
        shift_relations(1.0, 1.0, 0.0, 1.0)


@pytest.mark.parametrize("lam", [0.5, 2.0])
@pytest.mark.parametrize("theta", [0.7, 3.0])
@pytest.mark.parametrize("A", [0.3, 1.5])
@pytest.mark.parametrize("s", [0.2, 2.5])
def test_shift_route_grid(lam, theta, A, s):
    base = laplace_tau(ExpDom(theta), lam, s)
    busy0 = laplace_busy(ExpDom(theta), lam, s)
    tau_A, busy_A = shift_relations(lam, A, s, _v(base), _v(busy0))
    assert abs(tau_A - _v(laplace_tau(ExpDom(theta, A), lam, s))) < 1e-10
    assert abs(busy_A - _v(laplace_busy(ExpDom(theta, A), lam, s))) < 1e-10


def test_mean_tau_examples():
    assert mean_tau(1.0, 0.0, 0.0) == 1.0
    assert mean_tau(1.0, 0.0, 1.0) == pytest.approx(math.e, rel=1e-15)
    assert mean_tau(2.0, 0.5, 0.0) == pytest.approx(0.5 * math.e, rel=1e-15)


def test_mean_tau_monte_carlo():
    rng = np.random.default_rng(21)
    m, se = _mc_mean(queue_cycle_lengths(1.0, Degenerate(1.0), 100_000, rng))
    assert abs(m - math.e) < 3 * se
    m, se = _mc_mean(queue_cycle_lengths(2.0, ExpDom(2.0), 100_000, rng))
    assert abs(m - 0.5 * math.e) < 3 * se


def test_second_moment_closed_cases():
    assert second_moment_tau(1.0, Degenerate(0.0)) == pytest.approx(2.0, rel=1e-12)
    # E[tau^2] for L = 0, A = 1: 2 e^2 (1 - 2/e) + 2 e = 2 e^2 - 2 e
    exact = 2 * math.e**2 - 2 * math.e
    assert second_moment_tau(1.0, Degenerate(1.0)) == pytest.approx(exact, rel=1e-12)
    assert second_moment_tau(1.0, ExpDom(1.0)) == pytest.approx(M2_EXPDOM_1, rel=1e-10)


def test_second_moment_degenerate_monte_carlo():
    rng = np.random.default_rng(22)
    m, se = _mc_mean(queue_cycle_lengths(1.0, Degenerate(1.0), 100_000, rng) ** 2)
    assert abs(m - second_moment_tau(1.0, Degenerate(1.0))) < 3 * se


def test_second_moment_expdom_monte_carlo():
    rng = np.random.default_rng(23)
    m, se = _mc_mean(queue_cycle_lengths(1.0, ExpDom(1.0), 1_000_000, rng) ** 2)
    assert abs(m - second_moment_tau(1.0, ExpDom(1.0))) < 3 * se


def test_second_moment_empirical_routes_agree():
    svc = Empirical(np.array([0.1, 0.4, 0.4, 2.5]), 0.3)
    assert second_moment_tau(1.0, svc) == pytest.approx(second_moment_tau(1.0, svc, method="quad"), rel=1e-8)


@pytest.mark.parametrize("svc", [ExpDom(1.0), ExpDom(2.0, 0.5)])
def test_derivatives_match_moments(svc):
    lam = 1.0
    h = 1e-3
    f = lambda s: _v(laplace_tau(svc, lam, s))
    d1 = (f(-h) - f(h)) / (2 * h)
    d2 = (f(h) - 2 * 1.0 + f(-h)) / h**2
    m1 = mean_tau(lam, svc.mean_L, svc.A)
    assert d1 == pytest.approx(m1, rel=1e-4)
    assert d2 == pytest.approx(second_moment_tau(lam, svc), rel=1e-3)


@pytest.mark.parametrize("svc", [Degenerate(1.0), Empirical(np.array([0.2, 0.9, 1.7]), 0.4)])
def test_one_sided_derivatives_match_moments(svc):
    # (1 - L(h)) / h = m1 - h m2 / 2 + O(h^2); Richardson removes the linear term
    lam = 1.0
    D = lambda h: (1 - _v(laplace_tau(svc, lam, h))) / h
    h = 1e-4
    m1 = 2 * D(h / 2) - D(h)
    m2 = 4 * (D(h / 2) - D(h)) / h
    assert m1 == pytest.approx(mean_tau(lam, svc.mean_L, svc.A), rel=1e-4)
    assert m2 == pytest.approx(second_moment_tau(lam, svc), rel=1e-3)


def test_convergence_abscissa_value():
    assert convergence_abscissa(1.0, 1.0, 0.0) == pytest.approx(ABSCISSA_111, rel=1e-10)
    # never below -min(lam, theta)
    for lam, theta, A in [(1.0, 0.5, 1.0), (0.3, 2.0, 0.0), (2.0, 2.0, 0.5)]:
        assert convergence_abscissa(lam, theta, A) >= -min(lam, theta)


def test_exp_moment_small_alpha_is_one():
    assert exp_moment_tau(1.0, 1.0, 0.0, 1e-9) == pytest.approx(1.0, abs=1e-8)


def test_exp_moment_domain():
    with pytest.raises(OutOfDomain):
        exp_moment_tau(1.0, 1.0, 0.0, 1.0)
    with pytest.raises(OutOfDomain):
        exp_moment_tau(1.0, 0.5, 0.0, 0.5)
    # alpha = 0.5 lies beyond the abscissa -0.4503 for lam = theta = 1
    with pytest.raises(Divergent):
        exp_moment_tau(1.0, 1.0, 0.0, 0.5)


def test_exp_moment_value_and_monte_carlo():
    val = exp_moment_tau(1.0, 1.0, 0.0, 0.2)
    assert val == pytest.approx(EXP_MOMENT_02, rel=1e-11)
    rng = np.random.default_rng(24)
    m, se = _mc_mean(np.exp(0.2 * queue_cycle_lengths(1.0, ExpDom(1.0), 1_000_000, rng)))
    assert abs(m - val) < 3 * se


def test_kummer_continuation_matches_monte_carlo():
    # E[e^{0.3 tau}] from the continued series against simulation
    rng = np.random.default_rng(25)
    m, se = _mc_mean(np.exp(0.3 * queue_cycle_lengths(1.0, ExpDom(1.0), 1_000_000, rng)))
    assert abs(m - TAU_MINUS_03) < 3 * se


def test_exp_moment_bounds_hawkes_kernel():
    h = Exponential(0.5, 1.0)
    bound = exp_moment_tau(1.0, theta_star(h), 0.0, 0.05)
    rng = np.random.default_rng(26)
    x = np.exp(0.05 * simulate_cycle_lengths(1.0, service_sampler(h, rng), 0.0, 200_000, rng))
    m, se = _mc_mean(x)
    assert m <= bound + 3 * se


def test_delay_bound_values():
    assert delay_bound(1.0, math.inf, 0.0) == pytest.approx(1.0, rel=1e-12)
    assert delay_bound(1.0, 1.0, 0.0) == pytest.approx(DELAY_111, rel=1e-10)
    assert delay_bound(1.0, 1.0, 1.0) > delay_bound(1.0, 1.0, 0.0)
    assert delay_bound(1.0, 1.0, 0.5) < delay_bound(1.0, 1.0, 1.0)


def _stationary_residual(lengths, rng, n_probe=100_000):
    ends = np.cumsum(lengths)
    u = np.sort(rng.uniform(ends[1000], ends[-2], n_probe))
    r = ends[np.searchsorted(ends, u, side="right")] - u
    # probes sharing a cycle are correlated, so use batch means in time order
    return r.mean(), batch_se(r)


def test_delay_bound_is_stationary_delay_of_dominating_queue():
    rng = np.random.default_rng(27)
    lengths = queue_cycle_lengths(1.0, ExpDom(1.0), 200_000, rng)
    m, se = _stationary_residual(lengths, rng)
    assert abs(m - delay_bound(1.0, 1.0, 0.0)) < 3 * se


def test_delay_bound_dominates_hawkes_burn_in():
    h = Exponential(0.5, 1.0)
    rng = np.random.default_rng(28)
    lengths = simulate_cycle_lengths(1.0, service_sampler(h, rng), 0.0, 200_000, rng)
    m, se = _stationary_residual(lengths, rng)
    assert m <= delay_bound(1.0, theta_star(h), 0.0) + 3 * se


@pytest.mark.parametrize("h", [Exponential(0.5, 1.0), UniformBox(0.3, 2.0)])
def test_domination_order_of_transforms(h):
    lengths, _ = sample_cluster_stats(h, 20_000, np.random.default_rng(29))
    ts = theta_star(h)
    for A in (0.0, 0.7):
        emp = Empirical(lengths, A)
        for s in (0.05, 0.3, 1.0, 4.0):
            lo = _v(laplace_tau(ExpDom(ts, A), 1.0, s))
            assert _v(laplace_tau(emp, 1.0, s)) >= lo
            assert _v(laplace_tau(emp, 1.0, s)) >= _v(laplace_tau(ExpDom(0.5 * ts, A), 1.0, s))
