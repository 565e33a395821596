import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from hawkes_regen.errors import MismatchedReport, UnsortedInput
from hawkes_regen.regen import busy_sweep, certify, extract_cycles, regeneration_times
from hawkes_regen.simulate import Cluster, PathRecord, simulate_path, spawn_rng
from hawkes_regen.transfer import Exponential, UniformBox, Zero


def _single(t=0.0):
    return Cluster(np.array([t]), np.array([-1]))


def _chain(*offsets):
    t = np.concatenate([[0.0], np.asarray(offsets, dtype=float)])
    return Cluster(t, np.arange(-1, t.size - 1))


def test_busy_sweep_examples():
    assert busy_sweep([]) == []
    assert busy_sweep([(1, 3), (2, 1), (10, 2)]) == [(1.0, 4.0), (10.0, 12.0)]
    assert busy_sweep([(1, 0)]) == [(1.0, 1.0)]


def test_busy_sweep_tie_opens_new_period():
    assert busy_sweep([(0, 2), (2, 1)]) == [(0.0, 2.0), (2.0, 3.0)]


def test_busy_sweep_unsorted():
    with pytest.raises(UnsortedInput):
        busy_sweep([(2, 1), (1, 1)])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 10)), max_size=40))
def test_busy_sweep_matches_interval_union(jobs):
    jobs = sorted(jobs)
    periods = busy_sweep(jobs)
    for a, s in jobs:
        assert any(p0 <= a and a + s <= p1 for p0, p1 in periods)
    for (a0, b0), (a1, b1) in zip(periods, periods[1:]):
        assert b0 <= a1
    arrivals = {a for a, _ in jobs}
    ends = {a + s for a, s in jobs}
    for p0, p1 in periods:
        assert p0 in arrivals and p1 in ends
        cuts = sorted({p0, p1} | {x for x in arrivals | ends if p0 < x < p1})
        for lo, hi in zip(cuts, cuts[1:]):
            mid = 0.5 * (lo + hi)
            assert any(a <= mid <= a + s for a, s in jobs)


def test_regeneration_hand_example():
    path = PathRecord.from_clusters(
        1.0, 20.0, [(1.0, _chain(2.0)), (2.0, _single()), (10.0, _chain(1.0))]
    )
    rep = regeneration_times(path, 1.0)
    assert rep.tau0 == 0.0
    assert rep.taus.tolist() == [4.0, 12.0]
    assert rep.cycle_lengths.tolist() == [4.0, 8.0]
    assert rep.incomplete_tail
    assert certify(path, rep)


def test_regeneration_empty_path():
    path = PathRecord.from_clusters(1.0, 5.0, [])
    rep = regeneration_times(path, 2.0)
    assert rep.tau0 == 0.0 and rep.taus.size == 0


def test_zero_kernel_a0_taus_are_arrivals():
    path = simulate_path(1.0, Zero(), [], 50.0, np.random.default_rng(0))
    rep = regeneration_times(path, 0.0)
    assert np.array_equal(rep.taus, path.anc_times)


def test_report_json_fields():
    path = simulate_path(1.0, Exponential(0.5, 1.0), [], 100.0, np.random.default_rng(1))
    d = json.loads(regeneration_times(path, 1.0).to_json())
    assert set(d) == {"A", "tau0", "taus", "cycle_lengths", "incomplete_tail"}


def test_initial_condition_delay():
    # initial point at -0.5 with one child at 0.3: busy until 0.3 + A
    init = [(-0.5, _chain(0.8))]
    path = PathRecord.from_clusters(1.0, 20.0, [(0.5, _single()), (5.0, _single())],
                                    init_points=[-0.5], initial_progeny=init)
    rep = regeneration_times(path, 1.0)
    assert rep.tau0 == pytest.approx(1.5)
    assert rep.taus.tolist() == [6.0]
    delay, cyc = extract_cycles(path, rep, include_delay=True)
    assert delay.index == 0 and delay.times.tolist() == pytest.approx([-0.5, 0.3, 0.5])
    assert cyc.times.tolist() == pytest.approx([3.5])


def test_deep_initial_points_do_not_delay():
    path = PathRecord.from_clusters(1.0, 10.0, [(2.0, _single())], init_points=[-3.0])
    assert regeneration_times(path, 1.0).tau0 == 0.0
    path = PathRecord.from_clusters(1.0, 10.0, [(2.0, _single())], init_points=[-0.5])
    assert regeneration_times(path, 1.0).tau0 == 0.5


def test_cycles_partition_events():
    h = Exponential(0.5, 1.0)
    path = simulate_path(1.0, h, [-0.4, -0.1], 300.0, np.random.default_rng(2))
    A = 1.0
    rep = regeneration_times(path, A)
    cycles = extract_cycles(path, rep, include_delay=True)
    parts = [cycles[0].times] + [c.times + c.start for c in cycles[1:]]
    last = rep.taus[-1]
    expected = path.times[(path.times > -A) & (path.times <= last)]
    assert np.allclose(np.sort(np.concatenate(parts)), expected, rtol=0, atol=1e-12)
    # heads (tau_{k-1} - A, tau_{k-1}] of every cycle are empty
    for c in cycles[1:]:
        assert np.all(c.times > 0)


def test_single_ancestor_cycle_is_the_cluster():
    cl = _chain(0.4, 0.9)
    path = PathRecord.from_clusters(1.0, 10.0, [(2.0, cl)])
    rep = regeneration_times(path, 0.5)
    (cyc,) = extract_cycles(path, rep)
    assert cyc.times == pytest.approx(2.0 + cl.times)
    assert cyc.length == pytest.approx(2.0 + 0.9 + 0.5)


def test_mismatched_report():
    a = simulate_path(1.0, Zero(), [], 50.0, spawn_rng(3, 0))
    b = simulate_path(1.0, Zero(), [], 50.0, spawn_rng(3, 1))
    with pytest.raises(MismatchedReport):
        extract_cycles(b, regeneration_times(a, 0.5))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), A=st.floats(0.0, 3.0), init=st.lists(st.floats(-3, 0), max_size=3))
def test_certification_on_random_paths(seed, A, init):
    path = simulate_path(1.0, Exponential(0.6, 1.2), init, 80.0, np.random.default_rng(seed))
    rep = regeneration_times(path, A)
    assert certify(path, rep)
    assert np.all(np.diff(rep.taus) > 0)
    assert np.all(rep.cycle_lengths > 0)


def test_certify_detects_wrong_time():
    path = PathRecord.from_clusters(1.0, 20.0, [(1.0, _chain(2.0)), (10.0, _single())])
    rep = regeneration_times(path, 1.0)
    bad = type(rep)(A=rep.A, tau0=rep.tau0, taus=np.array([3.5, 11.0]), horizon=rep.horizon,
                    incomplete_tail=True)
    assert not certify(path, bad)


def test_monotone_in_A():
    path = simulate_path(1.0, UniformBox(0.3, 1.5), [], 500.0, np.random.default_rng(4))
    grid = np.linspace(0, 500, 101)
    prev = None
    for A in (0.0, 0.5, 1.0, 2.0):
        taus = regeneration_times(path, A).taus
        counts = np.searchsorted(taus, grid, side="right")
        if prev is not None:
            assert np.all(counts <= prev)
        prev = counts


def test_taus_not_determined_by_event_times():
    # same event times {1, 1.5, 3}, different genealogies
    a = PathRecord.from_clusters(1.0, 10.0, [(1.0, _chain(0.5)), (3.0, _single())])
    b = PathRecord.from_clusters(1.0, 10.0, [(1.0, _single()), (1.5, _single()), (3.0, _single())])
    assert np.array_equal(a.times, b.times)
    assert regeneration_times(a, 0.0).taus.tolist() == [1.5, 3.0]
    assert regeneration_times(b, 0.0).taus.tolist() == [1.0, 1.5, 3.0]


def test_pure_poisson_cycles_are_exponential():
    path = simulate_path(1.0, Zero(), [], 100_000.0, np.random.default_rng(5))
    lengths = regeneration_times(path, 0.0).cycle_lengths
    assert lengths.size > 99_000
    assert stats.kstest(lengths, "expon").pvalue > 0.01
