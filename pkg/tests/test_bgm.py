import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embedcap.bgm import (
    BRUTE_FORCE_LIMIT,
    DegenerateOutcomeError,
    MatchOutcome,
    PointSequence,
    bgm_match,
    brute_force_max_matching,
    capacity_from_occupancy,
    chain_capacity,
    empirical_capacity,
    generate_renewal,
    simulate_chain,
)
from embedcap.renewal_models import InterarrivalModel as M


def test_point_sequence_validation():
    with pytest.raises(ValueError):
        PointSequence([1.0, 1.0])
    with pytest.raises(ValueError):
        PointSequence([0.0, 1.0])
    with pytest.raises(ValueError):
        PointSequence([2.0, 1.0])
    assert len(PointSequence([])) == 0
    assert np.array_equal(PointSequence([1.0, 2.0]).scaled(0.5).epochs, [0.5, 1.0])


# -- worked examples (indices are zero-based here) ----------------------------

def test_bgm_example_mixed():
    out = bgm_match([1, 3], [2, 10], 1.5)
    assert out.pairs.tolist() == [[0, 0]]
    assert (out.chaff_s, out.chaff_t, out.undetermined_t) == (1, 0, 1)
    assert brute_force_max_matching([1, 3], [2, 10], 1.5) == 1


def test_bgm_zero_delay_allowed():
    out = bgm_match([1], [1], 1.0)
    assert out.pairs.tolist() == [[0, 0]]


def test_bgm_delay_bound_inclusive():
    assert bgm_match([1], [2.5], 1.5).n_pairs == 1
    assert bgm_match([1], [2.5000001], 1.5).n_pairs == 0


def test_bgm_empty_second_process():
    out = bgm_match([1, 2, 3], [], 1.0)
    assert out.n_pairs == 0
    assert out.chaff_s == 3


def test_bgm_rejects_bad_delay():
    with pytest.raises(ValueError):
        bgm_match([1], [1], 0.0)


def test_brute_force_examples():
    assert brute_force_max_matching([1, 2], [1.5, 2.5], 1.0) == 2
    assert brute_force_max_matching([1, 2, 5], [], 3.0) == 0
    with pytest.raises(ValueError):
        brute_force_max_matching(np.arange(1, 14), np.arange(1, 13) + 0.5, 1.0)
    assert BRUTE_FORCE_LIMIT == 24


def _random_instance(rng):
    grid = np.arange(1, 25) * 0.25  # 0.25 grid in (0, 6]
    s = np.sort(rng.choice(grid, size=rng.integers(0, 9), replace=False))
    t = np.sort(rng.choice(grid, size=rng.integers(0, 9), replace=False))
    return s, t, float(rng.choice([0.5, 1.0, 2.0]))


def test_bgm_optimal_on_random_instances():
    rng = np.random.default_rng(20240601)
    for _ in range(1000):
        s, t, d = _random_instance(rng)
        assert bgm_match(s, t, d).n_pairs == brute_force_max_matching(s, t, d)


@st.composite
def instances(draw):
    s = draw(st.lists(st.integers(1, 60), max_size=30, unique=True))
    t = draw(st.lists(st.integers(1, 60), max_size=30, unique=True))
    d = draw(st.sampled_from([0.1, 0.25, 0.5, 1.0, 3.0]))
    return np.sort(np.array(s, float)) / 10, np.sort(np.array(t, float)) / 10, d


@settings(max_examples=200, deadline=None)
@given(instances())
def test_match_invariants(inst):
    s, t, d = inst
    out = bgm_match(s, t, d)
    for i, j in out.pairs:
        assert 0 <= t[j] - s[i] <= d
    if out.n_pairs > 1:
        assert np.all(np.diff(out.pairs[:, 0]) > 0)
        assert np.all(np.diff(out.pairs[:, 1]) > 0)
    assert 2 * out.n_pairs + out.chaff_s + out.chaff_t + out.undetermined_t == len(s) + len(t)
    assert out.n_points == len(s) + len(t)


# -- generation and chain ----------------------------------------------------

def test_generate_renewal_examples():
    seq = generate_renewal(M.exponential(), 10 ** 5, np.random.default_rng(1))
    assert 0.99 <= seq.epochs[-1] / 10 ** 5 <= 1.01
    one = generate_renewal(M.uniform(), 1, np.random.default_rng(2))
    assert len(one) == 1 and one.epochs[0] > 0
    se = generate_renewal(M.shifted_exponential(0.8), 1000, np.random.default_rng(3))
    assert np.all(np.diff(se.epochs) >= 0.8 - 1e-12)
    assert se.epochs[0] >= 0.8
    with pytest.raises(ValueError):
        generate_renewal(M.exponential(), 0, np.random.default_rng(0))


def test_generate_renewal_rate_scales_time():
    fast = generate_renewal(M.erlang(2, rate=4.0), 100, np.random.default_rng(7))
    slow = generate_renewal(M.erlang(2), 100, np.random.default_rng(7))
    np.testing.assert_allclose(fast.epochs * 4.0, slow.epochs, rtol=1e-14)


def test_chain_exponential_capacity():
    tr = simulate_chain(M.exponential(), 1.0, 10 ** 6, np.random.default_rng(42))
    assert 0 <= tr.steps_inside <= tr.steps_total == 10 ** 6
    assert capacity_from_occupancy(tr.occupancy) == pytest.approx(0.5, abs=0.01)


def test_chain_vanishing_window():
    tr = simulate_chain(M.erlang(2), 1e-6, 10 ** 5, np.random.default_rng(1))
    assert tr.occupancy < 1e-3


def test_chain_erlang_capacity():
    tr = simulate_chain(M.erlang(2), 2.0, 10 ** 6, np.random.default_rng(5))
    assert capacity_from_occupancy(tr.occupancy) == pytest.approx(0.7805, abs=0.01)


def test_chain_validation():
    with pytest.raises(ValueError):
        simulate_chain(M.exponential(), 1.0, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        simulate_chain(M.exponential(), -1.0, 10, np.random.default_rng(0))


def test_chain_capacity_deterministic_and_consistent():
    a = chain_capacity(M.uniform(), 1.0, 200_000, seed=3)
    b = chain_capacity(M.uniform(), 1.0, 200_000, seed=3)
    assert a == b
    value, err = a
    assert 0 < err < 0.01
    tr = simulate_chain(M.uniform(), 1.0, 200_000, np.random.default_rng(3))
    assert value == pytest.approx(capacity_from_occupancy(tr.occupancy), abs=1e-12)


# -- empirical capacity -------------------------------------------------------

def test_empirical_capacity_examples():
    assert empirical_capacity(MatchOutcome(np.zeros((1, 2), int), 1, 0, 0)) == pytest.approx(2 / 3)
    assert empirical_capacity(MatchOutcome(np.zeros((0, 2), int), 3, 0, 0)) == 0.0
    assert empirical_capacity(MatchOutcome(np.zeros((4, 2), int), 0, 0, 5)) == 1.0
    with pytest.raises(DegenerateOutcomeError):
        empirical_capacity(MatchOutcome(np.zeros((0, 2), int), 0, 0, 7))


@pytest.mark.parametrize("model", [M.exponential(), M.erlang(2), M.uniform()], ids=str)
@pytest.mark.parametrize("delta", [0.5, 1.0, 4.0])
def test_bgm_and_chain_agree(model, delta):
    rng = np.random.default_rng(77)
    s = generate_renewal(model, 10 ** 6, rng)
    t = generate_renewal(model, 10 ** 6, rng)
    c_bgm = empirical_capacity(bgm_match(s, t, delta))
    tr = simulate_chain(model, delta, 10 ** 6, np.random.default_rng(78))
    assert c_bgm == pytest.approx(capacity_from_occupancy(tr.occupancy), abs=0.01)


def test_scale_free():
    # (rate, Delta) and (2 rate, Delta / 2) describe the same problem
    rng = np.random.default_rng(12)
    s = generate_renewal(M.weibull(0.6, rate=1.0), 50_000, rng)
    t = generate_renewal(M.weibull(0.6, rate=1.0), 50_000, rng)
    a = empirical_capacity(bgm_match(s, t, 1.3))
    b = empirical_capacity(bgm_match(s.scaled(0.5), t.scaled(0.5), 0.65))
    assert a == pytest.approx(b, abs=1e-12)
