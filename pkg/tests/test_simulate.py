import numpy as np
import pytest

from ctmcgap import (ExplosionGuardError, InvalidInputError,
                     ObservableFunction, build_three_state,
                     clopper_pearson_upper, sample_path,
                     stationary_distribution, substream,
                     tail_probability_mc)
from conftest import THREE_STATE_PI


# ------------------------------------------------------------------- sampling

def test_zero_horizon_path(three_state):
    s = sample_path(three_state, 1, 0.0, substream(0, 0), g=[0.0, 1.0, 0.0])
    assert s.states.tolist() == [1]
    assert s.jump_times.tolist() == [0.0]
    assert s.time_average == 1.0  # value at the initial state


def test_path_structure(three_state):
    s = sample_path(three_state, 0, 50.0, substream(1, 0))
    assert s.jump_times[0] == 0.0 and s.states[0] == 0
    assert np.all(np.diff(s.jump_times) > 0)
    assert np.all(s.jump_times < 50.0)
    assert s.states.size == s.jump_times.size
    # consecutive states always differ (jump chain)
    assert np.all(np.diff(s.states) != 0)


def test_path_bitwise_reproducible(three_state):
    a = sample_path(three_state, 0, 25.0, substream(42, 3), g=[0.0, 0.0, 1.0])
    b = sample_path(three_state, 0, 25.0, substream(42, 3), g=[0.0, 0.0, 1.0])
    assert np.array_equal(a.jump_times, b.jump_times)
    assert np.array_equal(a.states, b.states)
    assert a.time_average == b.time_average


def test_substreams_differ(three_state):
    a = sample_path(three_state, 0, 25.0, substream(42, 0))
    b = sample_path(three_state, 0, 25.0, substream(42, 1))
    assert a.jump_times.size != b.jump_times.size or \
        not np.array_equal(a.jump_times, b.jump_times)


def test_average_method_matches_inline(three_state):
    g = [0.0, 1.0, 2.0]
    s = sample_path(three_state, 0, 30.0, substream(5, 0), g=g)
    assert abs(s.average(g) - s.time_average) < 1e-15


def test_two_state_occupation_long_run(two_state):
    # pi = (1/3, 2/3); a long path spends about 2/3 of its time in state 1
    s = sample_path(two_state, 0, 10_000.0, substream(7, 0), g=[0.0, 1.0])
    assert abs(s.time_average - 2.0 / 3.0) < 0.02


def test_jump_count_scale(two_state):
    # exit rates are 2 and 1, so with occupation (1/3, 2/3) the expected
    # jump rate is 4/3 per unit time
    counts = [sample_path(two_state, 0, 100.0, substream(11, r)).states.size
              for r in range(300)]
    assert abs(np.mean(counts) / 100.0 - 4.0 / 3.0) < 0.05


def test_explosion_guard(two_state):
    with pytest.raises(ExplosionGuardError):
        sample_path(two_state, 0, 1e6, substream(0, 0), max_jumps=50)


def test_sample_path_input_guards(three_state):
    with pytest.raises(InvalidInputError):
        sample_path(three_state, 5, 1.0, substream(0, 0))
    with pytest.raises(InvalidInputError):
        sample_path(three_state, 0, -1.0, substream(0, 0))
    with pytest.raises(InvalidInputError):
        sample_path(three_state, 0, 1.0, substream(0, 0), g=[1.0, 2.0])


# -------------------------------------------------------------- tail estimates

def test_stationary_mean_consistency(three_state):
    # stationary start: the expected time average equals pi(g) exactly;
    # check the empirical mean against a 4-sigma band
    g = np.array([0.0, 0.0, 1.0])
    pig = float(THREE_STATE_PI @ g)
    reps = 2000
    avgs = []
    init_cum = np.cumsum(THREE_STATE_PI)
    for r in range(reps):
        rng = substream(99, r)
        x0 = int(np.searchsorted(init_cum, rng.random(), side="right"))
        avgs.append(sample_path(three_state, min(x0, 2), 5.0, rng,
                                g=g).time_average)
    assert abs(np.mean(avgs) - pig) < 4.0 * np.std(avgs) / np.sqrt(reps)


def test_tail_estimate_reproducible(three_state):
    g = ObservableFunction([0.0, 0.0, 1.0], 0.0, 1.0)
    kwargs = dict(init=THREE_STATE_PI, horizon=10.0, eps=0.1, reps=400,
                  seed=123)
    a = tail_probability_mc(three_state, g, **kwargs)
    b = tail_probability_mc(three_state, g, **kwargs)
    assert a.to_json() == b.to_json()
    assert a.count == round(a.p_hat * a.reps)


def test_tail_estimate_workers_equivalent(three_state):
    g = ObservableFunction([0.0, 0.0, 1.0], 0.0, 1.0)
    serial = tail_probability_mc(three_state, g, THREE_STATE_PI, 10.0, 0.1,
                                 300, seed=5, workers=1)
    parallel = tail_probability_mc(three_state, g, THREE_STATE_PI, 10.0, 0.1,
                                   300, seed=5, workers=3)
    assert serial.to_json() == parallel.to_json()


def test_tail_impossible_event_is_zero(three_state):
    # max average is 1 and pi(g) = 5/9, so a deviation of 0.5 cannot happen
    g = ObservableFunction([0.0, 0.0, 1.0], 0.0, 1.0)
    est = tail_probability_mc(three_state, g, THREE_STATE_PI, 5.0, 0.5, 200,
                              seed=1)
    assert est.p_hat == 0.0
    assert est.ci_upper < 0.05


def test_tail_certain_event_is_one(three_state):
    # constant observable: average equals the mean, so deviation >= eps
    # never happens ... but with threshold below 0 it always does
    g = ObservableFunction([1.0, 1.0, 1.0], 0.0, 2.0)
    est = tail_probability_mc(three_state, g, THREE_STATE_PI, 5.0, 0.3, 100,
                              seed=1)
    assert est.p_hat == 0.0
    est2 = tail_probability_mc(three_state, g, THREE_STATE_PI, 5.0, 0.3, 100,
                               seed=1, mean=0.5)
    assert est2.p_hat == 1.0
    assert est2.ci_upper == 1.0


def test_tail_input_guards(three_state):
    g = ObservableFunction([0.0, 0.0, 1.0], 0.0, 1.0)
    with pytest.raises(InvalidInputError, match="sums"):
        tail_probability_mc(three_state, g, np.array([0.5, 0.2, 0.2]), 5.0,
                            0.1, 10, seed=0)
    with pytest.raises(InvalidInputError, match="reps"):
        tail_probability_mc(three_state, g, THREE_STATE_PI, 5.0, 0.1, 0,
                            seed=0)
    with pytest.raises(InvalidInputError):
        tail_probability_mc(three_state, g, THREE_STATE_PI, 0.0, 0.1, 10,
                            seed=0)


# --------------------------------------------------------- confidence interval

def test_clopper_pearson_known_values():
    # at k = 0: 1 - (1 - level)^(1/n)
    for n in (10, 100):
        expect = 1.0 - (1.0 - 0.999) ** (1.0 / n)
        assert abs(clopper_pearson_upper(0, n) - expect) < 1e-12
    assert clopper_pearson_upper(50, 50) == 1.0


def test_clopper_pearson_covers_point_estimate():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 500))
        k = int(rng.integers(0, n + 1))
        assert clopper_pearson_upper(k, n) >= k / n


def test_clopper_pearson_monotone_in_level():
    lo = clopper_pearson_upper(10, 100, level=0.95)
    hi = clopper_pearson_upper(10, 100, level=0.999)
    assert lo < hi


def test_clopper_pearson_guards():
    with pytest.raises(InvalidInputError):
        clopper_pearson_upper(5, 4)
    with pytest.raises(InvalidInputError):
        clopper_pearson_upper(0, 0)
