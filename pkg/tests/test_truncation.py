import math

import numpy as np
import pytest

from ctmcgap import (CountableModel, InvalidInputError, ObservableFunction,
                     bd_closed_form_gap, collapse, collapse_function,
                     gap_convergence_sweep, spectral_gap,
                     stationary_distribution)
from conftest import THREE_STATE_PI


@pytest.fixture
def geometric_chain():
    # constant-rate chain drifting toward 0: down 2, up 1
    return CountableModel.birth_death(2.0, 1.0)


# ----------------------------------------------------------------- collapsing

def test_collapse_finite_all_but_one_state_is_identity(three_state):
    model = CountableModel.from_generator(three_state, THREE_STATE_PI)
    cm = collapse(model, 2)
    # the lone complement state becomes the tail state with its own rates
    assert np.array_equal(cm.generator.to_dense(), three_state.to_dense())
    assert np.max(np.abs(cm.pi_tilde.probs - THREE_STATE_PI)) < 1e-15
    assert cm.tail_index == 2
    gap = spectral_gap(cm.generator, cm.pi_tilde).gap
    assert abs(gap - spectral_gap(three_state, THREE_STATE_PI).gap) < 1e-12


def test_collapse_finite_explicit_set(three_state):
    model = CountableModel.from_generator(three_state, THREE_STATE_PI)
    cm = collapse(model, [0, 2])
    # retained states keep their rates; state 1 becomes the tail
    expect = np.array([[-2.0, 1.0, 1.0],
                       [1.0, -1.0, 0.0],
                       [1.0, 2.0, -3.0]])
    assert np.max(np.abs(cm.generator.to_dense() - expect)) < 1e-14
    expect_pi = np.array([1.0 / 3.0, 5.0 / 9.0, 1.0 / 9.0])
    assert np.max(np.abs(cm.pi_tilde.probs - expect_pi)) < 1e-15


def test_collapse_prefix_of_geometric_chain(geometric_chain):
    cm = collapse(geometric_chain, 6)
    Qt = cm.generator.to_dense()
    # return rate from the tail state into the retained set
    assert abs(Qt[6, 5] - 1.0) < 1e-12
    assert Qt[5, 6] == 1.0            # outbound rate to the tail
    assert abs(Qt[6, 6] + 1.0) < 1e-12
    # stationary law: geometric on the set, exact tail mass at e
    expect = 0.5 ** np.arange(6) * 0.5
    assert np.max(np.abs(cm.pi_tilde.probs[:6] - expect)) < 1e-14
    assert abs(cm.pi_tilde.probs[6] - 0.5 ** 6) < 1e-14
    resid = np.max(np.abs(cm.pi_tilde.probs @ Qt))
    assert resid < 1e-12


def test_collapse_zero_tail_mass_rejected(three_state):
    model = CountableModel.from_generator(three_state, THREE_STATE_PI)
    with pytest.raises(InvalidInputError, match="tail"):
        collapse(model, 3)
    with pytest.raises(InvalidInputError, match="tail"):
        collapse(model, [0, 1, 2])


def test_collapse_infinite_needs_prefix(geometric_chain):
    with pytest.raises(InvalidInputError, match="prefix"):
        collapse(geometric_chain, [0, 2, 4])


def test_collapse_empty_or_invalid_sets(three_state):
    model = CountableModel.from_generator(three_state, THREE_STATE_PI)
    with pytest.raises(InvalidInputError):
        collapse(model, [])
    with pytest.raises(InvalidInputError):
        collapse(model, [0, 7])
    with pytest.raises(InvalidInputError):
        collapse(model, 0)


def test_countable_model_guards():
    with pytest.raises(InvalidInputError, match="recurrence"):
        CountableModel.birth_death(1.0, 2.0)  # drifts to infinity
    with pytest.raises(InvalidInputError):
        CountableModel.birth_death(-1.0, 0.5)


def test_birth_death_callable_rates_match_constant(geometric_chain):
    callable_model = CountableModel.birth_death(lambda k: 2.0, lambda k: 1.0)
    for n in (1, 3, 7):
        w1, w2 = geometric_chain.weight(n), callable_model.weight(n)
        assert abs(w1 - w2) < 1e-15
        t1, t2 = geometric_chain.tail_weight(n), callable_model.tail_weight(n)
        assert abs(t1 - t2) < 1e-12 * t1


def test_birth_death_level_dependent_rates():
    # service rate grows with the level, so the tail is super-geometric
    model = CountableModel.birth_death(lambda k: float(k), lambda k: 1.0)
    cm8 = collapse(model, 8)
    cm16 = collapse(model, 16)
    g8 = spectral_gap(cm8.generator, cm8.pi_tilde).gap
    g16 = spectral_gap(cm16.generator, cm16.pi_tilde).gap
    assert g8 > 0 and g16 > 0
    # weights are 1/k!; the two collapses must already agree closely
    assert abs(g8 - g16) < 1e-3


# -------------------------------------------------------------------- sweeps

def test_sweep_converges_to_infinite_gap(geometric_chain):
    limit = bd_closed_form_gap(2.0, 1.0, math.inf)
    sweep = gap_convergence_sweep(geometric_chain, [10, 20, 40, 80],
                                  limit_hint=limit)
    dists = [abs(g - limit) for g in sweep.gaps]
    assert all(b < a for a, b in zip(dists, dists[1:]))
    assert math.isnan(sweep.diffs[0])
    assert sweep.diffs[1] == abs(sweep.gaps[1] - sweep.gaps[0])
    assert all(s >= 0 for s in sweep.seconds)


def test_sweep_csv_format(geometric_chain):
    sweep = gap_convergence_sweep(geometric_chain, [5, 10])
    lines = sweep.to_csv().splitlines()
    assert lines[0] == "size,gap,diff,seconds"
    first = lines[1].split(",")
    assert first[0] == "5" and first[2] == ""  # no diff on the first row
    assert float(first[1]) == sweep.gaps[0]


def test_sweep_input_validation(geometric_chain):
    with pytest.raises(InvalidInputError):
        gap_convergence_sweep(geometric_chain, [])
    with pytest.raises(InvalidInputError, match="increasing"):
        gap_convergence_sweep(geometric_chain, [10, 10])
    with pytest.raises(InvalidInputError):
        gap_convergence_sweep(geometric_chain, [0, 5])


# -------------------------------------------------------- observable collapse

def test_collapse_function_prefix():
    g = ObservableFunction([1.0, 2.0, 3.0, 4.0], 0.0, 5.0)
    gt, widened = collapse_function(g, 3)
    assert gt.values.tolist() == [1.0, 2.0, 3.0, 0.0]
    assert not widened
    assert (gt.lower, gt.upper) == (0.0, 5.0)


def test_collapse_function_widens_range():
    g = ObservableFunction([2.0, 3.0], 2.0, 3.0)
    gt, widened = collapse_function(g, 1)
    assert widened
    assert (gt.lower, gt.upper) == (0.0, 3.0)
    assert gt.values.tolist() == [2.0, 0.0]


def test_collapse_function_explicit_set():
    g = ObservableFunction([1.0, 2.0, 3.0], -1.0, 3.0)
    gt, widened = collapse_function(g, [0, 2])
    assert gt.values.tolist() == [1.0, 3.0, 0.0]
    assert not widened


def test_collapse_function_coverage_checked():
    g = ObservableFunction([1.0, 2.0], 0.0, 2.0)
    with pytest.raises(InvalidInputError, match="cover"):
        collapse_function(g, 5)


def test_collapsed_mean_approaches_full_mean(three_state):
    # collapsing all but one state must preserve the stationary mean of an
    # observable vanishing on the complement
    model = CountableModel.from_generator(three_state, THREE_STATE_PI)
    g = ObservableFunction([0.0, 1.0, 0.0], 0.0, 1.0)
    cm = collapse(model, [0, 1])
    gt, _ = collapse_function(g, [0, 1])
    full = float(THREE_STATE_PI @ g.values)
    collapsed = float(cm.pi_tilde.probs @ gt.values)
    assert abs(full - collapsed) < 1e-15
