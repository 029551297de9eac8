import math

import numpy as np
import pytest

from ctmcgap import (InvalidInputError, ObservableFunction,
                     ctmc_hoeffding_bound, density_pnorm, lezaud_bound,
                     nu_initial_bound, stationary_distribution, verify)
from conftest import THREE_STATE_GAP, THREE_STATE_PI


# ------------------------------------------------------------------ main bound

def test_main_bound_unit_exponent():
    assert ctmc_hoeffding_bound(1.0, 1.0, 1.0, 0.0, 1.0) == math.exp(-1.0)


def test_main_bound_eps_doubling_quartics():
    b1 = ctmc_hoeffding_bound(2.0, 5.0, 0.1, 0.0, 1.0)
    b2 = ctmc_hoeffding_bound(2.0, 5.0, 0.2, 0.0, 1.0)
    assert abs(b2 - b1 ** 4) < 1e-14


def test_main_bound_monotonicity():
    base = dict(lam=1.5, t=10.0, eps=0.1, lower=0.0, upper=1.0)

    def f(**kw):
        args = {**base, **kw}
        return ctmc_hoeffding_bound(args["lam"], args["t"], args["eps"],
                                    args["lower"], args["upper"])

    assert f(lam=2.0) < f()
    assert f(t=20.0) < f()
    assert f(eps=0.2) < f()
    assert f(upper=2.0) > f()  # looser declared range weakens the bound


def test_main_bound_input_guards():
    with pytest.raises(InvalidInputError):
        ctmc_hoeffding_bound(-0.1, 1.0, 0.1, 0.0, 1.0)
    with pytest.raises(InvalidInputError):
        ctmc_hoeffding_bound(1.0, 0.0, 0.1, 0.0, 1.0)
    with pytest.raises(InvalidInputError):
        ctmc_hoeffding_bound(1.0, 1.0, 0.1, 1.0, 1.0)


# ------------------------------------------------------- exponent-12 variants

def test_lezaud_unit_values():
    cmp = lezaud_bound(12.0, 1.0, 1.0)
    assert cmp.classical == math.exp(-1.0)
    assert cmp.improved == math.exp(-3.0)


def test_lezaud_factor_three_exponent():
    rng = np.random.default_rng(1)
    for _ in range(50):
        lam, t, eps = rng.uniform(0.1, 5.0, size=3)
        cmp = lezaud_bound(lam, t, eps)
        assert cmp.improved <= cmp.classical
        assert abs(math.log(cmp.improved) / math.log(cmp.classical)
                   - 3.0) < 1e-9


# ----------------------------------------------------------------- density norm

def test_density_norm_of_pi_is_one():
    for p in (1.0, 2.0, 7.5, math.inf):
        assert abs(density_pnorm(THREE_STATE_PI, THREE_STATE_PI, p)
                   - 1.0) < 1e-12


def test_density_norm_l1_is_always_one():
    nu = np.array([0.9, 0.05, 0.05])
    assert abs(density_pnorm(nu, THREE_STATE_PI, 1.0) - 1.0) < 1e-12


def test_density_norm_point_mass():
    nu = np.array([1.0, 0.0, 0.0])
    # sup norm: 1/pi_0 = 3; quadratic norm: sqrt(1/pi_0) = sqrt(3)
    assert abs(density_pnorm(nu, THREE_STATE_PI, math.inf) - 3.0) < 1e-12
    assert abs(density_pnorm(nu, THREE_STATE_PI, 2.0)
               - math.sqrt(3.0)) < 1e-12


def test_density_norm_guards():
    with pytest.raises(InvalidInputError):
        density_pnorm(np.array([0.5, 0.5, 0.5]), THREE_STATE_PI, 2.0)
    with pytest.raises(InvalidInputError):
        density_pnorm(THREE_STATE_PI, THREE_STATE_PI, 0.5)


# -------------------------------------------------------------- nu-start bound

def test_nu_bound_reduces_to_main_bound_exactly():
    # stationary start, sup-norm density 1: bit-for-bit the main bound
    for lam, t, eps in [(1.0, 1.0, 1.0), (2.2, 20.0, 0.05), (0.3, 7.0, 0.4)]:
        assert nu_initial_bound(lam, t, eps, 0.0, 1.0, math.inf, 1.0) == \
            ctmc_hoeffding_bound(lam, t, eps, 0.0, 1.0)


def test_nu_bound_quadratic_start_halves_exponent():
    lam, t, eps = 2.0, 10.0, 0.1
    norm = math.sqrt(3.0)
    b = nu_initial_bound(lam, t, eps, 0.0, 1.0, 2.0, norm)
    main = ctmc_hoeffding_bound(lam, t, eps, 0.0, 1.0)
    assert abs(math.log(b / norm) - 0.5 * math.log(main)) < 1e-12


def test_nu_bound_guards():
    with pytest.raises(InvalidInputError):
        nu_initial_bound(1.0, 1.0, 0.1, 0.0, 1.0, 1.0, 1.0)  # p must be > 1
    with pytest.raises(InvalidInputError):
        nu_initial_bound(1.0, 1.0, 0.1, 0.0, 1.0, 2.0, 0.5)  # norm < 1


# -------------------------------------------------------------------- verifier

def _unit_indicator():
    return ObservableFunction([0.0, 0.0, 1.0], 0.0, 1.0)


def test_verify_small_run_passes(three_state):
    rep = verify(three_state, _unit_indicator(), t=20.0,
                 eps_grid=[0.1, 0.2], reps=500, seed=7)
    assert rep.all_pass
    assert abs(rep.gap - THREE_STATE_GAP) < 1e-10
    assert abs(rep.pi_g - 5.0 / 9.0) < 1e-12
    for r in rep.rows:
        assert r.verdict == "PASS"
        assert r.p_hat <= r.bound_main + (r.ci_upper - r.p_hat)
        assert r.bound_lezaud is None  # hypotheses not asserted
    assert not rep.lezaud_hypotheses_asserted


def test_verify_rows_sorted_by_eps(three_state):
    rep = verify(three_state, _unit_indicator(), t=10.0,
                 eps_grid=[0.3, 0.1, 0.2], reps=50, seed=7)
    assert [r.eps for r in rep.rows] == [0.1, 0.2, 0.3]


def test_verify_common_random_numbers_make_p_hat_monotone(three_state):
    rep = verify(three_state, _unit_indicator(), t=10.0,
                 eps_grid=[0.05, 0.1, 0.15, 0.2], reps=300, seed=11)
    p = [r.p_hat for r in rep.rows]
    assert all(a >= b for a, b in zip(p, p[1:]))


def test_verify_deterministic_report(three_state):
    kw = dict(t=15.0, eps_grid=[0.1, 0.2], reps=400, seed=2)
    a = verify(three_state, _unit_indicator(), **kw)
    b = verify(three_state, _unit_indicator(), **kw)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()


def test_verify_single_rep_is_uninformative(three_state):
    # A single replication can never be informative, whichever way the
    # one draw falls: hit (p_hat = 1, no upward slack but huge downward
    # slack) or miss (p_hat = 0, huge upward slack).
    rep = verify(three_state, _unit_indicator(), t=5.0, eps_grid=[0.1],
                 reps=1, seed=3)
    assert rep.rows[0].uninformative

    # eps = 0.5 makes the event impossible (the observable is bounded by
    # 1), so the single draw misses: the upward slack alone is wide.
    rep_miss = verify(three_state, _unit_indicator(), t=5.0,
                      eps_grid=[0.5], reps=1, seed=3)
    assert rep_miss.rows[0].p_hat == 0.0
    assert rep_miss.rows[0].uninformative
    assert rep_miss.rows[0].verdict == "PASS"  # slack covers everything


def test_verify_lezaud_rows_when_asserted(three_state):
    rep = verify(three_state, _unit_indicator(), t=10.0, eps_grid=[0.1],
                 reps=50, seed=1, assert_lezaud_hypotheses=True)
    r = rep.rows[0]
    assert abs(r.bound_lezaud
               - math.exp(-rep.gap * 10.0 * 0.1 ** 2 / 12.0)) < 1e-15
    assert rep.lezaud_hypotheses_asserted


def test_verify_nu_start(three_state):
    nu = np.array([1.0, 0.0, 0.0])
    rep = verify(three_state, _unit_indicator(), t=20.0, eps_grid=[0.1],
                 reps=400, seed=9, init=nu, p=2.0)
    r = rep.rows[0]
    assert r.bound_nu is not None
    expect = math.sqrt(3.0) * math.exp(
        -rep.gap * 20.0 * 0.01 / (2.0 * 1.0))
    assert abs(r.bound_nu - expect) < 1e-12
    assert r.verdict == "PASS"


def test_verify_nu_requires_p(three_state):
    with pytest.raises(InvalidInputError, match="p"):
        verify(three_state, _unit_indicator(), t=5.0, eps_grid=[0.1],
               reps=10, seed=0, init=np.array([1.0, 0.0, 0.0]))


def test_verify_input_guards(three_state):
    g = _unit_indicator()
    with pytest.raises(InvalidInputError):
        verify(three_state, g, t=5.0, eps_grid=[], reps=10, seed=0)
    with pytest.raises(InvalidInputError):
        verify(three_state, g, t=5.0, eps_grid=[0.1], reps=0, seed=0)
    with pytest.raises(InvalidInputError):
        verify(three_state, g, t=-5.0, eps_grid=[0.1], reps=10, seed=0)
    with pytest.raises(InvalidInputError, match="ObservableFunction"):
        verify(three_state, np.array([0.0, 0.0, 1.0]), t=5.0,
               eps_grid=[0.1], reps=10, seed=0)


def test_verify_csv_schema(three_state):
    rep = verify(three_state, _unit_indicator(), t=5.0, eps_grid=[0.1],
                 reps=20, seed=0)
    lines = rep.to_csv().splitlines()
    assert lines[0] == ("eps,t,reps,p_hat,ci_upper,bound_main,bound_lezaud,"
                        "verdict,gap,gap_method")
    cells = lines[1].split(",")
    assert cells[6] == ""              # no exponent-12 bound by default
    assert cells[7] in ("PASS", "FAIL")
    assert float(cells[8]) == rep.gap