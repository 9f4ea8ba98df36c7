import numpy as np
import pytest

from defectivity.exceptions import (
    DegenerateDerivative,
    MaxStepsExceeded,
    MaxOuterIterations,
    NotStationary,
)
from defectivity.flow import FlowOptions, integrate_to_stationary
from defectivity.outer import (
    COALESCED,
    OuterOptions,
    puiseux_diagnostics,
    puiseux_step,
    r_of_eps,
    r_prime,
    solve_distance,
)
from defectivity.structure import StructureMode

from conftest import random_case

C = StructureMode.complex_full()
R = StructureMode.real_full()
EX1_TARGET = 1.4162 + 1.2605j
GR_TARGET = 1.1391 + 1.2303j
OPTS = OuterOptions(theta=0.8)


@pytest.fixture(scope="module")
def ex1_report():
    from defectivity.io import example1
    return solve_distance(example1(), C, delta=1e-3, tol=1e-6, eps0=0.05,
                          target_lambda=EX1_TARGET, opts=OPTS)


@pytest.fixture(scope="module")
def grcar_real_report():
    from defectivity.io import grcar
    return solve_distance(grcar(6), R, delta=1e-3, tol=1e-6, eps0=0.1,
                          target_lambda=GR_TARGET, opts=OPTS)


# Puiseux step

def test_puiseux_step_exact_on_model():
    gamma, eps_star = 0.7, 0.3
    eps_k = 0.2
    r_k = gamma * np.sqrt(eps_star - eps_k)
    rp_k = -gamma / (2 * np.sqrt(eps_star - eps_k))
    g, es, en = puiseux_step(eps_k, r_k, rp_k, 1e-2)
    assert g == pytest.approx(gamma, rel=1e-14)
    assert es == pytest.approx(eps_star, rel=1e-14)
    assert gamma * np.sqrt(es - en) == pytest.approx(1e-2, rel=1e-12)


def test_puiseux_step_delta_zero_returns_eps_star():
    _, es, en = puiseux_step(0.1, 0.2, -0.5, 0.0)
    assert en == es == pytest.approx(0.3)


def test_puiseux_step_degenerate():
    with pytest.raises(DegenerateDerivative):
        puiseux_step(0.1, 0.2, 0.0, 1e-3)


# r(eps)

def test_r_of_eps_zero_is_unperturbed(ex1):
    from defectivity.linalg import nearest_triple
    r, t = r_of_eps(ex1, 0.0, C, target_lambda=EX1_TARGET)
    assert r == pytest.approx(nearest_triple(ex1, EX1_TARGET).r)


def test_r_of_eps_negative(ex1):
    with pytest.raises(ValueError):
        r_of_eps(ex1, -1.0, C, target_lambda=EX1_TARGET)


def test_r_of_eps_example1_value(ex1):
    r, st = r_of_eps(ex1, 0.081430080372979, C, target_lambda=EX1_TARGET)
    assert r == pytest.approx(0.031280705, abs=2e-3)


def test_r_of_eps_grcar_real_value(grcar6):
    r, st = r_of_eps(grcar6, 0.300624120783464, R, target_lambda=GR_TARGET)
    assert r == pytest.approx(0.014186043, abs=2e-3)


def test_r_of_eps_past_coalescence(grcar6):
    r, st = r_of_eps(grcar6, 0.35, R, target_lambda=GR_TARGET)
    assert r is COALESCED


def test_r_of_eps_decreasing(ex1):
    vals = []
    warm = None
    for eps in (0.02, 0.04, 0.06, 0.08):
        r, st = r_of_eps(ex1, eps, C, warm, EX1_TARGET)
        vals.append(r)
        warm = st.E
    assert np.all(np.diff(vals) < 0)


# r'(eps)

@pytest.mark.parametrize("name", ["complex", "real", "pattern-complex", "pattern-real"])
def test_r_prime_matches_finite_difference(name):
    A, mode = random_case(3, name)
    from defectivity.initialization import candidate
    cand = candidate(A, mode)
    eps = 0.25 * cand.score
    fo = FlowOptions(tol_inner=1e-10)
    st = integrate_to_stationary(A, eps, None, mode, cand.target, fo)
    rp = r_prime(st)
    assert rp <= 0
    h = 1e-5 * eps
    rpl, _ = r_of_eps(A, eps + h, mode, st.E, cand.target, fo)
    rmi, _ = r_of_eps(A, eps - h, mode, st.E, cand.target, fo)
    fd = (rpl - rmi) / (2 * h)
    assert rp == pytest.approx(fd, rel=1e-4)


def test_r_prime_vanishes_linearly_for_normal_matrix():
    # r = 1 - eps^2 / gap^2 + ... with unit gap
    A = np.diag([0.0, 1.0, 2.0 + 1j])
    for eps in (1e-2, 1e-3):
        st = integrate_to_stationary(A, eps, None, C, 0.0)
        assert r_prime(st) / eps == pytest.approx(-2.0, rel=1e-2)


def test_r_prime_requires_stationarity(ex1):
    with pytest.raises(MaxStepsExceeded) as exc:
        integrate_to_stationary(ex1, 0.05, None, C, EX1_TARGET,
                                FlowOptions(max_steps=1, polish=False))
    with pytest.raises(NotStationary):
        r_prime(exc.value.state)


# outer iteration

def test_example1_distance(ex1_report):
    rep = ex1_report
    assert rep.eps_delta_star == pytest.approx(0.082876706789, rel=1e-6)
    assert rep.n_outer <= 12
    mid = 0.5 * sum(rep.coalescing_lambdas)
    assert abs(mid - (0.9615 + 0.8407j)) < 2e-3


def test_example1_bracket_invariants(ex1_report):
    its = ex1_report.iterates
    for it in its:
        assert it.eps_lo <= it.epsilon <= it.eps_hi
    for a, b in zip(its, its[1:]):
        assert b.eps_lo >= a.eps_lo and b.eps_hi <= a.eps_hi
    finite = [it for it in its if not it.coalesced]
    order = np.argsort([it.epsilon for it in finite])
    rs = np.array([finite[i].r for i in order])
    assert np.all(np.diff(rs) <= 1e-12)


def test_grcar_real_distance(grcar_real_report):
    rep = grcar_real_report
    assert rep.eps_delta_star == pytest.approx(0.3007166107, rel=1e-6)
    assert rep.eps_zero_star == pytest.approx(0.30071707, rel=1e-6)
    assert rep.final_state.r == pytest.approx(1e-3, abs=1e-6)


def test_grcar_complex_below_real(grcar6, grcar_real_report):
    rep = solve_distance(grcar6, C, delta=1e-3, tol=1e-6, eps0=0.1,
                         target_lambda=GR_TARGET, opts=OPTS)
    assert rep.eps_delta_star == pytest.approx(0.2151854363, rel=1e-6)
    assert rep.eps_delta_star <= grcar_real_report.eps_delta_star


def test_warm_and_cold_starts_agree(grcar6, grcar_real_report):
    cold = solve_distance(grcar6, R, delta=1e-3, tol=1e-6, eps0=0.1,
                          target_lambda=GR_TARGET,
                          opts=OuterOptions(theta=0.8, warm_start=False))
    assert cold.eps_delta_star == pytest.approx(grcar_real_report.eps_delta_star, rel=1e-6)


def test_start_past_coalescence(grcar6):
    rep = solve_distance(grcar6, R, delta=1e-3, tol=1e-6, eps0=0.29, eps_hi=0.35,
                         target_lambda=GR_TARGET, opts=OPTS)
    assert rep.eps_delta_star == pytest.approx(0.3007166107, rel=1e-6)


def test_max_outer_iterations_carries_partial_report(grcar6):
    with pytest.raises(MaxOuterIterations) as exc:
        solve_distance(grcar6, R, eps0=0.1, target_lambda=GR_TARGET,
                       opts=OuterOptions(max_outer=2))
    assert len(exc.value.report.iterates) == 2


@pytest.mark.parametrize("kw", [
    dict(delta=-1.0), dict(tol=0.0), dict(eps0=None), dict(eps0=0.5, eps_hi=0.4),
    dict(target_lambda=None),
])
def test_solve_distance_validation(ex1, kw):
    args = dict(delta=1e-3, tol=1e-6, eps0=0.05, target_lambda=EX1_TARGET)
    args.update(kw)
    with pytest.raises(ValueError):
        solve_distance(ex1, C, **args)


# coalescence diagnostics

def test_puiseux_ratio_near_coalescence_complex(ex1_report):
    d = puiseux_diagnostics(ex1_report.final_state)
    assert d.ratio == pytest.approx(1.0, abs=0.05)


def test_structured_ratio_near_coalescence_real(grcar_real_report):
    d = puiseux_diagnostics(grcar_real_report.final_state)
    assert d.structured_ratio == pytest.approx(1.0, abs=0.05)


def test_tol_bracket_rule_warns_when_r_below_delta(grcar6, caplog):
    # with r > tol as the only test, eps with r just under delta becomes a lower end
    with pytest.raises(MaxOuterIterations):
        solve_distance(grcar6, R, delta=1e-3, tol=1e-6, eps0=0.1, eps_hi=0.8721,
                       target_lambda=GR_TARGET,
                       opts=OuterOptions(bracket_rule="tol", max_outer=8))
    assert "becomes the lower bracket end" in caplog.text
