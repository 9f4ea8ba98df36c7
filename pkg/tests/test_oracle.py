import numpy as np
import pytest

from conftest import MODES, random_case, random_unit
from defectivity.flow import DensePerturbation, integrate_to_stationary, make_state, rhs
from defectivity.initialization import candidate, upper_bound
from defectivity.linalg import inner, nearest_triple
from defectivity.oracle import (
    OracleConfig,
    brute_force_2x2,
    dense_reference_rhs,
    fd_directional,
    predicted_directional,
    r_value,
)
from defectivity.outer import solve_distance
from defectivity.structure import StructureMode

C = StructureMode.complex_full()
R = StructureMode.real_full()


def _dense_state(seed, name, eps=0.2):
    A, mode = random_case(seed, name)
    rng = np.random.default_rng(seed + 7)
    E = random_unit(rng, mode, A.shape)
    lam = candidate(A, mode).target
    t = nearest_triple(A + eps * E, lam, force_real=mode.is_real)
    return make_state(A, eps, DensePerturbation(E), mode, t.lam)


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(fd_step=1e-2)
    with pytest.raises(ValueError):
        OracleConfig(fd_step=1e-10)
    with pytest.raises(ValueError):
        OracleConfig(n_samples=0)


@pytest.mark.parametrize("name", MODES)
def test_fd_along_rhs(name):
    st = _dense_state(1, name)
    D = rhs(st)
    fd = fd_directional(st.A, st.epsilon, st.E.dense(), D, st.mode, st.lam)
    expected = -st.epsilon * st.r * np.linalg.norm(D) ** 2
    assert fd < 0
    assert fd == pytest.approx(expected, rel=1e-4)


@pytest.mark.parametrize("name", MODES)
def test_fd_orthogonal_to_gradient(name):
    st = _dense_state(2, name)
    rng = np.random.default_rng(0)
    E = st.E.dense()
    D = random_unit(rng, st.mode, E.shape)
    W = st.S - inner(st.S, E) * E
    for V in (E, W / np.linalg.norm(W)):
        D = D - inner(D, V) * V
    fd = fd_directional(st.A, st.epsilon, E, D, st.mode, st.lam)
    assert abs(fd) <= 1e-6


def test_fd_rotation_direction_sign():
    st = _dense_state(3, "complex")
    E = st.E.dense()
    D = 1j * E
    fd = fd_directional(st.A, st.epsilon, E, D, st.mode, st.lam)
    pred = predicted_directional(st, D)
    assert np.sign(fd) == np.sign(pred)
    assert fd == pytest.approx(pred, rel=1e-4)


def test_r_value_matches_state():
    st = _dense_state(4, "real")
    assert r_value(st.A, st.epsilon, st.E.dense(), st.mode, st.lam) == pytest.approx(st.r)


def test_brute_force_normal_2x2_against_solver():
    A = np.diag([0.0, 2.0])
    oracle = brute_force_2x2(A, C)
    assert oracle == pytest.approx(1.0, rel=1e-6)
    rep = solve_distance(A, C, delta=1e-3, tol=1e-6, eps0=0.5, eps_hi=2.0, target_lambda=0.0)
    assert oracle - 1e-4 <= rep.eps_zero_star <= upper_bound(A, C)


def test_brute_force_nearly_defective():
    assert brute_force_2x2(np.array([[0.0, 1.0], [0.0, 1e-6]]), C) < 1e-6


def test_brute_force_real_at_least_complex():
    A = np.array([[1.0, 2.0], [-3.0, 0.5]])
    real, cplx = brute_force_2x2(A, R), brute_force_2x2(A, C)
    assert real >= cplx - 1e-10
    assert real > cplx


def test_brute_force_pattern_at_least_full():
    A = np.array([[1.0, 2.0], [-3.0, 0.5]])
    pat = StructureMode.real_pattern(np.eye(2, dtype=bool))
    # diagonal-only perturbations must equalize the diagonal and cancel 4bc
    assert brute_force_2x2(A, pat) >= brute_force_2x2(A, R) - 1e-10


def test_brute_force_deterministic():
    A = np.array([[0.3, 1.0], [0.2, -0.4]])
    cfg = OracleConfig(seed=5)
    assert brute_force_2x2(A, R, config=cfg) == brute_force_2x2(A, R, config=cfg)


def test_brute_force_rejects_non_2x2():
    with pytest.raises(ValueError):
        brute_force_2x2(np.eye(3))


@pytest.mark.parametrize("name", ["complex", "real"])
def test_dense_reference_rhs_vanishes_at_stationary_point(name):
    A, mode = random_case(6, name)
    cand = candidate(A, mode)
    st = integrate_to_stationary(A, 0.25 * cand.score, None, mode, cand.target)
    ref = dense_reference_rhs(st)
    assert np.linalg.norm(ref) <= 1e-6 * np.linalg.norm(st.S)
