"""Brute-force references for verifying the solver on small problems.

Nothing here is used by the solver itself.  The functions recompute
quantities the solver obtains from closed forms or factored formulas, by
slower but independent means.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .flow import FactoredPerturbation
from .linalg import inner, nearest_triple
from .structure import StructureMode


@dataclass(frozen=True)
class OracleConfig:
    """Settings shared by the oracles.

    Attributes
    ----------
    seed : int
    n_samples : int
        Number of random starts (or samples) per oracle call.
    fd_step : float
        Central-difference step, in ``[1e-8, 1e-4]``.
    search_resolution : int
        Number of ranked starts polished by the local solver.
    """

    seed: int = 0
    n_samples: int = 100
    fd_step: float = 1e-6
    search_resolution: int = 5

    def __post_init__(self):
        if not 1e-8 <= self.fd_step <= 1e-4:
            raise ValueError("fd_step must lie in [1e-8, 1e-4]")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")


def r_value(A, eps, E, mode, target):
    """``y^H x`` of the eigenvalue of ``A + eps E`` nearest ``target``."""
    M = np.asarray(A) + eps * np.asarray(E)
    return nearest_triple(M.real if mode.is_real else M, target,
                          force_real=mode.is_real).r


def fd_directional(A, eps, E, D, mode=None, target=None, h=1e-6):
    """Central difference of ``r`` along ``t -> (E + t D) / ||E + t D||``.

    Parameters
    ----------
    E : (n, n) ndarray
        Unit-norm admissible perturbation.
    D : (n, n) ndarray
        Direction tangent to the sphere at ``E``.
    target : complex
        Eigenvalue of ``A + eps E`` to follow; defaults to the one nearest
        the first eigenvalue of ``A + eps E``.

    Returns
    -------
    float
        Approximation of ``d r / d t`` at ``t = 0``.
    """
    mode = mode or StructureMode.complex_full()
    E, D = np.asarray(E), np.asarray(D)
    if target is None:
        target = np.linalg.eigvals(np.asarray(A) + eps * E)[0]

    def at(t):
        Et = E + t * D
        return r_value(A, eps, Et / np.linalg.norm(Et), mode, target)

    return (at(h) - at(-h)) / (2.0 * h)


def predicted_directional(state, D):
    """Closed-form ``d r / d t = eps r <D, S_active>`` for comparison."""
    return state.epsilon * state.r * inner(np.asarray(D), state.S)


def _disc(M):
    return (M[0, 0] - M[1, 1]) ** 2 + 4.0 * M[0, 1] * M[1, 0]


def brute_force_2x2(A, mode=None, grid=None, config=None):
    """Distance from a 2x2 matrix to the defective matrices, by direct search.

    A 2x2 matrix is defective (or scalar) exactly when the discriminant
    ``(a - d)^2 + 4 b c`` of its characteristic polynomial vanishes.  The
    minimum of ``||Delta||_F`` subject to that equation is found by ranking
    a seeded random sample of starts, then polishing the best ones with
    SLSQP.

    Parameters
    ----------
    A : (2, 2) array_like
    mode : StructureMode
        Restricts ``Delta`` to real and/or masked entries.
    grid : int, optional
        Number of starts polished; overrides ``config.search_resolution``.
    config : OracleConfig

    Returns
    -------
    float
    """
    config = config or OracleConfig()
    mode = mode or StructureMode.complex_full()
    A = np.asarray(A, dtype=complex)
    if A.shape != (2, 2):
        raise ValueError("brute_force_2x2 needs a 2x2 matrix")
    idx = np.flatnonzero(mode.mask.ravel()) if mode.is_pattern else np.arange(4)
    nre = idx.size
    npar = nre if mode.is_real else 2 * nre

    def delta(p):
        d = np.zeros(4, dtype=complex)
        d[idx] = p[:nre] if mode.is_real else p[:nre] + 1j * p[nre:]
        return d.reshape(2, 2)

    def cons(p):
        g = _disc(A + delta(p))
        # real data gives a real discriminant
        return [g.real] if mode.is_real else [g.real, g.imag]

    res = grid or config.search_resolution
    rng = np.random.default_rng(config.seed)
    scale = max(1.0, np.abs(A).max())
    # coarse search: rank starts by the discriminant they leave
    starts = rng.uniform(-scale, scale, size=(config.n_samples, npar))
    starts = np.vstack([np.zeros(npar), starts])
    merit = np.array([np.linalg.norm(cons(p)) + np.linalg.norm(p) for p in starts])
    best = np.inf
    for p0 in starts[np.argsort(merit)[:max(res, 8)]]:
        out = minimize(lambda p: p @ p, p0, jac=lambda p: 2 * p, method="SLSQP",
                       constraints={"type": "eq", "fun": cons},
                       options={"ftol": 1e-14, "maxiter": 500})
        if out.success and np.linalg.norm(cons(out.x)) < 1e-9 * scale ** 2:
            best = min(best, float(np.sqrt(out.x @ out.x)))
    return best


def tangent_projection(E, Z):
    """Orthogonal projection of ``Z`` onto the tangent space at factored ``E``.

    ``P_E(Z) = Z - (I - U U^H) Z (I - V V^H)``.
    """
    U, V = E.U, E.V
    n = U.shape[0]
    PU = np.eye(n) - U @ U.conj().T
    PV = np.eye(n) - V @ V.conj().T
    return Z - PU @ Z @ PV


def dense_group_inverse(M, lam):
    """Group inverse of ``M - lam I`` from a full eigendecomposition.

    ``X diag(d) X^{-1}`` with ``d_i = 1 / (mu_i - lam)`` except ``d = 0`` at
    the eigenvalue nearest ``lam``; valid for diagonalizable ``M``.
    """
    mu, X = np.linalg.eig(np.asarray(M, dtype=complex))
    i = int(np.argmin(np.abs(mu - lam)))
    d = np.zeros_like(mu)
    mask = np.arange(mu.size) != i
    d[mask] = 1.0 / (mu[mask] - mu[i])
    return X @ np.diag(d) @ np.linalg.inv(X)


def dense_reference_rhs(state, mode=None):
    """Dense right-hand side computed independently of the factored formulas.

    For factored ``E`` this is ``-P_E(S) + Re<E, P_E(S)> E`` with ``S`` the
    active gradient rebuilt from the eigentriple and an eigendecomposition
    group inverse.  For dense ``E`` it is ``-S + Re<E, S> E``.
    """
    mode = mode or state.mode
    t = state.triple
    G = dense_group_inverse(state.A + state.epsilon * state.E.dense(), t.lam)
    Gy, GHx = G @ t.y, G.conj().T @ t.x
    S = mode.project(np.outer(t.y, Gy.conj()) + np.outer(GHx, t.x.conj()))
    E = state.E.dense()
    if isinstance(state.E, FactoredPerturbation):
        S = tangent_projection(state.E, S)
    return -S + inner(E, S) * E
