"""Dense kernels: normalized eigentriples, group inverses and low-rank solves.

Every eigentriple uses the convention ``||x|| = ||y|| = 1`` with ``y^H x``
real and nonnegative.  The group inverse of the index-one matrix
``B = M - lam I`` is never formed densely in the solver; it is applied
through one factorization of the bordered matrix ``B + y x^H``.
"""

from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .exceptions import (
    AmbiguousTarget,
    DegenerateSpectrum,
    NonFinite,
    SingularCapacitance,
    SingularShift,
)

log = logging.getLogger(__name__)

EPS_MACH = np.finfo(float).eps


def inner(A, B):
    """Real Frobenius inner product ``Re trace(A^H B)``."""
    return float(np.vdot(A, B).real)


def _check_finite(M):
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise NonFinite("matrix contains NaN or Inf entries")
    return M


def _check_square(M):
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")


@dataclass(frozen=True)
class EigenTriple:
    """Simple eigenvalue with unit right/left eigenvectors.

    Attributes
    ----------
    lam : complex
        Eigenvalue.
    x, y : ndarray
        Right and left eigenvectors, unit 2-norm, ``y^H x >= 0``.
    r : float
        ``y^H x``, the reciprocal of the eigenvalue condition number.
    """

    lam: complex
    x: np.ndarray
    y: np.ndarray
    r: float

    @property
    def kappa(self):
        return np.inf if self.r == 0 else 1.0 / self.r

    @property
    def is_real(self):
        return not (np.iscomplexobj(self.x) or np.iscomplexobj(self.y))


def _realify(v):
    # A real eigenvalue of a real matrix has a real eigenvector up to phase.
    k = np.argmax(np.abs(v))
    v = v * np.exp(-1j * np.angle(v[k]))
    if np.max(np.abs(v.imag)) > 1e-10 * np.linalg.norm(v):
        return None
    return v.real.copy()


def normalize_pair(lam, x, y, force_real=False):
    """Scale ``x``, ``y`` to unit norm and rotate ``y`` so ``y^H x >= 0``.

    Parameters
    ----------
    lam : complex
    x, y : ndarray
        Raw right and left eigenvectors.
    force_real : bool
        When true and ``lam`` is real, return real vectors.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if force_real and lam.imag == 0:
        xr = x.real.copy() if not np.iscomplexobj(x) else _realify(x)
        yr = y.real.copy() if not np.iscomplexobj(y) else _realify(y)
        if xr is not None and yr is not None:
            x, y = xr, yr
            lam = complex(lam.real, 0.0)
    x = x / np.linalg.norm(x)
    y = y / np.linalg.norm(y)
    c = np.vdot(y, x)
    if np.iscomplexobj(x) or np.iscomplexobj(y):
        y = y * np.exp(1j * np.angle(c))
        r = abs(c)
    else:
        if c < 0:
            y = -y
        r = abs(c)
    return EigenTriple(complex(lam), x, y, float(r))


def _is_real_matrix(M):
    return not np.iscomplexobj(M) or not np.any(M.imag)


def eig_pairs(M, gap_tol=1e-12):
    """All eigentriples of ``M``.

    Right vectors come from ``eig(M)``, left vectors from an independent
    ``eig(M^H)`` matched by nearest conjugate eigenvalue.

    Parameters
    ----------
    M : (n, n) array_like
    gap_tol : float
        Eigenvalues closer than ``gap_tol * ||M||_F`` are treated as
        multiple.

    Returns
    -------
    list of EigenTriple

    Raises
    ------
    DegenerateSpectrum
        If the spectrum is not numerically simple or the matching is not
        one to one.
    NonFinite
        If the input or the decomposition contains NaN or Inf.
    """
    M = _check_finite(M)
    _check_square(M)
    real = _is_real_matrix(M)
    if real:
        M = M.real
    n = M.shape[0]
    w, X = sla.eig(M)
    wl, Y = sla.eig(M.conj().T)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(X))):
        raise NonFinite("eigendecomposition produced non-finite values")
    thr = gap_tol * max(np.linalg.norm(M), np.finfo(float).tiny)
    if n > 1:
        d = np.abs(w[:, None] - w[None, :]) + np.diag(np.full(n, np.inf))
        if d.min() <= thr:
            raise DegenerateSpectrum(
                f"eigenvalues separated by {d.min():.3e} <= {thr:.3e}")
    dist = np.abs(w[:, None] - wl.conj()[None, :])
    match = np.argmin(dist, axis=1)
    if len(set(match.tolist())) != n:
        raise DegenerateSpectrum("left/right eigenvalue matching is ambiguous")
    return [normalize_pair(w[i], X[:, i], Y[:, match[i]], force_real=real)
            for i in range(n)]


def nearest_triple(M, target, gap_tol=1e-12, strict=False, force_real=None):
    """Eigentriple of ``M`` whose eigenvalue is closest to ``target``.

    Parameters
    ----------
    M : (n, n) array_like
    target : complex
    gap_tol : float
        Relative separation below which the selected eigenvalue counts as
        multiple.
    strict : bool
        Raise :class:`AmbiguousTarget` on an exact tie instead of picking
        the eigenvalue with smaller imaginary part.
    force_real : bool, optional
        Return real vectors for a real eigenvalue.  Defaults to whether
        ``M`` is real.
    """
    M = np.asarray(M)
    if force_real is None:
        force_real = _is_real_matrix(M)
    if force_real and np.iscomplexobj(M):
        M = M.real
    w, X = sla.eig(M)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(X))):
        raise NonFinite("eigendecomposition produced non-finite values")
    d = np.abs(w - target)
    order = np.argsort(d, kind="stable")
    i = order[0]
    if len(w) > 1:
        j = order[1]
        if d[j] - d[i] <= 1e-14:
            if strict:
                raise AmbiguousTarget(
                    f"eigenvalues {w[i]} and {w[j]} are equidistant from {target}")
            if w[j].imag < w[i].imag:
                i = j
            log.debug("tie at target %s broken towards %s", target, w[i])
        gap = np.min(np.abs(np.delete(w, i) - w[i]))
        if gap <= gap_tol * np.linalg.norm(M):
            raise DegenerateSpectrum(f"eigenvalue {w[i]} is not simple (gap {gap:.3e})")
    lam = w[i]
    wl, Y = sla.eig(M.conj().T)
    j = np.argmin(np.abs(wl.conj() - lam))
    return normalize_pair(lam, X[:, i], Y[:, j], force_real=force_real)


class SpectralFactor:
    """Diagonalization ``A = V D V^{-1}`` used for shifted solves.

    Parameters
    ----------
    A : (n, n) array_like
        Diagonalizable matrix.
    """

    def __init__(self, A):
        A = _check_finite(A)
        _check_square(A)
        self.D, self.V = sla.eig(A)
        self.Vinv = np.linalg.inv(self.V)

    def solver(self, shift):
        """Return ``v -> (A - shift I)^{-1} v``."""
        d = self.D - shift
        if np.min(np.abs(d)) == 0:
            raise SingularShift("shift coincides with an eigenvalue of A")

        def solve(v):
            v = np.asarray(v)
            dd = d if v.ndim == 1 else d[:, None]
            return self.V @ ((self.Vinv @ v) / dd)
        return solve

    def solver_h(self, shift):
        """Return ``v -> (A - shift I)^{-H} v``."""
        d = (self.D - shift).conj()
        if np.min(np.abs(d)) == 0:
            raise SingularShift("shift coincides with an eigenvalue of A")

        def solve(v):
            v = np.asarray(v)
            dd = d if v.ndim == 1 else d[:, None]
            return self.Vinv.conj().T @ ((self.V.conj().T @ v) / dd)
        return solve


def smw_solve(base_solver, U1, Sigma1, V1, v, cond_max=None):
    """Solve ``(A0 + U1 Sigma1 V1^H) w = v`` given a solver for ``A0``.

    Uses the push-through form of the Sherman-Morrison-Woodbury identity,
    ``w = A0^{-1} v - W (I + Sigma1 V1^H W)^{-1} Sigma1 V1^H A0^{-1} v``
    with ``W = A0^{-1} U1``, which stays valid when ``Sigma1`` is singular.

    Parameters
    ----------
    base_solver : callable
        Applies ``A0^{-1}`` to a vector or to the columns of a matrix.
    U1, V1 : (n, l) array_like
    Sigma1 : (l, l) array_like
    v : (n,) array_like
    cond_max : float, optional
        Capacitance condition number above which the system counts as
        singular; defaults to ``1e-3 / eps``.

    Raises
    ------
    SingularCapacitance
    """
    U1 = np.asarray(U1)
    V1 = np.asarray(V1)
    Sigma1 = np.asarray(Sigma1)
    w0 = base_solver(v)
    ell = U1.shape[1] if U1.ndim == 2 else 0
    if ell == 0:
        return w0
    if cond_max is None:
        cond_max = 1e-3 / EPS_MACH
    W = base_solver(U1)
    C = np.eye(ell) + Sigma1 @ (V1.conj().T @ W)
    if not np.all(np.isfinite(C)) or np.linalg.cond(C) > cond_max:
        raise SingularCapacitance("capacitance matrix is numerically singular")
    c = np.linalg.solve(C, Sigma1 @ (V1.conj().T @ w0))
    return w0 - W @ c


class GroupInverse:
    """Action of the group inverse of ``B = M - lam I``.

    ``G = Pi (B + y x^H)^{-1} Pi`` with ``Pi = I - x z^H`` and
    ``z = y / (y^H x)``.

    Parameters
    ----------
    M : (n, n) ndarray
    triple : EigenTriple
        Simple eigentriple of ``M`` with ``r > 0``.
    spectral : SpectralFactor, optional
        Diagonalization of a base matrix ``A``; with ``update`` it enables
        the low-rank solve path.
    update : tuple, optional
        ``(U, Sigma, V)`` with ``M = A + U Sigma V^H``.
    """

    def __init__(self, M, triple, spectral=None, update=None, cond_max=None):
        if not triple.r > 0:
            raise SingularShift("y^H x must be positive for the group inverse")
        self.M = M
        self.triple = triple
        self.x, self.y, self.r = triple.x, triple.y, triple.r
        self.z = self.y / self.r
        self.lam = triple.lam
        n = M.shape[0]
        if cond_max is None:
            cond_max = 1e-3 / EPS_MACH
        if spectral is not None and update is not None:
            U, Sig, V = update
            U1 = np.column_stack([U, self.y])
            V1 = np.column_stack([V, self.x])
            k = Sig.shape[0]
            S1 = np.zeros((k + 1, k + 1), dtype=np.result_type(Sig, complex))
            S1[:k, :k] = Sig
            S1[k, k] = 1.0
            base = spectral.solver(self.lam)
            base_h = spectral.solver_h(self.lam)
            self._solve = lambda v: smw_solve(base, U1, S1, V1, v, cond_max)
            self._solve_h = lambda v: smw_solve(
                base_h, V1, S1.conj().T, U1, v, cond_max)
            self._lu = None
        else:
            real = not (np.iscomplexobj(M) or np.iscomplexobj(self.x)
                        or np.iscomplexobj(self.y)) and self.lam.imag == 0
            B = M - self.lam * np.eye(n)
            if real:
                B = B.real
            K = B + np.outer(self.y, self.x.conj())
            lu = sla.lu_factor(K, check_finite=False)
            gecon, = lapack.get_lapack_funcs(("gecon",), (lu[0],))
            anorm = np.linalg.norm(K, 1)
            rcond, info = gecon(lu[0], anorm, norm="1")
            if not np.isfinite(rcond) or rcond * cond_max < 1.0:
                raise SingularShift(
                    f"bordered matrix is singular to working precision (rcond={rcond:.2e})")
            self._lu = lu
            self._solve = lambda v: sla.lu_solve(lu, v, check_finite=False)
            self._solve_h = lambda v: sla.lu_solve(lu, v, trans=2, check_finite=False)

    def _pi(self, v):
        c = self.z.conj() @ v
        return v - (self.x * c if v.ndim == 1 else np.outer(self.x, c))

    def _pi_h(self, v):
        c = self.x.conj() @ v
        return v - (self.z * c if v.ndim == 1 else np.outer(self.z, c))

    def apply(self, v):
        """Return ``G v`` (vector or matrix of columns)."""
        v = np.asarray(v)
        return self._pi(self._solve(self._pi(v)))

    def apply_h(self, v):
        """Return ``G^H v``."""
        v = np.asarray(v)
        return self._pi_h(self._solve_h(self._pi_h(v)))

    def dense(self):
        """Dense ``G``; for tests and small diagnostics only."""
        n = self.M.shape[0]
        return self.apply(np.eye(n, dtype=complex))


def group_inverse(M, triple, spectral=None, update=None):
    """Build a :class:`GroupInverse` handle for ``M - triple.lam I``."""
    return GroupInverse(np.asarray(M), triple, spectral=spectral, update=update)


def best_rank_k(M, k, return_info=False):
    """Best Frobenius rank-``k`` approximation ``U T V^H`` of ``M``.

    ``T`` is diagonal.  Singular values below
    ``mu_pad = 1e-8 * max(sigma_1, 1)`` are raised to ``mu_pad`` so that
    ``T`` stays invertible.

    Returns
    -------
    U, T, V : ndarray
        ``U`` and ``V`` have orthonormal columns.
    info : dict, optional
        ``{"rank_deficient": bool, "mu_pad": float}`` when
        ``return_info`` is true.
    """
    M = _check_finite(M)
    Uf, s, Vh = np.linalg.svd(M)
    U = Uf[:, :k]
    V = Vh[:k, :].conj().T
    mu = 1e-8 * max(s[0] if s.size else 0.0, 1.0)
    sk = s[:k].copy()
    deficient = bool(np.any(sk < mu))
    sk[sk < mu] = mu
    T = np.diag(sk).astype(np.result_type(M, float))
    if deficient:
        log.debug("best_rank_k: rank-deficient input, core padded with %g", mu)
    if return_info:
        return U, T, V, {"rank_deficient": deficient, "mu_pad": mu}
    return U, T, V


def pinv_action(M, v):
    """Apply the Moore-Penrose pseudoinverse of ``M`` to ``v``."""
    return np.linalg.pinv(M) @ v
