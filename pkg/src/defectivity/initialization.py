"""Starting eigenvalue pair and upper bounds for the outer bracket."""

from dataclasses import dataclass
import itertools
import logging

import numpy as np

from .linalg import eig_pairs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoalescenceCandidate:
    """Eigenvalue pair expected to coalesce first.

    Attributes
    ----------
    lambda_j, lambda_k : complex
    p_j, p_k : float
        First-order growth rates of the two eigenvalues.
    z0 : complex
        Point where disks of radii ``p_j eps`` and ``p_k eps`` first touch.
    score : float
        ``|lambda_j - lambda_k| / (p_j + p_k)``, a first-order estimate of
        the coalescence ``eps``.
    kappa_j, kappa_k : float
        Unstructured condition numbers ``1 / (y^H x)``.
    """

    lambda_j: complex
    lambda_k: complex
    p_j: float
    p_k: float
    z0: complex
    score: float
    kappa_j: float = 1.0
    kappa_k: float = 1.0

    @property
    def target(self):
        """The worse-conditioned member, by unstructured condition number."""
        return self.lambda_j if self.kappa_j >= self.kappa_k else self.lambda_k


def _rate(t, mode):
    K = np.outer(t.y, t.x.conj())
    if mode.is_pattern:
        K = np.where(mode.mask, K, 0)
    if mode.is_real:
        # max over real unit E of |<K, E>| is the spectral norm of [vec Re K, vec Im K]
        C = np.column_stack([K.real.ravel(), K.imag.ravel()])
        g = np.linalg.norm(C, 2)
    else:
        g = np.linalg.norm(K)
    return float(g / t.r)


def condition_rates(A, mode):
    """First-order eigenvalue growth rate per unit Frobenius perturbation.

    Complex modes give ``||P(y x^H)||_F / (y^H x)`` where ``P`` is the
    pattern projection (identity when unstructured), so the unstructured
    value is the condition number ``1 / (y^H x)``.  Real modes give the
    worst case over real perturbations, the spectral norm of the
    ``n^2 x 2`` matrix ``[vec Re K, vec Im K]`` with ``K = P(y x^H)``,
    divided by ``y^H x``.

    Returns
    -------
    lambdas : ndarray of complex
    rates : ndarray of float
    """
    lams, rates, _ = _spectral_data(A, mode)
    return lams, rates


def _spectral_data(A, mode):
    triples = eig_pairs(A.real if mode.is_real else A)
    lams = np.array([t.lam for t in triples])
    rates = np.array([_rate(t, mode) for t in triples])
    kappas = np.array([t.kappa for t in triples])
    return lams, rates, kappas


def rank_candidates(A, mode):
    """All eigenvalue pairs sorted by increasing score.

    For a real matrix a pair and its mirror image under conjugation
    describe the same coalescence, so only one of them is kept.
    """
    A = np.asarray(A)
    lams, p, kap = _spectral_data(A, mode)
    real_matrix = not (np.iscomplexobj(A) and np.any(A.imag))
    out = []
    seen = set()
    for j, k in itertools.combinations(range(len(lams)), 2):
        if real_matrix:
            key = frozenset([_key(lams[j]), _key(lams[k])])
            mirror = frozenset([_key(np.conj(lams[j])), _key(np.conj(lams[k]))])
            if mirror in seen:
                continue
            seen.add(key)
        gap = abs(lams[j] - lams[k])
        z0 = (p[j] * lams[k] + p[k] * lams[j]) / (p[j] + p[k])
        out.append(CoalescenceCandidate(complex(lams[j]), complex(lams[k]), float(p[j]),
                                        float(p[k]), complex(z0), float(gap / (p[j] + p[k])),
                                        float(kap[j]), float(kap[k])))
    out.sort(key=lambda c: c.score)
    return out


def _key(z):
    return (round(z.real, 10), round(z.imag, 10))


def candidate(A, mode):
    """Pair minimizing ``|lambda_j - lambda_k| / (p_j + p_k)``."""
    cands = rank_candidates(A, mode)
    if not cands:
        raise ValueError("need at least two eigenvalues")
    return cands[0]


def upper_bound(A, mode, permissive=False, strict=False):
    """Upper bound on the distance, used as the initial right bracket end.

    Complex: ``min_{i != j} |lambda_i - lambda_j| / (y_i^H x_i)``.  Real
    modes add, for complex pairs that are not conjugate to each other, the
    double-coalescence value ``2 |Re(lambda_i - lambda_j)| / (y_i^H x_i)``
    over one representative of each conjugate pair (positive imaginary
    part), and return the smaller of the two mechanisms.

    Parameters
    ----------
    permissive : bool
        Pattern modes have no valid bound of this form; by default they
        return ``inf``.  When true the full-mode value is returned.
    strict : bool
        Halve the gap instead of dividing it by ``y_i^H x_i``.

    Returns
    -------
    float
    """
    if mode.is_pattern and not permissive:
        return float("inf")
    triples = eig_pairs(A.real if mode.is_real else A)
    lams = np.array([t.lam for t in triples])
    r = np.array([t.r for t in triples])
    n = len(lams)
    denom = (lambda i: 2.0) if strict else (lambda i: r[i])
    best = np.inf
    scale = max(1.0, np.max(np.abs(lams)))
    is_real = np.abs(lams.imag) <= 1e-12 * scale
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if mode.is_real:
                conj_pair = abs(lams[i] - np.conj(lams[j])) <= 1e-10 * scale
                if not ((is_real[i] and is_real[j]) or conj_pair):
                    continue
            best = min(best, abs(lams[i] - lams[j]) / denom(i))
    if mode.is_real:
        idx = [i for i in range(n) if lams[i].imag > 1e-12 * scale]
        for i in idx:
            for j in idx:
                if i != j:
                    val = 2.0 * abs((lams[i] - lams[j]).real)
                    best = min(best, val / denom(i))
    if not strict and np.isfinite(best):
        gaps = np.abs(lams[:, None] - lams[None, :]) + np.diag(np.full(n, np.inf))
        if best > gaps.min():
            log.debug("upper bound %.6g exceeds the smallest gap %.6g", best, gaps.min())
    return float(best)
