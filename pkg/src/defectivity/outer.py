"""Outer iteration on ``eps``: solve ``r(eps) = delta``.

``r(eps)`` is the minimum of ``y^H x`` over admissible unit ``E``.  Near the
coalescence value ``eps0*`` it behaves like ``gamma sqrt(eps0* - eps)``, so
each step fits that model through ``(eps_k, r_k, r'_k)`` and solves the
model for ``r = delta``.  A bracket ``(eps_lo, eps_hi)`` safeguards the
step, and evaluations past coalescence trigger a weighted bisection.
"""

from dataclasses import dataclass, field
import logging
import time

import numpy as np

from .exceptions import (
    BracketExhausted,
    DegenerateDerivative,
    MaxOuterIterations,
    NotStationary,
)
from .flow import FlowOptions, integrate_to_stationary, stationarity_diagnostics
from .linalg import nearest_triple
from .structure import StructureMode

log = logging.getLogger(__name__)


class CoalescedFlag:
    """Marker returned in place of ``r`` when the eigenvalues coalesced."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "COALESCED"

    def __bool__(self):
        return False


COALESCED = CoalescedFlag()


def r_of_eps(A, epsilon, mode=None, warm_start=None, target_lambda=None, opts=None):
    """Converged ``r(epsilon)`` and the final inner state.

    Parameters
    ----------
    A : (n, n) ndarray
    epsilon : float
        ``>= 0``; at zero the unperturbed ``y^H x`` is returned.
    mode : StructureMode
    warm_start : perturbation or None
        Starting ``E``, usually the minimizer at the previous ``eps``.
    target_lambda : complex
    opts : FlowOptions

    Returns
    -------
    r : float or COALESCED
    state : FlowState or EigenTriple
        The triple itself when ``epsilon == 0``.
    """
    mode = mode or StructureMode.complex_full()
    A = np.asarray(A)
    if epsilon == 0:
        t = nearest_triple(A.real if mode.is_real else A, target_lambda,
                           force_real=mode.is_real)
        return t.r, t
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    state = integrate_to_stationary(A, epsilon, warm_start, mode, target_lambda, opts)
    if warm_start is not None and not (state.converged or state.coalesced):
        # a warm start from a distant eps can stall between branches
        cold = integrate_to_stationary(A, epsilon, None, mode, target_lambda, opts)
        # the stalled r bounds the tracked minimum; a much larger one is another branch
        if cold.coalesced or (cold.converged and cold.r <= 1.25 * state.r):
            log.info("warm start stalled at eps=%.15g, using a cold start", epsilon)
            state = cold
    if state.coalesced:
        return COALESCED, state
    return state.r, state


def r_prime(state, stationarity_tol=1e-6, rel_check=0.05):
    """``r'(eps) = r Re(x^H G E x + y^H E G y)`` at a stationary state.

    The value is cross-checked against ``-r ||S_active||``, which holds at
    exact stationarity; a relative disagreement above ``rel_check`` is
    logged.

    Raises
    ------
    NotStationary
        If the stationarity residual exceeds ``stationarity_tol``.
    """
    if state.residual > stationarity_tol:
        raise NotStationary(
            f"stationarity residual {state.residual:.2e} exceeds {stationarity_tol:.1e}")
    t = state.triple
    E = state.E.dense()
    val = (np.vdot(state.GHx, E @ t.x) + np.vdot(t.y, E @ state.Gy)).real
    rp = t.r * float(val)
    alt = -t.r * state.S_norm
    if alt != 0 and abs(rp - alt) > rel_check * abs(alt):
        log.warning("r' = %.6e disagrees with -r||S|| = %.6e", rp, alt)
    return rp


def puiseux_step(eps_k, r_k, rprime_k, delta):
    """Fit ``r = gamma sqrt(eps* - eps)`` and solve it for ``r = delta``.

    Returns
    -------
    gamma : float
        ``sqrt(2 r_k |r'_k|)``.
    eps_star : float
        ``eps_k + r_k / (2 |r'_k|)``, the model's coalescence point.
    eps_next : float
        ``eps_star - delta**2 / gamma**2``.

    Raises
    ------
    DegenerateDerivative
        If ``|r'_k| < 1e-300``.
    """
    a = abs(rprime_k)
    if a < 1e-300:
        raise DegenerateDerivative("r'(eps) vanishes")
    gamma = np.sqrt(2.0 * r_k * a)
    eps_star = eps_k + r_k / (2.0 * a)
    return float(gamma), float(eps_star), float(eps_star - delta ** 2 / gamma ** 2)


@dataclass
class OuterIterate:
    """One evaluation of ``r`` in the outer loop."""

    k: int
    epsilon: float
    r: object
    eps_lo: float
    eps_hi: float
    gamma: float = float("nan")
    eps_star: float = float("nan")
    used_bisection: bool = False
    inner_steps: int = 0
    flow: object = field(default=None, repr=False)

    @property
    def coalesced(self):
        return self.r is COALESCED


@dataclass
class OuterOptions:
    """Settings for :func:`solve_distance`.

    Attributes
    ----------
    theta : float
        Bisection weight, ``eps_lo + theta (eps_hi - eps_lo)``; the
        default leans toward the right end, where coalescence was seen.
    max_outer : int
    warm_start : bool
        Reuse the previous minimizer as the next starting point.
    bracket_rule : {"delta", "tol"}
        Threshold that decides whether a non-coalesced ``eps`` becomes
        the lower bracket end.
    flow : FlowOptions
    """

    theta: float = 0.8
    max_outer: int = 50
    warm_start: bool = True
    bracket_rule: str = "delta"
    flow: FlowOptions = None


@dataclass
class DistanceReport:
    """Outcome of :func:`solve_distance`.

    Attributes
    ----------
    eps_delta_star : float
        ``eps`` with ``r(eps) = delta`` to within ``tol``.
    eps_zero_star : float
        Model extrapolation of the coalescence point from the final iterate.
    gamma : float
        Model coefficient at the final iterate.
    coalescing_lambdas : tuple of complex
        The tracked eigenvalue of ``A + eps E`` and its nearest neighbour.
    conjugate_lambdas : tuple of complex or None
        Their conjugates, which coalesce too in real mode for complex pairs.
    """

    mode: StructureMode
    delta: float
    tol: float
    iterates: list
    eps_delta_star: float
    eps_zero_star: float
    gamma: float
    coalescing_lambdas: tuple
    conjugate_lambdas: tuple = None
    final_state: object = field(default=None, repr=False)
    target_lambda: complex = None
    wall_time: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_outer(self):
        return len(self.iterates)

    def table(self):
        """Rows ``(k, eps_k, r_k)`` with ``None`` for coalesced evaluations."""
        return [(it.k, it.epsilon, None if it.coalesced else it.r) for it in self.iterates]


def _coalescing_pair(state):
    M = state.A + state.epsilon * state.E.dense()
    w = np.linalg.eigvals(M.real if state.mode.is_real else M)
    lam = state.lam
    i = int(np.argmin(np.abs(w - lam)))
    others = np.delete(w, i)
    if state.mode.is_real and lam.imag != 0:
        # skip the conjugate of the tracked eigenvalue
        others = others[np.abs(others - np.conj(w[i])) > 1e-14 * max(1.0, abs(lam))] \
            if others.size > 1 else others
    j = int(np.argmin(np.abs(others - w[i])))
    pair = (complex(w[i]), complex(others[j]))
    conj = None
    if state.mode.is_real and lam.imag != 0:
        conj = (pair[0].conjugate(), pair[1].conjugate())
    return pair, conj


def solve_distance(A, mode=None, delta=1e-3, tol=1e-6, eps0=None, eps_lo=0.0,
                   eps_hi=np.inf, target_lambda=None, opts=None):
    """Compute ``eps^{delta,*}``, the smallest ``eps`` with ``r(eps) = delta``.

    Parameters
    ----------
    A : (n, n) array_like
    mode : StructureMode
    delta : float
        Target value of ``r``; ``0`` requests the coalescence point and is
        run with ``max(delta, tol)`` internally.
    tol : float
        Stopping tolerance on ``|r - delta|`` and coalescence threshold.
    eps0 : float
        Starting ``eps``, inside ``(eps_lo, eps_hi)``.
    eps_lo, eps_hi : float
        Initial bracket.
    target_lambda : complex
        Eigenvalue of ``A`` to follow.
    opts : OuterOptions

    Returns
    -------
    DistanceReport

    Raises
    ------
    BracketExhausted
        If the bracket collapses before convergence.
    MaxOuterIterations
        If ``opts.max_outer`` evaluations do not converge.
    """
    t_start = time.perf_counter()
    opts = opts or OuterOptions()
    flow_opts = opts.flow or FlowOptions()
    flow_opts = FlowOptions(**{**flow_opts.__dict__, "tol_coalesce": tol})
    mode = mode or StructureMode.complex_full()
    A = np.asarray(A)
    mode.validate(A)
    if delta < 0 or tol <= 0:
        raise ValueError("need delta >= 0 and tol > 0")
    if eps0 is None or not (eps_lo <= eps0 < eps_hi):
        raise ValueError("need eps_lo <= eps0 < eps_hi")
    if target_lambda is None:
        raise ValueError("target_lambda is required")
    d_eff = max(delta, tol)
    lo, hi = float(eps_lo), float(eps_hi)
    eps = float(eps0)
    warm, lam = None, complex(target_lambda)
    iterates = []
    best = None
    bisect_next = False
    # a right end set by coalescence may come from another local branch; it is
    # re-evaluated once from the current minimizer before being trusted
    hi_coalesced, hi_checked, recheck = False, False, False
    for k in range(opts.max_outer):
        r, st = r_of_eps(A, eps, mode, warm if opts.warm_start else None, lam, flow_opts)
        it = OuterIterate(k, eps, r, lo, hi, used_bisection=bisect_next,
                          inner_steps=st.step_count, flow=st)
        iterates.append(it)
        if r is COALESCED:
            hi = eps
            hi_coalesced, hi_checked = True, recheck
            log.info("k=%d eps=%.15f coalesced", k, eps)
        else:
            best = it
            if opts.warm_start:
                warm = st.E
            lam = st.lam
            thresh = d_eff if opts.bracket_rule == "delta" else tol
            if thresh < r <= d_eff:
                log.warning("eps=%.15g with r=%.3e <= delta becomes the lower bracket end",
                            eps, r)
            if r > thresh:
                lo = eps
                if recheck:
                    hi, hi_coalesced = float(eps_hi), False
            else:
                hi, hi_coalesced = eps, False
            log.info("k=%d eps=%.15f r=%.15f", k, eps, r)
            if abs(r - d_eff) < tol:
                break
        it.eps_lo, it.eps_hi = lo, hi
        bisect_next, recheck = True, False
        eps_next = None
        if r is not COALESCED:
            try:
                g, es, en = puiseux_step(eps, r, r_prime(st), d_eff)
                it.gamma, it.eps_star = g, es
                if lo < en < hi:
                    eps_next, bisect_next = en, False
                elif en >= hi and hi_coalesced and not hi_checked:
                    eps_next, bisect_next, recheck = hi, False, True
            except (NotStationary, DegenerateDerivative) as exc:
                log.info("model step unavailable at k=%d: %s", k, exc)
        if eps_next is None:
            if not np.isfinite(hi):
                eps_next = 2.0 * max(eps, lo)
            else:
                eps_next = lo + opts.theta * (hi - lo)
        if hi - lo < 1e-15:
            raise BracketExhausted(f"bracket [{lo}, {hi}] exhausted")
        eps = eps_next
    else:
        rep = _report(A, mode, delta, tol, iterates, best, lam, t_start)
        raise MaxOuterIterations(f"no convergence in {opts.max_outer} outer iterations", rep)
    return _report(A, mode, delta, tol, iterates, best, lam, t_start)


def _report(A, mode, delta, tol, iterates, best, lam, t_start):
    if best is None:
        return DistanceReport(mode, delta, tol, iterates, float("nan"), float("nan"),
                              float("nan"), (), None, None, lam,
                              time.perf_counter() - t_start)
    st = best.flow
    g, es = float("nan"), float("nan")
    try:
        g, es, _ = puiseux_step(best.epsilon, best.r, r_prime(st), 0.0)
        best.gamma, best.eps_star = g, es
    except (NotStationary, DegenerateDerivative):
        pass
    pair, conj = _coalescing_pair(st)
    diag = {"rr_prime_ratio": puiseux_diagnostics(st).structured_ratio,
            "res_stationarity": st.residual,
            "re_s_norm": stationarity_diagnostics(st).re_s_norm}
    return DistanceReport(mode, delta, tol, iterates, best.epsilon, es, g, pair, conj, st,
                          lam, time.perf_counter() - t_start, diag)


@dataclass
class PuiseuxDiagnostics:
    """Near-coalescence checks.

    Attributes
    ----------
    C_abs_estimate : float
        ``|y^H B^+ x|`` with ``B = A + eps E - lam I``.
    rr_prime_product : float
        ``r r'``.
    ratio : float
        ``r r' / (-2 |C|)``; tends to 1 in complex mode.
    structured_ratio : float
        ``r r' / (-2 |C| rho)`` with ``rho = ||P(e^{-i arg C} x y^H)|| /
        ||x y^H||``, the fraction of the limiting gradient kept by the
        structure projection ``P``; equals ``ratio`` in complex mode.
    """

    C_abs_estimate: float
    rr_prime_product: float
    ratio: float
    structured_ratio: float


def puiseux_diagnostics(state):
    """Compare ``r r'`` with its limit ``-2 |C|`` at coalescence."""
    t = state.triple
    M = state.A + state.epsilon * state.E.dense()
    B = M - t.lam * np.eye(M.shape[0])
    C = complex(np.vdot(t.y, np.linalg.pinv(B) @ t.x))
    rp = (np.vdot(state.GHx, state.E.dense() @ t.x)
          + np.vdot(t.y, state.E.dense() @ state.Gy)).real * t.r
    prod = float(t.r * rp)
    cabs = abs(C)
    if cabs == 0:
        return PuiseuxDiagnostics(0.0, prod, 0.0, 0.0)
    # limiting gradient direction is C^* y x^H up to scale; see the flow module
    K = np.conj(C) * np.outer(t.y, t.x.conj()) / cabs
    rho = np.linalg.norm(state.mode.project(K)) / np.linalg.norm(K)
    ratio = prod / (-2.0 * cabs)
    return PuiseuxDiagnostics(cabs, prod, float(ratio), float(ratio / rho) if rho else 0.0)
