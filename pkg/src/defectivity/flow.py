"""Gradient flow for ``r = y^H x`` on the unit Frobenius sphere.

For ``M = A + eps E`` with simple eigentriple ``(lam, x, y)`` the free
gradient is ``S = y (G y)^H + (G^H x) x^H`` where ``G`` is the group
inverse of ``M - lam I``; along any path ``d r / dt = eps r Re<dE/dt, S>``.
The flow ``dE/dt = -S + Re<E, S> E`` (with ``S`` replaced by its
projection onto the admissible class) decreases ``r`` while keeping
``||E||_F = 1``.  Stationary points satisfy ``E = -S / ||S||``, which has
rank 2 in the complex case and rank at most 4 in the real case, so the
flow can also be run on factored ``E = U T V^H``.
"""

from dataclasses import dataclass, field
import csv
import logging
import time

import numpy as np
from scipy.optimize import least_squares, minimize

from .exceptions import (
    IllConditionedT,
    MaxStepsExceeded,
    RankCollapse,
    StepsizeUnderflow,
)
from .linalg import best_rank_k, group_inverse, inner, nearest_triple
from .structure import StructureMode

log = logging.getLogger(__name__)


# -- perturbation representations ------------------------------------------

class DensePerturbation:
    """Dense unit-norm ``E``; pattern and real modes keep structure exactly."""

    rank = None

    def __init__(self, E):
        self.E = np.asarray(E)

    def dense(self):
        return self.E

    def normalized(self):
        return DensePerturbation(self.E / np.linalg.norm(self.E))

    def __repr__(self):
        return f"DensePerturbation(shape={self.E.shape})"


class PatternPerturbation(DensePerturbation):
    """Dense storage with a sparsity mask; off-mask entries are exact zeros."""

    def __init__(self, E, mask):
        mask = np.asarray(mask, dtype=bool)
        super().__init__(np.where(mask, E, 0))
        self.mask = mask

    def normalized(self):
        return PatternPerturbation(self.E / np.linalg.norm(self.E), self.mask)


class FactoredPerturbation:
    """``E = U T V^H`` with orthonormal ``U``, ``V`` and invertible ``T``."""

    def __init__(self, U, T, V):
        self.U = np.asarray(U)
        self.T = np.asarray(T)
        self.V = np.asarray(V)

    @property
    def rank(self):
        return self.T.shape[0]

    def dense(self):
        return self.U @ self.T @ self.V.conj().T

    def normalized(self):
        return FactoredPerturbation(self.U, self.T / np.linalg.norm(self.T), self.V)

    @classmethod
    def from_dense(cls, E, k):
        U, T, V = best_rank_k(E, k)
        return cls(U, T / np.linalg.norm(T), V)

    def __repr__(self):
        return f"FactoredPerturbation(n={self.U.shape[0]}, k={self.rank})"


# -- options and state ------------------------------------------------------

@dataclass
class FlowOptions:
    """Tuning knobs for the inner flow.

    Attributes
    ----------
    tol_inner : float
        Stop when ``||rhs|| <= tol_inner * ||S_active||``.
    tol_coalesce : float
        ``r`` at or below this value counts as coalescence.
    sigma : float
        Stepsize ratio, ``> 1``.
    h0 : float or None
        Initial step; default ``0.1 / ||S_active||``.
    h_min : float
        Step below which the controller gives up.
    max_steps : int
        Euler step budget.
    r_scale_threshold : float
        Below this ``r`` the right-hand side is multiplied by ``r**2``.
    stall_rtol : float
        Relative decrease of ``r`` per unit time treated as a stall.
    representation : {"auto", "dense", "factored"}
        ``auto`` uses factored ``E`` for full modes, dense for patterns.
    polish : bool
        Finish stalled Euler runs with a quasi-Newton solve on the sphere.
    polish_after : int
        Euler steps before switching to the polish.
    stall_residual, stall_r : float
        A run that ends with residual above ``stall_residual`` at
        ``r < stall_r`` is flagged as coalesced; beyond the coalescence
        point eigenvectors are only accurate to about ``sqrt(eps)``.
    trace : str, file-like or None
        Destination for a per-step CSV trace.
    seed : int
        Seed used only when the free gradient vanishes at the start.
    """

    tol_inner: float = 1e-8
    tol_coalesce: float = 1e-6
    sigma: float = 1.4
    h0: float = None
    h_min: float = 1e-16
    max_steps: int = 20000
    r_scale_threshold: float = 1e-2
    stall_rtol: float = 1e-12
    representation: str = "auto"
    polish: bool = True
    polish_after: int = 200
    stall_residual: float = 1e-3
    stall_r: float = 1e-2
    trace: object = None
    seed: int = 0


@dataclass
class FlowState:
    """Snapshot of the inner flow at one perturbation ``E``.

    Attributes
    ----------
    A : ndarray
    epsilon : float
    E : DensePerturbation, PatternPerturbation or FactoredPerturbation
    mode : StructureMode
    triple : EigenTriple
        Eigentriple of ``A + epsilon E`` being tracked.
    ginv : GroupInverse
    S : ndarray
        Active (projected) free gradient.
    Gy, GHx : ndarray
        ``G y`` and ``G^H x``.
    history : list of float
        ``r`` after each accepted Euler step.
    """

    A: np.ndarray
    epsilon: float
    E: object
    mode: StructureMode
    triple: object
    ginv: object
    S: np.ndarray
    Gy: np.ndarray
    GHx: np.ndarray
    step_count: int = 0
    h_current: float = None
    t: float = 0.0
    converged: bool = False
    coalesced: bool = False
    polished: bool = False
    history: list = field(default_factory=list, repr=False)

    @property
    def r(self):
        return self.triple.r

    @property
    def lam(self):
        return self.triple.lam

    @property
    def S_norm(self):
        return float(np.linalg.norm(self.S))

    @property
    def residual(self):
        """``||E - <E, S^> S^||`` with ``S^ = S/||S||``; zero iff stationary."""
        return stationarity_residual(self.E.dense(), self.S)


def stationarity_residual(E, S):
    nS = np.linalg.norm(S)
    if nS == 0:
        return 0.0
    Sh = S / nS
    return float(np.linalg.norm(E - inner(E, Sh) * Sh))


def _gradient(M, triple, mode, ginv):
    Gy = ginv.apply(triple.y)
    GHx = ginv.apply_h(triple.x)
    S = np.outer(triple.y, Gy.conj()) + np.outer(GHx, triple.x.conj())
    return mode.project(S), Gy, GHx


def make_state(A, epsilon, E, mode, target, **kw):
    """Evaluate eigentriple, group inverse and gradient at ``A + epsilon E``."""
    M = A + epsilon * E.dense()
    if mode.is_real:
        M = M.real
    triple = nearest_triple(M, target, force_real=mode.is_real)
    ginv = group_inverse(M, triple)
    S, Gy, GHx = _gradient(M, triple, mode, ginv)
    return FlowState(A, float(epsilon), E, mode, triple, ginv, S, Gy, GHx, **kw)


def free_gradient(state):
    """Active free gradient: ``S``, ``Re S`` or its masked version."""
    return state.S


def factored_rank(mode, triple):
    """Rank of the factored representation for this mode and eigenvalue."""
    if mode.is_real and triple.lam.imag != 0:
        return 4
    return 2


def initial_perturbation(A, mode, target, representation="dense", seed=0):
    """Normalized negative active gradient at ``E = 0``.

    Falls back to a seeded random admissible direction when the gradient
    vanishes (normal eigenvalue).
    """
    A = np.asarray(A)
    Am = A.real if mode.is_real else A
    triple = nearest_triple(Am, target, force_real=mode.is_real)
    ginv = group_inverse(Am, triple)
    S, _, _ = _gradient(Am, triple, mode, ginv)
    if np.linalg.norm(S) <= 1e-14 * max(1.0, np.linalg.norm(A)):
        rng = np.random.default_rng(seed)
        S = rng.standard_normal(A.shape)
        if not mode.is_real:
            S = S + 1j * rng.standard_normal(A.shape)
        S = mode.project(S)
    E = -S / np.linalg.norm(S)
    return to_representation(E, mode, triple, representation)


def to_representation(E, mode, triple, representation):
    """Convert a dense admissible ``E`` into the requested representation."""
    if representation == "auto":
        representation = "dense" if mode.is_pattern else "factored"
    if mode.is_pattern:
        return PatternPerturbation(E, mode.mask).normalized()
    if representation == "factored":
        k = factored_rank(mode, triple)
        return FactoredPerturbation.from_dense(E, k)
    return DensePerturbation(E).normalized()


# -- right-hand sides -------------------------------------------------------

def rhs_full(state):
    """Dense right-hand side ``-S + Re<E, S> E``; tangent to the sphere."""
    E = state.E.dense()
    S = state.S
    return -S + inner(E, S) * E


def _check_T(T):
    c = np.linalg.cond(T)
    if not np.isfinite(c) or c > 1e12:
        raise IllConditionedT(f"cond(T) = {c:.3e}")


def rhs_rank2(state):
    """Factored right-hand side ``(Tdot, Udot, Vdot)`` for rank-2 ``E``.

    With ``p = U^H y``, ``q = V^H x``, ``r = U^H G^H x``, ``s = V^H G y``::

        Tdot = -(p s^H + r q^H) + Re(s^H T^H p + q^H T^H r) T
        Udot = -((y - U p) s^H + (G^H x - U r) q^H) T^{-1}
        Vdot = -((G y - V s) p^H + (x - V q) r^H) T^{-H}

    The same formulas hold for real data when a real eigenvalue is tracked
    in real mode.
    """
    E = state.E
    U, T, V = E.U, E.T, E.V
    _check_T(T)
    x, y, Gy, GHx = state.triple.x, state.triple.y, state.Gy, state.GHx
    p = U.conj().T @ y
    q = V.conj().T @ x
    rr = U.conj().T @ GHx
    s = V.conj().T @ Gy
    TH = T.conj().T
    coef = (s.conj() @ TH @ p + q.conj() @ TH @ rr).real
    Tdot = -(np.outer(p, s.conj()) + np.outer(rr, q.conj())) + coef * T
    Tinv = np.linalg.inv(T)
    Udot = -(np.outer(y - U @ p, s.conj()) + np.outer(GHx - U @ rr, q.conj())) @ Tinv
    Vdot = -(np.outer(Gy - V @ s, p.conj()) + np.outer(x - V @ q, rr.conj())) @ Tinv.conj().T
    if state.mode.is_real:
        Tdot, Udot, Vdot = Tdot.real, Udot.real, Vdot.real
    return Tdot, Udot, Vdot


def real_gradient_factors(state):
    """``X, Y, W, Z`` with ``Re S = Y W^T + Z X^T``."""
    t = state.triple
    cols = lambda v: np.column_stack([v.real, v.imag])
    return cols(t.x), cols(t.y), cols(state.Gy), cols(state.GHx)


def rhs_rank4_real(state):
    """Factored right-hand side for real rank-4 ``E`` and complex eigenvalue.

    With ``P = U^T Y``, ``Q = V^T X``, ``R = U^T Z``, ``Sg = V^T W``::

        Tdot = -(P Sg^T + R Q^T) + tr(Sg^T T^T P + Q^T T^T R) T
        Udot = -((Y - U P) Sg^T + (Z - U R) Q^T) T^{-1}
        Vdot = -((W - V Sg) P^T + (X - V Q) R^T) T^{-T}

    A real tracked eigenvalue is routed to :func:`rhs_rank2`.
    """
    if state.triple.lam.imag == 0:
        return rhs_rank2(state)
    E = state.E
    U, T, V = E.U, E.T, E.V
    _check_T(T)
    X, Y, W, Z = real_gradient_factors(state)
    P = U.T @ Y
    Q = V.T @ X
    R = U.T @ Z
    Sg = V.T @ W
    coef = np.trace(Sg.T @ T.T @ P) + np.trace(Q.T @ T.T @ R)
    Tdot = -(P @ Sg.T + R @ Q.T) + coef * T
    Tinv = np.linalg.inv(T)
    Udot = -((Y - U @ P) @ Sg.T + (Z - U @ R) @ Q.T) @ Tinv
    Vdot = -((W - V @ Sg) @ P.T + (X - V @ Q) @ R.T) @ Tinv.T
    return Tdot, Udot, Vdot


def rhs(state):
    """Right-hand side in the representation of ``state.E``."""
    if isinstance(state.E, FactoredPerturbation):
        if state.mode.is_real:
            return rhs_rank4_real(state)
        return rhs_rank2(state)
    return rhs_full(state)


def reconstruct_rhs(state, direction):
    """Dense ``Edot`` from a factored direction (identity for dense)."""
    if not isinstance(direction, tuple):
        return direction
    Tdot, Udot, Vdot = direction
    E = state.E
    VH = E.V.conj().T
    return Udot @ E.T @ VH + E.U @ Tdot @ VH + E.U @ E.T @ Vdot.conj().T


# -- time stepping -----------------------------------------------------------

def _advance(E, direction, h):
    if isinstance(E, FactoredPerturbation):
        Tdot, Udot, Vdot = direction
        Qu, Ru = np.linalg.qr(E.U + h * Udot)
        Qv, Rv = np.linalg.qr(E.V + h * Vdot)
        du, dv = np.abs(np.diag(Ru)), np.abs(np.diag(Rv))
        if du.min() < 1e-12 * du.max() or dv.min() < 1e-12 * dv.max():
            raise RankCollapse("retraction produced rank-deficient factors")
        T = Ru @ (E.T + h * Tdot) @ Rv.conj().T
        return FactoredPerturbation(Qu, T / np.linalg.norm(T), Qv)
    Et = E.E + h * direction
    if isinstance(E, PatternPerturbation):
        return PatternPerturbation(Et / np.linalg.norm(Et), E.mask)
    return DensePerturbation(Et / np.linalg.norm(Et))


def _scaled(direction, c):
    if c == 1.0:
        return direction
    if isinstance(direction, tuple):
        return tuple(c * d for d in direction)
    return c * direction


def euler_step(state, h, direction=None):
    """Candidate state after one Euler step of size ``h``.

    The update is renormalized (factored: QR retraction of ``U``, ``V`` with
    the triangular factors absorbed into ``T``) and the eigentriple is
    re-extracted nearest the previous eigenvalue.  Nothing is committed.
    """
    if h == 0:
        return state
    if direction is None:
        direction = rhs(state)
    E = _advance(state.E, direction, h)
    return make_state(state.A, state.epsilon, E, state.mode, state.lam,
                      step_count=state.step_count, h_current=h, t=state.t + h)


def stepsize_control(state, h, sigma=1.4, h_prev=0.0, direction=None, h_min=1e-16):
    """One accepted step of the monotone stepsize controller.

    Shrinks ``h`` by ``sigma`` until ``r`` strictly decreases; when the
    accepted ``h`` is at least the previous one, also tries ``sigma h`` and
    keeps it if it decreases ``r`` at least as much.

    Returns
    -------
    new_state : FlowState
    h : float
        Step actually taken; use it as the next prediction.

    Raises
    ------
    StepsizeUnderflow
        When ``h`` falls below ``h_min`` without a decrease.
    """
    if sigma <= 1:
        raise ValueError("sigma must exceed 1")
    if direction is None:
        direction = rhs(state)
    r0 = state.r
    while True:
        if h < h_min:
            raise StepsizeUnderflow(f"no decrease of r = {r0:.6e} down to h = {h:.3e}")
        try:
            cand = euler_step(state, h, direction)
        except (RankCollapse, IllConditionedT):
            cand = None
        if cand is not None and cand.r < r0:
            break
        h /= sigma
    if h >= h_prev:
        try:
            probe = euler_step(state, sigma * h, direction)
        except (RankCollapse, IllConditionedT):
            probe = None
        if probe is not None and probe.r <= cand.r:
            h *= sigma
            cand = probe
    cand.step_count = state.step_count + 1
    cand.history = state.history
    return cand, h


# -- quasi-Newton finish -----------------------------------------------------

class _Packer:
    """Real parameter vector <-> admissible dense matrix."""

    def __init__(self, mode, shape):
        self.mode = mode
        self.shape = shape
        self.idx = np.flatnonzero(mode.mask) if mode.is_pattern else None

    def pack(self, E):
        v = E.ravel() if self.idx is None else E.ravel()[self.idx]
        return v.real.copy() if self.mode.is_real else np.concatenate([v.real, v.imag])

    def unpack(self, p):
        if self.mode.is_real:
            v = p
        else:
            m = p.size // 2
            v = p[:m] + 1j * p[m:]
        if self.idx is None:
            return v.reshape(self.shape)
        E = np.zeros(self.shape, dtype=v.dtype)
        E.ravel()[self.idx] = v
        return E


def polish(state, opts=None, maxiter=2000, max_params=5000):
    """Finish a stalled flow with quasi-Newton steps on the sphere.

    First BFGS minimizes ``r`` over ``E = X / ||X||``; then a
    Levenberg-Marquardt solve drives the stationarity residual
    ``E - <E, S^> S^`` to zero, which resolves the stationary point well
    beyond the accuracy available from values of ``r`` alone.  The
    eigenvalue reference follows the iterates so the same branch stays
    tracked.  Returns the input state if neither stage improves it.
    """
    opts = opts or FlowOptions()
    A, eps, mode = state.A, state.epsilon, state.mode
    E0 = state.E.dense()
    pk = _Packer(mode, E0.shape)
    p0 = pk.pack(E0)
    if p0.size > max_params:
        return state
    ref = [state.lam]

    def at(p):
        X = pk.unpack(p)
        nx = np.linalg.norm(X)
        return make_state(A, eps, DensePerturbation(X / nx), mode, ref[0]), nx

    def fun(p):
        s, nx = at(p)
        E = s.E.E
        g = eps * s.r * (s.S - inner(E, s.S) * E) / nx
        return s.r, pk.pack(g)

    def cb(p):
        ref[0] = at(p)[0].lam

    def resid(p):
        s, _ = at(p)
        E = s.E.E
        Sh = s.S / np.linalg.norm(s.S)
        return pk.pack(E - inner(E, Sh) * Sh)

    best = state
    try:
        out = minimize(fun, p0, jac=True, method="BFGS", callback=cb,
                       options={"gtol": 1e-15, "maxiter": maxiter})
        cand, _ = at(out.x)
        if cand.r < best.r or cand.residual < best.residual:
            best = cand if cand.r <= best.r * (1 + 1e-12) else best
        if opts.tol_inner < best.residual < opts.stall_residual:
            ref[0] = best.lam
            # each finite-difference Jacobian costs p0.size + 1 evaluations
            out = least_squares(resid, pk.pack(best.E.dense()), method="lm",
                                xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                max_nfev=15 * (p0.size + 1))
            cand, _ = at(out.x)
            if cand.residual < best.residual and cand.r <= best.r * (1 + 1e-8):
                best = cand
    except Exception as exc:  # eigen-solver failures near coalescence
        log.debug("polish aborted: %s", exc)
    if best is state:
        return state
    new = make_state(A, eps, to_representation(best.E.dense(), mode, best.triple,
                                               _repr_of(state.E)),
                     mode, best.lam, step_count=state.step_count,
                     h_current=state.h_current, t=state.t, history=state.history)
    if not (new.r < state.r or
            (new.residual < state.residual and new.r <= state.r * (1 + 1e-8))):
        return state
    new.polished = True
    return new


def _repr_of(E):
    return "factored" if isinstance(E, FactoredPerturbation) else "dense"


# -- driver -----------------------------------------------------------------

class _Trace:
    def __init__(self, dest):
        self._own = isinstance(dest, str)
        self.fh = open(dest, "w", newline="") if self._own else dest
        self.w = csv.writer(self.fh)
        self.w.writerow(["step", "t", "h", "r", "rhs_norm", "lam_re", "lam_im"])

    def row(self, s, h):
        self.w.writerow([s.step_count, repr(s.t), repr(h), repr(s.r),
                         repr(float(np.linalg.norm(rhs_full(s)))),
                         repr(s.lam.real), repr(s.lam.imag)])

    def close(self):
        if self._own:
            self.fh.close()


def integrate_to_stationary(A, epsilon, E0=None, mode=None, target_lambda=None, opts=None):
    """Run the stepsize-controlled Euler flow to a stationary point.

    Parameters
    ----------
    A : (n, n) ndarray
    epsilon : float
        Perturbation size, ``> 0``.
    E0 : perturbation, ndarray or None
        Starting point; default is the normalized negative gradient at
        ``E = 0``.  Dense arrays are converted to the active representation.
    mode : StructureMode
    target_lambda : complex
        Eigenvalue of ``A`` (or of ``A + epsilon E0``) to follow.
    opts : FlowOptions

    Returns
    -------
    FlowState
        With ``converged`` set when the stationarity residual meets
        ``tol_inner`` and ``coalesced`` set when ``r`` collapsed.

    Raises
    ------
    MaxStepsExceeded
        Step budget used up without convergence; ``exc.state`` holds the
        last state.
    """
    opts = opts or FlowOptions()
    mode = mode or StructureMode.complex_full()
    A = np.asarray(A)
    mode.validate(A)
    if mode.is_real:
        A = A.real
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    rep = opts.representation
    if E0 is None:
        E0 = initial_perturbation(A, mode, target_lambda, rep, opts.seed)
    elif isinstance(E0, np.ndarray):
        t0 = nearest_triple(A + epsilon * E0, target_lambda, force_real=mode.is_real)
        E0 = to_representation(mode.project(E0), mode, t0, rep)
    state = make_state(A, epsilon, E0, mode, target_lambda)
    if isinstance(state.E, FactoredPerturbation) and \
            state.E.rank != factored_rank(mode, state.triple):
        state = make_state(A, epsilon, to_representation(state.E.dense(), mode, state.triple,
                                                         "factored"), mode, state.lam)
    tracer = _Trace(opts.trace) if opts.trace is not None else None
    try:
        return _integrate(state, opts, tracer)
    finally:
        if tracer:
            tracer.close()


def _integrate(state, opts, tracer):
    nS = state.S_norm
    h = opts.h0 if opts.h0 is not None else (0.1 / nS if nS > 0 else 1.0)
    h_prev = 0.0
    scale = 1.0
    t_start = time.perf_counter()
    euler_budget = min(opts.max_steps, opts.polish_after) if opts.polish else opts.max_steps
    stalled = False
    while True:
        if state.residual <= opts.tol_inner:
            state.converged = True
            break
        if state.r <= opts.tol_coalesce:
            state.coalesced = True
            break
        if state.step_count >= euler_budget:
            stalled = True
            break
        new_scale = state.r ** 2 if state.r < opts.r_scale_threshold else 1.0
        if new_scale != scale:
            # keep the effective step continuous across the rescaling
            h *= scale / new_scale
            h_prev *= scale / new_scale
            scale = new_scale
        direction = _scaled(rhs(state), scale)
        r_old = state.r
        try:
            state, h_used = stepsize_control(state, h, opts.sigma, h_prev, direction,
                                             opts.h_min)
        except StepsizeUnderflow:
            stalled = True
            break
        state.history.append(state.r)
        if tracer:
            tracer.row(state, h_used)
        h_prev = h = h_used
        if (r_old - state.r) / (r_old * h_used * scale) < opts.stall_rtol:
            stalled = True
            break
    if stalled and not (state.converged or state.coalesced):
        if opts.polish:
            state = polish(state, opts)
        if state.residual <= opts.tol_inner:
            state.converged = True
        elif state.r <= opts.tol_coalesce:
            state.coalesced = True
        elif state.residual > opts.stall_residual and state.r < opts.stall_r:
            state.coalesced = True
        elif state.step_count >= opts.max_steps:
            raise MaxStepsExceeded(
                f"inner flow used {state.step_count} steps, residual {state.residual:.2e}",
                state)
    state.h_current = h
    log.debug("inner eps=%.15g r=%.15g steps=%d res=%.2e polished=%s (%.3fs)",
              state.epsilon, state.r, state.step_count, state.residual, state.polished,
              time.perf_counter() - t_start)
    return state


# -- diagnostics ------------------------------------------------------------

@dataclass
class StationarityDiagnostics:
    """Checks that a converged state is a genuine stationary point.

    Attributes
    ----------
    b_norm : float
        ``||(I - U U^H) S (I - V V^H)||_F / ||S||_F`` for factored ``E``
        (``nan`` otherwise).
    re_s_norm : float
        ``||S_active||_F``; must be nonzero in real mode for complex ``lam``.
    proportionality : float
        ``||E - mu S^||_F`` with ``S^ = S/||S||`` and ``mu = <E, S^>``.
    mu : float
        Proportionality constant, negative at minimizers.
    inner_sign : float
        Sign of ``<E, S_active>``.
    """

    b_norm: float
    re_s_norm: float
    proportionality: float
    mu: float
    inner_sign: float


def stationarity_diagnostics(state):
    """Stationarity checks for a converged :class:`FlowState`."""
    S = state.S
    nS = np.linalg.norm(S)
    E = state.E.dense()
    mu = inner(E, S) / nS if nS > 0 else 0.0
    if isinstance(state.E, FactoredPerturbation) and nS > 0:
        U, V = state.E.U, state.E.V
        n = U.shape[0]
        PU = np.eye(n) - U @ U.conj().T
        PV = np.eye(n) - V @ V.conj().T
        b = float(np.linalg.norm(PU @ S @ PV) / nS)
    else:
        b = float("nan")
    return StationarityDiagnostics(b, float(nS), state.residual, float(mu),
                                   float(np.sign(inner(E, S))))
