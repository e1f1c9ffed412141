"""Vector fields of the continuous-time dynamics, fixed-step integration,
and equilibrium solves.

Each dynamic is the feedback loop ``state' = -state + u(state)`` for its own
nonlinearity u, so forward Euler with step one reproduces the matching
discrete algorithm. Fields broadcast over leading batch axes of the state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .envelopes import fb_envelope, gmap, moreau, pal
from .oracles import (Array, ConjugateQuadratic, prox_smooth, solve_posdef,
                      sqnorm)
from .problems import ProblemSpec
from .reference import ReferenceSolution, solve_dual_reference, solve_reference

FLOW_KINDS = ("prox_gradient", "dr_splitting", "ahu_primal_dual", "dual_dr")


class NonFiniteStateError(RuntimeError):
    """Integration produced a non-finite state."""

    def __init__(self, time: float):
        super().__init__(f"non-finite state encountered at t = {time:.6g}")
        self.time = time


@dataclass(frozen=True)
class FlowSystem:
    """A flow: its vector field plus optional reference-based diagnostics."""

    kind: str
    problem: ProblemSpec
    state_dim: int
    field: Callable[[Array], Array]
    recover_x: Callable[[Array], Array]
    reference: Optional[ReferenceSolution] = None
    equilibrium_state: Optional[Array] = None
    diagnostics: Optional[Callable[[Array], dict]] = None
    envelope_star: Optional[float] = None


@dataclass
class Trajectory:
    """Time-stamped states of one flow plus per-sample diagnostics."""

    times: Array
    states: Array
    dist: Optional[Array] = None
    envelope: Optional[Array] = None
    gmap_norm: Optional[Array] = None
    envelope_star: Optional[float] = None

    def __post_init__(self):
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must increase strictly from 0")
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("one state per time stamp required")

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    def to_csv(self, path) -> None:
        d = self.state_dim
        k = self.times.shape[0]
        nan = np.full(k, np.nan)
        cols = [self.times,
                self.dist if self.dist is not None else nan,
                self.envelope if self.envelope is not None else nan,
                self.gmap_norm if self.gmap_norm is not None else nan]
        header = "t,dist,envelope,gmap_norm," + ",".join(
            f"state_{i}" for i in range(d))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            for i in range(k):
                row = [f"{c[i]:.17g}" for c in cols]
                row += [f"{v:.17g}" for v in self.states[i]]
                fh.write(",".join(row) + "\n")


def _identity_required(p: ProblemSpec, what: str) -> None:
    if not p.has_identity_coupling():
        raise ValueError(f"{what} requires identity coupling (T = I)")


# -- plain field operations ------------------------------------------------

def pg_field(p: ProblemSpec, x: Array) -> Array:
    """Proximal gradient flow field ``-(x - prox(mu, x - mu grad f(x)))``,
    i.e. ``-mu`` times the generalized gradient map."""
    _identity_required(p, "proximal gradient flow")
    x = np.asarray(x, dtype=float)
    return p.g.prox(p.mu, x - p.mu * p.f.gradient(x)) - x


def ahu_field(p: ProblemSpec, x: Array, y: Array):
    """Primal-descent dual-ascent field on the proximal augmented Lagrangian:
    ``x' = -mu (grad f(x) + T' grad M(Tx + mu y))``,
    ``y' =  mu (grad M(Tx + mu y) - y)``."""
    if p.r is not None and np.any(p.offset() != 0.0):
        raise ValueError("primal-dual flow assumes a zero constraint offset")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mu = p.mu
    T = None if p.has_identity_coupling() else p.coupling()
    w = (x if T is None else x @ T.T) + mu * y
    grad_m = (w - p.g.prox(mu, w)) / mu
    dx = -mu * (p.f.gradient(x) + (grad_m if T is None else grad_m @ T))
    dy = mu * (grad_m - y)
    return dx, dy


def reflected_prox_g(p: ProblemSpec, v: Array) -> Array:
    """``2 prox_g(mu, v) - v``."""
    v = np.asarray(v, dtype=float)
    return 2.0 * p.g.prox(p.mu, v) - v


def reflected_prox_f(p: ProblemSpec, v: Array) -> Array:
    """``2 prox_f(mu, v) - v`` through the smooth-term resolvent."""
    v = np.asarray(v, dtype=float)
    return 2.0 * prox_smooth(p.f, p.mu, v) - v


def dr_field(p: ProblemSpec, z: Array) -> Array:
    """Douglas-Rachford flow field ``-z + R_g(R_f(z))`` built from the two
    reflected resolvents."""
    _identity_required(p, "Douglas-Rachford flow")
    return -np.asarray(z, dtype=float) + reflected_prox_g(p, reflected_prox_f(p, z))


def _dual_pieces(p: ProblemSpec):
    """Resolvents of the dual pair  f*(-T'.) + r'.  and  g*(.)  (S = -I)."""
    if p.S is not None:
        S = np.asarray(p.S, dtype=float)
        if S.shape != (p.m, p.m) or not np.allclose(S, -np.eye(p.m)):
            raise ValueError("dual splitting flow supports S = -I only")
    cq = ConjugateQuadratic.from_smooth(p.f)
    T = p.coupling()
    r = p.offset()
    m = T.shape[0]
    rank = np.linalg.matrix_rank(T)
    if rank < m:
        raise ValueError(f"coupling matrix must have full row rank: rank {rank} < {m}")
    mu = p.mu
    TQiTt = T @ np.linalg.solve(cq.Q, T.T)
    M = np.eye(m) + mu * TQiTt
    factor = cho_factor(M)
    w0 = T @ solve_posdef(cq.Q, cq.q) + r

    def prox_f1(v: Array) -> Array:
        rhs = np.asarray(v, dtype=float) - mu * w0
        if rhs.ndim == 1:
            return cho_solve(factor, rhs)
        return cho_solve(factor, rhs.reshape(-1, m).T).T.reshape(rhs.shape)

    def prox_g1(v: Array) -> Array:
        v = np.asarray(v, dtype=float)
        # Moreau decomposition against the conjugate of g
        return v - mu * p.g.prox(1.0 / mu, v / mu)

    def recover_x(zeta: Array) -> Array:
        w = prox_f1(np.asarray(zeta, dtype=float))
        return solve_posdef(cq.Q, -(w @ T) - cq.q)

    def field(zeta: Array) -> Array:
        zeta = np.asarray(zeta, dtype=float)
        w = 2.0 * prox_f1(zeta) - zeta
        return -zeta + 2.0 * prox_g1(w) - w

    return field, recover_x


def dual_dr_field(p: ProblemSpec, zeta: Array) -> Array:
    """Douglas-Rachford field on the dual of the linearly constrained
    template; needs a quadratic smooth term and a full-row-rank coupling."""
    field, _ = _dual_pieces(p)
    return field(zeta)


# -- flow constructors with diagnostics ------------------------------------

def _smooth_resolvent_closure(p: ProblemSpec) -> Callable[[Array], Array]:
    if p.f.quadratic_terms is not None:
        Q, q = p.f.quadratic_terms
        factor = cho_factor(np.eye(p.n) + p.mu * Q)
        mu = p.mu

        def prox_f(v: Array) -> Array:
            rhs = np.asarray(v, dtype=float) - mu * q
            if rhs.ndim == 1:
                return cho_solve(factor, rhs)
            return cho_solve(factor, rhs.reshape(-1, p.n).T).T.reshape(rhs.shape)

        return prox_f
    return lambda v: prox_smooth(p.f, p.mu, v)


def make_pg_flow(p: ProblemSpec, with_reference: bool = True) -> FlowSystem:
    _identity_required(p, "proximal gradient flow")
    f, g, mu = p.f, p.g, p.mu

    def field(x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return g.prox(mu, x - mu * f.gradient(x)) - x

    ref = solve_reference(p) if with_reference else None
    diagnostics = None
    eq_state = None
    if ref is not None:
        eq_state = ref.x_star

        def diagnostics(X: Array) -> dict:
            env = fb_envelope(f, g, mu, X)
            return {
                "dist": ref.distance(X),
                "envelope": env.value,
                "gmap_norm": np.sqrt(sqnorm((X - env.prox_point) / mu)),
            }

    return FlowSystem(kind="prox_gradient", problem=p, state_dim=p.n,
                      field=field, recover_x=lambda s: s, reference=ref,
                      equilibrium_state=eq_state, diagnostics=diagnostics,
                      envelope_star=None if ref is None else ref.F_mu_star)


def make_dr_flow(p: ProblemSpec, with_reference: bool = True) -> FlowSystem:
    _identity_required(p, "Douglas-Rachford flow")
    f, g, mu = p.f, p.g, p.mu
    prox_f = _smooth_resolvent_closure(p)

    def field(z: Array) -> Array:
        z = np.asarray(z, dtype=float)
        w = 2.0 * prox_f(z) - z
        return 2.0 * g.prox(mu, w) - w - z

    ref = solve_reference(p) if with_reference else None
    diagnostics = None
    eq_state = None
    if ref is not None:
        z_star = ref.x_star + mu * f.gradient(ref.x_star)
        eq_state = z_star

        def diagnostics(Z: Array) -> dict:
            X = prox_f(Z)
            env = fb_envelope(f, g, mu, X)
            if ref.nullspace is not None:
                dist = ref.distance(Z)
            else:
                dist = np.sqrt(sqnorm(Z - z_star))
            return {
                "dist": dist,
                "envelope": env.value,
                "gmap_norm": np.sqrt(sqnorm((X - env.prox_point) / mu)),
            }

    return FlowSystem(kind="dr_splitting", problem=p, state_dim=p.n,
                      field=field, recover_x=prox_f, reference=ref,
                      equilibrium_state=eq_state, diagnostics=diagnostics,
                      envelope_star=None if ref is None else ref.F_mu_star)


def make_ahu_flow(p: ProblemSpec, with_reference: bool = True) -> FlowSystem:
    if p.r is not None and np.any(p.offset() != 0.0):
        raise ValueError("primal-dual flow assumes a zero constraint offset")
    f, g, mu = p.f, p.g, p.mu
    n, m = p.n, p.m
    identity = p.has_identity_coupling()
    T = None if identity else p.coupling()

    def field(state: Array) -> Array:
        state = np.asarray(state, dtype=float)
        x, y = state[..., :n], state[..., n:]
        w = (x if T is None else x @ T.T) + mu * y
        grad_m = (w - g.prox(mu, w)) / mu
        dx = -mu * (f.gradient(x) + (grad_m if T is None else grad_m @ T))
        dy = mu * (grad_m - y)
        return np.concatenate([dx, dy], axis=-1)

    ref = solve_reference(p) if (with_reference and identity) else None
    diagnostics = None
    eq_state = None
    if ref is not None:
        y_star = -f.gradient(ref.x_star)
        eq_state = np.concatenate([ref.x_star, y_star])

        def diagnostics(state: Array) -> dict:
            x, y = state[..., :n], state[..., n:]
            env = pal(f, g, p.T, mu, x, y)
            return {
                "dist": np.sqrt(sqnorm(state - eq_state)),
                "envelope": env.value,
                "gmap_norm": np.sqrt(sqnorm(gmap(f, g, mu, x))),
            }

    return FlowSystem(kind="ahu_primal_dual", problem=p, state_dim=n + m,
                      field=field, recover_x=lambda s: s[..., :n],
                      reference=ref, equilibrium_state=eq_state,
                      diagnostics=diagnostics,
                      envelope_star=None if ref is None else ref.F_mu_star)


def make_dual_dr_flow(p: ProblemSpec, with_reference: bool = True) -> FlowSystem:
    field, recover_x = _dual_pieces(p)
    ref = None
    diagnostics = None
    eq_state = None
    if with_reference:
        zeta_star = solve_dual_reference(p)
        eq_state = zeta_star

        def diagnostics(Z: Array) -> dict:
            k = Z.shape[:-1]
            return {
                "dist": np.sqrt(sqnorm(Z - zeta_star)),
                "envelope": np.full(k, np.nan),
                "gmap_norm": np.full(k, np.nan),
            }

    return FlowSystem(kind="dual_dr", problem=p, state_dim=p.m, field=field,
                      recover_x=recover_x, reference=ref,
                      equilibrium_state=eq_state, diagnostics=diagnostics)


def make_flow(p: ProblemSpec, kind: str, with_reference: bool = True) -> FlowSystem:
    makers = {
        "prox_gradient": make_pg_flow,
        "dr_splitting": make_dr_flow,
        "ahu_primal_dual": make_ahu_flow,
        "dual_dr": make_dual_dr_flow,
    }
    if kind not in makers:
        raise ValueError(f"unknown flow kind: {kind!r}")
    return makers[kind](p, with_reference=with_reference)


# -- integration and equilibria ---------------------------------------------

def integrate(sys: FlowSystem, x0: Array, h: float, t_end: float,
              method: str = "rk4"):
    """Fixed-step integration of a flow.

    ``x0`` of shape ``(d,)`` gives one Trajectory; shape ``(B, d)`` gives a
    list of B trajectories integrated in one batched pass over shared times.
    ``t_end`` is rounded to the nearest multiple of ``h``. Diagnostics are
    recorded at every step when the flow carries a reference solution.
    """
    if method not in ("euler", "rk4"):
        raise ValueError(f"unknown integration method: {method!r}")
    if h <= 0.0:
        raise ValueError("step size must be positive")
    n_steps = int(round(t_end / h))
    if n_steps < 1:
        raise ValueError("t_end must cover at least one step")
    x0 = np.asarray(x0, dtype=float)
    single = x0.ndim == 1
    X = x0[None, :].copy() if single else x0.copy()
    if X.shape[-1] != sys.state_dim:
        raise ValueError(f"state has dimension {X.shape[-1]}, flow needs {sys.state_dim}")

    times = h * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1,) + X.shape)
    states[0] = X
    f = sys.field
    for k in range(n_steps):
        if method == "euler":
            X = X + h * f(X)
        else:
            k1 = f(X)
            k2 = f(X + 0.5 * h * k1)
            k3 = f(X + 0.5 * h * k2)
            k4 = f(X + h * k3)
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(X)):
            raise NonFiniteStateError(time=times[k + 1])
        states[k + 1] = X

    diag = {"dist": None, "envelope": None, "gmap_norm": None}
    if sys.diagnostics is not None:
        flat = states.reshape(-1, sys.state_dim)
        out = sys.diagnostics(flat)
        diag = {k2: np.asarray(v).reshape(states.shape[:2]) for k2, v in out.items()}

    trajs = [
        Trajectory(
            times=times,
            states=states[:, b, :],
            dist=None if diag["dist"] is None else diag["dist"][:, b],
            envelope=None if diag["envelope"] is None else diag["envelope"][:, b],
            gmap_norm=None if diag["gmap_norm"] is None else diag["gmap_norm"][:, b],
            envelope_star=sys.envelope_star,
        )
        for b in range(X.shape[0])
    ]
    return trajs[0] if single else trajs


@dataclass(frozen=True)
class EquilibriumResult:
    state: Array
    x: Array
    residual: float
    converged: bool
    iterations: int


def solve_equilibrium(sys: FlowSystem, x0: Array, tol: float = 1e-10,
                      max_iter: int = 200_000) -> EquilibriumResult:
    """Damped fixed-point iteration on the flow field until its norm is at
    most ``tol``. Non-convergence is flagged, not raised."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    state = np.asarray(x0, dtype=float).copy()
    h = 1.0
    fval = sys.field(state)
    fnorm = float(np.linalg.norm(fval))
    iterations = 0
    while fnorm > tol and iterations < max_iter:
        candidate = state + h * fval
        cand_fval = sys.field(candidate)
        cand_fnorm = float(np.linalg.norm(cand_fval))
        if not np.isfinite(cand_fnorm) or cand_fnorm > fnorm:
            h *= 0.5
            if h < 1e-8:
                break
        else:
            state, fval, fnorm = candidate, cand_fval, cand_fnorm
            h = min(1.0, 1.1 * h)
        iterations += 1
    return EquilibriumResult(state=state, x=sys.recover_x(state),
                             residual=fnorm, converged=fnorm <= tol,
                             iterations=iterations)
