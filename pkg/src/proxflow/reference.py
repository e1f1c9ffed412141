"""Independent discrete solvers used to produce reference solutions.

None of these routines touch the continuous-time machinery in
:mod:`proxflow.flows`; acceptance of a flow is always judged against a
solution produced here (or against a closed-form/KKT solve).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .oracles import Array, ProxOracle, SmoothOracle, solve_posdef, sqnorm
from .problems import ProblemSpec


class ConvergenceError(RuntimeError):
    """A reference solver failed to reach its tolerance."""


@dataclass(frozen=True)
class ReferenceSolution:
    """Reference minimizer and optimal values for a composite problem.

    ``nullspace`` carries an orthonormal basis of flat directions for
    degenerate (merely convex) quadratics; distances are then measured to
    the whole solution set.
    """

    x_star: Array
    F_star: float
    F_mu_star: Optional[float]
    nullspace: Optional[Array] = None

    def distance(self, x: Array) -> Array:
        d = np.asarray(x, dtype=float) - self.x_star
        if self.nullspace is not None:
            d = d - (d @ self.nullspace) @ self.nullspace.T
        return np.sqrt(sqnorm(d))


def ista(f: SmoothOracle, g: ProxOracle, mu: float, x0: Array,
         tol: float = 1e-13, max_iter: int = 500_000) -> Array:
    """Proximal gradient iteration ``x <- prox(mu, x - mu grad f(x))`` run to
    a fixed-point residual below ``tol``."""
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        x_next = g.prox(mu, x - mu * f.gradient(x))
        if not np.all(np.isfinite(x_next)):
            raise ConvergenceError("ista diverged (non-finite iterate)")
        if np.linalg.norm(x_next - x) <= tol:
            return x_next
        x = x_next
    raise ConvergenceError(f"ista did not reach tol {tol:.1e} in {max_iter} iterations")


def projected_gradient(f: SmoothOracle, lo: Array, hi: Array, mu: float,
                       x0: Array, tol: float = 1e-13,
                       max_iter: int = 500_000) -> Array:
    """Projected gradient descent onto a box, with its own clamp."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        x_next = np.minimum(np.maximum(x - mu * f.gradient(x), lo), hi)
        if not np.all(np.isfinite(x_next)):
            raise ConvergenceError("projected gradient diverged (non-finite iterate)")
        if np.linalg.norm(x_next - x) <= tol:
            return x_next
        x = x_next
    raise ConvergenceError(
        f"projected gradient did not reach tol {tol:.1e} in {max_iter} iterations")


def quadratic_resolvent(f: SmoothOracle, mu: float) -> Callable[[Array], Array]:
    """Closed-form ``(I + mu grad f)^{-1}`` for a quadratic smooth term,
    kept separate from the library resolvent on purpose."""
    if f.quadratic_terms is None:
        raise ValueError("smooth term is not quadratic")
    Q, q = f.quadratic_terms
    M = np.eye(f.dim) + mu * Q

    def solve(v: Array) -> Array:
        return solve_posdef(M, np.asarray(v, dtype=float) - mu * q)

    return solve


def newton_resolvent(f: SmoothOracle, mu: float, tol: float = 1e-14,
                     max_iter: int = 60) -> Callable[[Array], Array]:
    """Plain (undamped) Newton solve of ``z + mu grad f(z) = v``."""
    eye = np.eye(f.dim)

    def solve(v: Array) -> Array:
        v = np.asarray(v, dtype=float)
        z = v.copy()
        for _ in range(max_iter):
            res = z + mu * f.gradient(z) - v
            if np.linalg.norm(res) <= tol:
                return z
            H = eye + mu * f.hessian_apply(z, eye)
            z = z + np.linalg.solve(H, -res)
        raise ConvergenceError("newton resolvent stalled")

    return solve


def smooth_resolvent(f: SmoothOracle, mu: float) -> Callable[[Array], Array]:
    if f.quadratic_terms is not None:
        return quadratic_resolvent(f, mu)
    return newton_resolvent(f, mu)


def discrete_dr(f: SmoothOracle, g: ProxOracle, mu: float, z0: Array,
                steps: int, averaged: bool = False) -> Array:
    """Douglas-Rachford recursion through the two reflected resolvents.

    The default is the full reflect-reflect composition
    ``z <- 2 prox_g(2 prox_f(z) - z) - (2 prox_f(z) - z)``; with
    ``averaged=True`` the halfway-averaged variant
    ``z <- z + prox_g(2 prox_f(z) - z) - prox_f(z)`` is produced instead.
    Returns the array of iterates including ``z0``.
    """
    prox_f = smooth_resolvent(f, mu)
    z = np.asarray(z0, dtype=float).copy()
    out = [z.copy()]
    for _ in range(steps):
        xf = prox_f(z)
        w = 2.0 * xf - z
        xg = g.prox(mu, w)
        z = (z + xg - xf) if averaged else (2.0 * xg - w)
        out.append(z.copy())
    return np.asarray(out)


def admm(f: SmoothOracle, g: ProxOracle, T: Array, r: Array, mu: float,
         z0: Array, y0: Array, steps: int, symmetric: bool = True):
    """Method of multipliers with alternating updates for
    minimize ``f(x) + g(z)`` subject to ``T x - z = r``, penalty ``mu``.

    ``symmetric=True`` inserts the extra multiplier half-update between the
    x- and z-minimizations (both orderings are standard). Requires a
    quadratic smooth term; the x-update is a direct linear solve.
    Returns arrays ``(xs, zs, ys)`` with ``zs[0], ys[0] = z0, y0`` and one
    more entry per iteration (``xs[k]`` is produced by iteration k+1).
    """
    if f.quadratic_terms is None:
        raise ValueError("admm reference needs a quadratic smooth term")
    Q, q = f.quadratic_terms
    T = np.asarray(T, dtype=float)
    r = np.asarray(r, dtype=float)
    M = Q + mu * T.T @ T
    z = np.asarray(z0, dtype=float).copy()
    y = np.asarray(y0, dtype=float).copy()
    xs, zs, ys = [], [z.copy()], [y.copy()]
    for _ in range(steps):
        x = np.linalg.solve(M, -q - T.T @ y + mu * T.T @ (z + r))
        if symmetric:
            y = y + mu * (T @ x - z - r)
        z = g.prox(1.0 / mu, T @ x - r + y / mu)
        y = y + mu * (T @ x - z - r)
        xs.append(x.copy())
        zs.append(z.copy())
        ys.append(y.copy())
    return np.asarray(xs), np.asarray(zs), np.asarray(ys)


def kkt_equality_qp(f: SmoothOracle, T: Array, r: Array):
    """Solve ``min x'Qx/2 + q'x  s.t.  T x = r`` through its KKT system.

    Returns the primal solution and the constraint multiplier.
    """
    if f.quadratic_terms is None:
        raise ValueError("kkt solve needs a quadratic objective")
    Q, q = f.quadratic_terms
    T = np.asarray(T, dtype=float)
    r = np.asarray(r, dtype=float)
    m, n = T.shape
    K = np.block([[Q, T.T], [T, np.zeros((m, m))]])
    sol = np.linalg.solve(K, np.concatenate([-q, r]))
    return sol[:n], sol[n:]


def min_norm_quadratic(f: SmoothOracle):
    """Minimum-norm minimizer of a convex quadratic plus the flat directions.

    Returns ``(x_star, nullspace)`` where nullspace is an orthonormal basis
    of the zero eigenspace (None when the quadratic is positive definite).
    """
    if f.quadratic_terms is None:
        raise ValueError("needs a quadratic objective")
    Q, q = f.quadratic_terms
    x_star, *_ = np.linalg.lstsq(Q, -q, rcond=None)
    evals, evecs = np.linalg.eigh(Q)
    flat = evals < 1e-10 * max(1.0, float(evals[-1]))
    nullspace = evecs[:, flat] if np.any(flat) else None
    return x_star, nullspace


def solve_reference(p: ProblemSpec, tol: float = 1e-13) -> ReferenceSolution:
    """Reference solution for a composite problem, per its declared method."""
    method = p.reference_method
    if method == "ista":
        x = ista(p.f, p.g, p.mu, np.zeros(p.n), tol=tol)
        nullspace = None
    elif method == "projected_gradient":
        # recover the box from the prox itself: clamp of +/- inf bounds
        big = 1e12
        lo = p.g.prox(1.0, -big * np.ones(p.n))
        hi = p.g.prox(1.0, big * np.ones(p.n))
        x = projected_gradient(p.f, lo, hi, p.mu, np.zeros(p.n), tol=tol)
        nullspace = None
    elif method == "lstsq":
        x, nullspace = min_norm_quadratic(p.f)
    elif method == "kkt":
        x, _ = kkt_equality_qp(p.f, p.coupling(), p.offset())
        nullspace = None
    else:
        raise ValueError(f"unknown reference method: {method!r}")

    if p.has_identity_coupling():
        F_star = p.f.value(x) + p.g.value(x)
    else:
        F_star = p.f.value(x) + p.g.value(p.coupling() @ x - p.offset())
    F_mu_star = F_star if p.mu < 1.0 / p.f.L_f else None
    return ReferenceSolution(x_star=x, F_star=float(F_star),
                             F_mu_star=F_mu_star, nullspace=nullspace)


def solve_dual_reference(p: ProblemSpec, tol: float = 1e-13) -> Array:
    """Optimal dual variable of the constrained template, mapped to the
    splitting coordinate ``y - mu z``."""
    if p.reference_method == "kkt":
        _, zeta = kkt_equality_qp(p.f, p.coupling(), p.offset())
        return zeta
    # drive the multiplier method to stationarity and read off y - mu z
    T, r = p.coupling(), p.offset()
    z = np.zeros(p.m)
    y = np.zeros(p.m)
    for _ in range(200_000):
        xs, zs, ys = admm(p.f, p.g, T, r, p.mu, z, y, steps=1, symmetric=True)
        z_new, y_new = zs[-1], ys[-1]
        if (np.linalg.norm(z_new - z) <= tol
                and np.linalg.norm(y_new - y) <= tol):
            return y_new - p.mu * z_new
        z, y = z_new, y_new
    raise ConvergenceError("dual reference did not converge")
