"""Smooth and nonsmooth function oracles with certified curvature constants.

Every callable stored on an oracle broadcasts over leading batch axes:
inputs of shape ``(n,)`` or ``(batch, n)`` give outputs of matching shape,
and scalar-valued maps return a plain float for single points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

Array = np.ndarray

SYMMETRY_TOL = 1e-12


class ProxSolveError(RuntimeError):
    """An iterative resolvent solve exhausted its budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def sqnorm(v: Array) -> Array:
    """Squared Euclidean norm over the last axis."""
    return np.sum(v * v, axis=-1)


def solve_posdef(M: Array, rhs: Array) -> Array:
    """Solve ``M z = rhs`` over the last axis of ``rhs`` (batched rhs allowed)."""
    if rhs.ndim == 1:
        return np.linalg.solve(M, rhs)
    return np.linalg.solve(M, rhs.reshape(-1, rhs.shape[-1]).T).T.reshape(rhs.shape)


def _scalarize(value, x: Array):
    return float(value) if x.ndim == 1 else value


@dataclass(frozen=True)
class SmoothOracle:
    """A smooth convex function with value, gradient and Hessian access.

    ``m_f`` and ``L_f`` are a strong-convexity modulus and a gradient
    Lipschitz constant; they may be conservative bounds rather than tight
    values, and every downstream certificate treats them as given.
    """

    dim: int
    value: Callable[[Array], float]
    gradient: Callable[[Array], Array]
    hessian_apply: Callable[[Array, Array], Array]
    m_f: float
    L_f: float
    twice_differentiable: bool = True
    # (Q, c) with grad f(x) = Q x + c, present when f is quadratic so that
    # resolvents reduce to a single linear solve.
    quadratic_terms: Optional[tuple] = None


@dataclass(frozen=True)
class ProxOracle:
    """A proper closed convex function given through its proximal operator.

    ``prox(mu, v)`` returns the minimizer of ``g(z) + ||z - v||^2 / (2 mu)``.
    ``value`` may return ``inf`` outside the domain (indicator functions).
    ``subgradient_contains(x, s)`` is a membership test for ``s`` in the
    subdifferential of g at a single point ``x``; it is used by tests.
    """

    dim: Optional[int]  # None when the operator applies in any dimension
    value: Callable[[Array], float]
    prox: Callable[[float, Array], Array]
    subgradient_contains: Callable[[Array, Array], bool]


def _validate_symmetric(Q: Array) -> Array:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {Q.shape}")
    scale = max(1.0, float(np.max(np.abs(Q))))
    asym = float(np.max(np.abs(Q - Q.T)))
    if asym > SYMMETRY_TOL * scale:
        raise ValueError(f"matrix is not symmetric: max asymmetry {asym:.3e}")
    return Q


def _quadratic_oracle(Q: Array, q: Array, m_f: float, L_f: float) -> SmoothOracle:
    n = Q.shape[0]

    def value(x):
        x = np.asarray(x, dtype=float)
        v = 0.5 * np.einsum("...i,ij,...j->...", x, Q, x) + x @ q
        return _scalarize(v, x)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return x @ Q + q

    def hessian_apply(x, v):
        return np.asarray(v, dtype=float) @ Q

    return SmoothOracle(
        dim=n,
        value=value,
        gradient=gradient,
        hessian_apply=hessian_apply,
        m_f=float(m_f),
        L_f=float(L_f),
        quadratic_terms=(Q, q),
    )


def make_quadratic(Q: Array, q: Array) -> SmoothOracle:
    """Strongly convex quadratic ``f(x) = x'Qx/2 + q'x`` with Q symmetric PD."""
    Q = _validate_symmetric(Q)
    q = np.asarray(q, dtype=float)
    if q.shape != (Q.shape[0],):
        raise ValueError(f"q has shape {q.shape}, expected ({Q.shape[0]},)")
    eigs = np.linalg.eigvalsh(Q)
    if eigs[0] <= 0.0:
        raise ValueError(
            f"Q is not positive definite: min eigenvalue {eigs[0]:.6e}"
        )
    return _quadratic_oracle(Q, q, m_f=eigs[0], L_f=eigs[-1])


def make_quadratic_psd(Q: Array, q: Array) -> SmoothOracle:
    """Convex quadratic allowing a singular Q (``m_f`` is reported as 0)."""
    Q = _validate_symmetric(Q)
    q = np.asarray(q, dtype=float)
    eigs = np.linalg.eigvalsh(Q)
    scale = max(1.0, float(eigs[-1]))
    if eigs[0] < -1e-10 * scale:
        raise ValueError(f"Q is indefinite: min eigenvalue {eigs[0]:.6e}")
    return _quadratic_oracle(Q, q, m_f=max(float(eigs[0]), 0.0), L_f=eigs[-1])


def make_least_squares(A: Array, b: Array) -> SmoothOracle:
    """``f(x) = ||Ax - b||^2 / 2``; constants from the singular values of A."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise ValueError("A must be 2-d with b matching its row count")
    svals = np.linalg.svd(A, compute_uv=False)
    L_f = float(svals[0] ** 2)
    m_f = float(svals[-1] ** 2) if A.shape[0] >= A.shape[1] else 0.0
    Q = A.T @ A
    q = -A.T @ b

    def value(x):
        x = np.asarray(x, dtype=float)
        res = x @ A.T - b
        return _scalarize(0.5 * sqnorm(res), x)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return (x @ A.T - b) @ A

    def hessian_apply(x, v):
        v = np.asarray(v, dtype=float)
        return (v @ A.T) @ A

    return SmoothOracle(
        dim=A.shape[1],
        value=value,
        gradient=gradient,
        hessian_apply=hessian_apply,
        m_f=m_f,
        L_f=L_f,
        quadratic_terms=(Q, q),
    )


def make_logistic(A: Array, labels: Array, ridge: float) -> SmoothOracle:
    """Ridge-regularized logistic loss over labeled rows of A.

    ``f(x) = sum_i log(1 + exp(-labels_i * <A_i, x>)) + ridge ||x||^2 / 2``.
    The constants are conservative analytic bounds: ``m_f = ridge`` and
    ``L_f = ||A||_2^2 / 4 + ridge``.
    """
    A = np.asarray(A, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if ridge <= 0.0:
        raise ValueError("ridge must be positive")
    if A.ndim != 2 or labels.shape != (A.shape[0],):
        raise ValueError("A must be 2-d with labels matching its row count")
    if not np.all(np.abs(labels) == 1.0):
        raise ValueError("labels must be +/-1")
    L_f = 0.25 * float(np.linalg.norm(A, ord=2)) ** 2 + ridge

    def value(x):
        x = np.asarray(x, dtype=float)
        margins = labels * (x @ A.T)
        v = np.sum(np.logaddexp(0.0, -margins), axis=-1) + 0.5 * ridge * sqnorm(x)
        return _scalarize(v, x)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        margins = labels * (x @ A.T)
        return (-labels * expit(-margins)) @ A + ridge * x

    def hessian_apply(x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        p = expit(labels * (x @ A.T))
        w = p * (1.0 - p)
        return (w * (v @ A.T)) @ A + ridge * v

    return SmoothOracle(
        dim=A.shape[1],
        value=value,
        gradient=gradient,
        hessian_apply=hessian_apply,
        m_f=float(ridge),
        L_f=float(L_f),
    )


def make_l1(lam: float, dim: Optional[int] = None, tol: float = 1e-9) -> ProxOracle:
    """Weighted l1 norm ``g(z) = lam * ||z||_1`` with soft-threshold prox."""
    if lam <= 0.0:
        raise ValueError("lam must be positive")

    def value(z):
        z = np.asarray(z, dtype=float)
        return _scalarize(lam * np.sum(np.abs(z), axis=-1), z)

    def prox(mu, v):
        v = np.asarray(v, dtype=float)
        return np.sign(v) * np.maximum(np.abs(v) - mu * lam, 0.0)

    def subgradient_contains(x, s):
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        on_pos = (x > tol) & (np.abs(s - lam) <= tol)
        on_neg = (x < -tol) & (np.abs(s + lam) <= tol)
        at_zero = (np.abs(x) <= tol) & (np.abs(s) <= lam + tol)
        return bool(np.all(on_pos | on_neg | at_zero))

    return ProxOracle(dim=dim, value=value, prox=prox,
                      subgradient_contains=subgradient_contains)


def make_box_indicator(lo: Array, hi: Array, tol: float = 1e-9) -> ProxOracle:
    """Indicator of the box ``[lo, hi]``; prox is the componentwise clamp."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape:
        raise ValueError("lo and hi must have the same shape")
    bad = np.nonzero(lo > hi)[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"lo[{i}] = {lo[i]} exceeds hi[{i}] = {hi[i]}")

    def value(z):
        z = np.asarray(z, dtype=float)
        inside = np.all((z >= lo - tol) & (z <= hi + tol), axis=-1)
        return _scalarize(np.where(inside, 0.0, np.inf), z)

    def prox(mu, v):
        # projection; mu does not enter
        return np.clip(np.asarray(v, dtype=float), lo, hi)

    def subgradient_contains(x, s):
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        if not np.all((x >= lo - tol) & (x <= hi + tol)):
            return False
        at_lo = x <= lo + tol
        at_hi = x >= hi - tol
        ok = np.where(at_lo & at_hi, True,
                      np.where(at_lo, s <= tol,
                               np.where(at_hi, s >= -tol, np.abs(s) <= tol)))
        return bool(np.all(ok))

    return ProxOracle(dim=lo.shape[0], value=value, prox=prox,
                      subgradient_contains=subgradient_contains)


def make_zero(dim: Optional[int] = None, tol: float = 1e-9) -> ProxOracle:
    """The zero function; its prox is the identity."""

    def value(z):
        z = np.asarray(z, dtype=float)
        return _scalarize(np.zeros(z.shape[:-1]), z)

    def prox(mu, v):
        return np.asarray(v, dtype=float).copy()

    def subgradient_contains(x, s):
        return bool(np.all(np.abs(np.asarray(s, dtype=float)) <= tol))

    return ProxOracle(dim=dim, value=value, prox=prox,
                      subgradient_contains=subgradient_contains)


def make_point_indicator(point: Array, tol: float = 1e-9) -> ProxOracle:
    """Indicator of the singleton ``{point}``; prox maps everything to it."""
    point = np.atleast_1d(np.asarray(point, dtype=float))

    def value(z):
        z = np.asarray(z, dtype=float)
        inside = np.all(np.abs(z - point) <= tol, axis=-1)
        return _scalarize(np.where(inside, 0.0, np.inf), z)

    def prox(mu, v):
        v = np.asarray(v, dtype=float)
        return np.broadcast_to(point, v.shape).copy()

    def subgradient_contains(x, s):
        # the subdifferential at the point is the whole space
        return bool(np.all(np.abs(np.asarray(x, dtype=float) - point) <= tol))

    return ProxOracle(dim=point.shape[0], value=value, prox=prox,
                      subgradient_contains=subgradient_contains)


def prox_smooth(f: SmoothOracle, mu: float, v: Array,
                tol: float = 1e-13, max_iter: int = 100) -> Array:
    """Resolvent of the scaled gradient map: z with ``z + mu grad f(z) = v``.

    Quadratic f reduces to one linear solve; otherwise a damped Newton
    iteration on the strongly convex subproblem is run from ``z = v``.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    v = np.asarray(v, dtype=float)
    if f.quadratic_terms is not None:
        Q, q = f.quadratic_terms
        M = np.eye(f.dim) + mu * Q
        return solve_posdef(M, v - mu * q)
    if v.ndim > 1:
        return np.stack([prox_smooth(f, mu, row, tol, max_iter) for row in v])

    z = v.copy()
    eye = np.eye(f.dim)
    res = z + mu * f.gradient(z) - v
    rnorm = float(np.linalg.norm(res))
    for _ in range(max_iter):
        if rnorm <= tol:
            return z
        H = eye + mu * f.hessian_apply(z, eye)
        step = np.linalg.solve(H, -res)
        t = 1.0
        while t > 1e-4:
            z_new = z + t * step
            res_new = z_new + mu * f.gradient(z_new) - v
            rnorm_new = float(np.linalg.norm(res_new))
            if rnorm_new <= (1.0 - 0.25 * t) * rnorm:
                break
            t *= 0.5
        z, res, rnorm = z_new, res_new, rnorm_new
    if rnorm <= tol:
        return z
    raise ProxSolveError(
        f"resolvent solve stalled at residual {rnorm:.3e} after {max_iter} iterations",
        residual=rnorm,
    )


@dataclass(frozen=True)
class ConjugateQuadratic:
    """Quadratic ``x'Qx/2 + q'x`` with Q SPD, exposing its convex conjugate."""

    Q: Array
    q: Array

    def __post_init__(self):
        Q = _validate_symmetric(self.Q)
        eigs = np.linalg.eigvalsh(Q)
        if eigs[0] <= 0.0:
            raise ValueError(
                f"conjugate form needs a positive definite Q: min eigenvalue {eigs[0]:.6e}"
            )
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))

    @classmethod
    def from_smooth(cls, f: SmoothOracle) -> "ConjugateQuadratic":
        if f.quadratic_terms is None:
            raise ValueError("smooth term is not quadratic; no closed-form conjugate")
        Q, q = f.quadratic_terms
        return cls(Q=Q, q=q)

    def value(self, x: Array):
        x = np.asarray(x, dtype=float)
        v = 0.5 * np.einsum("...i,ij,...j->...", x, self.Q, x) + x @ self.q
        return _scalarize(v, x)

    def conjugate_value(self, w: Array):
        w = np.asarray(w, dtype=float)
        d = w - self.q
        v = 0.5 * np.sum(d * solve_posdef(self.Q, d), axis=-1)
        return _scalarize(v, w)

    def conjugate_gradient(self, w: Array) -> Array:
        w = np.asarray(w, dtype=float)
        return solve_posdef(self.Q, w - self.q)
