"""Moreau envelope, proximal augmented Lagrangian, forward-backward envelope,
generalized gradient map, and the curvature functional behind the proximal
PL analysis.

All operations broadcast over leading batch axes of their point arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .oracles import Array, ProxOracle, SmoothOracle, sqnorm


@dataclass
class EnvelopeEval:
    """Value of an envelope together with its inner minimizer.

    ``gradient`` is filled only when the caller asked for it (or when it is
    a byproduct of the evaluation, as for the Moreau envelope).
    """

    value: float
    prox_point: Array
    gradient: Optional[Array] = None


def moreau(g: ProxOracle, mu: float, v: Array) -> EnvelopeEval:
    """Moreau envelope of g: ``g(p) + ||p - v||^2 / (2 mu)`` at ``p = prox(mu, v)``.

    The gradient is ``(v - p) / mu``, so ``mu * gradient + p == v``.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    v = np.asarray(v, dtype=float)
    p = g.prox(mu, v)
    value = g.value(p) + sqnorm(p - v) / (2.0 * mu)
    if v.ndim == 1:
        value = float(value)
    return EnvelopeEval(value=value, prox_point=p, gradient=(v - p) / mu)


def pal(f: SmoothOracle, g: ProxOracle, T: Optional[Array], mu: float,
        x: Array, y: Array) -> EnvelopeEval:
    """Proximal augmented Lagrangian ``f(x) + M(Tx + mu y) - mu ||y||^2 / 2``
    where M is the Moreau envelope of g.

    ``T = None`` means identity coupling. The gradient is the stacked pair
    ``(grad_x, grad_y)`` along the last axis, with
    ``grad_x = grad f(x) + T' grad M`` and ``grad_y = mu (grad M - y)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = (x if T is None else x @ np.asarray(T, dtype=float).T) + mu * y
    m = moreau(g, mu, w)
    value = f.value(x) + m.value - 0.5 * mu * sqnorm(y)
    if x.ndim == 1:
        value = float(value)
    grad_x = f.gradient(x) + (m.gradient if T is None
                              else m.gradient @ np.asarray(T, dtype=float))
    grad_y = mu * m.gradient - mu * y
    return EnvelopeEval(value=value, prox_point=m.prox_point,
                        gradient=np.concatenate([grad_x, grad_y], axis=-1))


def fb_envelope(f: SmoothOracle, g: ProxOracle, mu: float, x: Array,
                with_gradient: bool = False) -> EnvelopeEval:
    """Forward-backward envelope
    ``f(x) + M(x - mu grad f(x)) - mu ||grad f(x)||^2 / 2``.

    Defined for identity coupling only. A smooth surrogate of ``f + g`` with
    the same minimizers for ``mu`` below ``1/L_f``.
    """
    x = np.asarray(x, dtype=float)
    gf = f.gradient(x)
    m = moreau(g, mu, x - mu * gf)
    value = f.value(x) + m.value - 0.5 * mu * sqnorm(gf)
    if x.ndim == 1:
        value = float(value)
    gradient = None
    if with_gradient:
        G = (x - m.prox_point) / mu
        gradient = G - mu * f.hessian_apply(x, G)
    return EnvelopeEval(value=value, prox_point=m.prox_point, gradient=gradient)


def gmap(f: SmoothOracle, g: ProxOracle, mu: float, x: Array) -> Array:
    """Generalized gradient map ``(x - prox(mu, x - mu grad f(x))) / mu``.

    Vanishes exactly at minimizers of ``f + g``; reduces to ``grad f`` when
    g is the zero function.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    x = np.asarray(x, dtype=float)
    return (x - g.prox(mu, x - mu * f.gradient(x))) / mu


def fb_gradient(f: SmoothOracle, g: ProxOracle, mu: float, x: Array) -> Array:
    """Gradient of the forward-backward envelope,
    ``(I - mu hess f(x)) G(x)`` with G the generalized gradient map."""
    if not f.twice_differentiable:
        raise ValueError("forward-backward gradient needs a twice differentiable smooth term")
    x = np.asarray(x, dtype=float)
    G = gmap(f, g, mu, x)
    return G - mu * f.hessian_apply(x, G)


def dg_curvature(f: SmoothOracle, g: ProxOracle, alpha: float, x: Array):
    """Scaled decrease of the prox-linear model at x:
    ``-2 alpha min_y (<grad f(x), y - x> + alpha ||y - x||^2 / 2 + g(y) - g(x))``.

    The inner minimizer is ``y = prox with parameter 1/alpha`` of
    ``x - grad f(x)/alpha``. With ``alpha = 1/mu`` this equals
    ``2 (F(x) - F_mu(x)) / mu`` where ``F = f + g`` and F_mu is the
    forward-backward envelope. ``x`` must be feasible for indicator g.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    x = np.asarray(x, dtype=float)
    gf = f.gradient(x)
    y = g.prox(1.0 / alpha, x - gf / alpha)
    d = y - x
    inner = (np.sum(gf * d, axis=-1) + 0.5 * alpha * sqnorm(d)
             + g.value(y) - g.value(x))
    out = -2.0 * alpha * inner
    return float(out) if x.ndim == 1 else out
