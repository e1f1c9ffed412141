"""Composite problem instances and the named benchmark catalog."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .oracles import (Array, ProxOracle, SmoothOracle, make_box_indicator,
                      make_l1, make_logistic, make_point_indicator,
                      make_quadratic, make_quadratic_psd, make_zero)


@dataclass(frozen=True)
class ProblemSpec:
    """One composite instance: minimize ``f(x) + g(z)`` subject to
    ``T x + S z = r`` with ``S = -I`` (``T = None`` and ``r = None`` mean
    identity coupling and zero offset, i.e. minimize ``f(x) + g(x)``).
    """

    name: str
    f: SmoothOracle
    g: ProxOracle
    mu: float
    T: Optional[Array] = None
    S: Optional[Array] = None  # None stands for -I; anything else is rejected
    r: Optional[Array] = None
    reference_method: str = "ista"  # {"ista", "projected_gradient", "lstsq", "kkt"}

    @property
    def n(self) -> int:
        return self.f.dim

    @property
    def m(self) -> int:
        if self.T is not None:
            return np.asarray(self.T).shape[0]
        return self.f.dim

    def coupling(self) -> Array:
        """The coupling matrix, materialized (identity when T is None)."""
        if self.T is None:
            return np.eye(self.n)
        return np.asarray(self.T, dtype=float)

    def offset(self) -> Array:
        return np.zeros(self.m) if self.r is None else np.asarray(self.r, dtype=float)

    def has_identity_coupling(self) -> bool:
        T = self.T
        return T is None or (np.asarray(T).shape == (self.n, self.n)
                             and np.array_equal(np.asarray(T), np.eye(self.n)))

    def with_mu(self, mu: float) -> "ProblemSpec":
        if mu <= 0.0:
            raise ValueError("mu must be positive")
        return dataclasses.replace(self, mu=float(mu))


def default_mu(f: SmoothOracle) -> float:
    """Step parameter policy: ``2 / (L_f + m_f)`` for strongly convex f
    (the minimizer of the contraction factor), ``1 / (2 L_f)`` otherwise."""
    if f.m_f > 0.0:
        return 2.0 / (f.L_f + f.m_f)
    return 1.0 / (2.0 * f.L_f)


def _orthogonal(rng: np.random.Generator, n: int) -> Array:
    M = rng.standard_normal((n, n))
    V, _ = np.linalg.qr(M)
    return V


def _spectrum_quadratic(eigs, seed: int, q_scale: float = 0.0,
                        psd: bool = False) -> SmoothOracle:
    eigs = np.asarray(eigs, dtype=float)
    rng = np.random.default_rng(seed)
    V = _orthogonal(rng, eigs.size)
    Q = (V * eigs) @ V.T
    Q = 0.5 * (Q + Q.T)
    q = q_scale * rng.standard_normal(eigs.size) if q_scale else np.zeros(eigs.size)
    return (make_quadratic_psd if psd else make_quadratic)(Q, q)


def _lasso() -> ProblemSpec:
    f = _spectrum_quadratic(np.linspace(1.0, 3.0, 10), seed=20240101, q_scale=1.5)
    g = make_l1(0.4, dim=10)
    return ProblemSpec(name="lasso", f=f, g=g, mu=default_mu(f),
                       reference_method="ista")


def _box_qp() -> ProblemSpec:
    f = _spectrum_quadratic(np.linspace(1.0, 4.0, 8), seed=20240202, q_scale=3.0)
    g = make_box_indicator(-0.6 * np.ones(8), 0.6 * np.ones(8))
    return ProblemSpec(name="box-qp", f=f, g=g, mu=default_mu(f),
                       reference_method="projected_gradient")


def _pl_quadratic() -> ProblemSpec:
    f = _spectrum_quadratic(np.array([0.0, 1.0, 4.0]), seed=20240303, psd=True)
    return ProblemSpec(name="pl-quadratic", f=f, g=make_zero(dim=3),
                       mu=default_mu(f), reference_method="lstsq")


def _logistic_l1() -> ProblemSpec:
    rng = np.random.default_rng(20240404)
    A = rng.standard_normal((20, 5)) / np.sqrt(20.0)
    labels = np.where(rng.standard_normal(20) >= 0.0, 1.0, -1.0)
    f = make_logistic(A, labels, ridge=0.5)
    g = make_l1(0.02, dim=5)
    return ProblemSpec(name="logistic-l1", f=f, g=g, mu=default_mu(f),
                       reference_method="ista")


def _qp_equality() -> ProblemSpec:
    # minimize ||x||^2 / 2 subject to x1 + x2 = 1, written with z pinned to 0
    f = make_quadratic(np.eye(2), np.zeros(2))
    g = make_point_indicator(np.zeros(1))
    return ProblemSpec(name="qp-equality", f=f, g=g, mu=0.5,
                       T=np.array([[1.0, 1.0]]), r=np.array([1.0]),
                       reference_method="kkt")


_CATALOG = {
    "lasso": _lasso,
    "box-qp": _box_qp,
    "pl-quadratic": _pl_quadratic,
    "logistic-l1": _logistic_l1,
    "qp-equality": _qp_equality,
}


def catalog_keys() -> list[str]:
    return sorted(_CATALOG)


def get_problem(key: str) -> ProblemSpec:
    try:
        return _CATALOG[key]()
    except KeyError:
        raise KeyError(f"unknown problem: {key}") from None


def _build_f(spec: dict) -> SmoothOracle:
    kind = spec.get("kind")
    if kind == "quadratic":
        return make_quadratic(np.asarray(spec["Q"], float), np.asarray(spec["q"], float))
    if kind == "quadratic_psd":
        return make_quadratic_psd(np.asarray(spec["Q"], float), np.asarray(spec["q"], float))
    if kind == "least_squares":
        from .oracles import make_least_squares
        return make_least_squares(np.asarray(spec["A"], float), np.asarray(spec["b"], float))
    if kind == "logistic":
        return make_logistic(np.asarray(spec["A"], float),
                             np.asarray(spec["labels"], float),
                             float(spec["ridge"]))
    raise ValueError(f"unknown smooth term kind: {kind!r}")


def _build_g(spec: dict) -> ProxOracle:
    kind = spec.get("kind")
    if kind == "l1":
        return make_l1(float(spec["lam"]), dim=spec.get("dim"))
    if kind == "box":
        return make_box_indicator(np.asarray(spec["lo"], float), np.asarray(spec["hi"], float))
    if kind == "zero":
        return make_zero(dim=spec.get("dim"))
    if kind == "point":
        return make_point_indicator(np.asarray(spec["point"], float))
    raise ValueError(f"unknown regularizer kind: {kind!r}")


def problem_from_dict(doc: dict) -> ProblemSpec:
    """Build a ProblemSpec from a JSON-style document.

    Expected keys: ``f`` and ``g`` (each a dict with a ``kind`` tag and
    parameters as nested row-major arrays), optional ``T``, ``r``, ``mu``
    (number or the string "remark2"), ``name`` and ``reference_method``.
    """
    f = _build_f(doc["f"])
    g = _build_g(doc["g"])
    mu = doc.get("mu", "remark2")
    mu = default_mu(f) if mu == "remark2" else float(mu)
    if mu <= 0.0:
        raise ValueError("mu must resolve to a positive value")
    T = np.asarray(doc["T"], dtype=float) if "T" in doc else None
    r = np.asarray(doc["r"], dtype=float) if "r" in doc else None
    return ProblemSpec(
        name=doc.get("name", "inline"),
        f=f, g=g, mu=mu, T=T, r=r,
        reference_method=doc.get("reference_method", "ista"),
    )


def problem_from_json(path: str) -> ProblemSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return problem_from_dict(json.load(fh))
