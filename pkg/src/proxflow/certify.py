"""Contraction factors, scalar LMI feasibility, empirical rate estimation,
and the proximal PL verification suite."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .envelopes import fb_envelope, gmap
from .flows import FlowSystem, Trajectory, integrate, make_flow
from .oracles import Array, sqnorm
from .problems import ProblemSpec
from .reference import solve_reference


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return f"{v:.17g}"


def _to_json_text(fields: list[tuple[str, object]]) -> str:
    # flat records only; floats carry 17 significant digits
    parts = []
    for key, value in fields:
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = _fmt_float(value)
        elif isinstance(value, int):
            rendered = str(value)
        elif isinstance(value, str):
            rendered = f'"{value}"'
        else:
            raise TypeError(f"unsupported field type for {key}: {type(value)}")
        parts.append(f'  "{key}": {rendered}')
    return "{\n" + ",\n".join(parts) + "\n}\n"


@dataclass(frozen=True)
class RateCertificate:
    """Analytic and empirical exponential-rate data for one flow."""

    m_f: float
    L_f: float
    mu: float
    sigma: float
    rho_certified: float
    lmi_witness_p: Optional[float]
    sigma_empirical: float
    rho_empirical: float
    kind: str

    def to_json(self) -> str:
        fields = [("m_f", self.m_f), ("L_f", self.L_f), ("mu", self.mu),
                  ("sigma", self.sigma), ("rho_certified", self.rho_certified)]
        if self.lmi_witness_p is not None:
            fields.append(("lmi_witness_p", self.lmi_witness_p))
        fields += [("sigma_empirical", self.sigma_empirical),
                   ("rho_empirical", self.rho_empirical), ("kind", self.kind)]
        return _to_json_text(fields)


@dataclass(frozen=True)
class PLReport:
    """Sampled verification of the gradient-map growth inequality."""

    gamma: float
    mu: float
    rate: float
    sampled_violations: int
    min_ratio: float

    def to_json(self) -> str:
        return _to_json_text([
            ("gamma", self.gamma), ("mu", self.mu), ("rate", self.rate),
            ("sampled_violations", self.sampled_violations),
            ("min_ratio", self.min_ratio),
        ])


@dataclass(frozen=True)
class RateEstimate:
    """Least-squares decay-rate fit; ``flag`` is empty on success."""

    rho_hat: float
    window_size: int
    flag: str = ""

    @property
    def ok(self) -> bool:
        return self.flag == ""


def sigma_bound(m_f: float, L_f: float, mu: float) -> float:
    """Contraction factor ``max(|1 - mu m_f|, |1 - mu L_f|)`` of the scaled
    gradient step; below 1 exactly when ``mu`` lies in ``(0, 2/L_f)``."""
    if m_f <= 0.0:
        raise ValueError("contraction certificate needs a strictly positive m_f")
    if m_f > L_f:
        raise ValueError("m_f cannot exceed L_f")
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    return max(abs(1.0 - mu * m_f), abs(1.0 - mu * L_f))


def lmi_feasibility(sigma: float, rho: float) -> Optional[float]:
    """Scalar witness for the rate inequality ``p^2 - 2(1-rho)p + sigma^2 <= 0``.

    Returns the vertex ``p = 1 - rho`` when the quadratic has a real root in
    ``(0, inf)``, which happens exactly when ``rho <= 1 - sigma``; returns
    None otherwise.
    """
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    p = 1.0 - rho
    if sigma <= p:
        return p
    return None


def prox_gradient_nonlinearity(p: ProblemSpec) -> Callable[[Array], Array]:
    """``u(x) = prox_g(mu, x - mu grad f(x))``, the loop nonlinearity of the
    proximal gradient flow."""

    def u(x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        return p.g.prox(p.mu, x - p.mu * p.f.gradient(x))

    return u


def dr_nonlinearity(p: ProblemSpec) -> Callable[[Array], Array]:
    """``u(z) = R_g(R_f(z))``, the loop nonlinearity of the splitting flow."""
    from .flows import make_dr_flow
    sys = make_dr_flow(p, with_reference=False)

    def u(z: Array) -> Array:
        z = np.asarray(z, dtype=float)
        return sys.field(z) + z

    return u


def _nonlinearity(p: ProblemSpec, kind: str) -> Callable[[Array], Array]:
    if kind == "prox_gradient":
        return prox_gradient_nonlinearity(p)
    if kind == "dr_splitting":
        return dr_nonlinearity(p)
    raise ValueError(f"unknown nonlinearity kind: {kind!r}")


def quadratic_constraint_check(p: ProblemSpec, kind: str, samples: int = 10_000,
                               seed: int = 0, scale: float = 3.0) -> float:
    """Largest relative violation of the pointwise quadratic inequality
    ``sigma^2 ||dx||^2 - ||du||^2 >= 0`` over sampled pairs.

    The returned value is ``max((||du||^2 - sigma^2 ||dx||^2) / (1 + ||dx||^2))``;
    nonpositive up to roundoff when the contraction certificate holds.
    """
    sigma = sigma_bound(p.f.m_f, p.f.L_f, p.mu)
    if p.mu >= 2.0 / p.f.L_f:
        raise ValueError("quadratic constraint requires mu below 2/L_f")
    u = _nonlinearity(p, kind)
    rng = np.random.default_rng(seed)
    xi = scale * rng.standard_normal((samples, p.n))
    xi_hat = scale * rng.standard_normal((samples, p.n))
    du = u(xi) - u(xi_hat)
    dx = xi - xi_hat
    violation = (sqnorm(du) - sigma**2 * sqnorm(dx)) / (1.0 + sqnorm(dx))
    return float(np.max(violation))


def empirical_contraction(nonlinearity: Callable[[Array], Array], dim: int,
                          samples: int = 10_000, seed: int = 0,
                          scale: float = 3.0) -> float:
    """Largest sampled ratio ``||u(x) - u(x_hat)|| / ||x - x_hat||``."""
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    xi = scale * rng.standard_normal((samples, dim))
    xi_hat = scale * rng.standard_normal((samples, dim))
    num = np.sqrt(sqnorm(nonlinearity(xi) - nonlinearity(xi_hat)))
    den = np.sqrt(sqnorm(xi - xi_hat))
    keep = den > 1e-12
    return float(np.max(num[keep] / den[keep]))


def empirical_rate(traj: Trajectory, floor: float = 1e-10,
                   min_window: int = 10) -> RateEstimate:
    """Decay rate fitted to ``-log(dist)`` against time over the window where
    the distance sits in ``[floor, dist(0)/10]``."""
    if traj.dist is None:
        raise ValueError("trajectory carries no distance diagnostics")
    dist = np.asarray(traj.dist, dtype=float)
    if dist[0] <= floor:
        return RateEstimate(rho_hat=float("nan"), window_size=0,
                            flag="converged too fast to fit")
    mask = (dist >= floor) & (dist <= dist[0] / 10.0)
    if int(mask.sum()) < min_window:
        if np.all(dist[1:] < floor):
            return RateEstimate(rho_hat=float("nan"), window_size=int(mask.sum()),
                                flag="converged too fast to fit")
        return RateEstimate(rho_hat=float("nan"), window_size=int(mask.sum()),
                            flag="window too short to fit")
    slope = np.polyfit(traj.times[mask], -np.log(dist[mask]), 1)[0]
    return RateEstimate(rho_hat=float(slope), window_size=int(mask.sum()))


def pl_check(p: ProblemSpec, gamma: float, samples: int = 10_000,
             seed: int = 0, radii=(0.1, 1.0, 10.0)) -> PLReport:
    """Sampled check of ``||G(x)||^2 >= gamma (F_mu(x) - F_mu*)``.

    Points are Gaussian clouds at the given radii around the reference
    minimizer; points closer than 1e-8 to the solution set or with envelope
    gap below 1e-12 are excluded from the ratio.
    """
    mu, L_f = p.mu, p.f.L_f
    if not 0.0 < mu < 1.0 / L_f:
        raise ValueError("the growth inequality needs mu in (0, 1/L_f)")
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    ref = solve_reference(p)
    F_star = ref.F_mu_star
    rng = np.random.default_rng(seed)
    per = samples // len(radii)
    counts = [per] * (len(radii) - 1) + [samples - per * (len(radii) - 1)]
    blocks = [ref.x_star + rad * rng.standard_normal((cnt, p.n))
              for rad, cnt in zip(radii, counts)]
    X = np.concatenate(blocks, axis=0)

    gap = fb_envelope(p.f, p.g, mu, X).value - F_star
    if float(np.min(gap)) < -1e-9:
        raise RuntimeError(
            f"reference solve inconsistent: envelope gap {float(np.min(gap)):.3e} below optimum")
    keep = (ref.distance(X) > 1e-8) & (gap >= 1e-12)
    g2 = sqnorm(gmap(p.f, p.g, mu, X[keep]))
    ratio = g2 / gap[keep]
    min_ratio = float(np.min(ratio))
    violations = int(np.sum(ratio < gamma))
    return PLReport(gamma=float(gamma), mu=float(mu),
                    rate=float(gamma * mu * (1.0 - mu * L_f)),
                    sampled_violations=violations, min_ratio=min_ratio)


def pl_gamma_from_kappa(pl_kappa: float, mu: float) -> float:
    """Growth constant ``2 k / |mu k - 1|`` induced by the prox-linear
    curvature constant k; undefined at ``mu k = 1``."""
    if pl_kappa <= 0.0 or mu <= 0.0:
        raise ValueError("pl_kappa and mu must be positive")
    denom = mu * pl_kappa - 1.0
    if denom == 0.0:
        raise ValueError("gamma is undefined at mu * pl_kappa = 1")
    return 2.0 * pl_kappa / abs(denom)


def envelope_decay_check(traj: Trajectory, report: PLReport,
                         slack: float = 1e-6):
    """Verify ``F_mu(x(t)) - F* <= e^(-rate t) (F_mu(x(0)) - F*)`` at every
    sample with multiplicative slack; returns ``(passed, worst_margin)``."""
    if traj.envelope is None or traj.envelope_star is None:
        raise ValueError("trajectory carries no envelope diagnostics")
    gap = np.asarray(traj.envelope, dtype=float) - traj.envelope_star
    bound = np.exp(-report.rate * traj.times) * gap[0]
    eps = 1e-12 * max(1.0, abs(traj.envelope_star))
    denom = np.maximum(bound, 0.0) + eps
    margin = np.maximum(gap, 0.0) / denom
    worst = float(np.max(margin))
    return worst <= 1.0 + slack, worst


def build_certificate(p: ProblemSpec, kind: str, seed: int = 0,
                      samples: int = 10_000, h: float = 0.01,
                      t_end: Optional[float] = None):
    """Assemble a RateCertificate and its consistency checks for one flow.

    Returns ``(certificate, checks, notes)``: ``checks`` maps check names to
    booleans, ``notes`` is a list of report strings.
    """
    if kind not in ("prox_gradient", "dr_splitting"):
        raise ValueError(f"certification covers prox_gradient and dr_splitting, not {kind!r}")
    if p.f.m_f <= 0.0:
        raise ValueError("rate certification needs a strongly convex smooth term")
    sigma = sigma_bound(p.f.m_f, p.f.L_f, p.mu)
    notes = []
    checks = {}
    if sigma < 1.0:
        rho = 1.0 - sigma
        witness = lmi_feasibility(sigma, rho)
        checks["lmi_feasible"] = witness is not None
        if kind == "dr_splitting" and witness is not None:
            notes.append(
                "note: rate taken at the closed boundary rho = 1 - sigma "
                "(double-root witness); a strict-inequality convention would exclude it")
        qc = quadratic_constraint_check(p, kind, samples=samples, seed=seed)
        checks["quadratic_constraint"] = qc <= 1e-10
        sigma_hat = empirical_contraction(_nonlinearity(p, kind), p.n,
                                          samples=samples, seed=seed + 1)
        checks["contraction_bound"] = sigma_hat <= sigma + 1e-8

        sys = make_flow(p, kind)
        if t_end is None:
            t_end = min(60.0, 12.0 / max(rho, 0.2))
        rng = np.random.default_rng(seed + 2)
        x0 = sys.equilibrium_state + 2.0 * rng.standard_normal(sys.state_dim)
        traj = integrate(sys, x0, h=h, t_end=t_end, method="rk4")
        est = empirical_rate(traj)
        rho_hat = est.rho_hat
        checks["rate_bound"] = est.ok and rho_hat >= rho - 2e-3
        if not est.ok:
            notes.append(f"note: rate fit flagged: {est.flag}")
    else:
        rho = 0.0
        witness = None
        sigma_hat = float("nan")
        rho_hat = float("nan")
        checks["lmi_feasible"] = False
        notes.append(f"note: no contraction at mu = {p.mu:.17g} (sigma >= 1); "
                     "nothing to certify")

    cert = RateCertificate(m_f=p.f.m_f, L_f=p.f.L_f, mu=p.mu, sigma=sigma,
                           rho_certified=rho, lmi_witness_p=witness,
                           sigma_empirical=sigma_hat, rho_empirical=rho_hat,
                           kind=kind)
    return cert, checks, notes
