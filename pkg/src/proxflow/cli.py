"""Command-line front end: run flows, emit CSV trajectories and JSON
certificates, and reproduce the verification experiments end to end.

Exit codes: 0 success, 1 invalid input, 2 non-convergence,
3 certification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import certify as cert
from .envelopes import dg_curvature, fb_envelope
from .flows import NonFiniteStateError, Trajectory, integrate, make_flow
from .problems import (ProblemSpec, catalog_keys, default_mu, get_problem,
                       problem_from_json)
from .reference import ConvergenceError, admm, discrete_dr, ista

FLOW_ALIASES = {
    "pg": "prox_gradient",
    "dr": "dr_splitting",
    "ahu": "ahu_primal_dual",
    "dual-dr": "dual_dr",
}

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NO_CONVERGENCE = 2
EXIT_CERT_FAILED = 3


class CliError(Exception):
    """Invalid input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", help=f"catalog key, one of {', '.join(catalog_keys())}")
    p.add_argument("--problem-file", help="JSON problem document with inline matrices")
    p.add_argument("--mu", default=None,
                   help='step parameter: a number or "remark2" (default: keep the problem default)')
    p.add_argument("--seed", type=int, default=0)


def _resolve_problem(args) -> ProblemSpec:
    if args.problem and args.problem_file:
        raise CliError("pass either --problem or --problem-file, not both")
    if args.problem:
        try:
            problem = get_problem(args.problem)
        except KeyError:
            raise CliError(f"unknown problem: {args.problem}") from None
    elif args.problem_file:
        try:
            problem = problem_from_json(args.problem_file)
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"bad problem file: {exc}") from None
    else:
        raise CliError("a problem is required (--problem or --problem-file)")
    if args.mu is not None:
        if args.mu == "remark2":
            problem = problem.with_mu(default_mu(problem.f))
        else:
            try:
                mu = float(args.mu)
            except ValueError:
                raise CliError(f"bad value for mu: {args.mu!r}") from None
            if mu <= 0.0:
                raise CliError("mu must be positive")
            problem = problem.with_mu(mu)
    return problem


def _initial_state(args, state_dim: int) -> np.ndarray:
    if args.x0 == "zeros":
        return np.zeros(state_dim)
    rng = np.random.default_rng(args.seed)
    return 2.0 * rng.standard_normal(state_dim)


def _compare_discrete(problem: ProblemSpec, kind: str, traj: Trajectory) -> float:
    """Max per-step deviation between unit-step Euler iterates and the
    directly coded discrete algorithm from the same start."""
    steps = traj.times.shape[0] - 1
    z0 = traj.states[0]
    if kind == "prox_gradient":
        x = z0.copy()
        ref = [x.copy()]
        for _ in range(steps):
            x = problem.g.prox(problem.mu, x - problem.mu * problem.f.gradient(x))
            ref.append(x.copy())
        ref = np.asarray(ref)
    elif kind == "dr_splitting":
        ref = discrete_dr(problem.f, problem.g, problem.mu, z0, steps)
    elif kind == "dual_dr":
        _, zs, ys = admm(problem.f, problem.g, problem.coupling(),
                         problem.offset(), problem.mu,
                         z0=np.zeros(problem.m), y0=z0, steps=steps,
                         symmetric=True)
        ref = ys - problem.mu * zs
    else:
        raise CliError(f"--compare-discrete does not support flow kind {kind}")
    return float(np.max(np.abs(traj.states - ref)))


def cmd_simulate(args) -> int:
    problem = _resolve_problem(args)
    kind = FLOW_ALIASES[args.flow]
    if args.compare_discrete and (args.method != "euler" or args.h != 1.0):
        raise CliError("--compare-discrete needs --method euler --h 1")
    try:
        system = make_flow(problem, kind)
        traj = integrate(system, _initial_state(args, system.state_dim),
                         h=args.h, t_end=args.t_end, method=args.method)
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except NonFiniteStateError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE

    traj.to_csv(args.csv)
    print(f"seed={args.seed} csv={args.csv}")
    if args.compare_discrete:
        dev = _compare_discrete(problem, kind, traj)
        print(f"discrete_max_dev={dev:.17g}")

    sigma = float("nan")
    bound_ok = True
    if problem.f.m_f > 0.0:
        sigma = cert.sigma_bound(problem.f.m_f, problem.f.L_f, problem.mu)
        if sigma < 1.0 and traj.dist is not None and traj.dist[0] > 0.0:
            envelope = (1.0 + 1e-6) * np.exp(-(1.0 - sigma) * traj.times) * traj.dist[0]
            bound_ok = bool(np.all(traj.dist <= envelope))
    rho_hat = float("nan")
    if traj.dist is not None:
        est = cert.empirical_rate(traj)
        rho_hat = est.rho_hat
    ok_text = "true" if bound_ok else "false"
    print(f"rho_hat={rho_hat:.17g} sigma={sigma:.17g} bound_ok={ok_text}")
    return EXIT_OK


def cmd_certify(args) -> int:
    problem = _resolve_problem(args)
    kind = FLOW_ALIASES[args.kind]
    if problem.f.m_f <= 0.0:
        raise CliError("certification needs a strongly convex problem (m_f > 0)")
    certificate, checks, notes = cert.build_certificate(
        problem, kind, seed=args.seed, samples=args.samples)
    Path(args.json).write_text(certificate.to_json(), encoding="utf-8")
    print(f"seed={args.seed} json={args.json}")
    print(f"sigma={certificate.sigma:.17g} rho_certified={certificate.rho_certified:.17g}")
    for name, ok in checks.items():
        print(f"check {name}: {'pass' if ok else 'fail'}")
    for note in notes:
        print(note)
    return EXIT_OK if all(checks.values()) else EXIT_CERT_FAILED


def cmd_pl(args) -> int:
    problem = _resolve_problem(args)
    if not 0.0 < problem.mu < 1.0 / problem.f.L_f:
        raise CliError("the growth verification needs mu in (0, 1/L_f)")
    report = cert.pl_check(problem, args.gamma, samples=args.samples,
                           seed=args.seed)
    Path(args.json).write_text(report.to_json(), encoding="utf-8")
    system = make_flow(problem, "prox_gradient")
    rng = np.random.default_rng(args.seed)
    x0 = system.equilibrium_state + 3.0 * rng.standard_normal(system.state_dim)
    traj = integrate(system, x0, h=args.h, t_end=args.t_end, method="rk4")
    decay_ok, worst = cert.envelope_decay_check(traj, report)

    # curvature identity, checked at prox-feasible sample points
    X = problem.g.prox(problem.mu,
                       system.equilibrium_state
                       + 2.0 * rng.standard_normal((1000, problem.n)))
    lhs = dg_curvature(problem.f, problem.g, 1.0 / problem.mu, X)
    F = problem.f.value(X) + problem.g.value(X)
    F_mu = fb_envelope(problem.f, problem.g, problem.mu, X).value
    rhs = (2.0 / problem.mu) * (F - F_mu)
    dg_dev = float(np.max(np.abs(lhs - rhs) / (1.0 + np.abs(rhs))))

    print(f"seed={args.seed} json={args.json}")
    print(f"violations={report.sampled_violations} min_ratio={report.min_ratio:.17g}")
    print(f"decay_ok={'true' if decay_ok else 'false'} worst_margin={worst:.17g}")
    print(f"dg_max_dev={dg_dev:.17g}")
    failed = report.sampled_violations > 0 or not decay_ok or dg_dev > 1e-10
    return EXIT_CERT_FAILED if failed else EXIT_OK


def cmd_sweep(args) -> int:
    problem = _resolve_problem(args)
    kind = FLOW_ALIASES[args.kind]
    if problem.f.m_f <= 0.0:
        raise CliError("certification needs a strongly convex problem (m_f > 0)")
    try:
        grid = [float(v) for v in args.mu_grid.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"bad --mu-grid: {args.mu_grid!r}") from None
    if not grid or any(v <= 0.0 for v in grid):
        raise CliError("--mu-grid needs positive comma-separated values")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, mu in enumerate(grid):
        certificate, checks, _ = cert.build_certificate(
            problem.with_mu(mu), kind, seed=args.seed, samples=args.samples)
        path = out_dir / f"certificate_{i:03d}.json"
        path.write_text(certificate.to_json(), encoding="utf-8")
        ok = all(checks.values())
        print(f"mu={mu:.17g} sigma={certificate.sigma:.17g} "
              f"certified={'true' if ok else 'false'} json={path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="proxflow",
                     description="Proximal gradient and splitting flows "
                                 "with exponential-rate certification.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a flow and write its trajectory")
    _add_problem_args(sim)
    sim.add_argument("--flow", choices=sorted(FLOW_ALIASES), default="pg")
    sim.add_argument("--method", choices=("euler", "rk4"), default="rk4")
    sim.add_argument("--h", type=float, default=0.01)
    sim.add_argument("--t-end", type=float, default=10.0)
    sim.add_argument("--x0", choices=("random", "zeros"), default="random")
    sim.add_argument("--csv", default="trajectory.csv")
    sim.add_argument("--compare-discrete", action="store_true",
                     help="also run the matching discrete algorithm and print the deviation")
    sim.set_defaults(func=cmd_simulate)

    crt = sub.add_parser("certify", help="emit a rate certificate")
    _add_problem_args(crt)
    crt.add_argument("--kind", choices=("pg", "dr"), default="pg")
    crt.add_argument("--samples", type=int, default=10_000)
    crt.add_argument("--json", default="certificate.json")
    crt.set_defaults(func=cmd_certify)

    pl = sub.add_parser("pl", help="verify the gradient-map growth condition")
    _add_problem_args(pl)
    pl.add_argument("--gamma", type=float, required=True)
    pl.add_argument("--samples", type=int, default=10_000)
    pl.add_argument("--h", type=float, default=0.01)
    pl.add_argument("--t-end", type=float, default=30.0)
    pl.add_argument("--json", default="pl_report.json")
    pl.set_defaults(func=cmd_pl)

    swp = sub.add_parser("sweep", help="certificates over a grid of mu values")
    _add_problem_args(swp)
    swp.add_argument("--kind", choices=("pg", "dr"), default="pg")
    swp.add_argument("--mu-grid", required=True,
                     help="comma-separated positive step values")
    swp.add_argument("--samples", type=int, default=10_000)
    swp.add_argument("--out-dir", default="certificates")
    swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
