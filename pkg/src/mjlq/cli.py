"""Command line front end for regime-switching LQ solvers and simulation.

Each subcommand reads a problem description from JSON, dispatches to the
matching solver or checker, and emits a machine-readable report.  Floats
are rendered with 17 significant digits in a fixed key order so repeated
runs with the same inputs produce byte-identical output.

Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 at least one
verification check raised a flag.
"""

from __future__ import annotations

import argparse
import csv
import importlib.resources
import io
import json
import math
import re
import sys

import numpy as np

from .bsde import solve_lq_feedforward
from .care import assemble_closed_loop, care_residual, solve_care
from .errors import MjlqError, SolverError, ValidationError
from .game import (
    assemble_game_closed_loop,
    game_residuals,
    solve_game,
    solve_game_feedforward,
)
from .model import MjlsGameProblem, load_problem, problem_from_dict
from .sim import (
    SimOptions,
    check_game_values,
    check_stationarity,
    check_value_function,
    estimate_cost,
    sample_chain_batch,
    simulate_closed_loop,
    trajectory_on_grid,
    verify_equilibrium_mc,
)
from .stability import check_condition_a

STATIONARITY_TOL = 1e-6
TRAJECTORY_PATHS = 5
TRAJECTORY_GRID = 201


def _plain(value):
    """Convert numpy containers and scalars to plain Python recursively."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _scalar_token(value) -> str:
    # bool first: it is an int subclass.
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        return format(value, ".17g")
    if isinstance(value, int):
        return str(value)
    if value is None:
        return "null"
    return json.dumps(value)


def _write_json(value, out: list, indent: int) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        last = len(value) - 1
        for idx, (key, item) in enumerate(value.items()):
            out.append("  " * (indent + 1) + json.dumps(str(key)) + ": ")
            _write_json(item, out, indent + 1)
            out.append(",\n" if idx < last else "\n")
        out.append(pad + "}")
    elif isinstance(value, list):
        if not value:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list)) for v in value):
            out.append("[" + ", ".join(_scalar_token(v) for v in value) + "]")
            return
        out.append("[\n")
        last = len(value) - 1
        for idx, item in enumerate(value):
            out.append("  " * (indent + 1))
            _write_json(item, out, indent + 1)
            out.append(",\n" if idx < last else "\n")
        out.append(pad + "]")
    else:
        out.append(_scalar_token(value))


def render_json(report) -> str:
    """Serialize a report deterministically (17 significant digits)."""
    out: list[str] = []
    _write_json(_plain(report), out, 0)
    out.append("\n")
    return "".join(out)


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _scalar_token(value)
    if value is None:
        return ""
    return str(value)


def _flatten(value, prefix: str, rows: list) -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            _flatten(item, f"{prefix}.{key}" if prefix else str(key), rows)
    elif isinstance(value, list):
        if not value:
            rows.append((prefix, ""))
        for idx, item in enumerate(value):
            _flatten(item, f"{prefix}[{idx}]", rows)
    else:
        rows.append((prefix, _csv_cell(value)))


def render_csv(report) -> str:
    """Serialize a report as flattened key,value rows."""
    rows: list = []
    _flatten(_plain(report), "", rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    for key, cell in rows:
        writer.writerow([key, cell])
    return buf.getvalue()


def _deliver(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", newline="") as fh:
            fh.write(text)


def _emit(args, report) -> None:
    text = render_csv(report) if args.format == "csv" else render_json(report)
    _deliver(text, args.output)


def _parse_vector(text: str | None, n: int) -> np.ndarray:
    if text is None:
        return np.ones(n)
    tokens = [tok for tok in re.split(r"[,\s]+", text.strip()) if tok]
    try:
        values = [float(tok) for tok in tokens]
    except ValueError:
        raise ValidationError(f"could not parse --x0 {text!r} as numbers") from None
    if len(values) != n:
        raise ValidationError(f"--x0 needs {n} entries, got {len(values)}")
    return np.asarray(values, dtype=np.float64)


def _regime_index(i0: int, D: int) -> int:
    # Regimes are 1-based on the command line, 0-based internally.
    if not 1 <= i0 <= D:
        raise ValidationError(f"--i0 must be between 1 and {D}, got {i0}")
    return i0 - 1


def _cert_report(cert) -> dict:
    return {
        "feasible": cert.feasible,
        "abscissa": cert.abscissa,
        "margin": cert.margin,
    }


def _solve_any(problem, tol: float, max_iter: int):
    """Solve either problem kind and assemble its closed loop."""
    if isinstance(problem, MjlsGameProblem):
        gsol = solve_game(problem, tol=tol, max_iter=max_iter)
        ff = None
        if problem.inhomog is not None:
            ff = solve_game_feedforward(gsol, problem)
        return gsol, ff, assemble_game_closed_loop(gsol, ff)
    sol = solve_care(problem, tol=tol, max_iter=max_iter)
    eta = None
    if problem.inhomog is not None:
        eta = solve_lq_feedforward(sol, problem)
    return sol, eta, assemble_closed_loop(sol, problem, eta)


def _cmd_check_stability(args) -> int:
    problem = load_problem(args.problem)
    cert = check_condition_a(problem.A, problem.gen)
    report = {
        "feasible": cert.feasible,
        "abscissa": cert.abscissa,
        "margin": cert.margin,
        "P": cert.P,
    }
    _emit(args, report)
    return 0


def _cmd_solve_lq(args) -> int:
    problem = load_problem(args.problem)
    if isinstance(problem, MjlsGameProblem):
        raise ValidationError(
            "solve-lq expects a single-controller problem; use solve-game"
        )
    sol = solve_care(problem, tol=args.tol, max_iter=args.max_iter)
    report = {
        "P": sol.P,
        "Theta": sol.Theta,
        "residuals": sol.residual_norms,
        "max_residual": float(np.max(sol.residual_norms)),
        "iterations": sol.iterations,
        "certificate": _cert_report(sol.certificate),
    }
    if problem.inhomog is not None:
        eta = solve_lq_feedforward(sol, problem)
        policy = assemble_closed_loop(sol, problem, eta)
        report["feedforward"] = {
            "kappa": eta.kappa,
            "h": eta.h,
            "nu_bar": policy.nu_bar,
            "residual": eta.residual,
        }
    _emit(args, report)
    return 0


def _cmd_solve_game(args) -> int:
    problem = load_problem(args.problem)
    if not isinstance(problem, MjlsGameProblem):
        raise ValidationError(
            "solve-game expects a two-player problem; use solve-lq"
        )
    gsol = solve_game(problem, tol=args.tol, max_iter=args.max_iter)
    all_norms = np.concatenate([gsol.residual_norms_1, gsol.residual_norms_2])
    report = {
        "P1": gsol.P1,
        "P2": gsol.P2,
        "Theta1": gsol.Theta1,
        "Theta2": gsol.Theta2,
        "residuals": {
            "player1": gsol.residual_norms_1,
            "player2": gsol.residual_norms_2,
            "constraint": gsol.constraint_residual,
        },
        "max_residual": float(np.max(all_norms)),
        "iterations": gsol.iterations,
        "certificate": _cert_report(gsol.certificate),
    }
    if problem.inhomog is not None:
        ff = solve_game_feedforward(gsol, problem)
        report["feedforward"] = {
            "kappa": ff.kappa,
            "h1": ff.h1,
            "h2": ff.h2,
            "nu1_bar": ff.nu1,
            "nu2_bar": ff.nu2,
            "residual": ff.residual,
            "constraint_residual": ff.constraint_residual,
            "drift_gap": ff.drift_gap,
        }
    _emit(args, report)
    return 0


def _cmd_solve_bsde(args) -> int:
    problem = load_problem(args.problem)
    if problem.inhomog is None:
        raise ValidationError(
            "the problem has no decaying forcing terms, so there is no "
            "feedforward system to solve"
        )
    if isinstance(problem, MjlsGameProblem):
        gsol = solve_game(problem, tol=args.tol, max_iter=args.max_iter)
        ff = solve_game_feedforward(gsol, problem)
        report = {
            "kappa": ff.kappa,
            "h1": ff.h1,
            "h2": ff.h2,
            "nu1_bar": ff.nu1,
            "nu2_bar": ff.nu2,
            "residual": ff.residual,
            "constraint_residual": ff.constraint_residual,
            "drift_gap": ff.drift_gap,
            "solver_iterations": gsol.iterations,
        }
    else:
        sol = solve_care(problem, tol=args.tol, max_iter=args.max_iter)
        eta = solve_lq_feedforward(sol, problem)
        policy = assemble_closed_loop(sol, problem, eta)
        report = {
            "kappa": eta.kappa,
            "h": eta.h,
            "nu_bar": policy.nu_bar,
            "residual": eta.residual,
            "solver_iterations": sol.iterations,
        }
    _emit(args, report)
    return 0


def _trajectory_csv(problem, policy, x0, i0, args) -> str:
    n = x0.size
    n_show = min(args.paths, TRAJECTORY_PATHS)
    chains = sample_chain_batch(problem.gen, i0, args.horizon, args.seed, n_show)
    times = np.linspace(0.0, args.horizon, TRAJECTORY_GRID)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path", "time", "regime"] + [f"x{j + 1}" for j in range(n)])
    for k, path in enumerate(chains):
        sample = simulate_closed_loop(problem, policy, x0, i0, path)
        states, regimes = trajectory_on_grid(problem, policy, sample, times)
        for t, reg, row in zip(times, regimes, states):
            writer.writerow(
                [k, _scalar_token(float(t)), int(reg) + 1]
                + [_scalar_token(float(v)) for v in row]
            )
    return buf.getvalue()


def _cmd_simulate(args) -> int:
    problem = load_problem(args.problem)
    x0 = _parse_vector(args.x0, problem.A.shape[1])
    i0 = _regime_index(args.i0, problem.gen.D)
    _, _, policy = _solve_any(problem, args.tol, args.max_iter)
    if args.format == "csv":
        _deliver(_trajectory_csv(problem, policy, x0, i0, args), args.output)
        return 0
    opts = SimOptions(
        paths=args.paths,
        horizon=args.horizon,
        seed=args.seed,
        workers=args.workers,
        quad_step=args.quad_step,
    )
    report = estimate_cost(problem, policy, x0, i0, opts)
    _emit(args, report)
    return 0


def _cmd_verify(args) -> int:
    problem = load_problem(args.problem)
    x0 = _parse_vector(args.x0, problem.A.shape[1])
    i0 = _regime_index(args.i0, problem.gen.D)
    opts = SimOptions(
        paths=args.paths,
        horizon=args.horizon,
        seed=args.seed,
        workers=args.workers,
        deviations=args.deviations,
        quad_step=args.quad_step,
    )
    flags: list[str] = []
    if isinstance(problem, MjlsGameProblem):
        gsol = solve_game(problem, tol=args.tol, max_iter=args.max_iter)
        ff = None
        if problem.inhomog is not None:
            ff = solve_game_feedforward(gsol, problem)
        report = {}
        if problem.inhomog is None:
            # Closed-form values exist only without forcing terms.
            values = check_game_values(problem, gsol, x0, i0, opts)
            report["values"] = values
            flags += values["flags"]
        equilibrium = verify_equilibrium_mc(problem, gsol, ff, x0, i0, opts)
        report["equilibrium"] = equilibrium
        flags += equilibrium["flags"]
    else:
        sol = solve_care(problem, tol=args.tol, max_iter=args.max_iter)
        eta = None
        if problem.inhomog is not None:
            eta = solve_lq_feedforward(sol, problem)
        values = check_value_function(problem, sol, x0, i0, opts, eta=eta)
        chains = sample_chain_batch(
            problem.gen, i0, args.horizon, args.seed, min(100, args.paths)
        )
        stationarity = check_stationarity(problem, sol, eta, chains, x0=x0)
        if stationarity["max_residual"] > STATIONARITY_TOL:
            stationarity["flags"] = ["stationarity_residual"]
        report = {"value": values, "stationarity": stationarity}
        flags += values["flags"] + stationarity["flags"]
    report["flags"] = flags
    _emit(args, report)
    return 3 if flags else 0


def _load_fixture(name: str) -> dict:
    ref = importlib.resources.files("mjlq.fixtures") / name
    return json.loads(ref.read_text())


def _reproduce_lq(args) -> dict:
    problem = problem_from_dict(_load_fixture("benchmark_lq.json"))
    ref = _load_fixture("benchmark_lq.expected.json")
    P_ref = np.asarray(ref["P"], dtype=np.float64)
    Theta_ref = np.asarray(ref["Theta"], dtype=np.float64)

    sol = solve_care(problem, tol=args.tol, max_iter=args.max_iter)
    block_gap = max(
        float(np.max(np.abs(sol.P - P_ref))),
        float(np.max(np.abs(sol.Theta - Theta_ref))),
    )
    ref_residuals = np.linalg.norm(care_residual(P_ref, problem), axis=(1, 2))

    opts = SimOptions(
        paths=args.paths,
        horizon=args.horizon,
        seed=args.seed,
        workers=args.workers,
        quad_step=args.quad_step,
    )
    x0 = np.ones(problem.A.shape[1])
    values = []
    sim_ok = True
    for i0 in range(problem.gen.D):
        chk = check_value_function(problem, sol, x0, i0, opts)
        values.append(
            {
                "i0": i0 + 1,
                "predicted": chk["predicted"],
                "mean": chk["mean"],
                "stderr": chk["stderr"],
                "n_sigma": chk["n_sigma"],
                "rel_error": chk["rel_error"],
            }
        )
        if chk["n_sigma"] > 3.0 or chk["rel_error"] > 0.02:
            sim_ok = False

    checks = {
        "solver_residual": bool(np.max(sol.residual_norms) <= 1e-7),
        "matches_reference": bool(block_gap <= 1e-6),
        "reference_residual": bool(np.max(ref_residuals) <= 2e-7),
        "certificate": bool(sol.certificate.feasible),
        "simulated_values": sim_ok,
    }
    return {
        "name": "lq-benchmark",
        "checks": checks,
        "pass": all(checks.values()),
        "max_residual": float(np.max(sol.residual_norms)),
        "reference_gap": block_gap,
        "reference_residuals": ref_residuals,
        "iterations": sol.iterations,
        "values": values,
    }


def _reproduce_game(args) -> dict:
    problem = problem_from_dict(_load_fixture("benchmark_game.json"))
    ref = _load_fixture("benchmark_game.expected.json")
    refs = {k: np.asarray(v, dtype=np.float64) for k, v in ref.items()}

    gsol = solve_game(problem, tol=args.tol, max_iter=args.max_iter)
    block_gap = max(
        float(np.max(np.abs(gsol.P1 - refs["P1"]))),
        float(np.max(np.abs(gsol.P2 - refs["P2"]))),
        float(np.max(np.abs(gsol.Theta1 - refs["Theta1"]))),
        float(np.max(np.abs(gsol.Theta2 - refs["Theta2"]))),
    )
    all_norms = np.concatenate([gsol.residual_norms_1, gsol.residual_norms_2])
    E1, E2 = game_residuals(
        refs["P1"], refs["P2"], refs["Theta1"], refs["Theta2"], problem
    )
    ref_residuals = np.concatenate(
        [np.linalg.norm(E1, axis=(1, 2)), np.linalg.norm(E2, axis=(1, 2))]
    )

    opts = SimOptions(
        paths=args.paths,
        horizon=args.horizon,
        seed=args.seed,
        workers=args.workers,
        quad_step=args.quad_step,
    )
    n = problem.A.shape[1]
    x0 = np.zeros(n)
    x0[0] = 1.0
    x0[-1] = -1.0
    chk = check_game_values(problem, gsol, x0, 1, opts)
    sim_ok = all(ns <= 3.0 for ns in chk["n_sigma"])
    values = [
        {
            "player": k + 1,
            "predicted": chk["predicted"][k],
            "mean": chk["mean"][k],
            "stderr": chk["stderr"][k],
            "n_sigma": chk["n_sigma"][k],
        }
        for k in range(2)
    ]

    checks = {
        "solver_residual": bool(np.max(all_norms) <= 1.5e-7),
        "matches_reference": bool(block_gap <= 1e-6),
        "certificate": bool(gsol.certificate.feasible),
        "simulated_values": sim_ok,
    }
    return {
        "name": "game-benchmark",
        "checks": checks,
        "pass": all(checks.values()),
        "max_residual": float(np.max(all_norms)),
        "constraint_residual": gsol.constraint_residual,
        "reference_gap": block_gap,
        "reference_residuals": ref_residuals,
        "iterations": gsol.iterations,
        "values": values,
    }


_TABLE_COLUMNS = (
    ("solver", "solver_residual"),
    ("reference", "matches_reference"),
    ("residual", "reference_residual"),
    ("certificate", "certificate"),
    ("simulation", "simulated_values"),
)


def _render_table(rows: list[dict]) -> str:
    header = f"{'benchmark':<16}"
    for label, _ in _TABLE_COLUMNS:
        header += f"{label:<13}"
    header += "overall"
    lines = [header]
    for row in rows:
        line = f"{row['name']:<16}"
        for _, key in _TABLE_COLUMNS:
            value = row["checks"].get(key)
            cell = "-" if value is None else ("pass" if value else "FAIL")
            line += f"{cell:<13}"
        line += "PASS" if row["pass"] else "FAIL"
        lines.append(line)
    return "\n".join(lines) + "\n"


def _cmd_reproduce(args) -> int:
    rows = [_reproduce_lq(args), _reproduce_game(args)]
    ok = all(row["pass"] for row in rows)
    sys.stdout.write(_render_table(rows))
    if args.output is not None:
        # The worker count must not appear here: reports are promised to
        # be byte-identical across worker counts.
        report = {
            "rows": rows,
            "pass": ok,
            "paths": args.paths,
            "horizon": args.horizon,
            "seed": args.seed,
        }
        text = render_csv(report) if args.format == "csv" else render_json(report)
        _deliver(text, args.output)
    return 0 if ok else 3


class _Parser(argparse.ArgumentParser):
    # Argument errors are input errors; argparse would exit with 2,
    # which is reserved for solver failures here.
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mjlq",
        description=(
            "Solve, simulate, and verify infinite-horizon LQ control and "
            "two-player equilibrium problems on Markov-modulated linear "
            "systems."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument(
        "--tol", type=float, default=1e-9, help="solver convergence tolerance"
    )
    solver.add_argument(
        "--max-iter", type=int, default=100, help="solver iteration cap"
    )

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--seed", type=int, default=42, help="base RNG seed")
    mc.add_argument(
        "--paths", type=int, default=10000, help="number of Monte Carlo paths"
    )
    mc.add_argument(
        "--horizon", type=float, default=30.0, help="simulation horizon"
    )
    mc.add_argument(
        "--workers",
        type=int,
        default=1,
        help="worker threads for path propagation (compiled backend only)",
    )
    mc.add_argument(
        "--quad-step",
        type=float,
        default=None,
        help=(
            "bound on the cost quadrature sub-interval length "
            "(default: 64 sub-intervals per regime segment)"
        ),
    )

    state = argparse.ArgumentParser(add_help=False)
    state.add_argument(
        "--x0",
        default=None,
        help="comma separated initial state (default: all ones)",
    )
    state.add_argument(
        "--i0", type=int, default=1, help="initial regime, 1-based"
    )

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument(
        "--output", default=None, help="write the report here instead of stdout"
    )
    out.add_argument(
        "--format", choices=("json", "csv"), default="json", help="report format"
    )

    def add(name, helptext, parents, func, problem_arg=True):
        p = sub.add_parser(name, help=helptext, parents=parents)
        if problem_arg:
            p.add_argument("problem", help="path to a problem JSON file")
        p.set_defaults(func=func)
        return p

    add(
        "check-stability",
        "test open-loop mean-square stabilizability",
        [out],
        _cmd_check_stability,
    )
    add(
        "solve-lq",
        "solve the coupled Riccati system for a single controller",
        [solver, out],
        _cmd_solve_lq,
    )
    add(
        "solve-bsde",
        "solve the decaying feedforward system for the forcing terms",
        [solver, out],
        _cmd_solve_bsde,
    )
    add(
        "solve-game",
        "solve the two-player closed-loop equilibrium system",
        [solver, out],
        _cmd_solve_game,
    )
    add(
        "simulate",
        "estimate the closed-loop cost by Monte Carlo",
        [solver, mc, state, out],
        _cmd_simulate,
    )
    verify = add(
        "verify",
        "run stochastic consistency checks against the solved problem",
        [solver, mc, state, out],
        _cmd_verify,
    )
    verify.add_argument(
        "--deviations",
        type=int,
        default=20,
        help="unilateral deviations per player (two-player problems)",
    )
    add(
        "reproduce-paper",
        "re-run the bundled benchmarks and compare against stored references",
        [solver, mc, out],
        _cmd_reproduce,
        problem_arg=False,
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except MjlqError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
