"""Compare the compiled and pure numpy propagation kernels.

Runs the bundled three-regime benchmark problem through estimate_cost
under each backend in a fresh interpreter (the backend is chosen at
import time via MJLQ_BACKEND) and reports wall time, throughput, and
whether the two backends produced bitwise-identical estimates.

Usage: python3 benchmarks/kernel_bench.py [--paths N] [--repeats K]
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time


def measure(paths: int, horizon: float, workers: int, repeats: int) -> dict:
    import importlib.resources as ir

    import numpy as np

    from mjlq.care import assemble_closed_loop, solve_care
    from mjlq.model import problem_from_dict
    from mjlq.sim import SimOptions, backend_name, estimate_cost

    doc = json.loads((ir.files("mjlq.fixtures") / "benchmark_lq.json").read_text())
    problem = problem_from_dict(doc)
    sol = solve_care(problem)
    policy = assemble_closed_loop(sol, problem)
    x0 = np.ones(problem.A.shape[1])
    opts = SimOptions(paths=paths, horizon=horizon, seed=42, workers=workers)

    times = []
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = estimate_cost(problem, policy, x0, 0, opts)
        times.append(time.perf_counter() - t0)
    return {
        "backend": backend_name(),
        "best": min(times),
        "median": statistics.median(times),
        "mean_value": result["mean"],
    }


def run_child(backend: str, args) -> dict | None:
    env = dict(os.environ, MJLQ_BACKEND=backend)
    cmd = [
        sys.executable,
        os.path.abspath(__file__),
        "--child",
        "--paths", str(args.paths),
        "--horizon", str(args.horizon),
        "--workers", str(args.workers),
        "--repeats", str(args.repeats),
    ]
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        sys.stderr.write(f"{backend} backend unavailable:\n{proc.stderr}")
        return None
    return json.loads(proc.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=20000)
    parser.add_argument("--horizon", type=float, default=30.0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.child:
        print(json.dumps(measure(args.paths, args.horizon, args.workers, args.repeats)))
        return 0

    results = {}
    for backend in ("numpy", "cython"):
        out = run_child(backend, args)
        if out is not None:
            results[backend] = out

    if not results:
        print("no backend could be measured")
        return 1

    print(f"paths={args.paths} horizon={args.horizon:g} workers={args.workers} "
          f"repeats={args.repeats}")
    print(f"{'backend':<10}{'best [s]':>12}{'median [s]':>12}{'paths/s':>14}")
    for backend, out in results.items():
        rate = args.paths / out["best"]
        print(f"{out['backend']:<10}{out['best']:>12.3f}{out['median']:>12.3f}{rate:>14.0f}")

    if len(results) == 2:
        speedup = results["numpy"]["best"] / results["cython"]["best"]
        same = results["numpy"]["mean_value"] == results["cython"]["mean_value"]
        print(f"compiled speedup over numpy: {speedup:.2f}x")
        print(f"estimates bitwise identical: {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
