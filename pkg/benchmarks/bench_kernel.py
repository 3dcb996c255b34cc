"""Time the compiled lane kernel against the pure-Python fallback.

Runs the same Max-Pressure-controlled episode twice in subprocesses — once
with the compiled extension (when built) and once with
``GRIDSIGNAL_FORCE_PY_KERNEL=1`` — and reports wall time per simulated
second plus the speedup. Subprocesses are used because the kernel is chosen
at import time.

Usage::

    python3 benchmarks/bench_kernel.py [--seconds 2000] [--demand 0.15]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, sys, time

from gridsignal.grid_scenario import DemandSchedule, build_grid, build_od_table
from gridsignal.kernels import KERNEL_IMPL
from gridsignal.max_pressure import max_pressure_requests
from gridsignal.microsim import GridSim

seconds = int(sys.argv[1])
demand = float(sys.argv[2])

net = build_grid(4, 4)
od = build_od_table(net)
schedule = DemandSchedule(segments=[(seconds, demand)])
sim = GridSim(net, od, schedule, master_seed=123)

start = time.perf_counter()
for _ in range(seconds):
    if sim.time_s % 5 == 0:
        sim.apply_decisions(max_pressure_requests(sim))
    sim.tick()
elapsed = time.perf_counter() - start

print(json.dumps({
    "impl": KERNEL_IMPL,
    "elapsed_s": elapsed,
    "sim_seconds": seconds,
    "ms_per_sim_second": 1000.0 * elapsed / seconds,
    "vehicles": sim.spawned_total,
}))
"""


def run_once(force_python: bool, seconds: int, demand: float) -> dict:
    env = dict(os.environ)
    if force_python:
        env["GRIDSIGNAL_FORCE_PY_KERNEL"] = "1"
    else:
        env.pop("GRIDSIGNAL_FORCE_PY_KERNEL", None)
    out = subprocess.run(
        [sys.executable, "-c", WORKER, str(seconds), str(demand)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seconds", type=int, default=2000)
    parser.add_argument("--demand", type=float, default=0.15)
    args = parser.parse_args()

    results = [
        run_once(force_python=False, seconds=args.seconds, demand=args.demand),
        run_once(force_python=True, seconds=args.seconds, demand=args.demand),
    ]
    if results[0]["vehicles"] != results[1]["vehicles"]:
        print("WARNING: implementations disagree on vehicle count", file=sys.stderr)

    for r in results:
        print(
            f"{r['impl']:>7}: {r['elapsed_s']:.3f} s wall for {r['sim_seconds']} sim-s "
            f"({r['ms_per_sim_second']:.3f} ms/sim-s, {r['vehicles']} vehicles)"
        )
    if results[0]["impl"] == results[1]["impl"]:
        print("compiled extension not built — both runs used the Python kernel")
    else:
        speedup = results[1]["elapsed_s"] / results[0]["elapsed_s"]
        print(f"speedup: {speedup:.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
