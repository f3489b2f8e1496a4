"""Time the propagator with and without numba.

Each backend runs in its own subprocess, because the choice is made at import
time from ``ADIABOUND_DISABLE_NUMBA``. The first call is timed separately so
JIT compilation (or a cache load) does not skew the steady-state figure.

    python3 benchmarks/bench_propagate.py [--repeats 3] [--periods 20]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, math, sys, time
import numpy as np
from adiabound._jit import NUMBA_ENABLED
from adiabound.propagator import propagate
from adiabound.schedules import TimeGrid, random_smooth, schwinger

repeats, periods = int(sys.argv[1]), int(sys.argv[2])
cases = {
    "schwinger": schwinger(1.0, 0.7, 0.4, (0.0, periods * 2 * math.pi)),
    "random-5-level": random_smooth(5, 11, (0.0, periods * 2 * math.pi)),
}
out = {"numba": NUMBA_ENABLED}
for name, spec in cases.items():
    psi0 = np.eye(spec.dim, dtype=complex)[0]
    grid = TimeGrid(np.linspace(*spec.t_span, 401))
    start = time.perf_counter()
    first = propagate(spec, psi0, grid, 1e-10)
    out[name + ":first"] = time.perf_counter() - start
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        traj = propagate(spec, psi0, grid, 1e-10)
        times.append(time.perf_counter() - start)
    out[name] = min(times)
    out[name + ":final"] = [[z.real, z.imag] for z in traj.diabatic[-1]]
print(json.dumps(out))
"""


def run_backend(disable: bool, repeats: int, periods: int) -> dict:
    env = dict(os.environ, ADIABOUND_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(repeats), str(periods)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--periods", type=int, default=20)
    args = parser.parse_args()

    fast = run_backend(False, args.repeats, args.periods)
    slow = run_backend(True, args.repeats, args.periods)
    print(f"numba available: {fast['numba']}")
    print(f"{'case':18s} {'numba (s)':>10s} {'numpy (s)':>10s} {'speed-up':>9s} {'first call':>11s} {'max |diff|':>11s}")
    for name in ("schwinger", "random-5-level"):
        a = [complex(*z) for z in fast[name + ":final"]]
        b = [complex(*z) for z in slow[name + ":final"]]
        diff = max(abs(x - y) for x, y in zip(a, b))
        print(
            f"{name:18s} {fast[name]:10.4f} {slow[name]:10.4f} {slow[name] / fast[name]:8.1f}x "
            f"{fast[name + ':first']:10.3f}s {diff:11.2e}"
        )


if __name__ == "__main__":
    main()
