"""Time the compiled and numpy collide-stream kernels on the hump lattices.

    python benchmarks/bench_kernels.py [--steps 200] [--threads 1]
"""

import argparse
import time

import numpy as np

from swlbm import kernels
from swlbm.benchmarks import hump_case
from swlbm.solver import Simulation


def time_backend(name, lattice, steps, threads):
    cfg = hump_case(lattice=lattice, threads=threads, backend=name)
    sim = Simulation(cfg)
    for _ in range(10):  # warm caches and step plans
        sim.step()
    t0 = time.perf_counter()
    for _ in range(steps):
        sim.step()
    dt = (time.perf_counter() - t0) / steps
    return dt, sim.field.f.copy()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    names = ["numpy"]
    try:
        kernels.get_backend("cython")
        names.insert(0, "cython")
    except ImportError:
        print("compiled extension not available; timing numpy only")

    print(f"{'lattice':>8} {'backend':>7} {'ms/step':>9} {'Mnode/s':>8} {'speedup':>8}")
    for lattice in ("125x50", "250x50", "500x50"):
        nx, ny = (int(v) for v in lattice.split("x"))
        res = {n: time_backend(n, lattice, args.steps, args.threads) for n in names}
        base = res["numpy"][0]
        for n in names:
            dt, _ = res[n]
            print(f"{lattice:>8} {n:>7} {1e3 * dt:9.3f} {nx * ny / dt / 1e6:8.2f} {base / dt:8.2f}")
        if len(names) == 2:
            same = np.array_equal(res["cython"][1], res["numpy"][1])
            print(f"{'':>8} bitwise identical populations: {same}")


if __name__ == "__main__":
    main()
