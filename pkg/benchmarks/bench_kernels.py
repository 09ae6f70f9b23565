"""Time the compiled and pure-Python sampler kernels on the same workloads.

    python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]

Both backends consume identical random streams, so the script also checks
that they produce identical traces before reporting the speedup.
"""

import argparse
import time

import numpy as np

from eemcs import _backend
from eemcs.ee import EEConfig, run_ladder
from eemcs.mcs import run_mcs
from eemcs.proposals import GaussianRandomWalk
from eemcs.target import DoubleWell, GaussianMixture, LadderConfig

MEANS = [(0.2, 0.2), (0.75, 0.3), (0.3, 0.8), (0.8, 0.85)]


def workloads(steps):
    mix = GaussianMixture(MEANS, 0.1)
    mix_ladder = LadderConfig((1.38, 2.2, 3.2, 5.0), (1.0, 2.0, 4.0, 8.0))
    mix_prop = GaussianRandomWalk.for_ladder(0.15, mix_ladder.temperatures)
    dw = DoubleWell()
    dw_ladder = LadderConfig((0.0, 0.062, 0.27, 0.68), (1.0, 2.0, 4.0))

    def mcs_mixture(backend):
        r = run_mcs(mix, mix_ladder, proposals=mix_prop, n_steps=steps, rng=0, backend=backend)
        return r.x

    def ee_mixture(backend):
        r = run_ladder(mix, mix_ladder, EEConfig(p_ee=0.1, burn_in_N=100), mix_prop,
                       n_steps=steps // mix_ladder.n_temps, rng=0, backend=backend)
        return r.buffers.hist_x

    def mcs_double_well(backend):
        return run_mcs(dw, dw_ladder, n_steps=steps, rng=0, s0=0.5, backend=backend).x

    return {"mcs / 4-mode mixture": mcs_mixture, "ee / 4-mode mixture": ee_mixture,
            "mcs / double well": mcs_double_well}


def best_time(fn, backend, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(backend)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--steps", type=int, default=200_000, help="sampler steps per workload")
    ap.add_argument("--repeat", type=int, default=3, help="timings per backend (best is kept)")
    args = ap.parse_args()
    if _backend._ckernels is None:
        raise SystemExit("compiled extension not available; build it with "
                         "`pip install -e . --no-build-isolation`")
    print(f"{'workload':<24}{'cython s':>10}{'python s':>10}{'speedup':>9}  identical")
    for name, fn in workloads(args.steps).items():
        tc, xc = best_time(fn, "cython", args.repeat)
        tp, xp = best_time(fn, "python", 1)
        same = np.array_equal(xc, xp)
        print(f"{name:<24}{tc:>10.3f}{tp:>10.3f}{tp / tc:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
