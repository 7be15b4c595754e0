"""Compare the numba and pure-numpy backends of the hot kernels.

Run from the repository root::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--dim 60] [--trajectories 20000]

Each kernel is called once untimed (JIT compilation / warm caches), then
timed ``--repeat`` times per backend; the table reports the best time and
the largest absolute difference between the two backends' results.
The SDE kernel is dominated by libm transcendentals (Box-Muller and the
rotation factor); numpy evaluates those with SIMD loops, so on a single
core the two backends are comparable and the numba kernel gains mainly
from its ``prange`` parallelism on multi-core machines.
Setting ``DYNEPHASE_NUMBA=0`` in the environment disables numba entirely,
in which case only the numpy column is produced.
"""

import argparse
import time

import numpy as np

from dynephase import pom, rng
from dynephase._accel import NUMBA_ENABLED, jit
from dynephase.moments import cached_moment_table
from dynephase.trajectories import SdeConfig, simulate_ostensible


def _best(fn, repeat):
    fn()
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


@jit
def _philox_batch(n):
    out = np.empty(n)
    for i in range(n):
        out[i] = rng.normal_pair(i, 0, 0, 0, 1, 2)[0]
    return out


def _philox_numba(n):
    return _philox_batch(n)


def _philox_numpy(n):
    return rng.normal_pair_np(np.arange(n, dtype=np.uint64), 0, 0, 0, 1, 2)[0]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--dim", type=int, default=60, help="H-matrix dimension for mark I/II")
    ap.add_argument("--trajectories", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--draws", type=int, default=200_000, help="normal pairs for the Philox row")
    args = ap.parse_args(argv)

    moments = cached_moment_table(args.dim // 2 + pom.default_series_terms(args.dim))
    cfg = SdeConfig(steps=args.steps, trajectories=args.trajectories, seed=1)
    cases = [
        (f"mark1 H (dim {args.dim})", lambda nb: pom.h_mark1(args.dim, moments, use_numba=nb).entries),
        (f"mark2 H (dim {args.dim})", lambda nb: pom.h_mark2(args.dim, moments, use_numba=nb).entries),
        (
            f"SDE ({args.trajectories} x {args.steps})",
            lambda nb: simulate_ostensible(cfg, use_numba=nb).C,
        ),
        (
            f"Philox normals ({args.draws})",
            lambda nb: (_philox_numba if nb else _philox_numpy)(args.draws),
        ),
    ]
    print(f"{'kernel':<28}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fn in cases:
        t_np, r_np = _best(lambda: fn(False), args.repeat)
        if NUMBA_ENABLED:
            t_nb, r_nb = _best(lambda: fn(True), args.repeat)
            diff = float(np.max(np.abs(np.asarray(r_np) - np.asarray(r_nb))))
            print(f"{name:<28}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>14.3g}")
        else:
            print(f"{name:<28}{t_np:>12.4f}{'-':>12}{'-':>10}{'-':>14}")


if __name__ == "__main__":
    main()
