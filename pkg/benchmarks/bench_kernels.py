"""Compare the numba kernels with their numpy fallbacks.

Also times an end-to-end solve with and without numba (each in a fresh
interpreter so that ``FRACDG_DISABLE_NUMBA`` takes effect) and the growth
of the solve time with the number of slabs, which is quadratic because of
the history sum.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from fracdg import kernels
from fracdg._accel import HAVE_NUMBA
from fracdg.fem import build_square_mesh


def best_of(fn, repeat):
    fn()  # warm up (numba compilation, caches)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(quick):
    n = 256 if quick else 1024
    nodes = np.linspace(0.0, 1.0, n + 1)
    ts = np.sort(np.random.default_rng(0).uniform(0.0, 1.0, 4 * n))
    mesh = build_square_mesh(64 if quick else 256)
    coords, elements = mesh.vertices, mesh.elements
    x = np.linspace(0.0, 40.0, 20_000 if quick else 200_000)
    return [
        (f"step_kernel {ts.size}x{n}",
         lambda: kernels.step_kernel_numpy(nodes, ts, 0.6),
         lambda: kernels.step_kernel_numba(nodes, ts, 0.6)),
        (f"simplex_matrices E={elements.shape[0]}",
         lambda: kernels.simplex_matrices_numpy(coords, elements),
         lambda: kernels.simplex_matrices_numba(coords, elements)),
        (f"ml_series n={x.size}",
         lambda: kernels.ml_series_numpy(0.4, 1.0, x, 200),
         lambda: kernels.ml_series_numba(0.4, 1.0, x, 200)),
    ]


SOLVE_SNIPPET = """
import json, time
from fracdg import ProblemData, InitialDirac, assemble, build_square_mesh, TimeGrid, solve
space = assemble(build_square_mesh({n}))
data = ProblemData(0.4, 1.0, InitialDirac((0.5, 0.5)))
t0 = time.perf_counter()
solve(data, space, TimeGrid.uniform(1.0, {J}))
t1 = time.perf_counter()
print(json.dumps({{"total": t1 - t0}}))
"""


def solve_in_subprocess(disable, n, J):
    env = dict(os.environ, FRACDG_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(n=n, J=J)], env=env,
                         capture_output=True, text=True, check=True).stdout
    return json.loads(out)["total"]


def history_scaling(repeat, quick):
    from fracdg import InitialFunction, ProblemData, TimeGrid, assemble, build_interval_mesh, solve

    space = assemble(build_interval_mesh(512))
    data = ProblemData(0.4, 1.0, InitialFunction(lambda x: np.sin(np.pi * x)))
    Js = (512, 1024, 2048) if quick else (1024, 2048, 4096)
    times = [best_of(lambda J=J: solve(data, space, TimeGrid.uniform(1.0, J)), repeat) for J in Js]
    # t = a J + b J^2 gives (t(4J) - 2 t(2J)) / (t(2J) - 2 t(J)) = 4
    ratio = (times[2] - 2 * times[1]) / (times[1] - 2 * times[0])
    return Js, times, ratio


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args(argv)

    print(f"numba available: {HAVE_NUMBA}")
    print(f"{'kernel':34s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}")
    for name, np_fn, nb_fn in kernel_cases(args.quick):
        t_np = best_of(np_fn, args.repeat)
        if HAVE_NUMBA:
            t_nb = best_of(nb_fn, args.repeat)
            print(f"{name:34s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}")
        else:
            print(f"{name:34s} {t_np:10.4f} {'-':>10s} {'-':>8s}")

    n, J = (16, 64) if args.quick else (32, 256)
    t_off = solve_in_subprocess(True, n, J)
    t_on = solve_in_subprocess(False, n, J)
    print(f"solve 2D n={n} J={J}: numpy {t_off:.3f} s, numba {t_on:.3f} s")

    Js, times, ratio = history_scaling(args.repeat if not args.quick else 2, args.quick)
    print("solve time against number of slabs (1D, n=512):")
    for J, t in zip(Js, times):
        print(f"  J={J:5d} {t:8.3f} s")
    print(f"  second-difference ratio {ratio:.2f} (4 for quadratic growth)")


if __name__ == "__main__":
    main()
