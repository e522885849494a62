"""Compare the numba kernels with their pure-numpy fallbacks.

Kernel timings run both variants in this process. The end-to-end timing runs
a k-means fit plus a D2 estimate in two subprocesses, one of them with
KLIST_DISABLE_NUMBA=1, so it measures exactly what users get from the flag.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from klist import kernels
from klist._backend import HAVE_NUMBA
from klist.quantizer import _half_separation

E2E = r"""
import json, time
from klist._backend import BACKEND
from klist.model import GaussianModel
from klist.montecarlo import estimate_d2, fit_unit_codebook
from klist.quantizer import FitConfig
from klist.rng import Seed
fit_unit_codebook({d}, 8, FitConfig(n_train=2000, restarts=1), Seed(0))  # compile
t = time.perf_counter()
fit_unit_codebook({d}, {k}, FitConfig(n_train={n}, restarts=1, max_iters=30), Seed(1))
fit_s = time.perf_counter() - t
t = time.perf_counter()
estimate_d2(GaussianModel({d}, 1.0, 1.0), {k}, {trials}, Seed(2))
d2_s = time.perf_counter() - t
print(json.dumps({{"backend": BACKEND, "fit_s": fit_s, "d2_s": d2_s}}))
"""


def _cases(quick):
    rng = np.random.default_rng(0)
    n = 50_000 if quick else 200_000
    x4 = rng.standard_normal((n, 4))
    c4 = rng.standard_normal((256, 4))
    x1 = rng.standard_normal(n)
    c1 = rng.standard_normal(1024)
    lab = kernels._np_nearest(x4, c4)[0]
    noise = rng.standard_normal((n // 10, 64, 4))
    half = _half_separation(c4)
    # state after one pass, then a small centroid move as in late Lloyd iterations
    labels0 = lab.copy()
    upper0 = np.sqrt(kernels._np_nearest(x4, c4)[1])
    d_all = np.sqrt(((x4[:, None, :] - c4[None]) ** 2).sum(-1))
    d_all[np.arange(n), labels0] = np.inf
    lower0 = d_all.min(1)
    del d_all
    c4b = c4 + 1e-3 * rng.standard_normal(c4.shape)
    shift = np.linalg.norm(c4b - c4, axis=1)
    upper0 += shift[labels0]
    lower0 -= shift.max()
    half_b = _half_separation(c4b)

    def hamerly_cold(fn):
        def run():
            fn(x4, c4, np.zeros(n, np.int64), np.full(n, np.inf), np.zeros(n), half, np.empty(n))

        return run

    def hamerly_warm(fn):
        def run():
            fn(x4, c4b, labels0.copy(), upper0.copy(), lower0.copy(), half_b, np.empty(n))

        return run

    return [
        ("nearest d=4 k=256", lambda f: (lambda: f(x4, c4)), "nearest"),
        ("nearest_1d k=1024", lambda f: (lambda: f(x1, c1)), "nearest_1d"),
        ("centroid_sums d=4", lambda f: (lambda: f(x4, lab, 256)), "centroid_sums"),
        ("hamerly cold pass d=4 k=256", hamerly_cold, "hamerly_assign"),
        ("hamerly warm pass d=4 k=256", hamerly_warm, "hamerly_assign"),
        ("min_agent_sqerr k=64", lambda f: (lambda: f(x4[: n // 10], noise, 0.5, np.full(n // 10, np.inf))), "min_agent_sqerr"),
    ]


def bench_kernels(repeat, quick):
    out = []
    for label, make, name in _cases(quick):
        np_run = make(getattr(kernels, f"_np_{name}"))
        t_np = min(timeit.repeat(np_run, number=1, repeat=repeat))
        t_nb = None
        if HAVE_NUMBA:
            nb_run = make(getattr(kernels, f"_nb_{name}"))
            nb_run()  # compile outside the timing
            t_nb = min(timeit.repeat(nb_run, number=1, repeat=repeat))
        out.append((label, t_np, t_nb))
    return out


def bench_end_to_end(quick):
    params = dict(d=4, k=128, n=20_000 if quick else 100_000, trials=5_000 if quick else 20_000)
    res = {}
    for flag in ("0", "1"):
        env = dict(os.environ, KLIST_DISABLE_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, "-c", E2E.format(**params)], env=env, capture_output=True, text=True, check=True
        )
        row = json.loads(proc.stdout.strip().splitlines()[-1])
        res[row["backend"]] = row
    return params, res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args(argv)

    print(f"{'kernel':28s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for label, t_np, t_nb in bench_kernels(args.repeat, args.quick):
        nb = f"{1e3 * t_nb:11.2f}" if t_nb is not None else f"{'n/a':>11s}"
        sp = f"{t_np / t_nb:7.1f}x" if t_nb else f"{'':>8s}"
        print(f"{label:28s} {1e3 * t_np:11.2f} {nb} {sp}")

    params, res = bench_end_to_end(args.quick)
    print(f"\nend to end, d={params['d']} k={params['k']} n_train={params['n']} d2 trials={params['trials']}")
    for backend, row in sorted(res.items()):
        print(f"  {backend:6s} fit {row['fit_s']:7.2f} s   estimate_d2 {row['d2_s']:7.2f} s")
    if "numba" in res and "numpy" in res:
        print(f"  speedup  fit {res['numpy']['fit_s'] / res['numba']['fit_s']:.1f}x"
              f"   estimate_d2 {res['numpy']['d2_s'] / res['numba']['d2_s']:.1f}x")


if __name__ == "__main__":
    main()
