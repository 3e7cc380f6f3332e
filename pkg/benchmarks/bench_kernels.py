"""Time the compiled and pure-Python traversal kernels on the same random graphs.

    python benchmarks/bench_kernels.py [--sizes 100 200 400] [--repeat 3]

Each size gets one sparse graph with mean degree about 10; every available
backend runs betweenness, closeness and per-vertex triangles on it. Outputs
are checked for agreement before the timings are printed.
"""

import argparse
import time

import numpy as np

from geocl.kernels import BACKENDS


def random_csr(n: int, mean_degree: float, seed: int):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(iu.size) < mean_degree / (n - 1)
    a, b = iu[hit], ju[hit]
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst.astype(np.int64)


def best_time(fn, args, repeat: int) -> tuple[float, np.ndarray]:
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 200, 400])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--mean-degree", type=float, default=10.0)
    args = ap.parse_args(argv)

    names = sorted(BACKENDS)
    print(f"backends: {', '.join(names)}")
    header = f"{'kernel':22s} {'n':>6s}" + "".join(f" {b + ' [s]':>14s}" for b in names)
    if len(names) > 1:
        header += f" {'speedup':>9s}"
    print(header)
    for n in args.sizes:
        indptr, indices = random_csr(n, args.mean_degree, seed=n)
        for kernel in ("betweenness", "closeness", "triangles_per_vertex"):
            times, outs = {}, {}
            for b in names:
                times[b], outs[b] = best_time(getattr(BACKENDS[b], kernel), (indptr, indices, n),
                                              args.repeat)
            ref = outs[names[0]]
            for b in names[1:]:
                if not np.allclose(outs[b], ref, rtol=1e-9, atol=1e-12):
                    raise SystemExit(f"{kernel}: backends disagree at n={n}")
            line = f"{kernel:22s} {n:6d}" + "".join(f" {times[b]:14.5f}" for b in names)
            if "cython" in times and "python" in times:
                line += f" {times['python'] / times['cython']:8.1f}x"
            print(line)


if __name__ == "__main__":
    main()
