"""Compare the compiled kernels with the numpy fallback.

Times Gram assembly and the elimination sweep (one Cholesky plus the
inverse diagonal) that MMD-OMP runs for every removal, then a full
compression of a random embedding through each backend.

    python3 benchmarks/bench_kernels.py [--sizes 25 50 100 200] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from ckis import Embedding, Kernel, _backend, _pykernels, mmd_omp


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def full_compression(mod, beta, eps):
    saved = _backend.kernels
    _backend.kernels = mod
    try:
        return mmd_omp(beta, eps)
    finally:
        _backend.kernels = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[25, 50, 100, 200])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    try:
        compiled = _backend.load("cython")
    except ImportError:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1
    backends = {"cython": compiled, "python": _pykernels}
    rng = np.random.default_rng(0)
    k = Kernel(0.5)

    print(f"{'op':<12}{'M':>6}{'cython [ms]':>14}{'python [ms]':>14}{'speedup':>10}")
    for m in args.sizes:
        pts = np.ascontiguousarray(np.sort(rng.uniform(0, m * 0.4, size=(m, 1)), axis=0))
        K = compiled.rbf_cross_gram(pts, pts, k.bandwidth, 1.0)
        b = rng.normal(size=m)
        beta = Embedding(pts, rng.uniform(0.1, 1.0, size=m), k)
        ops = {
            "gram": lambda mod: (lambda: mod.rbf_cross_gram(pts, pts, k.bandwidth, 1.0)),
            "sweep": lambda mod: (lambda: mod.elimination_sweep(K, b)),
            "mmd_omp": lambda mod: (lambda: full_compression(mod, beta, 0.5)),
        }
        for name, make in ops.items():
            number = 1 if name == "mmd_omp" else 20
            t = {key: best_of(make(mod), args.repeat, number) for key, mod in backends.items()}
            print(f"{name:<12}{m:>6}{t['cython'] * 1e3:>14.3f}{t['python'] * 1e3:>14.3f}"
                  f"{t['python'] / t['cython']:>10.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
