"""Time the gradient lift on the compiled and the numpy backends.

Usage::

    python3 bench/bench_lift.py [--samples 800] [--features 1000] [--inputs 8] [--repeat 5]

Prints one line per backend with the best wall time over ``--repeat`` runs
and the largest absolute difference between the two results.
"""

import argparse
import time

import numpy as np

from kaslib import kernels
from kaslib.featuremap import SpectralMeasure, build_feature_map


def best_time(fn, repeat):
    best = np.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=800)
    parser.add_argument("--features", type=int, default=1000)
    parser.add_argument("--inputs", type=int, default=8)
    parser.add_argument("--outputs", type=int, default=1)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    fm = build_feature_map(args.inputs, args.features, 1.0, SpectralMeasure.gaussian(1.0), seed=0)
    X = rng.uniform(-1, 1, (args.samples, args.inputs))
    dY = rng.standard_normal((args.samples, args.outputs, args.inputs))
    kernels.set_threads(args.threads)

    results = {}
    print(f"M={args.samples} D={args.features} m={args.inputs} d={args.outputs} "
          f"threads={args.threads}")
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        elapsed, out = best_time(lambda: fm.lift_gradients(X, dY), args.repeat)
        results[backend] = (elapsed, out)
        print(f"{backend:>7}: {elapsed * 1e3:9.2f} ms")
    if len(results) == 2:
        (tc, oc), (tp, op) = results["cython"], results["python"]
        print(f"speedup cython/python: {tp / tc:.2f}x, max |diff| {np.abs(oc - op).max():.3e}")


if __name__ == "__main__":
    main()
