"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-N time of each backend and the
speedup.  Both backends are checked to agree before timing.
"""

import argparse
import math
import timeit

import numpy as np

from lpsvm import _pykernels
from lpsvm.core import exponent_matrix, multinomial_coeff

try:
    from lpsvm import _ckernels
except ImportError:  # not built
    _ckernels = None


def cases(rng):
    n, d = 400, 6
    X = rng.normal(size=(n, d))
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    z = rng.normal(size=n) * 3
    E = exponent_matrix(d, 4).astype(np.int64)

    n_small = 8
    E_hom = exponent_matrix(n_small, 4, homogeneous=True).astype(np.int64)
    mult = np.array([float(multinomial_coeff(g)) for g in E_hom])
    Xs = rng.normal(size=(n_small, 3))
    ys = y[:n_small].copy()
    weights = np.ones(3)
    coef = rng.normal(size=E_hom.shape[0])
    alpha = rng.random(n_small)
    return {
        "project_box_hyperplane": (z, y, 1.0),
        "monomial_features": (X, E),
        "homogeneous_coefficients": (E_hom, mult, ys, Xs, weights),
        "poly_eval": (E_hom, coef, alpha),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation`")
        return
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':28s} {'python':>11s} {'cython':>11s} {'speedup':>8s}")
    for name, call_args in cases(rng).items():
        py, cy = getattr(_pykernels, name), getattr(_ckernels, name)
        a, b = np.asarray(py(*call_args)), np.asarray(cy(*call_args))
        assert np.allclose(a, b, rtol=1e-9, atol=1e-9), name
        number = 1
        while timeit.timeit(lambda: py(*call_args), number=number) < 0.05 and number < 10**6:
            number *= 4
        t_py = min(timeit.repeat(lambda: py(*call_args), number=number, repeat=args.repeat)) / number
        t_cy = min(timeit.repeat(lambda: cy(*call_args), number=number, repeat=args.repeat)) / number
        speed = t_py / t_cy if t_cy > 0 else math.inf
        print(f"{name:28s} {t_py * 1e6:9.1f}us {t_cy * 1e6:9.1f}us {speed:7.1f}x")


if __name__ == "__main__":
    main()
