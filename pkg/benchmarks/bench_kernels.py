"""Compiled versus pure-Python kernels: separatrix tracing and polynomial iteration.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import timeit
import warnings

import numpy as np

from confluence import _kernels_py

try:
    from confluence import _kernels as _kernels_cy
except ImportError:
    _kernels_cy = None

COEFFS = np.array([-0.04, 0, 1], dtype=complex)
TARGETS = np.array([0.2, -0.2], dtype=complex)
RADII = np.array([1e-3, 1e-3])


def trace_case(mod):
    # starts on the imaginary side flow slowly into the attractor
    starts = [complex(x, y) for x in np.linspace(-0.5, 0.5, 5) for y in (-2.0, 2.0)]
    return lambda: [mod.trace(COEFFS, z0, 1.0, TARGETS, RADII, 100.0, 200000) for z0 in starts]


def iterate_case(mod):
    z = (np.random.default_rng(0).uniform(-0.2, 0.2, (64, 64)) * (1 + 0.5j)).astype(complex)
    coeffs = np.array([0, 1, 1, 0, 1], dtype=complex)
    return lambda: mod.iterate_poly(coeffs, z, 200)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    # escaping orbits overflow to inf/nan by design
    warnings.simplefilter("ignore", RuntimeWarning)
    if _kernels_cy is None:
        print("compiled extension not built; run pip install -e . --no-build-isolation")
        return 1
    print(f"{'kernel':<10}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, case in (("trace", trace_case), ("iterate", iterate_case)):
        py = min(timeit.repeat(case(_kernels_py), number=1, repeat=args.repeat))
        cy = min(timeit.repeat(case(_kernels_cy), number=1, repeat=args.repeat))
        print(f"{name:<10}{py:>12.4f}{cy:>12.4f}{py / cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
