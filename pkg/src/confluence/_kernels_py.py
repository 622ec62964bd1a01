"""Pure-Python versions of the hot loops (used when the extension is missing)."""

from __future__ import annotations

import numpy as np

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _horner(coeffs, z):
    acc = 0j
    for i in range(len(coeffs) - 1, -1, -1):
        acc = acc * z + coeffs[i]
    return acc


def _rhs(coeffs, rot, z):
    p = _horner(coeffs, z)
    return rot * p / (1.0 + abs(p))


def trace(coeffs, z0, rot, targets, radii, r_escape, max_steps, h0=1e-2, tol=1e-10):
    """Integrate dz/ds = rot*P(z)/(1+|P(z)|) from z0 with DOPRI5.

    Stops when z enters disk j (|z - targets[j]| < radii[j]) or |z| > r_escape.
    Returns (status, index, path, steps): status 0 landed, 1 escaped, 2 budget.
    """
    coeffs = [complex(c) for c in coeffs]
    targets = [complex(t) for t in targets]
    radii = [float(r) for r in radii]
    z = complex(z0)
    h = float(h0)
    path = [z]
    k = [0j] * 7
    steps = 0
    while steps < max_steps:
        k[0] = _rhs(coeffs, rot, z)
        for s in range(1, 7):
            zi = z
            for j, a in enumerate(_A[s]):
                zi += h * a * k[j]
            k[s] = _rhs(coeffs, rot, zi)
        znew = z
        err = 0j
        for s in range(7):
            znew += h * _B[s] * k[s]
            err += h * _E[s] * k[s]
        e = abs(err) / (tol * (1.0 + abs(z)))
        if e <= 1.0:
            z = znew
            path.append(z)
            steps += 1
            for j in range(len(targets)):
                if abs(z - targets[j]) < radii[j]:
                    return 0, j, np.array(path), steps
            if abs(z) > r_escape:
                return 1, -1, np.array(path), steps
        fac = 0.9 * e ** -0.2 if e > 0 else 5.0
        h *= min(5.0, max(0.2, fac))
    return 2, -1, np.array(path), steps


def iterate_poly(coeffs, z, n):
    """Apply the polynomial map with low-degree-first coefficients n times to each point of z."""
    coeffs = [complex(c) for c in coeffs]
    z = np.array(z, dtype=complex, copy=True)
    flat = z.reshape(-1)
    for i in range(flat.size):
        w = flat[i]
        for _ in range(n):
            w = _horner(coeffs, w)
        flat[i] = w
    return z
