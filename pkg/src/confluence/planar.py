"""Planar singular foliations: saddle-nodes, weak foci, resonant saddles and nodes."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
import sympy as sp
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .errors import (
    DegenerateDenominator,
    FitIllConditioned,
    LeafEscape,
    NoMinimalTerm,
    PoleOnPath,
    ResonantObstruction,
    StiffIntegrationFailure,
)
from .series import TruncatedSeries, extract_parabolic_invariants


@dataclass(frozen=True)
class SaddleNodeFamily:
    """x' = P_eps(x), y' = y (1 + A x^k) + sum c_ij x^i y^j.

    ``forcing`` maps (i, j) to c_ij.  The Euler-type example is k = 1, A = 0,
    forcing {(2, 0): -1}.
    """

    k: int = 1
    eps: tuple = (0,)
    A: object = 0
    forcing: tuple = ()  # ((i, j, c), ...)

    @classmethod
    def euler(cls, eps=0) -> "SaddleNodeFamily":
        return cls(1, (eps,), 0, ((2, 0, -1),))

    @classmethod
    def normal_form(cls, k: int = 1, A=0, eps=None) -> "SaddleNodeFamily":
        return cls(k, tuple(eps) if eps is not None else (0,) * k, A, ())

    def xdot(self, x, y=None):
        P = np.polynomial.polynomial.polyval
        return P(x, np.array([complex(e) for e in self.eps] + [0, 1]))

    def ydot(self, x, y):
        out = y * (1 + complex(self.A) * x ** self.k)
        for i, j, c in self.forcing:
            out = out + complex(c) * x ** i * y ** j
        return out

    def at_origin(self) -> "SaddleNodeFamily":
        return SaddleNodeFamily(self.k, (0,) * self.k, self.A, self.forcing)


# ---------------------------------------------------------------------------
# center manifold

@dataclass(frozen=True)
class CenterManifoldSeries:
    """y = sum_{m>=1} c_m x^m; for k = 1 the usual a_n = c_{n+1}."""

    c: tuple
    k: int
    residual: tuple = field(repr=False, default=())

    @property
    def gevrey_order(self) -> Fraction:
        return Fraction(1, self.k)

    @property
    def a(self) -> list:
        return list(self.c[2:])

    @property
    def N(self) -> int:
        return len(self.c) - 1

    def terms(self, x) -> np.ndarray:
        return np.array([complex(cm) * x ** m for m, cm in enumerate(self.c)])

    def __add__(self, other):
        return CenterManifoldSeries(tuple(a + b for a, b in zip(self.c, other.c)), self.k)


def _forcing_series(family: SaddleNodeFamily, y: TruncatedSeries) -> TruncatedSeries:
    N = y.N
    x = TruncatedSeries.identity(N, Fraction(1))
    out = TruncatedSeries.constant(Fraction(0), N)
    for i, j, c in family.forcing:
        if (i, j) == (0, 1):
            continue
        out = out + (x ** i) * (y ** j) * _exact(c)
    return out


def _exact(c):
    if isinstance(c, (int, Fraction)):
        return Fraction(c)
    if isinstance(c, float) and c.is_integer():
        return Fraction(int(c))
    return c


def center_manifold_series(family: SaddleNodeFamily, N: int = 40) -> CenterManifoldSeries:
    """Order-by-order solution of x^{k+1} y' = y(1 + A x^k) + g(x, y) at eps = 0."""
    fam = family.at_origin()
    k, A = fam.k, _exact(fam.A)
    lam = Fraction(1) + sum((_exact(c) for i, j, c in fam.forcing if (i, j) == (0, 1)), Fraction(0))
    c = [Fraction(0)] * (N + 1)
    for m in range(1, N + 1):
        y = TruncatedSeries(tuple(c), N)
        g = _forcing_series(fam, y)[m]
        rhs = (m - k - A) * c[m - k] if m - k >= 1 else 0
        rhs = rhs - g
        if lam == 0:
            raise ResonantObstruction("zero divisor in the recurrence", order=m)
        c[m] = rhs / lam
    # re-substitution
    y = TruncatedSeries(tuple(c), N)
    x = TruncatedSeries.identity(N, Fraction(1))
    lhs = (x ** (k + 1)) * y.derivative()
    rhs = y * (TruncatedSeries.constant(Fraction(1), N) + (x ** k) * A) + _forcing_series(fam, y)
    rhs = rhs + y * (lam - 1)
    resid = tuple((lhs - rhs).coeffs)
    return CenterManifoldSeries(tuple(c), k, resid)


def gevrey_fit(series: CenterManifoldSeries) -> tuple[float, float]:
    """Least-squares slope and intercept of log|a_n| - n log n against n."""
    n = np.array([m - 1 for m in range(2, series.N + 1) if series.c[m] != 0], dtype=float)
    vals = np.array([float(abs(series.c[int(m) + 1])) for m in n])
    y = np.log(vals) - n * np.log(n)
    slope, intercept = np.polyfit(n, y, 1)
    return float(slope), float(intercept)


def least_term_sum(series: CenterManifoldSeries, x: complex) -> tuple[complex, float]:
    """Sum up to (excluding) the smallest term; bound = that term's modulus."""
    t = series.terms(x)
    mags = np.abs(t)
    idx = [m for m in range(1, len(t)) if series.c[m] != 0]
    if not idx:
        return 0j, 0.0
    m_star = min(idx, key=lambda m: mags[m])
    if m_star < 3 or m_star == idx[-1]:
        raise NoMinimalTerm(f"no interior minimal term at x = {x}", index=int(m_star))
    return complex(np.sum(t[:m_star])), float(mags[m_star])


def borel_pade_sum(series: CenterManifoldSeries, x: complex, direction: float | None = None,
                   m: int | None = None, tube: float = 1e-2) -> complex:
    """Laplace integral of the diagonal Pade approximant of the Borel transform (k = 1).

    y(x) = int_0^inf B(xi) exp(-xi/x) dxi along arg xi = direction, with
    B(xi) = sum a_n xi^n / n!.
    """
    if series.k != 1:
        raise NotImplementedError("Borel-Pade summation is provided for k = 1")
    x = complex(x)
    if direction is None:
        direction = cmath.phase(x)
    a = series.a
    if not any(ai != 0 for ai in a):
        return 0j
    Nn = len(a)
    m = m or (Nn - 1) // 2
    # a_n indexes x^{n+1}, n >= 1; Borel coefficient of xi^n is a_n / n!
    coeffs = [0j] + [complex(a[n - 1]) / math.factorial(n) for n in range(1, 2 * m + 1)]
    p, q = _pade_complex(coeffs, m)
    e = cmath.exp(1j * direction)
    poles = np.roots(q[::-1]) if len(q) > 1 else np.array([])
    for pole in poles:
        if abs(pole) < 1e-12:
            continue
        # distance from the ray {t e}
        t = (pole * e.conjugate()).real
        dist = abs(pole - max(t, 0) * e)
        if dist < tube * max(1.0, abs(pole)):
            raise PoleOnPath(f"Pade pole {pole:.6g} on the ray", pole=[pole.real, pole.imag], direction=direction)
    L = 40.0 * abs(x)

    def B(xi):
        return np.polynomial.polynomial.polyval(xi, p) / np.polynomial.polynomial.polyval(xi, q)

    def integrand(t, part):
        xi = t * e
        val = B(xi) * cmath.exp(-xi / x) * e
        return val.real if part == 0 else val.imag

    re = quad(integrand, 0, L, args=(0,), limit=400, epsabs=1e-15, epsrel=1e-12)[0]
    im = quad(integrand, 0, L, args=(1,), limit=400, epsabs=1e-15, epsrel=1e-12)[0]
    return complex(re, im)


def _pade_complex(coeffs, m, max_cond: float = 1e10):
    """Diagonal Pade approximant [m'/m'] with m' <= m the largest well-conditioned degree.

    Exactly rational Borel transforms make the high-degree systems singular;
    stepping the degree down removes the spurious pole-zero pairs.
    """
    c = np.asarray(coeffs, dtype=complex)
    for mm in range(m, 0, -1):
        Amat = np.array([[c[mm + i - j] if mm + i - j >= 0 else 0 for j in range(1, mm + 1)]
                         for i in range(1, mm + 1)], dtype=complex)
        if np.linalg.cond(Amat) > max_cond:
            continue
        qv = np.linalg.solve(Amat, -c[mm + 1 : 2 * mm + 1])
        q = np.concatenate([[1.0], qv])
        p = np.array([sum(q[j] * c[i - j] for j in range(0, min(i, mm) + 1)) for i in range(mm + 1)])
        return p, q
    return c[:1].copy(), np.array([1.0 + 0j])


def integrate_center_manifold(family: SaddleNodeFamily, x_eval: complex, ray: float | None = None,
                              order: int = 6, x_start_frac: float = 0.1) -> complex:
    """Sectoral center manifold at x_eval by integrating dy/dx = y'/x' along the ray.

    The solution is started close to the origin from the truncated series,
    where the asymptotic data is most accurate, and carried outward: along a
    ray in the summability sector the homogeneous solutions decay outward,
    so starting errors are damped instead of amplified.
    """
    fam = family.at_origin()
    if not fam.forcing:
        return 0j
    x_eval = complex(x_eval)
    if ray is None:
        ray = cmath.phase(x_eval)
    e = cmath.exp(1j * ray)
    r1 = abs(x_eval)
    r0 = x_start_frac * r1
    cm = center_manifold_series(fam, order)
    y0 = complex(np.sum(cm.terms(r0 * e)))

    def rhs(r, y):
        x = r * e
        return e * fam.ydot(x, y) / fam.xdot(x)

    sol = solve_ivp(rhs, (r0, r1), np.array([y0], dtype=complex), method="DOP853", rtol=1e-13, atol=1e-18)
    if not sol.success:
        raise StiffIntegrationFailure(sol.message, nfev=int(sol.nfev))
    return complex(sol.y[0, -1])


# ---------------------------------------------------------------------------
# holonomy

@dataclass
class HolonomyMap:
    C: complex
    x: np.ndarray
    fx: np.ndarray
    coeffs: np.ndarray  # Taylor coefficients of the return map
    radius: float

    def germ(self, N: int | None = None) -> TruncatedSeries:
        N = N or len(self.coeffs) - 1
        return TruncatedSeries(tuple(complex(c) for c in self.coeffs[: N + 1]), N)

    @property
    def multiplier(self) -> complex:
        return complex(self.coeffs[1])


def holonomy(xdot: Callable, ydot: Callable, C: complex = 1.0, radius: float = 0.05, samples: int = 32,
             order: int | None = None, trust: float = 10.0, rtol: float = 1e-13) -> HolonomyMap:
    """Return map of the leaves above the loop y = C e^{i theta} in the separatrix {x = 0}.

    Along the loop dx/dtheta = i y xdot(x, y) / ydot(x, y).  The return map is
    sampled on |x| = radius and its Taylor coefficients come from the FFT.
    """
    th = 2 * math.pi * np.arange(samples) / samples
    x0 = radius * np.exp(1j * th)
    C = complex(C)

    def rhs(theta, x):
        y = C * cmath.exp(1j * theta)
        return 1j * y * xdot(x, y) / ydot(x, y)

    def escape(theta, x):
        return trust * radius - np.max(np.abs(x))

    escape.terminal = True
    sol = solve_ivp(rhs, (0.0, 2 * math.pi), x0, method="DOP853", rtol=rtol, atol=1e-16 * radius, events=escape)
    if sol.status == 1 or not sol.success:
        raise LeafEscape("lifted path left the trust region", radius=radius)
    fx = sol.y[:, -1]
    c = np.fft.fft(fx) / samples
    order = order or samples // 2 - 1
    coeffs = np.array([c[n] / radius ** n for n in range(order + 1)])
    return HolonomyMap(C, x0, fx, coeffs, radius)


def saddle_node_holonomy(k: int = 1, A: complex = 0.0, **kw) -> HolonomyMap:
    """Holonomy of the strong separatrix of x' = x^{k+1}, y' = y (1 + A x^k)."""
    return holonomy(lambda x, y: x ** (k + 1), lambda x, y: y * (1 + A * x ** k), **kw)


def linear_saddle_holonomy(p: int, q: int, **kw) -> HolonomyMap:
    """x' = x, y' = -(p/q) y."""
    return holonomy(lambda x, y: x, lambda x, y: -(p / q) * y, **kw)


def holonomy_invariants(h: HolonomyMap, N: int = 7):
    """(k, a) of a parabolic holonomy from its fitted germ."""
    coeffs = list(h.coeffs[: N + 1])
    coeffs[0] = 0
    # small Fourier noise below the fit accuracy is treated as zero
    coeffs = [c if abs(c) > 1e-9 else 0 for c in coeffs]
    return extract_parabolic_invariants(TruncatedSeries(tuple(coeffs), N), tol=1e-7)


# ---------------------------------------------------------------------------
# closed-form invariants

def saddle_node_invariants(eps, A) -> dict:
    """mu_+- = +-2 sqrt(eps)/(1 +- A sqrt(eps)) and the two identity residuals.

    Exact inputs (int, Fraction, sympy numbers) are handled exactly.
    """
    exact = all(isinstance(v, (int, Fraction, sp.Basic)) for v in (eps, A))
    if exact:
        e, a = sp.nsimplify(eps), sp.nsimplify(A)
        if e == 0:
            raise DegenerateDenominator("eps = 0")
        s = sp.sqrt(e)
        if sp.simplify(1 + a * s) == 0 or sp.simplify(1 - a * s) == 0:
            raise DegenerateDenominator("1 +- A sqrt(eps) = 0")
        mp = 2 * s / (1 + a * s)
        mm = -2 * s / (1 - a * s)
        r1 = sp.simplify(1 / mp + 1 / mm - a)
        r2 = sp.simplify(1 / s - (1 / mp - 1 / mm))
        return {"mu_plus": mp, "mu_minus": mm, "residual_sum": r1, "residual_canonical": r2, "exact": True}
    e, a = complex(eps), complex(A)
    if e == 0:
        raise DegenerateDenominator("eps = 0")
    s = cmath.sqrt(e)
    if abs(1 + a * s) < 1e-14 or abs(1 - a * s) < 1e-14:
        raise DegenerateDenominator("1 +- A sqrt(eps) = 0")
    mp = 2 * s / (1 + a * s)
    mm = -2 * s / (1 - a * s)
    return {"mu_plus": mp, "mu_minus": mm,
            "residual_sum": abs(1 / mp + 1 / mm - a) / max(1.0, abs(a)),
            "residual_canonical": abs(1 / s - (1 / mp - 1 / mm)) * abs(s),
            "exact": False}


# ---------------------------------------------------------------------------
# weak focus

def _weak_focus_rhs(k, eps, a):
    eps = [complex(e).real for e in eps] if eps is not None else [0.0] * k

    def Q(u):
        acc = 1.0
        for e in reversed(eps):
            acc = acc * u + e
        return acc

    def rdot(theta, r):
        return -r * Q(r * r) + a * r ** (4 * k + 1)

    return rdot


def weak_focus_return(k: int, eps, a: float, zeta: float, rtol: float = 1e-13) -> float:
    """Half-turn map P(zeta) of r' = -r Q_eps(r^2) + a r^{4k+1}, theta' = 1.

    Q_eps(u) = u^k + eps_{k-1} u^{k-1} + ... + eps_0.  Half a turn carries the
    point at radius |zeta| on the ray to radius r(pi) on the opposite ray,
    which is the coordinate -sign(zeta) r(pi).
    """
    if zeta == 0:
        return 0.0
    rdot = _weak_focus_rhs(k, eps, a)
    r0 = abs(zeta)
    sol = solve_ivp(lambda t, r: [rdot(t, r[0])], (0.0, math.pi), [r0], method="DOP853", rtol=rtol, atol=1e-16 * r0)
    if not sol.success:
        raise StiffIntegrationFailure(sol.message)
    return -math.copysign(float(sol.y[0, -1]), zeta)


def weak_focus_coefficients(k: int = 1, a: float = 0.0, ladder=None) -> dict:
    """Fit P(zeta) = c1 zeta + c_{2k+1} zeta^{2k+1} + ... on a zeta ladder (eps = 0)."""
    if ladder is None:
        ladder = np.geomspace(1e-2, 1e-1, 12)
    z = np.asarray(ladder, dtype=float)
    P = np.array([weak_focus_return(k, None, a, float(t)) for t in z])
    # P/zeta and (P + zeta)/zeta^{2k+1} are polynomials in u = zeta^{2k}; the
    # intercepts (Richardson extrapolation to zeta = 0) are c_1 and c_{2k+1}
    u = z ** (2 * k)
    c1 = np.polyfit(u, P / z, 3)[-1]
    ctop = np.polyfit(u, (P + z) / z ** (2 * k + 1), 3)[-1]
    return {"c1": float(c1), "c_top": float(ctop), "ladder": z.tolist(), "values": P.tolist()}


def weak_focus_limit_cycle(k: int, eps, a: float = 0.0, bracket=(1e-3, 0.9)) -> float:
    """Radius zeta > 0 with P(P(zeta)) = zeta inside the bracket."""
    def g(z):
        return weak_focus_return(k, eps, a, weak_focus_return(k, eps, a, z)) - z

    lo, hi = bracket
    grid = np.geomspace(lo, hi, 40)
    vals = [g(t) for t in grid]
    for i in range(len(grid) - 1):
        if vals[i] == 0:
            return float(grid[i])
        if vals[i] * vals[i + 1] < 0:
            return float(brentq(g, grid[i], grid[i + 1], xtol=1e-14))
    raise ValueError("no periodic orbit in the bracket")


# ---------------------------------------------------------------------------
# resonant nodes in the unfolding

def resonant_parameter(n: int, A: float = 0.0, k: int = 1) -> float:
    """sqrt(eps_n) with lambda_2/lambda_1 = n at the node x = +sqrt(eps): (1 + A s)/(2 s) = n."""
    if k != 1:
        raise NotImplementedError("resonant nodes are computed for k = 1")
    s = 1.0 / (2 * n)
    for _ in range(50):
        g = (1 + A * s) / (2 * s) - n
        dg = -1.0 / (2 * s * s)
        step = g / dg
        s -= step
        if abs(step) < 1e-16 * abs(s):
            break
    return s


@dataclass
class NodeCheck:
    n: int
    eps: float
    ratio: float
    obstruction: complex
    spread: float
    scale: float
    log_term_detected: bool


def resonant_node_check(family: SaddleNodeFamily, n: int, radius_frac: float = 1.5) -> NodeCheck:
    """Monodromy of solutions around the resonant node.

    Near a resonant node Y ~ X^n (C + B log X); the homogeneous part is single
    valued, so continuing a solution once around the node changes it by
    2 pi i B X^n.  That jump is measured by integrating dy/dx = y'/x' along
    circles around the node; its spread over several circles and tolerances
    serves as the error estimate.
    """
    A = complex(family.A).real
    s = resonant_parameter(n, A, family.k)
    eps = s * s
    fam = SaddleNodeFamily(family.k, (-eps,), family.A, family.forcing)
    x0 = s
    lam1 = 2 * s
    lam2 = 1 + A * s
    rho = radius_frac * x0
    y_start = 0.0
    start = x0 + rho

    def loop(rtol, pieces, y_init):
        y = complex(y_init)
        edges = np.linspace(0, 2 * math.pi, pieces + 1)
        for t0, t1 in zip(edges[:-1], edges[1:]):
            def rhs(t, yy):
                x = x0 + rho * cmath.exp(1j * t)
                dx = 1j * rho * cmath.exp(1j * t)
                return fam.ydot(x, yy) / fam.xdot(x) * dx

            sol = solve_ivp(rhs, (t0, t1), np.array([y], dtype=complex), method="DOP853", rtol=rtol, atol=1e-20)
            if not sol.success:
                raise FitIllConditioned(sol.message)
            y = complex(sol.y[0, -1])
        return y - complex(y_init)

    runs = []
    for rtol in (1e-11, 1e-12, 1e-13):
        for pieces in (1, 3):
            for y_init in (y_start, 0.1 * eps):
                runs.append(loop(rtol, pieces, y_init))
    runs = np.array(runs)
    jump = complex(np.mean(runs))
    spread = float(np.std(np.abs(runs)) + np.std(runs.real) + np.std(runs.imag))
    scale = max(eps, float(np.max(np.abs(runs))))
    detected = abs(jump) > 10 * spread and abs(jump) > 1e-13 * eps
    return NodeCheck(n, eps, lam2 / lam1, jump, spread, scale, bool(detected))


def euler_log_residue(n: int) -> float:
    """Residue -Res_{x0}[x^2 (x + x0)^{n-1} / (x - x0)^{n+1}] for the Euler family, x0 = 1/(2n)."""
    x0 = sp.Rational(1, 2 * n)
    x = sp.symbols("x")
    expr = sp.diff(x ** 2 * (x + x0) ** (n - 1), x, n) / sp.factorial(n)
    return float(-expr.subs(x, x0))
