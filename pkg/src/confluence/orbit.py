"""Orbit spaces of parabolic germs and their unfoldings.

Fatou coordinates are evaluated as Phi(f^n(z)) - n where Phi is the formal
(asymptotic) Fatou coordinate truncated at a fixed order; the iterate is
taken deep enough into the petal that the truncation error is negligible.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import (
    EscapedPetal,
    NoOverlap,
    NoSolutionInRange,
    NotHyperbolic,
    NotSiegel,
    OnDiscriminant,
    SlowConvergence,
)
from .series import FormalVectorField1D, TruncatedSeries, extract_parabolic_invariants, flow_time_t

TWO_PI_I = 2j * math.pi


@dataclass(frozen=True)
class SectorParameter:
    """eps-hat on the universal cover of the punctured eps-plane."""

    r: float
    theta: float
    delta: float = 0.1

    @classmethod
    def from_eps(cls, eps: complex, delta: float = 0.1) -> "SectorParameter":
        return cls(abs(eps), cmath.phase(eps), delta)

    @property
    def eps(self) -> complex:
        return self.r * cmath.exp(1j * self.theta)

    @property
    def sqrt(self) -> complex:
        return math.sqrt(self.r) * cmath.exp(0.5j * self.theta)

    @property
    def in_omega(self) -> bool:
        return abs(self.theta) < math.pi + self.delta

    def turned(self, turns: int = 1) -> "SectorParameter":
        return SectorParameter(self.r, self.theta + 2 * math.pi * turns, self.delta)


# ---------------------------------------------------------------------------
# germ evaluators

class Germ:
    """An analytic germ: an evaluator plus its Taylor series at 0."""

    def __init__(self, series: TruncatedSeries, evaluator: Callable | None = None, name: str = ""):
        self.series = series
        self._eval = evaluator
        self.name = name
        self._poly = None if evaluator is not None else series.as_array()
        self._inv_series = None

    @classmethod
    def polynomial(cls, coeffs, N: int = 40, name: str = "") -> "Germ":
        return cls(TruncatedSeries(tuple(complex(c) for c in coeffs), max(N, len(coeffs) - 1)), None, name)

    def __call__(self, z):
        if self._poly is not None:
            return np.polynomial.polynomial.polyval(z, self._poly)
        return self._eval(z)

    def deriv_at(self, z, h: float = 1e-6):
        if self._poly is not None:
            return np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(self._poly))
        if hasattr(self._eval, "deriv_at"):
            return self._eval.deriv_at(z)
        return (self(z + h) - self(z - h)) / (2 * h)

    def iterate(self, z, n: int):
        z = np.asarray(z, dtype=complex)
        if n <= 0:
            return z.copy()
        if self._poly is not None:
            return kernels.iterate_poly(self._poly, z, n)
        for _ in range(n):
            z = self(z)
        return z

    def inverse(self, z, tol: float = 1e-15):
        """Local inverse near 0 by Newton from the reverted series."""
        z = np.asarray(z, dtype=complex)
        if self._inv_series is None:
            self._inv_series = self.series.truncate(min(self.series.N, 16)).invert()
        w = self._inv_series(z)
        for _ in range(60):
            step = (self(w) - z) / self.deriv_at(w)
            w = w - step
            if np.all(np.abs(step) <= tol * np.maximum(1e-300, np.abs(w))):
                break
        return w

    def scaled(self, lam: complex) -> "Germ":
        """w -> f(lam w)/lam."""
        s = TruncatedSeries(tuple(complex(c) * lam ** (n - 1) for n, c in enumerate(self.series.coeffs)), self.series.N)
        if self._poly is not None:
            return Germ(s, None, self.name)
        return Germ(s, lambda w: self(lam * w) / lam, self.name)


class ModelTimeOne:
    """Time-one map of z' = P_eps(z)/(1 + a z^k), evaluated by Newton on the time coordinate."""

    def __init__(self, k: int, a: complex = 0.0, eps=None):
        self.k = k
        self.a = complex(a)
        self.eps = tuple(complex(e) for e in (eps if eps is not None else (0,) * k))
        self.P = np.array(list(self.eps) + [0, 1], dtype=complex)
        self.den = np.array([1] + [0] * (k - 1) + [self.a], dtype=complex)
        self.unfolded = any(e != 0 for e in self.eps)
        if self.unfolded:
            zs = np.roots(self.P[::-1])
            dP = np.polynomial.polynomial.polyval(zs, np.polynomial.polynomial.polyder(self.P))
            self.points = zs
            self.nu = dP / np.polynomial.polynomial.polyval(zs, self.den)  # eigenvalues
        else:
            self.points = np.zeros(1, dtype=complex)
            self.nu = np.zeros(1, dtype=complex)

    def v(self, z):
        Pp = np.polynomial.polynomial.polyval
        return Pp(z, self.P) / Pp(z, self.den)

    def time_difference(self, F, z):
        """t(F) - t(z) with logarithms of ratios (no global branch)."""
        if self.unfolded:
            out = 0
            for zj, nu in zip(self.points, self.nu):
                out = out + np.log((F - zj) / (z - zj)) / nu
            return out
        k = self.k
        return (1.0 / z ** k - 1.0 / F ** k) / k + self.a * np.log(F / z)

    def _rk4(self, z, steps=16):
        h = 1.0 / steps
        for _ in range(steps):
            k1 = self.v(z)
            k2 = self.v(z + 0.5 * h * k1)
            k3 = self.v(z + 0.5 * h * k2)
            k4 = self.v(z + h * k3)
            z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return z

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = z.copy()
        flat_z, flat_o = z.reshape(-1), out.reshape(-1)
        dist = np.min(np.abs(flat_z[:, None] - self.points[None, :]), axis=1)
        live = dist > 1e-300
        zz = flat_z[live]
        F = self._rk4(zz)
        for _ in range(30):
            step = (self.time_difference(F, zz) - 1.0) * self.v(F)
            F = F - step
            if np.all(np.abs(step) <= 1e-16 * np.maximum(np.abs(F), 1e-300)):
                break
        flat_o[live] = F
        return out if out.ndim else complex(out)

    def deriv_at(self, z):
        z = np.asarray(z, dtype=complex)
        vz = self.v(z)
        out = np.empty_like(z)
        flat_z, flat_v, flat_o = z.reshape(-1), vz.reshape(-1), out.reshape(-1)
        for i, (zz, vv) in enumerate(zip(flat_z, flat_v)):
            near = np.abs(self.points - zz)
            j = int(np.argmin(near))
            if abs(vv) < 1e-13 and near[j] < 1e-8:
                flat_o[i] = np.exp(self.nu[j]) if self.unfolded else 1.0
            else:
                flat_o[i] = self.v(self(zz)) / vv
        return out if out.ndim else complex(out)


def model_germ(k: int, a: complex = 0.0, eps=None, N: int = 40) -> Germ:
    """The time-one map of the normal-form field as a Germ (series exact for eps = 0)."""
    ev = ModelTimeOne(k, a, eps)
    X = FormalVectorField1D.rational_model(k, ev.eps, ev.a, N)
    series = flow_time_t(X, 1.0, N).series
    return Germ(series, ev, f"model(k={k}, a={a})")


# ---------------------------------------------------------------------------
# Fatou coordinates

@dataclass(frozen=True)
class FormalFatou:
    """Phi(z) = sum_p d_p z^p + A log z, p = -k..M (p != 0)."""

    k: int
    d: dict
    A: complex

    def value(self, z, branch_dir: float = 0.0):
        z = np.asarray(z, dtype=complex)
        out = self.A * (np.log(z * cmath.exp(-1j * branch_dir)) + 1j * branch_dir)
        for p, c in self.d.items():
            out = out + c * z ** p
        return out

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        out = self.A / z
        for p, c in self.d.items():
            out = out + p * c * z ** (p - 1)
        return out

    def inverse(self, zeta, branch_dir: float, tol: float = 1e-15):
        zeta = np.asarray(zeta, dtype=complex)
        k = self.k
        # leading term -1/(k z^k) = zeta, root nearest the petal direction
        base = (-1.0 / (k * zeta)) ** (1.0 / k)
        best = base
        bestd = np.full(zeta.shape, np.inf)
        for m in range(k):
            cand = base * cmath.exp(2j * math.pi * m / k)
            d = np.abs(np.angle(cand * cmath.exp(-1j * branch_dir)))
            best = np.where(d < bestd, cand, best)
            bestd = np.minimum(d, bestd)
        z = best
        for _ in range(60):
            step = (self.value(z, branch_dir) - zeta) / self.deriv(z)
            z = z - step
            if np.all(np.abs(step) <= tol * np.abs(z)):
                break
        return z


def formal_fatou(series: TruncatedSeries, k: int, M: int = 12) -> FormalFatou:
    """Solve Phi(f(z)) - Phi(z) = 1 order by order for f = z + z^{k+1} + ..."""
    N = M + 2 * k + 1
    if series.N < N:
        raise ValueError(f"germ series must have order >= {N}")
    c = [complex(x) for x in series.coeffs[: N + 2]]
    u = TruncatedSeries(tuple(c[1:]) + (0j,), N) - 1.0  # f(z)/z - 1
    one_plus_u = u + 1.0
    from .series import log1p_series

    L = log1p_series(u)
    G = {}
    for p in range(-k, M + 1):
        if p != 0:
            G[p] = one_plus_u ** p - 1.0
    d = {-k: -1.0 / k}
    A = 0j
    for n in range(1, M + k + 1):
        # coefficient of z^n of sum_p d_p z^p G_p + A L must vanish (n >= 1)
        p_new = n - k
        acc = 0j
        for p, dp in d.items():
            if 0 <= n - p <= N:
                acc += dp * G[p][n - p]
        if p_new != 0:
            acc += A * L[n] if n <= N else 0
            d[p_new] = -acc / p_new
        else:
            A = -acc
    return FormalFatou(k, d, A)


def petal_direction(k: int, kind: str, m: int = 0) -> float:
    """Attracting directions (2m+1)pi/k, repelling 2m pi/k for f = z + z^{k+1} + ..."""
    return ((2 * m + 1) if kind == "attracting" else 2 * m) * math.pi / k


@dataclass
class FatouCoordinate:
    """phi with phi(f(z)) = phi(z) + 1 on one petal of a normalized germ."""

    germ: Germ
    kind: str  # attracting | repelling
    k: int
    m: int = 0
    formal: FormalFatou = field(default=None, repr=False)
    scale: complex = 1.0  # z = scale * w, w the normalized coordinate
    constant: complex = 0.0
    r_small: float = 0.02
    max_iter: int = 100_000
    base_point: complex | None = None

    @property
    def direction(self) -> float:
        return petal_direction(self.k, self.kind, self.m)

    def _raw(self, w):
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        g = self.germ
        n, cur = 0, w
        step = 32
        while True:
            if np.all(np.abs(cur) < self.r_small):
                break
            if n >= self.max_iter:
                raise SlowConvergence("orbit did not enter the petal core", iterations=n)
            cur = g.iterate(cur, step) if self.kind == "attracting" else _iterate_inverse(g, cur, step)
            n += step
            if not np.all(np.isfinite(cur)) or np.any(np.abs(cur) > 1e3):
                raise EscapedPetal("orbit left the basin", iterations=n)
        ang = np.abs(np.angle(cur * cmath.exp(-1j * self.direction)))
        if np.any(ang > math.pi / (2 * self.k)):
            # keep iterating until the orbit settles into the petal direction
            extra = 0
            while np.any(ang > math.pi / (2 * self.k)) and extra < self.max_iter:
                cur = g.iterate(cur, step) if self.kind == "attracting" else _iterate_inverse(g, cur, step)
                n += step
                extra += step
                ang = np.abs(np.angle(cur * cmath.exp(-1j * self.direction)))
            if extra >= self.max_iter:
                raise SlowConvergence("orbit did not align with the petal", iterations=n)
        val = self.formal.value(cur, self.direction)
        return val - n if self.kind == "attracting" else val + n

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = self._raw(z / self.scale) - self.constant
        return out.reshape(z.shape) if z.ndim else complex(out[0])

    def parametrization(self, zeta, n: int | None = None):
        """phi^{-1}(zeta) for the repelling petal, extended by forward iteration."""
        if self.kind != "repelling":
            raise ValueError("parametrization is provided for repelling petals")
        zeta = np.atleast_1d(np.asarray(zeta, dtype=complex)) + self.constant
        if n is None:
            n = int(max(0, math.ceil(max(np.max(zeta.real), 0.0) + 1.0 / (self.k * self.r_small ** self.k))))
        w0 = self.formal.inverse(zeta - n, self.direction)
        return self.scale * self.germ.iterate(w0, n)

    def defect(self, zs, f: Callable) -> float:
        zs = np.asarray(zs, dtype=complex)
        return float(np.max(np.abs(self(f(zs)) - self(zs) - 1.0)))


def _iterate_inverse(g: Germ, w, n: int):
    for _ in range(n):
        w = g.inverse(w)
    return w


def normalize_germ(f) -> tuple[Germ, int, complex, complex]:
    """(normalized germ, k, a, scale) with f(z) = scale * g(z/scale)."""
    if not isinstance(f, Germ):
        f = Germ(f.series if hasattr(f, "series") else f)
    inv = extract_parabolic_invariants(f.series, tol=1e-13)
    lam = complex(inv.scale)
    g = f if lam == 1 else f.scaled(lam)
    return g, inv.k, complex(inv.a), lam


def fatou_coordinate(f, petal: str = "attracting", m: int = 0, M: int = 12, base_point: complex | None = None,
                     normalization: str = "base") -> FatouCoordinate:
    """Fatou coordinate on petal m of the given kind.

    normalization "base": phi(base_point) = 0, base point defaulting to the
    petal bisector at half the petal radius; "asymptotic": no constant term in
    the expansion at 0.
    """
    g, k, a, lam = normalize_germ(f)
    formal = formal_fatou(g.series, k, M)
    fc = FatouCoordinate(g, petal, k, m, formal, lam)
    if normalization == "base":
        if base_point is None:
            base_point = lam * 0.5 * petal_radius(g, k) * cmath.exp(1j * fc.direction)
        fc.constant = complex(fc._raw(np.array([base_point / lam]))[0])
        fc.base_point = base_point
    return fc


def petal_radius(g: Germ, k: int, rmax: float = 0.5) -> float:
    """Largest r on a ladder with |g(z) - z - z^{k+1}| < 0.5 |z|^{k+1} on |z| = r."""
    th = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    for r in rmax * 0.8 ** np.arange(40):
        z = r * np.exp(1j * th)
        if np.all(np.abs(g(z) - z - z ** (k + 1)) < 0.5 * np.abs(z) ** (k + 1)):
            return float(r)
    return float(r)


# ---------------------------------------------------------------------------
# horn maps

@dataclass
class HornMapSample:
    end: str  # "0" or "inf"
    w: np.ndarray
    psi: np.ndarray
    linear_part: complex
    fourier: np.ndarray  # b_n of D = phi_att - phi_rep, n = 0, 1, 2, ... (end 0) or 0, -1, ... (end inf)
    height: float
    defect: float
    a: complex

    @property
    def nonlinearity(self) -> float:
        """|psi''/(2 psi')| at the end, in the chart of the end."""
        return float(2 * math.pi * abs(self.fourier[1]))

    def to_json(self) -> dict:
        return {
            "end": self.end,
            "samples": [[[complex(w).real, complex(w).imag], [complex(p).real, complex(p).imag]]
                        for w, p in zip(self.w, self.psi)],
            "linear_part": [self.linear_part.real, self.linear_part.imag],
            "fourier": [[complex(b).real, complex(b).imag] for b in self.fourier],
            "height": self.height,
            "defect": self.defect,
        }


HEIGHT_LADDER = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0)
HEIGHT_MARGIN = 1.0


def horn_map(f, end="0", samples: int = 64, height: float | str = "auto", M: int = 12) -> HornMapSample:
    """Horn map at the end 0 (upper crescent) or inf (lower crescent) of a k = 1 germ.

    Samples sit on the line Im(zeta) = +-height in the repelling Fatou
    coordinate.  "auto" takes the lowest ladder height whose samples all fall
    in the attracting basin, plus a margin that keeps FFT aliasing small.
    """
    end = str(end)
    if end in ("oo", "infinity", "∞"):
        end = "inf"
    g, k, a, lam = normalize_germ(f)
    if k != 1:
        raise NotImplementedError("horn maps are computed for k = 1")
    att = fatou_coordinate(g, "attracting", M=M, normalization="base")
    rep = fatou_coordinate(g, "repelling", M=M, normalization="base")
    if height == "auto":
        for h in HEIGHT_LADDER:
            try:
                _horn_at(att, rep, g, a, end, samples, h)
            except (EscapedPetal, SlowConvergence):
                continue
            return _horn_at(att, rep, g, a, end, samples, h + HEIGHT_MARGIN)
        raise EscapedPetal("no sample height keeps the crescent inside the basin")
    return _horn_at(att, rep, g, a, end, samples, float(height))


def _horn_at(att, rep, g, a, end, samples, height):
    sgn = 1.0 if end == "0" else -1.0
    x = np.arange(samples) / samples
    zeta = x + 1j * sgn * height
    z = rep.parametrization(zeta)
    phi_att = att(z)
    D = phi_att - zeta
    c = np.fft.fft(D) / samples
    nmax = samples // 2
    if end == "0":
        b = np.array([c[n] * math.exp(2 * math.pi * n * height) for n in range(nmax)])
        linear = cmath.exp(TWO_PI_I * b[0])
    else:
        b = np.array([c[-n % samples] * math.exp(2 * math.pi * n * height) for n in range(nmax)])
        linear = cmath.exp(-TWO_PI_I * b[0])
    # samples in the chart of the end: w near 0, or 1/w near infinity
    chart = 1.0 if end == "0" else -1.0
    w = np.exp(chart * TWO_PI_I * zeta)
    psi = np.exp(chart * TWO_PI_I * phi_att)
    # Abel defect of the attracting coordinate on the samples
    defect = float(np.max(np.abs(att(g(z)) - phi_att - 1.0)))
    return HornMapSample(end, w, psi, complex(linear), b, height, defect, a)


def horn_compatibility(f, samples: int = 64, height: float | str = "auto") -> tuple[complex, complex]:
    """((psi0)'(0) (psi_inf)'(inf), exp(4 pi^2 a))."""
    h0 = horn_map(f, "0", samples, height)
    hi = horn_map(f, "inf", samples, height)
    return h0.linear_part * hi.linear_part, cmath.exp(4 * math.pi ** 2 * h0.a)


# ---------------------------------------------------------------------------
# unfolded model: Lavaurs factor and resurgence

@dataclass(frozen=True)
class LavaursData:
    K: complex
    C: complex
    period: complex
    eps_hat: SectorParameter
    gate: str = "clockwise circle around +sqrt(eps)"


def _gate_period(s: complex, a: complex, nodes: int = 128) -> complex:
    """Integral of (1 + a z) dz / (z^2 - s^2) clockwise around z = s.

    Trapezoid rule on the circle |z - s| = |s|/2; the integrand is analytic in
    an annulus of ratio 4, so the error is of order 4^-nodes.
    """
    rad = 0.5 * abs(s)
    e = np.exp(-2j * math.pi * np.arange(nodes) / nodes)
    z = s + rad * e
    dz = -1j * rad * e
    return complex(np.sum((1 + a * z) / (z * z - s * s) * dz) * (2 * math.pi / nodes))


def lavaurs_map(eps_hat: SectorParameter, a: complex = 0.0, k: int = 1, check_siegel: bool = True) -> LavaursData:
    """Linear Lavaurs factor K = exp(2 pi i Pi), Pi the gate period; C = sqrt(eps) log K."""
    if k != 1:
        raise NotImplementedError("the Lavaurs factor is computed for k = 1")
    if eps_hat.r == 0:
        raise OnDiscriminant("eps = 0")
    if check_siegel and not _siegel(eps_hat.theta):
        raise NotSiegel(f"arg eps = {eps_hat.theta}", theta=eps_hat.theta)
    s = eps_hat.sqrt
    period = _gate_period(s, complex(a))
    logK = TWO_PI_I * period
    return LavaursData(cmath.exp(logK), logK * s, period, eps_hat)


def _siegel(theta: float) -> bool:
    t = (theta + math.pi) % (2 * math.pi) - math.pi
    return abs(t) > math.pi / 2


def lavaurs_closed_form(eps_hat: SectorParameter, a: complex = 0.0) -> complex:
    """K = exp(4 pi^2 / nu_+), nu_+ = 2 sqrt(eps) / (1 + a sqrt(eps)), by residues."""
    s = eps_hat.sqrt
    nu = 2 * s / (1 + a * s)
    return cmath.exp(4 * math.pi ** 2 / nu)


@dataclass
class ReturnMapSample:
    end: str
    w: np.ndarray
    tau: np.ndarray
    multiplier: complex
    K: complex
    psi_linear: complex


def renormalized_return_map(eps_hat: SectorParameter, a: complex = 0.0, psi0=None, end: str = "0",
                            samples: int = 32, radius: float = 0.1) -> ReturnMapSample:
    """tau = L o psi, with L(w) = K w.

    psi0 is a horn-map sample (or its linear part) of the family at this
    parameter; None means the model, whose horn maps are the identity.
    """
    K = lavaurs_map(eps_hat, a).K
    if psi0 is None:
        psi_lin, psi = 1.0, (lambda w: w)
    elif isinstance(psi0, HornMapSample):
        psi_lin = psi0.linear_part
        b = psi0.fourier

        def psi(w):
            acc = 0
            for n, bn in enumerate(b):
                acc = acc + bn * w ** n
            return w * np.exp(TWO_PI_I * acc)
    else:
        psi_lin = complex(psi0)
        psi = lambda w: psi_lin * w  # noqa: E731
    w = radius * np.exp(2j * math.pi * np.arange(samples) / samples)
    tau = K * psi(w)
    return ReturnMapSample(end, w, tau, K * psi_lin, K, complex(psi_lin))


def resurgence_sequence(psi0_linear: complex, a: complex, p: int, q: int, n_range, tol: float = 1e-12):
    """eps_n with K(eps_n) psi'(0) = exp(2 pi i p/q).

    Leading order sqrt(eps_n) = C0 / (2 pi i (n + p/q) - log psi'(0) - 2 pi^2 a),
    C0 = 2 pi^2, polished by Newton in s = sqrt(eps) on the gate-period K.
    """
    if math.gcd(p, q) != 1:
        raise ValueError("gcd(p, q) must be 1")
    log_psi = cmath.log(psi0_linear)
    target = TWO_PI_I * p / q
    out = []
    for n in n_range:
        den = TWO_PI_I * (n + p / q) - log_psi - 2 * math.pi ** 2 * a
        if abs(den) < 1e-12:
            raise NoSolutionInRange(f"no solution for n = {n}", n=n)
        s = 2 * math.pi ** 2 / den

        def F(s):
            return TWO_PI_I * _gate_period(s, a) + log_psi - target - TWO_PI_I * n

        for _ in range(30):
            val = F(s)
            h = 1e-7 * abs(s)
            dF = (F(s + h) - F(s - h)) / (2 * h)
            step = val / dF
            s = s - step
            if abs(step) < tol * abs(s):
                break
        eps = s * s
        K = cmath.exp(TWO_PI_I * _gate_period(s, a))
        resid = abs(K * psi0_linear - cmath.exp(target))
        out.append({"n": n, "sqrt_eps": s, "eps": eps, "residual": resid})
    return out


# ---------------------------------------------------------------------------
# Poincare domain: Koenigs linearizations

def taylor_at(f: Callable, z0: complex, r: float, N: int, samples: int = 64) -> np.ndarray:
    """Taylor coefficients of f at z0 from samples on |z - z0| = r."""
    th = 2 * math.pi * np.arange(samples) / samples
    vals = np.asarray(f(z0 + r * np.exp(1j * th)), dtype=complex)
    c = np.fft.fft(vals) / samples
    return np.array([c[n] / r ** n for n in range(N + 1)])


def koenigs_series(taylor: np.ndarray, lam: complex, N: int) -> TruncatedSeries:
    """G(v) = v + g_2 v^2 + ... with f(z0 + G(v)) = z0 + G(lam v)."""
    F = TruncatedSeries(tuple([0j] + list(taylor[1 : N + 1])), N)
    g = [0j, 1.0 + 0j] + [0j] * (N - 1)
    for n in range(2, N + 1):
        comp = F.compose(TruncatedSeries(tuple(g), N))
        g[n] = comp[n] / (lam ** n - lam)
    return TruncatedSeries(tuple(g), N)


@dataclass
class Koenigs:
    """Linearizing coordinate h at a hyperbolic fixed point: h(f(z)) = lam h(z)."""

    f: Callable
    point: complex
    multiplier: complex
    radius: float
    order: int = 14

    def __post_init__(self):
        tay = taylor_at(self.f, self.point, 2.5 * self.radius, self.order)
        self.G = koenigs_series(tay, self.multiplier, self.order)
        self.H = self.G.invert()

    def __call__(self, z, max_iter: int = 20000):
        """h for an attracting point: iterate into the local disk, then use the series."""
        w = np.array(z, dtype=complex, copy=True)
        n = np.zeros(w.shape, dtype=int)
        for _ in range(max_iter):
            out = np.abs(w - self.point) >= self.radius
            if not np.any(out):
                break
            w = np.where(out, self.f(w), w)
            n += out
        else:
            raise SlowConvergence("orbit did not reach the linearization disk")
        return self.H(w - self.point) / self.multiplier ** n

    def inverse_repelling(self, u):
        """h^{-1}(u) = f^n(z* + G(u / lam^n)) for a repelling point."""
        u = np.asarray(u, dtype=complex)
        ratio = np.abs(u) / self.radius
        n = np.maximum(0, np.ceil(np.log(np.maximum(ratio, 1e-300)) / math.log(abs(self.multiplier)))).astype(int)
        w = self.point + self.G(u / self.multiplier ** n)
        for m in range(int(np.max(n)) if n.size else 0):
            w = np.where(n > m, self.f(w), w)
        return w


def _fixed_point(f, z0, tol=1e-15):
    z = complex(z0)
    for _ in range(100):
        h = 1e-7 * max(1.0, abs(z))
        g = f(z) - z
        dg = (f(z + h) - f(z - h)) / (2 * h) - 1
        step = complex(g / dg)
        z -= step
        if abs(step) < tol * max(1.0, abs(z)):
            break
    return z


@dataclass
class GlutsyukData:
    attracting: complex
    repelling: complex
    lambda_att: complex
    lambda_rep: complex
    fourier: np.ndarray
    norm: float
    koenigs_defect: float


def glutsyuk_comparison(f, eps: complex, samples: int = 64, u_frac: float = 0.02, gate_angle: float = 0.6) -> GlutsyukData:
    """Compare the Koenigs time coordinates of the two fixed points near +-sqrt(eps).

    On a fundamental segment z_s = h_rep^{-1}(u0 lambda_rep^s), s in [0, 1),
    D(s) = T_att(z_s) - T_rep(z_s) is 1-periodic; its non-constant Fourier part
    measures the transition germ (zero for the model).
    """
    s0 = cmath.sqrt(eps)
    pts = [_fixed_point(f, s0), _fixed_point(f, -s0)]
    h = 1e-7
    mults = [complex((f(z + h) - f(z - h)) / (2 * h)) for z in pts]
    if any(abs(abs(m) - 1) < 1e-6 for m in mults):
        raise NotHyperbolic("a multiplier lies on the unit circle", multipliers=mults)
    ia = 0 if abs(mults[0]) < 1 else 1
    ir = 1 - ia
    if not abs(mults[ir]) > 1:
        raise NotHyperbolic("need one attracting and one repelling point", multipliers=mults)
    rad = 0.05 * abs(pts[0] - pts[1])
    ka = Koenigs(f, pts[ia], mults[ia], rad)
    kr = Koenigs(f, pts[ir], mults[ir], rad)
    lla, llr = cmath.log(mults[ia]), cmath.log(mults[ir])
    # aim the orbit: in the model ratio R = (z - z_r)/(z - z_a), log R moves
    # along log(lambda_rep); arg R0 is chosen so that arg R = gate_angle when
    # |R| = 1 (pi: through the midpoint, small angles: far from the gate)
    arg0 = gate_angle + llr.imag / llr.real * math.log(u_frac)
    u0 = (pts[ir] - pts[ia]) * u_frac * cmath.exp(1j * arg0)
    s = np.arange(samples) / samples
    u = u0 * np.exp(s * llr)
    z = kr.inverse_repelling(u)
    ha = ka(z)
    if not np.all(np.isfinite(ha)) or np.any(np.abs(ha) > 1e6):
        raise NoOverlap("orbit from the repelling point does not reach the attracting basin")
    logh = np.log(np.abs(ha)) + 1j * np.unwrap(np.angle(ha))
    D = logh / lla - (np.log(u0) / llr + s)
    c = np.fft.fft(D) / samples
    norm = float(np.sqrt(np.sum(np.abs(c[1:]) ** 2)))
    zt = pts[ia] + 4 * rad * np.exp(2j * math.pi * np.arange(8) / 8)
    kdef = float(np.max(np.abs(ka(f(zt)) - mults[ia] * ka(zt))))
    return GlutsyukData(pts[ia], pts[ir], mults[ia], mults[ir], c, norm, kdef)
