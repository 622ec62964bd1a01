"""Confluent linear systems P_eps(x) y' = A_eps(x) y.

For k = 1 the system is (x^2 - eps) y' = (D0 + D1 x + (x^2 - eps) B(x)) y with
D0, D1 diagonal.  Exponents, monodromy by loop integration, eigensolutions
from Frobenius series at +-sqrt(eps), flags ordered by flatness, unfolded
Stokes matrices, classical Stokes matrices at eps = 0 and the diagonal
equivalence of Stokes collections.

Conventions:
  - The base point for the unfolded data is the midpoint x = 0 of the segment
    joining the two singular points; sector V lies on the side of the segment
    reached by turning the segment direction counterclockwise.
  - Eigensolutions are normalized against Y_j = (x - s)^mu_j^+ (x + s)^mu_j^-
    with the logarithms continued from the U region (beyond +s), so that
    S^U and S^L are unipotent and S^G carries the wild diagonal part.
  - The formal monodromy exp(2 pi i nu) is removed from S^L.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ConfigInvalid,
    LoopTooClose,
    OrderingTie,
    ResonantMonodromy,
    StructureViolation,
    ToleranceNotMet,
    ZeroPatternMismatch,
)
from .orbit import SectorParameter

RTOL = 1e-12
ATOL = 1e-14
DEFECT_COND = 1e6
DEFECT_GAP = 1e-8
LOOP_GROWTH_MAX = 1e5


def _as_sector(eps_hat) -> SectorParameter:
    if isinstance(eps_hat, SectorParameter):
        return eps_hat
    return SectorParameter.from_eps(complex(eps_hat))


# ---------------------------------------------------------------------------
# systems

@dataclass(frozen=True)
class LinearUnfolding:
    """P_eps(x) y' = A_eps(x) y with P_eps = x^{k+1} - sum eps_j x^j.

    A_eps(x) = sum_j diag(D[j]) x^j + P_eps(x) B(x); D has k+1 entries, B is a
    list of matrix coefficients of B(x) by degree.
    """

    k: int
    D: tuple
    B: tuple
    eps: tuple

    def __post_init__(self):
        D = tuple(np.asarray(d, dtype=complex).ravel() for d in self.D)
        n = D[0].size
        B = tuple(np.asarray(b, dtype=complex).reshape(n, n) for b in self.B) or (np.zeros((n, n), complex),)
        eps = tuple(complex(e) for e in np.atleast_1d(self.eps))
        if len(D) != self.k + 1 or len(eps) != self.k:
            raise ConfigInvalid("need k+1 diagonal blocks and k parameters", k=self.k)
        if any(d.size != n for d in D):
            raise ConfigInvalid("diagonal blocks differ in size")
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "eps", eps)

    @property
    def n(self) -> int:
        return self.D[0].size

    @property
    def lambdas(self) -> np.ndarray:
        return self.D[0]

    @property
    def nus(self) -> np.ndarray:
        return self.D[1] if self.k == 1 else np.zeros(self.n, complex)

    @classmethod
    def normal_form(cls, lambdas, nus=None, eps=0.0) -> "LinearUnfolding":
        lam = np.asarray(lambdas, dtype=complex)
        nu = np.zeros_like(lam) if nus is None else np.asarray(nus, dtype=complex)
        return cls(1, (lam, nu), (), (eps,))

    @classmethod
    def euler_companion(cls, eps=0.0) -> "LinearUnfolding":
        """(x^2 - eps) y' = y - (x^2 - eps) written for the vector (y, 1)."""
        return cls(1, ((1, 0), (0, 0)), ([[0, -1], [0, 0]],), (eps,))

    @classmethod
    def from_matrix_coeffs(cls, k: int, eps, A: Sequence) -> "LinearUnfolding":
        """Split A_eps(x) = R(x) + P_eps(x) B(x); R must be diagonal."""
        mats = [np.asarray(a, dtype=complex) for a in A]
        n = mats[0].shape[0]
        eps_t = tuple(complex(e) for e in np.atleast_1d(eps))
        P = cls._P_coeffs_static(k, eps_t)  # descending
        rem = [m.copy() for m in mats]
        deg = len(rem) - 1
        quot = [np.zeros((n, n), complex) for _ in range(max(deg - k, 0))]
        for d in range(deg, k, -1):
            q = rem[d].copy()
            quot[d - k - 1] = q
            for i, p in enumerate(P):
                rem[d - i] = rem[d - i] - p * q
        R = rem[: k + 1] + [np.zeros((n, n), complex)] * max(0, k + 1 - len(rem))
        for r in R:
            if np.max(np.abs(r - np.diag(np.diag(r)))) > 1e-13 * max(1.0, np.max(np.abs(r))):
                raise ConfigInvalid("normal-form part A mod P is not diagonal")
        return cls(k, tuple(np.diag(r) for r in R), tuple(quot), eps_t)

    @staticmethod
    def _P_coeffs_static(k, eps):
        c = np.zeros(k + 2, complex)
        c[0] = 1.0
        for j, e in enumerate(eps):
            c[k + 1 - j] = -e
        return c

    def P_coeffs(self) -> np.ndarray:
        return self._P_coeffs_static(self.k, self.eps)

    def with_eps(self, eps) -> "LinearUnfolding":
        return LinearUnfolding(self.k, self.D, self.B, tuple(np.atleast_1d(eps)))

    def gauge(self, d) -> "LinearUnfolding":
        """System for z with y = diag(d) z."""
        d = np.asarray(d, dtype=complex)
        B = tuple((b * d[None, :]) / d[:, None] for b in self.B)
        return LinearUnfolding(self.k, self.D, B, self.eps)

    def P(self, x):
        return np.polyval(self.P_coeffs(), x)

    def dP(self, x):
        return np.polyval(np.polyder(self.P_coeffs()), x)

    def A_coeffs(self) -> list:
        """Matrix coefficients of A_eps by degree."""
        n = self.n
        Pa = self.P_coeffs()[::-1]
        deg = max(self.k, self.k + 1 + len(self.B) - 1)
        out = [np.zeros((n, n), complex) for _ in range(deg + 1)]
        for j, d in enumerate(self.D):
            out[j] += np.diag(d)
        for i, b in enumerate(self.B):
            for j, p in enumerate(Pa):
                out[i + j] += p * b
        return out

    def A(self, x) -> np.ndarray:
        out = np.zeros((self.n, self.n), complex)
        for c in reversed(self.A_coeffs()):
            out = out * x + c
        return out

    def singular_points(self) -> np.ndarray:
        return np.roots(self.P_coeffs())

    def residue(self, x0) -> np.ndarray:
        return self.A(x0) / self.dP(x0)

    def to_json(self) -> dict:
        cplx = lambda a: [[float(np.real(v)), float(np.imag(v))] for v in np.ravel(a)]
        return {"k": self.k, "n": self.n, "eps": cplx(self.eps),
                "A": [[cplx(row) for row in a] for a in self.A_coeffs()]}


# ---------------------------------------------------------------------------
# exponents

@dataclass(frozen=True)
class ExponentSet:
    mu_plus: np.ndarray
    mu_minus: np.ndarray
    sqrt_eps: complex
    consistency: float


def mu_exponents(eps_hat, lambdas, nus) -> ExponentSet:
    e = _as_sector(eps_hat)
    if e.r == 0:
        raise ConfigInvalid("exponents need eps != 0")
    s = e.sqrt
    lam = np.asarray(lambdas, dtype=complex)
    nu = np.asarray(nus, dtype=complex)
    mp = (lam + nu * s) / (2 * s)
    mm = -(lam - nu * s) / (2 * s)
    resid = max(np.max(np.abs(s * (mp - mm) - lam)), np.max(np.abs(mp + mm - nu)))
    return ExponentSet(mp, mm, s, float(resid))


def _exponents(system: LinearUnfolding, e: SectorParameter) -> ExponentSet:
    return mu_exponents(e, system.lambdas, system.nus)


# ---------------------------------------------------------------------------
# monodromy by loop integration

@dataclass
class MonodromyResult:
    matrix: np.ndarray
    base: complex
    center: complex
    radius: float
    point: complex
    eigenvalues: np.ndarray
    det_residual: float
    tol_residual: float


def _transport(system, path, dpath, t0, t1, Y0, rtol=RTOL):
    n = system.n
    Ac = system.A_coeffs()
    Pc = system.P_coeffs()

    def rhs(t, y):
        x = path(t)
        A = np.zeros((n, n), complex)
        for c in reversed(Ac):
            A = A * x + c
        Y = y.reshape(n, -1)
        return (dpath(t) / np.polyval(Pc, x) * (A @ Y)).ravel()

    sol = solve_ivp(rhs, (t0, t1), np.asarray(Y0, complex).ravel(), method="DOP853",
                    rtol=rtol, atol=ATOL)
    if not sol.success:
        raise ToleranceNotMet(sol.message)
    return sol.y[:, -1].reshape(n, -1)


def _circle_transport(system, center, radius, a0, a1, Y0, rtol=RTOL):
    path = lambda t: center + radius * np.exp(1j * t)
    dpath = lambda t: 1j * radius * np.exp(1j * t)
    return _transport(system, path, dpath, a0, a1, Y0, rtol)


def _segment_transport(system, x0, x1, Y0, rtol=RTOL):
    path = lambda t: x0 + (x1 - x0) * t
    dpath = lambda t: (x1 - x0)
    return _transport(system, path, dpath, 0.0, 1.0, Y0, rtol)


def _pick_point(system, around):
    pts = system.singular_points()
    if isinstance(around, str):
        if system.k != 1:
            raise ConfigInvalid("'+'/'-' selection needs k = 1")
        s = system.eps[0] ** 0.5 if not isinstance(system.eps[0], SectorParameter) else system.eps[0].sqrt
        target = s if around == "+" else -s
    else:
        target = complex(around)
    return pts[np.argmin(np.abs(pts - target))]


def monodromy(system: LinearUnfolding, around="+", radius: float | None = None,
              center: complex | None = None, start_angle: float = 0.0,
              margin: float = 0.05, rtol: float = RTOL, check: bool = True) -> MonodromyResult:
    """Counterclockwise monodromy along the circle |x - center| = radius.

    The base point is center + radius*exp(i start_angle).  The circle must
    enclose the chosen singular point and no other.
    """
    pts = system.singular_points()
    p = _pick_point(system, around)
    others = [q for q in pts if abs(q - p) > 1e-14]
    c = p if center is None else complex(center)
    if radius is None:
        radius = 0.5 * min(abs(q - p) for q in others) if others else 0.5
    dists = [abs(q - c) for q in pts]
    inside = [q for q, d in zip(pts, dists) if d < radius]
    if abs(p - c) > radius * (1 - margin) or len(inside) != 1:
        raise LoopTooClose("loop must enclose exactly one singular point with margin",
                           point=p, radius=radius)
    if any(abs(d - radius) < margin * radius for d in dists):
        raise LoopTooClose("loop passes too close to a singular point", radius=radius)
    n = system.n
    M = _circle_transport(system, c, radius, start_angle, start_angle + 2 * math.pi, np.eye(n), rtol)
    res = system.residue(p)
    det_pred = cmath.exp(2j * math.pi * np.trace(res))
    det_res = abs(np.linalg.det(M) - det_pred) / max(1.0, abs(det_pred))
    tol_res = 0.0
    if check:
        M2 = _circle_transport(system, c, radius, start_angle, start_angle + 2 * math.pi, np.eye(n), rtol * 100)
        tol_res = float(np.max(np.abs(M - M2)) / max(1.0, np.max(np.abs(M))))
        if det_res > 1e-6:
            raise ToleranceNotMet("det M disagrees with exp(2 pi i tr Res)", residual=det_res)
    return MonodromyResult(M, c + radius * cmath.exp(1j * start_angle), c, radius, p,
                           np.linalg.eigvals(M), float(det_res), tol_res)


def eigenvector_condition(M: np.ndarray) -> float:
    w, V = np.linalg.eig(M)
    V = V / np.linalg.norm(V, axis=0)
    return float(np.linalg.cond(V))


# ---------------------------------------------------------------------------
# eigensolutions

@dataclass
class EigenBasis:
    point: complex
    base: complex
    vectors: np.ndarray
    multipliers: np.ndarray
    exponents: np.ndarray
    fitted: np.ndarray
    condition: float


def eigensolution_basis(system: LinearUnfolding, around="+", radius: float | None = None,
                        fit_radii: Sequence[float] = tuple(0.4 * 0.7 ** i for i in range(10))) -> EigenBasis:
    """Eigenvectors of the numerical monodromy, ordered and normalized by the residue.

    Each eigensolution is transported radially toward the point and its
    exponent fitted from log y = mu log r + c0 + c1 r + c2 r^2 + c3 r^3.
    """
    mono = monodromy(system, around, radius)
    M = mono.matrix
    w, V = np.linalg.eig(M)
    V = V / np.linalg.norm(V, axis=0)
    cond = float(np.linalg.cond(V))
    gaps = [abs(w[i] - w[j]) for i in range(len(w)) for j in range(i + 1, len(w))]
    if cond > DEFECT_COND or (gaps and min(gaps) < DEFECT_GAP):
        raise ResonantMonodromy("monodromy has clustered or defective eigenvalues",
                                condition=cond, gap=min(gaps) if gaps else None)
    p = mono.point
    res = system.residue(p)
    rw, rV = np.linalg.eig(res)
    order = []
    for j in range(len(rw)):
        target = cmath.exp(2j * math.pi * rw[j])
        cand = [i for i in range(len(w)) if i not in order]
        order.append(min(cand, key=lambda i: abs(w[i] - target)))
    V = V[:, order]
    w = w[order]
    base = mono.base
    direction = (base - p) / abs(base - p)
    rad = abs(base - p)
    fitted = np.zeros(len(rw), complex)
    Y = V.copy()
    x_prev = base
    logs = []
    for f in fit_radii:
        x = p + direction * rad * f
        Y = _segment_transport(system, x_prev, x, Y)
        x_prev = x
        coeff = np.linalg.solve(rV, Y)
        logs.append(np.diag(coeff))
    logs = np.array(logs)
    lr = np.log(rad * np.asarray(fit_radii))
    for j in range(len(rw)):
        lg = np.log(logs[:, j])
        lg = np.real(lg) + 1j * np.unwrap(np.imag(lg))
        rr = rad * np.asarray(fit_radii)
        G = np.vstack([lr, np.ones_like(lr), rr, rr ** 2, rr ** 3]).T
        coef, *_ = np.linalg.lstsq(G, lg, rcond=None)
        fitted[j] = coef[0]
        scale = np.exp(coef[1])
        V[:, j] = V[:, j] / scale
    return EigenBasis(p, base, V, w, rw, fitted, cond)


# ---------------------------------------------------------------------------
# Frobenius eigensolutions at +-sqrt(eps)

def _shift_coeffs(coeffs, r):
    """Taylor coefficients at r of a matrix polynomial given by degree."""
    d = len(coeffs) - 1
    out = []
    for l in range(d + 1):
        acc = np.zeros_like(coeffs[0])
        for m in range(l, d + 1):
            acc = acc + math.comb(m, l) * coeffs[m] * r ** (m - l)
        out.append(acc)
    return out


def frobenius_column(system, r, other, j, tau, max_terms=20000):
    """Sum of t^{-mu} gamma_j(t) at x = r + (r - other) tau, with h_0 = e_j.

    Uses tau(tau+1) Y_tau = (A(r + delta tau)/delta) Y with delta = r - other.
    Terms grow like 2^|mu_i - mu_j| before cancelling, so the sum runs in
    mpmath with the working precision raised accordingly.
    """
    delta = r - other
    Ac = _shift_coeffs(system.A_coeffs(), r)
    At = [a * delta ** (l - 1) for l, a in enumerate(Ac)]
    n = system.n
    diag0 = np.diag(At[0])
    spread = float(np.max(np.abs(diag0 - diag0[j])))
    dps = int(30 + spread * math.log10(2.0) * 1.2)
    with mpmath.workdps(dps):
        mpc = mpmath.mpc
        Am = [[[mpc(complex(a[i, k])) for k in range(n)] for i in range(n)] for a in At]
        d0 = [mpc(complex(v)) for v in diag0]
        mu = d0[j]
        tau_m = mpc(complex(tau))
        h0 = [mpc(1) if i == j else mpc(0) for i in range(n)]
        hist = [h0]
        total = list(h0)
        pw = mpc(1)
        small = 0
        big = mpmath.mpf(1)
        eps_stop = mpmath.mpf(10) ** (-(dps - 5))
        for m in range(1, max_terms):
            rhs = [-(mu + m - 1) * hist[-1][i] for i in range(n)]
            for l in range(1, min(m, len(At) - 1) + 1):
                hl = hist[-l]
                Al = Am[l]
                for i in range(n):
                    rhs[i] += mpmath.fsum(Al[i][k] * hl[k] for k in range(n))
            scale = max([mpmath.mpf(1)] + [abs(v) for v in rhs])
            h = [mpc(0)] * n
            for i in range(n):
                lhs = mu + m - d0[i]
                if abs(lhs) < 1e-13:
                    if abs(rhs[i]) > 1e-12 * scale:
                        raise ResonantMonodromy("logarithmic term at a resonant exponent", m=m, j=j, i=i)
                else:
                    h[i] = rhs[i] / lhs
            hist.append(h)
            if len(hist) > len(At) + 1:
                hist.pop(0)
            pw = pw * tau_m
            tn = mpmath.mpf(0)
            for i in range(n):
                term = h[i] * pw
                total[i] += term
                tn = max(tn, abs(term))
            big = max(big, max(abs(v) for v in total))
            if tn < eps_stop * big:
                small += 1
                if small >= 3:
                    return np.array([complex(v) for v in total]), complex(mu)
            else:
                small = 0
    raise ToleranceNotMet("Frobenius series did not converge", j=j)


@dataclass
class FrobeniusBases:
    """Eigensolution bases at the midpoint, columns normalized to unit norm.

    gamma_j = exp(logscale_j) * E[:, j].
    """

    E_plus: np.ndarray
    log_plus: np.ndarray
    E_minus: np.ndarray
    log_minus: np.ndarray
    exponents: ExponentSet
    base: complex


def frobenius_bases(system: LinearUnfolding, eps_hat, side: int = +1) -> FrobeniusBases:
    """Eigensolutions at +s and -s evaluated at x = 0.

    side = +1 uses the V branch (arg(x - s) = arg s + pi on the segment),
    side = -1 the V' branch (arg s - pi).
    """
    if system.k != 1:
        raise ConfigInvalid("Frobenius bases are implemented for k = 1")
    e = _as_sector(eps_hat)
    s = e.sqrt
    ex = _exponents(system, e)
    n = system.n
    argS = e.theta / 2
    ln_s = math.log(abs(s))
    ln_2s = math.log(2 * abs(s))
    # logs on the midpoint side of the segment
    log_x_minus_s_mid = ln_s + 1j * (argS + side * math.pi)
    log_x_plus_s_mid = ln_s + 1j * argS
    log_2s = ln_2s + 1j * argS
    log_m2s = ln_2s + 1j * (argS + side * math.pi)
    Ep = np.zeros((n, n), complex)
    Em = np.zeros((n, n), complex)
    Lp = np.zeros(n, complex)
    Lm = np.zeros(n, complex)
    for j in range(n):
        v, mu = frobenius_column(system, s, -s, j, -0.5)
        nv = np.linalg.norm(v)
        Ep[:, j] = v / nv
        Lp[j] = mu * log_x_minus_s_mid + ex.mu_minus[j] * log_2s + math.log(nv)
        v, mu = frobenius_column(system, -s, s, j, -0.5)
        nv = np.linalg.norm(v)
        Em[:, j] = v / nv
        Lm[j] = mu * log_x_plus_s_mid + ex.mu_plus[j] * log_m2s + math.log(nv)
    return FrobeniusBases(Ep, Lp, Em, Lm, ex, 0j)


# ---------------------------------------------------------------------------
# flags

@dataclass
class FlagData:
    ordering: list
    minors: list
    T: np.ndarray
    L: np.ndarray
    bases: FrobeniusBases


def _check_order(ex: ExponentSet, tol: float):
    re_p = np.real(ex.mu_plus)
    re_m = np.real(ex.mu_minus)
    order = list(np.argsort(-re_p, kind="stable"))
    for a, b in zip(order, order[1:]):
        if re_p[a] - re_p[b] < tol:
            raise OrderingTie("two exponents at +sqrt(eps) have equal real parts", i=int(a), j=int(b))
        if re_m[b] - re_m[a] < tol:
            raise OrderingTie("flatness orders at the two points are not opposite", i=int(a), j=int(b))
    if order != list(range(len(order))):
        raise OrderingTie("system is not ordered by decreasing Re(lambda)", order=order)
    return order


def _unit_triangular_from(C):
    """Unit upper T with C T lower triangular (C = E_minus^{-1} E_plus)."""
    n = C.shape[0]
    T = np.eye(n, dtype=complex)
    for j in range(1, n):
        T[:j, j] = np.linalg.solve(C[:j, :j], -C[:j, j])
    return T


def flags(system: LinearUnfolding, eps_hat, tol: float = 1e-9) -> FlagData:
    """Flatness flags at +-sqrt(eps) and their transversality minors.

    minors[j-1] = det[gamma_1^+ .. gamma_j^+, gamma_{j+1}^- .. gamma_n^-] with
    unit columns, for j = 1..n-1.
    """
    fb = frobenius_bases(system, eps_hat)
    order = _check_order(fb.exponents, tol)
    n = system.n
    minors = []
    for j in range(1, n):
        Mx = np.hstack([fb.E_plus[:, :j], fb.E_minus[:, j:]])
        minors.append(complex(np.linalg.det(Mx)))
    C = np.linalg.solve(fb.E_minus, fb.E_plus)
    T = _unit_triangular_from(C)
    L = C @ T
    return FlagData(order, minors, T, L, fb)


# ---------------------------------------------------------------------------
# Stokes collections

@dataclass
class StokesCollection:
    S_U: np.ndarray
    S_L: np.ndarray
    S_G: np.ndarray
    eps_hat: SectorParameter | None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        cm = lambda M: [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(M)]
        out = {"S_U": cm(self.S_U), "S_L": cm(self.S_L), "S_G": cm(self.S_G), "meta": self.meta}
        if self.eps_hat is not None:
            out["eps_hat"] = {"r": self.eps_hat.r, "theta": self.eps_hat.theta}
        return out


def _structure_error(S, kind):
    n = S.shape[0]
    iu = np.triu_indices(n, 1)
    il = np.tril_indices(n, -1)
    if kind == "U":
        off = np.abs(S[il])
    elif kind == "L":
        off = np.abs(S[iu])
    else:
        off = np.concatenate([np.abs(S[iu]), np.abs(S[il])])
    return float(off.max()) if off.size else 0.0


def _loop_growth(ex: ExponentSet) -> float:
    dm = np.real(ex.mu_minus)
    return float(math.log(3.0) * (dm.max() - dm.min()) + 2 * math.pi * np.max(np.abs(np.imag(ex.mu_plus))))


def stokes_collection(system: LinearUnfolding, eps_hat, route: str = "auto",
                      tol: float = 1e-6, check: bool = True) -> StokesCollection:
    """Unfolded Stokes matrices over V^U, V^L, V^G at the midpoint base.

    route "loop" computes the monodromies around +-s by integration along
    circles through x = 0, "frobenius" rebuilds them from the eigenbases.
    "auto" picks the loop when its growth factor is moderate.
    """
    if system.k != 1 or system.n > 4:
        raise ConfigInvalid("Stokes collections need k = 1 and n <= 4")
    e = _as_sector(eps_hat)
    sysx = system.with_eps(e.eps)
    fl = flags(sysx, e)
    fb = fl.bases
    ex = fb.exponents
    s = e.sqrt
    n = system.n
    # W~ = E~^+ T~ ; W = W~ diag(exp(log_plus))
    Wt = fb.E_plus @ fl.T
    if route == "auto":
        route = "loop" if _loop_growth(ex) < math.log(LOOP_GROWTH_MAX) else "frobenius"
    if route == "loop":
        a0 = math.atan2(-s.imag, -s.real)
        Mp = _circle_transport(sysx, s, abs(s), a0, a0 + 2 * math.pi, np.eye(n))
        Mm = _circle_transport(sysx, -s, abs(s), a0 + math.pi, a0 + 3 * math.pi, np.eye(n))
    else:
        Lp = np.exp(2j * math.pi * ex.mu_plus)
        Lm = np.exp(2j * math.pi * ex.mu_minus)
        Mp = fb.E_plus @ np.diag(Lp) @ np.linalg.inv(fb.E_plus)
        Mm = fb.E_minus @ np.diag(Lm) @ np.linalg.inv(fb.E_minus)
    lg = fb.log_plus
    KU = np.linalg.solve(Wt, np.linalg.solve(Mp, Wt))
    KL = np.linalg.solve(Wt, Mm @ Wt)
    SU = np.zeros((n, n), complex)
    SL = np.zeros((n, n), complex)
    for i in range(n):
        for j in range(n):
            f = np.exp(2j * math.pi * ex.mu_plus[i] + lg[j] - lg[i]) if KU[i, j] != 0 else 0.0
            SU[i, j] = KU[i, j] * f if KU[i, j] != 0 else 0.0
            g = 2j * math.pi * (ex.mu_plus[i] - (ex.mu_plus[j] + ex.mu_minus[j])) + lg[j] - lg[i]
            SL[i, j] = KL[i, j] * np.exp(g) if KL[i, j] != 0 else 0.0
    # V' basis: same lines at the midpoint, normalized with the lower branch
    fb2 = frobenius_bases(sysx, e, side=-1)
    C2 = np.linalg.solve(fb2.E_minus, fb2.E_plus)
    Wt2 = fb2.E_plus @ _unit_triangular_from(C2)
    K = np.linalg.solve(Wt2, Wt)
    SG = np.zeros((n, n), complex)
    for i in range(n):
        for j in range(n):
            SG[i, j] = K[i, j] * np.exp(fb.log_plus[j] - fb2.log_plus[i]) if K[i, j] != 0 else 0.0
    errs = {"U": _structure_error(SU, "U"), "L": _structure_error(SL, "L"), "G": _structure_error(SG, "G"),
            "diag_U": float(np.max(np.abs(np.diag(SU) - 1))), "diag_L": float(np.max(np.abs(np.diag(SL) - 1)))}
    meta = {"route": route, "structure_error": errs, "minors": [[m.real, m.imag] for m in fl.minors],
            "normalization": "c_j = 1 against (x-s)^mu+ (x+s)^mu- continued from the U region",
            "base_point": [0.0, 0.0], "sqrt_eps": [s.real, s.imag]}
    if check and max(errs.values()) > tol * max(1.0, np.max(np.abs(SU)), np.max(np.abs(SL))):
        raise StructureViolation("Stokes matrices off their triangular structure", errors=errs,
                                 S_U=SU, S_L=SL)
    return StokesCollection(SU, SL, SG, e, meta)


# ---------------------------------------------------------------------------
# classical Stokes matrices at eps = 0

def formal_solution(system: LinearUnfolding, order: int = 40) -> list:
    """H_m of H(x) x^{D1} exp(-D0/x) solving x^2 Y' = A Y, H_0 = I."""
    if system.k != 1:
        raise ConfigInvalid("formal solution implemented for k = 1")
    s0 = system.with_eps(0.0)
    Ac = s0.A_coeffs()
    n = system.n
    lam = s0.D[0]
    D1 = np.diag(s0.D[1])
    dl = lam[None, :] - lam[:, None]  # lambda_j - lambda_i
    off = ~np.eye(n, dtype=bool)
    if n > 1 and np.min(np.abs(dl[off])) < 1e-12:
        raise OrderingTie("repeated eigenvalue of D0")
    A = lambda l: Ac[l] if l < len(Ac) else np.zeros((n, n), complex)
    H = [np.eye(n, dtype=complex)]
    for m in range(1, order + 2):
        if m >= 2:
            acc = sum((A(l) @ H[m - l] for l in range(2, m + 1)), np.zeros((n, n), complex))
            H[m - 1][np.diag_indices(n)] = np.diag(acc) / (m - 1)
        rhs = -(m - 1) * H[m - 1] - H[m - 1] @ D1 + D1 @ H[m - 1]
        for l in range(2, m + 1):
            rhs = rhs + A(l) @ H[m - l]
        Hm = np.zeros((n, n), complex)
        Hm[off] = (rhs / np.where(off, dl, 1))[off]
        H.append(Hm)
    return H[: order + 1]


def _asymptotic_data(H, x, lam, nu, log_x):
    """Optimally truncated columns of H(x) and their log scales."""
    n = len(lam)
    cols = np.zeros((n, n), complex)
    for j in range(n):
        acc = np.zeros(n, complex)
        prev = np.inf
        pw = 1.0 + 0j
        for m, Hm in enumerate(H):
            term = Hm[:, j] * pw
            tn = np.max(np.abs(term))
            if m > 2 and tn > prev:
                break
            acc = acc + term
            prev = tn
            pw = pw * x
        cols[:, j] = acc
    logs = nu * log_x - lam / x
    return cols, logs


def _integrate_cols(system, pieces, Y0, rtol=RTOL):
    Y = Y0
    for kind, args in pieces:
        if kind == "seg":
            Y = _segment_transport(system, args[0], args[1], Y, rtol)
        else:
            Y = _circle_transport(system, 0j, args[0], args[1], args[2], Y, rtol)
    return Y


def _normalize(Y, logs):
    nv = np.linalg.norm(Y, axis=0)
    return Y / nv, logs + np.log(nv)


def classical_stokes(system: LinearUnfolding, x_star: float = 0.3, order: int = 60,
                     check_tol: float = 1e-8) -> StokesCollection:
    """Stokes matrices at eps = 0 from sectoral solutions.

    Recessive flags along arg x = 0 and arg x = +-pi are seeded at small |x|
    from the optimally truncated formal solution and integrated outward,
    then carried to x_star (through the upper half plane for V, the lower
    for V').  S^L comes from the loop monodromy around 0.
    """
    s0 = system.with_eps(0.0)
    n = s0.n
    lam = s0.D[0]
    nu = s0.D[1]
    if n > 1:
        ex_gap = min(abs(lam[i] - lam[j]) for i in range(n) for j in range(i + 1, n))
        re = np.real(lam)
        if any(re[i] - re[i + 1] <= 1e-12 for i in range(n - 1)):
            raise OrderingTie("need Re(lambda_1) > ... > Re(lambda_n)")
    else:
        ex_gap = 1.0
    x0 = min(ex_gap / 36.0, 0.05)
    H = formal_solution(s0, order)

    def build(rtol):
        colsR, logR = _asymptotic_data(H, x0, lam, nu, math.log(x0) + 0j)
        colsR, logR = _normalize(colsR, logR)
        ER = _integrate_cols(s0, [("seg", (x0, x_star))], colsR, rtol)
        ER, logR = _normalize(ER, logR)
        out = {"R": (ER, logR)}
        for tag, sgn in (("V", 1), ("Vp", -1)):
            colsL, logL = _asymptotic_data(H, -x0, lam, nu, math.log(x0) + 1j * sgn * math.pi)
            colsL, logL = _normalize(colsL, logL)
            EL = _integrate_cols(s0, [("seg", (-x0, -x_star)), ("arc", (x_star, sgn * math.pi, 0.0))], colsL, rtol)
            EL, logL = _normalize(EL, logL)
            out[tag] = (EL, logL)
        return out

    Mloop = _circle_transport(s0, 0j, x_star, 0.0, 2 * math.pi, np.eye(n))

    def stokes_from(data):
        ER, logR = data["R"]
        T = _unit_triangular_from(np.linalg.solve(data["V"][0], ER))
        Tp = _unit_triangular_from(np.linalg.solve(data["Vp"][0], ER))
        Wt = ER @ T
        Wtp = ER @ Tp
        K = np.linalg.solve(Wtp, Wt)
        KL = np.linalg.solve(Wtp, Mloop @ Wt)
        f = np.exp(logR[None, :] - logR[:, None])
        return K * f, KL * f * np.exp(-2j * math.pi * nu)[None, :]

    SU, SL = stokes_from(build(RTOL))
    SU2, SL2 = stokes_from(build(RTOL * 100))
    rich = float(max(np.max(np.abs(SU - SU2)), np.max(np.abs(SL - SL2))))
    if rich > check_tol * max(1.0, np.max(np.abs(SU))):
        raise ToleranceNotMet("Stokes matrices not stable under tolerance change", residual=rich)
    errs = {"U": _structure_error(SU, "U"), "L": _structure_error(SL, "L"),
            "diag_U": float(np.max(np.abs(np.diag(SU) - 1))), "diag_L": float(np.max(np.abs(np.diag(SL) - 1)))}
    meta = {"x0": x0, "x_star": x_star, "tolerance_check": rich, "structure_error": errs}
    return StokesCollection(SU, SL, np.eye(n, dtype=complex), None, meta)


def stokes_limit(system: LinearUnfolding, eps0: float = 0.01, levels: int = 8,
                 avoid: float = 0.1) -> dict:
    """S^U_eps along a dyadic sequence eps0 * 2^-m, each nudged off resonance.

    A level is nudged (eps multiplied by at most 1.2) when some difference of
    exponents at +s lies within `avoid` of an integer.
    """
    lam = system.lambdas
    nu = system.nus
    seq = []
    for m in range(levels + 1):
        eps = eps0 * 2.0 ** (-m)
        for _ in range(40):
            ex = mu_exponents(eps, lam, nu)
            d = [ex.mu_plus[i] - ex.mu_plus[j] for i in range(len(lam)) for j in range(len(lam)) if i != j]
            if all(abs(x.real - round(x.real)) > avoid or abs(x.imag) > avoid for x in d):
                break
            eps *= 1.005
        coll = stokes_collection(system, eps, route="frobenius")
        seq.append((eps, coll))
    classical = classical_stokes(system)
    diffs = [float(np.max(np.abs(c.S_U - classical.S_U))) for _, c in seq]
    cauchy = [float(np.max(np.abs(seq[i + 1][1].S_U - seq[i][1].S_U))) for i in range(len(seq) - 1)]
    diffs_L = [float(np.max(np.abs(c.S_L - classical.S_L))) for _, c in seq]
    return {"eps": [e for e, _ in seq], "collections": [c for _, c in seq], "classical": classical,
            "dist_U": diffs, "dist_L": diffs_L, "cauchy_U": cauchy}


# ---------------------------------------------------------------------------
# equivalence under diagonal action

@dataclass
class EquivalenceVerdict:
    equivalent: bool
    D: np.ndarray | None
    Dprime: np.ndarray | None
    residual: float
    witness: dict | None


def _cycle_invariants(pairs, n, edges):
    """Invariants prod S_e^{+-1} along fundamental cycles of the bipartite graph."""
    # rows 0..n-1, cols n..2n-1; spanning tree by BFS
    adj = {v: [] for v in range(2 * n)}
    for idx, (m, i, j) in enumerate(edges):
        adj[i].append((n + j, idx))
        adj[n + j].append((i, idx))
    parent = {}
    seen = set()
    tree = set()
    for root in range(2 * n):
        if root in seen:
            continue
        seen.add(root)
        queue = [root]
        parent[root] = None
        while queue:
            v = queue.pop(0)
            for w, idx in adj[v]:
                if w not in seen:
                    seen.add(w)
                    parent[w] = (v, idx)
                    tree.add(idx)
                    queue.append(w)
    return tree, parent


def equivalence_compare(c1: StokesCollection, c2: StokesCollection, tol: float = 1e-8) -> EquivalenceVerdict:
    """Search diagonal D, D' with S^U_1 = D S^U_2 D' and S^L_1 = D S^L_2 D'.

    The nonzero entries form a bipartite graph between row and column
    indices; D and D' are propagated along a spanning tree and every other
    entry is an exact consistency check (cycle invariant).
    """
    n = c1.S_U.shape[0]
    if c2.S_U.shape[0] != n:
        raise ZeroPatternMismatch("dimensions differ")
    mats1 = [np.asarray(c1.S_U, complex), np.asarray(c1.S_L, complex)]
    mats2 = [np.asarray(c2.S_U, complex), np.asarray(c2.S_L, complex)]
    scale = max(1.0, max(np.max(np.abs(m)) for m in mats1 + mats2))
    edges = []
    for m, (A, B) in enumerate(zip(mats1, mats2)):
        for i in range(n):
            for j in range(n):
                za = abs(A[i, j]) <= tol * scale
                zb = abs(B[i, j]) <= tol * scale
                if za != zb:
                    raise ZeroPatternMismatch("zero patterns differ", matrix="UL"[m], i=i, j=j)
                if not za:
                    edges.append((m, i, j))
    ratio = {idx: mats1[m][i, j] / mats2[m][i, j] for idx, (m, i, j) in enumerate(edges)}
    tree, parent = _cycle_invariants(None, n, edges)
    val = {}
    for v in range(2 * n):
        chain = []
        w = v
        while parent.get(w) is not None:
            chain.append(w)
            w = parent[w][0]
        if w not in val:
            val[w] = 1.0 + 0j
        for u in reversed(chain):
            p, idx = parent[u]
            # ratio = d_i d'_j
            val[u] = ratio[idx] / val[p]
    D = np.array([val.get(i, 1.0) for i in range(n)], complex)
    Dp = np.array([val.get(n + j, 1.0) for j in range(n)], complex)
    worst = 0.0
    witness = None
    for idx, (m, i, j) in enumerate(edges):
        pred = D[i] * mats2[m][i, j] * Dp[j]
        err = abs(pred - mats1[m][i, j]) / max(abs(mats1[m][i, j]), 1e-300)
        if err > worst:
            worst = err
            if idx not in tree and err > tol:
                witness = {"matrix": "UL"[m], "entry": [i, j],
                           "invariant_1": _cycle_value(mats1, edges, tree, parent, idx, n),
                           "invariant_2": _cycle_value(mats2, edges, tree, parent, idx, n)}
    d0 = D[0]
    D = D / d0
    Dp = Dp * d0
    ok = worst <= tol
    return EquivalenceVerdict(bool(ok), D if ok else None, Dp if ok else None, float(worst), None if ok else witness)


def _cycle_value(mats, edges, tree, parent, idx, n):
    """prod of entries around the fundamental cycle closed by edge idx, alternating powers."""
    m, i, j = edges[idx]

    def path_to_root(v):
        out = [v]
        while parent.get(v) is not None:
            v = parent[v][0]
            out.append(v)
        return out

    a = path_to_root(i)
    b = path_to_root(n + j)
    common = next(x for x in a if x in b)
    seq = a[: a.index(common) + 1] + list(reversed(b[: b.index(common)]))
    val = 1.0 + 0j
    sign = 1
    # walk i -> ... -> n+j along tree edges, then close with edge idx (n+j -> i)
    for u, v in zip(seq, seq[1:]):
        e = parent[u][1] if parent.get(u) is not None and parent[u][0] == v else parent[v][1]
        mm, ii, jj = edges[e]
        val = val * mats[mm][ii, jj] ** sign
        sign = -sign
    val = val * mats[m][i, j] ** sign
    return [float(val.real), float(val.imag)]


# ---------------------------------------------------------------------------
# resonances

@dataclass
class ResonantValue:
    i: int
    j: int
    m: int
    point_x: complex
    eps: complex
    point: str
    distance: float


def resonance_detect(eps_hat, lambdas, nus=None, radius: float | None = None,
                     max_m: int = 200) -> list:
    """Parameters near eps_hat where two exponents at one singular point differ by m.

    At a root x_p of x^2 - eps the exponents are (lambda + nu x_p)/(2 x_p), so
    mu_i - mu_j = m exactly when x_p = (lambda_i - lambda_j)/(2m - (nu_i - nu_j)).
    The point is labelled '+' when x_p continues sqrt(eps_hat).
    """
    e = _as_sector(eps_hat)
    lam = np.asarray(lambdas, dtype=complex)
    nu = np.zeros_like(lam) if nus is None else np.asarray(nus, dtype=complex)
    eps = e.eps
    s_ref = e.sqrt
    if radius is None:
        radius = 0.5 * abs(eps)
    out = []
    n = len(lam)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dl = lam[i] - lam[j]
            dn = nu[i] - nu[j]
            for m in range(1, max_m + 1):
                if 2 * m == dn:
                    continue
                xp = dl / (2 * m - dn)
                ee = xp * xp
                dist = abs(ee - eps)
                if dist <= radius:
                    label = "+" if (xp * np.conj(s_ref)).real > 0 else "-"
                    out.append(ResonantValue(i, j, m, complex(xp), complex(ee), label, float(dist)))
    out.sort(key=lambda r: (r.distance, r.i, r.j))
    return out
