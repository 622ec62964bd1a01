"""Truncated power series and the formal computations built on them.

Coefficients may be Python complex/float numbers, :class:`fractions.Fraction`
or elements of an exact number field (``sympy`` algebraic-field elements).
Arithmetic only uses ``+``, ``-``, ``*`` and, where unavoidable, division by
a single coefficient, so exact modes stay exact.
"""

from __future__ import annotations

import cmath
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp

from .errors import (
    ConstantTermNonzero,
    MultiplierMismatch,
    NonInvertible,
    NotParabolic,
    NotRootOfUnity,
    TruncationTooShort,
)

DEFAULT_ORDER = 30


def _zero_like(c):
    return c - c


def _is_zero(c, tol=0.0):
    if isinstance(c, (int, Fraction)):
        return c == 0
    if isinstance(c, (float, complex, np.number)):
        return abs(c) <= tol
    if isinstance(c, sp.Basic):
        return sp.simplify(sp.expand(c)) == 0
    return c == _zero_like(c)


def _reciprocal(c):
    if isinstance(c, (int, Fraction)):
        return Fraction(1) / c
    try:
        return 1 / c
    except TypeError:
        return c ** -1


@dataclass(frozen=True)
class TruncatedSeries:
    """c_0 + c_1 z + ... + c_N z^N, everything above z^N discarded."""

    coeffs: tuple
    trunc_order: int

    def __post_init__(self):
        if self.trunc_order < 1:
            raise ValueError("trunc_order must be >= 1")
        cs = tuple(self.coeffs)[: self.trunc_order + 1]
        if not cs:
            cs = (0,)
        pad = _zero_like(cs[0])
        cs = cs + (pad,) * (self.trunc_order + 1 - len(cs))
        object.__setattr__(self, "coeffs", cs)

    # constructors
    @classmethod
    def from_coeffs(cls, coeffs, N=DEFAULT_ORDER):
        return cls(tuple(coeffs), N)

    @classmethod
    def identity(cls, N=DEFAULT_ORDER, one=1):
        return cls((_zero_like(one), one), N)

    @classmethod
    def constant(cls, c, N=DEFAULT_ORDER):
        return cls((c,), N)

    @property
    def N(self):
        return self.trunc_order

    def __getitem__(self, n):
        return self.coeffs[n] if 0 <= n <= self.trunc_order else _zero_like(self.coeffs[0])

    def __len__(self):
        return self.trunc_order + 1

    def _zero(self):
        return _zero_like(self.coeffs[0])

    def _common(self, other):
        return min(self.trunc_order, other.trunc_order)

    # ring operations
    def __add__(self, other):
        if not isinstance(other, TruncatedSeries):
            cs = list(self.coeffs)
            cs[0] = cs[0] + other
            return TruncatedSeries(tuple(cs), self.trunc_order)
        N = self._common(other)
        return TruncatedSeries(tuple(self[i] + other[i] for i in range(N + 1)), N)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(tuple(-c for c in self.coeffs), self.trunc_order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries(tuple(c * other for c in self.coeffs), self.trunc_order)
        N = self._common(other)
        a, b = self.coeffs, other.coeffs
        out = []
        for n in range(N + 1):
            s = a[0] * b[n]
            for i in range(1, n + 1):
                s = s + a[i] * b[n - i]
            out.append(s)
        return TruncatedSeries(tuple(out), N)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            return self.reciprocal() ** (-n)
        result = TruncatedSeries.constant(_one_like(self.coeffs[0]), self.trunc_order)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def reciprocal(self):
        """1/self; needs a nonzero constant term."""
        c0 = self.coeffs[0]
        if _is_zero(c0):
            raise NonInvertible("reciprocal of a series with zero constant term")
        inv0 = _reciprocal(c0)
        out = [inv0]
        for n in range(1, self.trunc_order + 1):
            s = self.coeffs[1] * out[n - 1]
            for i in range(2, n + 1):
                s = s + self.coeffs[i] * out[n - i]
            out.append(-s * inv0)
        return TruncatedSeries(tuple(out), self.trunc_order)

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return self * other.reciprocal()
        return self * _reciprocal(other)

    def compose(self, g: "TruncatedSeries") -> "TruncatedSeries":
        """self(g(z)); g must vanish at 0 so the result is exact to order N."""
        if not _is_zero(g.coeffs[0]):
            raise ConstantTermNonzero("compose(f, g) requires g(0) = 0")
        N = self._common(g)
        g = g.truncate(N)
        acc = TruncatedSeries.constant(self.coeffs[N], N)
        for c in reversed(self.coeffs[:N]):
            acc = acc * g + c
        return acc

    def invert(self) -> "TruncatedSeries":
        """Compositional inverse."""
        if not _is_zero(self.coeffs[0]):
            raise ConstantTermNonzero("invert requires f(0) = 0")
        c1 = self.coeffs[1]
        if _is_zero(c1):
            raise NonInvertible("invert requires f'(0) != 0")
        inv1 = _reciprocal(c1)
        N = self.trunc_order
        one = c1 * inv1
        ident = TruncatedSeries((self._zero(), one), N)
        nonlin = TruncatedSeries((self._zero(), self._zero()) + self.coeffs[2:], N)
        g = ident * inv1
        # each pass fixes one more coefficient of the inverse
        for _ in range(N):
            g = (ident - nonlin.compose(g)) * inv1
        return g

    def derivative(self) -> "TruncatedSeries":
        cs = [self.coeffs[i] * i for i in range(1, self.trunc_order + 1)]
        cs.append(self._zero())
        return TruncatedSeries(tuple(cs), self.trunc_order)

    def integral(self) -> "TruncatedSeries":
        """Antiderivative vanishing at 0 (top coefficient dropped)."""
        cs = [self._zero()] + [self.coeffs[i] * Fraction(1, i + 1) if _exact(self.coeffs[i]) else self.coeffs[i] / (i + 1)
                               for i in range(self.trunc_order)]
        return TruncatedSeries(tuple(cs), self.trunc_order)

    def truncate(self, N: int) -> "TruncatedSeries":
        return TruncatedSeries(self.coeffs[: N + 1], N)

    def conj(self) -> "TruncatedSeries":
        return TruncatedSeries(tuple(complex(c).conjugate() for c in self.coeffs), self.trunc_order)

    def shift_up(self, m: int) -> "TruncatedSeries":
        """z^m * self."""
        return TruncatedSeries((self._zero(),) * m + self.coeffs, self.trunc_order)

    # numerics
    def as_array(self) -> np.ndarray:
        return np.array([complex(c) for c in self.coeffs], dtype=complex)

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.as_array())

    def deriv_at(self, z):
        return np.polynomial.polynomial.polyval(z, self.derivative().as_array())

    def allclose(self, other, tol=1e-12) -> bool:
        N = self._common(other)
        return all(abs(complex(self[i]) - complex(other[i])) <= tol for i in range(N + 1))

    def max_abs_diff(self, other) -> float:
        N = self._common(other)
        return max(abs(complex(self[i]) - complex(other[i])) for i in range(N + 1))

    def max_rel_diff(self, other) -> float:
        """Coefficient-wise difference relative to max(1, |coefficient|)."""
        N = self._common(other)
        return max(abs(complex(self[i]) - complex(other[i])) / max(1.0, abs(complex(self[i])), abs(complex(other[i])))
                   for i in range(N + 1))

    # I/O
    def to_json(self) -> dict:
        return {"trunc_order": self.trunc_order,
                "coeffs": [[complex(c).real, complex(c).imag] for c in self.coeffs]}

    @classmethod
    def from_json(cls, data) -> "TruncatedSeries":
        if isinstance(data, str):
            data = json.loads(data)
        cs = [complex(re, im) for re, im in data["coeffs"]]
        return cls(tuple(cs), int(data["trunc_order"]))


def _exact(c) -> bool:
    return isinstance(c, (int, Fraction))


def _one_like(c):
    z = _zero_like(c)
    try:
        return z + 1
    except TypeError:
        return c ** 0


def log1p_series(u: TruncatedSeries) -> TruncatedSeries:
    """log(1 + u) for u(0) = 0."""
    if not _is_zero(u.coeffs[0]):
        raise ConstantTermNonzero("log1p needs u(0) = 0")
    return (u.derivative() * (u + 1).reciprocal()).integral()


def series_algebra(f: TruncatedSeries, g: TruncatedSeries | None, op: str) -> TruncatedSeries:
    if op == "add":
        return f + g
    if op == "mul":
        return f * g
    if op == "compose":
        return f.compose(g)
    if op == "invert":
        return f.invert()
    raise ValueError(f"unknown op {op!r}")


# ---------------------------------------------------------------------------
# formal vector fields and diffeomorphisms

@dataclass(frozen=True)
class FormalVectorField1D:
    """v(z) d/dz with v = numerator/denominator (polynomials, low degree first)."""

    numerator: tuple
    denominator: tuple = (1,)
    kind: str = "polynomial"
    k: int | None = None
    eps: tuple | None = None
    a: complex | None = None
    trunc_order: int = DEFAULT_ORDER

    @classmethod
    def polynomial(cls, coeffs, N=DEFAULT_ORDER):
        return cls(tuple(coeffs), (1,), "polynomial", trunc_order=N)

    @classmethod
    def rational_model(cls, k: int, eps: Sequence = (), a=0, N=DEFAULT_ORDER):
        """P_eps(z) / (1 + a z^k) with P_eps = z^{k+1} + eps_{k-1} z^{k-1} + ... + eps_0."""
        eps = tuple(eps) if len(eps) else (0,) * k
        if len(eps) != k:
            raise ValueError("eps must have length k")
        num = list(eps) + [0, 1]
        den = [1] + [0] * (k - 1) + [a]
        return cls(tuple(num), tuple(den), "rational-model", k, eps, a, N)

    @property
    def series(self) -> TruncatedSeries:
        N = self.trunc_order
        num = TruncatedSeries(self.numerator, N)
        den = TruncatedSeries(self.denominator, N)
        return num * den.reciprocal()

    def evaluate(self, z):
        P = np.polynomial.polynomial
        num = np.array([complex(c) for c in self.numerator])
        den = np.array([complex(c) for c in self.denominator])
        return P.polyval(z, num) / P.polyval(z, den)

    def compose_numeric(self, phi: np.ndarray) -> np.ndarray:
        """Coefficients of v(Phi(z)) truncated at len(phi) - 1; Phi(0) may be nonzero."""
        num = _poly_of_series(np.array([complex(c) for c in self.numerator]), phi)
        den = _poly_of_series(np.array([complex(c) for c in self.denominator]), phi)
        return _series_div(num, den)


def _mul_trunc(a, b):
    return np.convolve(a, b)[: len(a)]


def _poly_of_series(poly: np.ndarray, phi: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(phi)
    acc[0] = poly[-1]
    for c in poly[-2::-1]:
        acc = _mul_trunc(acc, phi)
        acc[0] += c
    return acc


def _series_div(num, den):
    out = np.zeros_like(num)
    inv0 = 1.0 / den[0]
    for n in range(len(num)):
        out[n] = (num[n] - np.dot(den[1 : n + 1], out[n - 1 :: -1][:n])) * inv0 if n else num[0] * inv0
    return out


@dataclass(frozen=True)
class FormalDiffeo:
    """Germ with f(0) = 0, f'(0) != 0, optionally tagged with a root-of-unity multiplier p/q."""

    series: TruncatedSeries
    multiplier_tag: tuple | None = None

    def __post_init__(self):
        if not _is_zero(self.series.coeffs[0]):
            raise ConstantTermNonzero("a formal diffeomorphism fixes 0")
        if _is_zero(self.series.coeffs[1]):
            raise NonInvertible("a formal diffeomorphism has f'(0) != 0")

    @property
    def N(self):
        return self.series.trunc_order

    def compose(self, other: "FormalDiffeo") -> "FormalDiffeo":
        return FormalDiffeo(self.series.compose(other.series))

    def invert(self) -> "FormalDiffeo":
        return FormalDiffeo(self.series.invert())

    def __call__(self, z):
        return self.series(z)

    def deriv_at(self, z):
        return self.series.deriv_at(z)


def flow_time_t(X: FormalVectorField1D, t=1, N: int | None = None) -> FormalDiffeo:
    """Formal time-t map of X.

    For X = O(z^2) the Lie series sum_n t^n/n! L_X^n(z) terminates at order N
    and is computed exactly in the coefficient domain of ``t`` and X.
    Otherwise the coefficient vector of Phi^s is integrated in s.
    """
    N = N or X.trunc_order
    v = FormalVectorField1D(X.numerator, X.denominator, X.kind, X.k, X.eps, X.a, N).series
    if _is_zero(v.coeffs[0]) and _is_zero(v.coeffs[1]):
        one = _one_like(v.coeffs[2]) if not _is_zero(v.coeffs[2]) else 1
        term = TruncatedSeries.identity(N, one)
        total = term
        for n in range(1, N):
            term = v * term.derivative()
            scale = t * Fraction(1, n) if (_exact(t) or not isinstance(t, (float, complex))) else t / n
            term = term * scale
            total = total + term
        return FormalDiffeo(total)
    # unfolded families have v(0) != 0: integrate numerically
    return _flow_numeric(X, complex(t), N)


def _flow_numeric(X, t, N):
    y0 = np.zeros(N + 1, dtype=complex)
    y0[1] = 1.0

    def rhs(s, y):
        return t * X.compose_numeric(y)

    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=1e-13, atol=1e-15)
    coeffs = tuple(complex(c) for c in sol.y[:, -1])
    series = TruncatedSeries(coeffs, N)
    if abs(coeffs[0]) > 0 or abs(coeffs[1]) == 0:
        # unfolded families move the origin: return the raw series object
        return _UnfoldedMap(series)
    return FormalDiffeo(series)


class _UnfoldedMap(FormalDiffeo):
    """Time-t map whose series does not fix the origin (v(0) != 0)."""

    def __post_init__(self):
        pass


# ---------------------------------------------------------------------------
# formal invariants

@dataclass(frozen=True)
class ParabolicInvariants:
    k: int
    a: object
    scale: complex  # z = scale * w brings the leading coefficient to 1
    normalized: TruncatedSeries = field(repr=False, default=None)


def extract_parabolic_invariants(f, tol: float = 1e-12) -> ParabolicInvariants:
    """Codimension k and iterative residue a of a germ tangent to the identity."""
    s = f.series if isinstance(f, FormalDiffeo) else f
    c = s.coeffs
    if not _is_zero(c[1] - _one_like(c[1]), tol):
        raise NotParabolic("multiplier is not 1", multiplier=c[1])
    k = None
    for n in range(2, s.N + 1):
        if not _is_zero(c[n], tol):
            k = n - 1
            break
    if k is None:
        raise NotParabolic("germ is the identity to the truncation order")
    if s.N < 2 * k + 1:
        raise TruncationTooShort(f"need order {2 * k + 1}, have {s.N}", k=k)

    lead = c[k + 1]
    if _is_zero(lead - _one_like(lead), tol):
        scale = 1
        g = s
    else:
        # principal k-th root of 1/lead
        scale = complex(lead) ** (-1.0 / k)
        g = TruncatedSeries(tuple(complex(c[n]) * scale ** (n - 1) for n in range(s.N + 1)), s.N)

    # remove z^{k+j}, j = 2..k, by h = w + beta w^j; coefficient shifts by (k+1-j) beta
    for j in range(2, k + 1):
        cj = g[k + j]
        if _is_zero(cj, tol):
            continue
        beta = -cj * (Fraction(1, k + 1 - j) if _exact(cj) else 1.0 / (k + 1 - j))
        h = TruncatedSeries.identity(g.N, _one_like(g[1])) + TruncatedSeries.identity(g.N, _one_like(g[1])) ** j * beta
        g = h.invert().compose(g.compose(h))
    b = g[2 * k + 1]
    half = Fraction(k + 1, 2) if _exact(b) else (k + 1) / 2
    return ParabolicInvariants(k, half - b, scale, g)


def iterate_q(f, q: int):
    """f composed with itself q times."""
    if q < 1:
        raise ValueError("q >= 1")
    s = f.series if isinstance(f, FormalDiffeo) else f
    out = s
    for _ in range(q - 1):
        out = s.compose(out)
    return FormalDiffeo(out) if isinstance(f, FormalDiffeo) else out


def iterate_relation_B(A, k: int, q: int):
    """Expected z^{2kq+1} coefficient of the q-th iterate."""
    return q * A + Fraction((k * q + 1) * (q - 1), 2 * q)


def resonant_germ(p: int, q: int, k: int, A, N: int | None = None, root=None) -> TruncatedSeries:
    """root * (z + z^{kq+1}/q + A z^{2kq+1}) with root = exp(2 pi i p/q) unless given exactly.

    The 1/q normalization makes the q-th iterate z + z^{kq+1} + B z^{2kq+1} + ...
    """
    N = N or 2 * k * q + 1
    if root is None:
        root = cmath.exp(2j * cmath.pi * p / q)
    zero = _zero_like(root)
    cs = [zero] * (N + 1)
    cs[1] = root
    cs[k * q + 1] = root * Fraction(1, q)
    cs[2 * k * q + 1] = root * A
    return TruncatedSeries(tuple(cs), N)


# ---------------------------------------------------------------------------
# unfolded families

def P_coeffs(eps: Sequence) -> np.ndarray:
    """Low-degree-first coefficients of z^{k+1} + eps_{k-1} z^{k-1} + ... + eps_0."""
    k = len(eps)
    return np.array(list(eps) + [0, 1], dtype=complex)


@dataclass(frozen=True)
class PreparedFormReport:
    eps: tuple
    fixed_points: np.ndarray
    multipliers: np.ndarray
    target_multipliers: np.ndarray
    residual: float
    fixed_point_residual: float
    correction: np.ndarray | None = None  # coefficients of c(z), deg <= k
    corrected: Callable | None = field(default=None, repr=False)


def _derivative(f, z):
    if hasattr(f, "deriv_at"):
        return f.deriv_at(z)
    h = 1e-6 * max(1.0, abs(z))
    return (f(z + h) - f(z - h)) / (2 * h)


def prepared_form(family, eps_grid, tol: float = 1e-8, correct: bool = False):
    """Check f_eps'(z_j) = exp(P_eps'(z_j)) at the zeros z_j of P_eps.

    ``family(eps)`` returns a germ evaluator (callable, with ``deriv_at`` when
    available).  With ``correct=True`` the germ is replaced by
    f + P_eps * c where c (degree <= k) is the interpolant that enforces the
    multiplier condition; otherwise a mismatch above ``tol`` raises.
    """
    reports = []
    for eps in eps_grid:
        eps = tuple(complex(e) for e in eps)
        k = len(eps)
        Pc = P_coeffs(eps)
        dPc = np.polynomial.polynomial.polyder(Pc)
        if all(e == 0 for e in eps):
            zs = np.zeros(k + 1, dtype=complex)
        else:
            zs = np.roots(Pc[::-1])
        f = family(eps)
        mult = np.array([_derivative(f, z) for z in zs], dtype=complex)
        dP = np.polynomial.polynomial.polyval(zs, dPc)
        target = np.exp(dP)
        fp_res = float(max(abs(f(z) - z) for z in zs))
        res = float(np.max(np.abs(mult - target)))
        corr = None
        corrected = None
        if res > tol:
            if not correct:
                raise MultiplierMismatch(f"multiplier residual {res:.3e}", eps=eps)
            # c(z_j) = (target - f'(z_j)) / P'(z_j), Lagrange interpolation
            vals = (target - mult) / dP
            V = np.vander(zs, k + 1, increasing=True)
            corr = np.linalg.solve(V, vals)

            def corrected(z, f=f, Pc=Pc, corr=corr):
                P = np.polynomial.polynomial.polyval
                return f(z) + P(z, Pc) * P(z, corr)

        reports.append(PreparedFormReport(eps, zs, mult, target, res, fp_res, corr, corrected))
    return reports


def rotation_action(eps: Sequence, a, tau, k: int | None = None, tol: float = 1e-12):
    """Parameters of the model field written in the coordinate z = x / tau.

    eps'_j = tau^{j-1} eps_j and a' = a.  Exact coefficient types stay exact.
    """
    k = k or len(eps)
    tk = tau ** k
    if isinstance(tk, (int, float, complex, Fraction)):
        if abs(complex(tk) - 1) > tol:
            raise NotRootOfUnity(f"tau^k = {tk}")
    elif not _is_zero(tk - _one_like(tk)):
        raise NotRootOfUnity("tau^k != 1")
    out = []
    for j, e in enumerate(eps):
        # tau^{j-1} = tau^{(j-1) mod k}
        p = (j - 1) % k
        factor = tau ** p if p else _one_like(tau)
        out.append(e * factor)
    return tuple(out), a


def conjugate_field_by_rotation(X: FormalVectorField1D, tau) -> TruncatedSeries:
    """Series of v(tau z)/tau: the field X in the coordinate z = x / tau."""
    v = X.series
    return TruncatedSeries(tuple(v[n] * tau ** (n - 1) if n else v[0] * _reciprocal(tau) for n in range(v.N + 1)), v.N)


# ---------------------------------------------------------------------------
# Schwarz reflections

@dataclass(frozen=True)
class AntiHolomorphic:
    """z -> g(conj(z))."""

    g: TruncatedSeries

    def then(self, other: "AntiHolomorphic") -> TruncatedSeries:
        """other o self, which is holomorphic: other.g(conj(self.g))(z)."""
        return other.g.compose(self.g.conj())


def schwarz_reflection(h: TruncatedSeries) -> AntiHolomorphic:
    """h^{-1} o sigma o h for a curve sent to the real axis by h."""
    return AntiHolomorphic(h.invert().compose(h.conj()))


@dataclass(frozen=True)
class SchwarzPair:
    f: FormalDiffeo
    reversal_residual: float


def schwarz_pair_diffeo(h1: TruncatedSeries, h2: TruncatedSeries) -> SchwarzPair:
    """f = Sigma_2 o Sigma_1 and the residual of Sigma_1 o f = f^{-1} o Sigma_1.

    The residual is coefficient-wise relative, since coefficients grow geometrically.
    """
    h1 = h1.series if isinstance(h1, FormalDiffeo) else h1
    h2 = h2.series if isinstance(h2, FormalDiffeo) else h2
    S1 = schwarz_reflection(h1)
    S2 = schwarz_reflection(h2)
    f = S1.then(S2)
    lhs = S1.g.compose(f.conj())  # Sigma_1 o f, as a series in conj(z)
    rhs = f.invert().compose(S1.g)  # f^{-1} o Sigma_1
    return SchwarzPair(FormalDiffeo(f), lhs.max_rel_diff(rhs))
