"""Real-time dynamics of z' = e^{i alpha} P_eps(z) on the Riemann sphere.

Separatrices of the pole at infinity are traced inward from their exact
asymptotic directions, zones are read off from the landing pattern, and the
landing pattern is reduced to a non-crossing matching of the gaps between
consecutive separatrices at infinity.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .errors import Discriminant, IntegrationBudgetExceeded, MultipleRoot, NotStructurallyStable

STATUS_LANDED, STATUS_ESCAPED, STATUS_BUDGET = 0, 1, 2
MERGE_TOL = 1e-9
CENTER_TOL = 1e-9


def catalan(k: int) -> int:
    if k < 0:
        raise ValueError("k >= 0")
    return comb(2 * k, k) // (k + 1)


@dataclass(frozen=True)
class PolyField:
    """e^{i alpha} P(z).

    variant "P": P = z^{k+1} + eps_{k-1} z^{k-1} + ... + eps_0.
    variant "Q": P = z (z^k + eps_{k-1} z^{k-1} + ... + eps_0), a zero pinned at 0.
    """

    k: int
    eps: tuple
    alpha: float = 0.0
    variant: str = "P"

    def __post_init__(self):
        eps = tuple(complex(e) for e in self.eps)
        if len(eps) != self.k:
            raise ValueError(f"eps must have {self.k} entries")
        if self.variant not in ("P", "Q"):
            raise ValueError("variant is 'P' or 'Q'")
        object.__setattr__(self, "eps", eps)

    @property
    def coeffs(self) -> np.ndarray:
        """Low-degree-first coefficients of P (without the rotation)."""
        if self.variant == "P":
            return np.array(list(self.eps) + [0, 1], dtype=complex)
        return np.array([0] + list(self.eps) + [1], dtype=complex)

    @property
    def rot(self) -> complex:
        return cmath.exp(1j * self.alpha)

    def __call__(self, z):
        return self.rot * np.polynomial.polynomial.polyval(z, self.coeffs)

    def derivative(self, z):
        return self.rot * np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(self.coeffs))

    def rotated(self, alpha: float) -> "PolyField":
        return PolyField(self.k, self.eps, alpha, self.variant)

    @property
    def slot_angles(self) -> np.ndarray:
        """Asymptotic directions theta_m = (m pi - alpha)/k, m = 0..2k-1."""
        return (np.arange(2 * self.k) * math.pi - self.alpha) / self.k


@dataclass(frozen=True)
class SingularPointInfo:
    location: complex
    eigenvalue: complex
    multiplicity: int
    stability: str  # attracting | repelling | center | multiple


def roots(field: PolyField) -> list[tuple[complex, int]]:
    """Zeros of P with multiplicity, Newton polished, clusters merged."""
    c = field.coeffs
    if np.all(c[:-1] == 0):
        return [(0j, field.k + 1)]
    raw = np.roots(c[::-1])
    dc = np.polynomial.polynomial.polyder(c)
    P = np.polynomial.polynomial.polyval
    polished = []
    for z in raw:
        for _ in range(50):
            d = P(z, dc)
            if d == 0:
                break
            step = P(z, c) / d
            z = z - step
            if abs(step) < 1e-16 * max(1.0, abs(z)):
                break
        polished.append(complex(z))
    out: list[list] = []
    for z in polished:
        for item in out:
            d = abs(item[0] - z)
            # Newton stalls about sqrt(machine eps) away from a double zero
            if d < MERGE_TOL or (d < 1e-6 and abs(P(0.5 * (item[0] + z), dc)) < 1e-6):
                item[1] += 1
                break
        else:
            out.append([z, 1])
    result = [(z, m) for z, m in out]
    result.sort(key=lambda t: (round(t[0].real, 12), round(t[0].imag, 12)))
    return result


def singular_points(field: PolyField) -> list[SingularPointInfo]:
    pts = []
    for z, m in roots(field):
        lam = complex(field.derivative(z))
        if m > 1:
            st = "multiple"
        elif lam.real < -CENTER_TOL * abs(lam):
            st = "attracting"
        elif lam.real > CENTER_TOL * abs(lam):
            st = "repelling"
        else:
            st = "center"
        pts.append(SingularPointInfo(z, lam, m, st))
    return pts


# ---------------------------------------------------------------------------
# separatrices

@dataclass
class Separatrix:
    index: int
    direction: float
    polyline: np.ndarray = field(repr=False)
    landing: int | None  # point index when landed
    homoclinic_partner: int | None = None
    status: int = STATUS_LANDED
    steps: int = 0

    @property
    def kind(self) -> str:
        return "repelling" if self.index % 2 == 0 else "attracting"


@dataclass
class SeparatrixGraph:
    field: PolyField
    separatrices: list[Separatrix]
    points: list[SingularPointInfo]

    @property
    def landed(self) -> bool:
        return all(s.status == STATUS_LANDED for s in self.separatrices)

    def landing_map(self) -> list[int]:
        return [s.landing for s in self.separatrices]


def _time_at_infinity_coeffs(field: PolyField, nterms: int) -> np.ndarray:
    """s_n with 1/(1 + c_k w + ... + c_0 w^{k+1}) = sum s_n w^n, c_j from monic P."""
    c = field.coeffs  # c[j] coefficient of z^j, c[k+1] = 1
    k = field.k
    den = np.zeros(nterms, dtype=complex)
    for j in range(k + 2):
        n = k + 1 - j
        if n < nterms:
            den[n] = c[j]
    s = np.zeros(nterms, dtype=complex)
    s[0] = 1.0
    for n in range(1, nterms):
        s[n] = -np.dot(den[1 : n + 1], s[n - 1 :: -1][:n])
    return s


def time_at_infinity(field: PolyField, z, nterms: int = 80):
    """T(z) = int_inf^z dz / P(z), the time coordinate vanishing at infinity (no rotation)."""
    k = field.k
    s = _time_at_infinity_coeffs(field, nterms)
    w = 1.0 / np.asarray(z, dtype=complex)
    n = np.arange(nterms)
    return -np.sum(s[:, None] * w.reshape(1, -1) ** (k + n[:, None]) / (k + n[:, None]), axis=0).reshape(np.shape(z))


def _start_point(field: PolyField, m: int, R: float) -> complex:
    theta_m = field.slot_angles[m]
    rot = field.rot

    def g(theta):
        return float((np.conj(rot) * time_at_infinity(field, R * cmath.exp(1j * theta))).imag)

    half = math.pi / (4 * field.k)
    try:
        theta = brentq(g, theta_m - half, theta_m + half, xtol=1e-15)
    except ValueError:
        theta = theta_m
    return R * cmath.exp(1j * theta)


def _landing_radius(field: PolyField, pts: list[SingularPointInfo], j: int) -> float:
    """Disk where the linear part dominates: contraction is certain inside."""
    z = pts[j].location
    others = [abs(z - p.location) for i, p in enumerate(pts) if i != j]
    r = 0.5 * min(others) if others else 1.0
    lam = pts[j].eigenvalue
    if lam.real == 0:
        return 0.0
    # Taylor coefficients of rot*P at z_j beyond the linear term
    c = field.coeffs.copy()
    taylor = []
    d = c
    fact = 1.0
    for n in range(1, field.k + 2):
        d = np.polynomial.polynomial.polyder(d)
        fact *= n
        if n >= 2:
            taylor.append(abs(np.polynomial.polynomial.polyval(z, d)) / fact)
    target = 0.5 * abs(lam.real)

    def excess(rr):
        return sum(t * rr ** (i + 1) for i, t in enumerate(taylor)) - target

    if excess(r) > 0:
        r = brentq(excess, 0.0, r)
    return 0.99 * r


def separatrices_at_infinity(field: PolyField, max_steps: int = 20000, tol: float = 1e-10,
                             raise_on_budget: bool = False) -> SeparatrixGraph:
    pts = singular_points(field)
    if any(p.multiplicity > 1 for p in pts):
        raise MultipleRoot("multiple zero of P; separatrices are not traced", eps=field.eps)
    R = 3.0 * max(1.0, max(abs(p.location) for p in pts))
    radii = [_landing_radius(field, pts, j) for j in range(len(pts))]
    targets = np.array([p.location for p in pts])
    seps = []
    angles = field.slot_angles
    for m in range(2 * field.k):
        # even slots leave a repeller (trace backward), odd slots reach an attractor
        sigma = -1.0 if m % 2 == 0 else 1.0
        want = "repelling" if m % 2 == 0 else "attracting"
        rad = np.array([radii[j] if pts[j].stability == want else 0.0 for j in range(len(pts))])
        z0 = _start_point(field, m, R)
        status, idx, path, steps = kernels.trace(field.coeffs, z0, sigma * field.rot, targets, rad,
                                                 4.0 * R, max_steps, 1e-2, tol)
        sep = Separatrix(m, float(angles[m]), path, idx if status == STATUS_LANDED else None, None, status, steps)
        if status == STATUS_ESCAPED:
            ang = cmath.phase(path[-1])
            diffs = [abs((ang - a + math.pi) % (2 * math.pi) - math.pi) for a in angles]
            sep.homoclinic_partner = int(np.argmin(diffs))
        elif status == STATUS_BUDGET and raise_on_budget:
            raise IntegrationBudgetExceeded(f"separatrix {m} did not land", index=m, polyline=path.tolist())
        seps.append(sep)
    return SeparatrixGraph(field, seps, pts)


# ---------------------------------------------------------------------------
# zones and types

@dataclass(frozen=True)
class Zone:
    gaps: tuple
    boundary_separatrices: tuple
    alpha_limit: int
    omega_limit: int
    probe_ok: bool


@dataclass(frozen=True)
class TopologicalType:
    pairing: tuple  # sorted pairs of gap indices

    @property
    def code(self) -> str:
        return ",".join(f"({a},{b})" for a, b in self.pairing)

    def rotated(self, shift: int, k: int) -> "TopologicalType":
        n = 2 * k
        return TopologicalType(tuple(sorted(tuple(sorted(((a + shift) % n, (b + shift) % n))) for a, b in self.pairing)))


@dataclass(frozen=True)
class ZoneDecomposition:
    zones: tuple
    type_code: TopologicalType
    graph: SeparatrixGraph = field(repr=False, compare=False)


def _canonical_shift(field: PolyField) -> int:
    """Label shift making slot 0 the repelling slot of smallest angle in [-pi/k, 2 pi - pi/k)."""
    k = field.k
    lo = -math.pi / k
    angles = [((a - lo) % (2 * math.pi)) + lo for a in field.slot_angles]
    even = [m for m in range(0, 2 * k, 2)]
    return min(even, key=lambda m: angles[m])


def _faces(landing: list[int], k: int) -> list[list[int]]:
    n = 2 * k
    blocks: dict[int, list[int]] = {}
    for m, p in enumerate(landing):
        blocks.setdefault(p, []).append(m)
    nxt = {}
    for g in range(n):
        s = (g + 1) % n
        blk = sorted(blocks[landing[s]])
        i = blk.index(s)
        nxt[g] = blk[i - 1]
    seen, faces = set(), []
    for g in range(n):
        if g in seen:
            continue
        face, cur = [], g
        while cur not in seen:
            seen.add(cur)
            face.append(cur)
            cur = nxt[cur]
        faces.append(face)
    return faces


def _probe(field: PolyField, graph: SeparatrixGraph, gap: int, alpha_idx: int, omega_idx: int) -> bool:
    pts = graph.points
    n = 2 * field.k
    s1 = graph.separatrices[gap].polyline[0]
    # start in the asymptotic sector between the two slots, beyond every
    # separatrix excursion; at the tracer radius separatrices may still swing
    # across the gap before settling
    reach = max(float(np.max(np.abs(s.polyline))) for s in graph.separatrices)
    R = 4.0 * max(reach, abs(s1))
    a1 = field.slot_angles[gap]
    da = (field.slot_angles[(gap + 1) % n] - a1) % (2 * math.pi)
    z0 = R * cmath.exp(1j * (a1 + 0.5 * da))
    targets = np.array([p.location for p in pts])
    ok = True
    for sigma, idx, want in ((1.0, omega_idx, "attracting"), (-1.0, alpha_idx, "repelling")):
        rad = np.array([_landing_radius(field, pts, j) if pts[j].stability == want else 0.0 for j in range(len(pts))])
        # only separatrices reach infinity; near-center orbits make wide loops first
        status, landed, _, _ = kernels.trace(field.coeffs, z0, sigma * field.rot, targets, rad, 100.0 * R, 400000)
        ok = ok and status == STATUS_LANDED and landed == idx
    return ok


def zones(graph: SeparatrixGraph, probe: bool = True) -> ZoneDecomposition:
    if not graph.landed:
        bad = [s.index for s in graph.separatrices if s.status != STATUS_LANDED]
        raise NotStructurallyStable("separatrix not landed (homoclinic or budget)", separatrices=bad)
    field_ = graph.field
    k = field_.k
    landing = graph.landing_map()
    out = []
    for face in _faces(landing, k):
        bslots = sorted({g for g in face} | {(g + 1) % (2 * k) for g in face})
        ends = {landing[s] for s in bslots}
        reps = [j for j in ends if graph.points[j].stability == "repelling"]
        atts = [j for j in ends if graph.points[j].stability == "attracting"]
        if len(reps) != 1 or len(atts) != 1:
            raise NotStructurallyStable("zone without a single source and sink", gaps=face)
        ok = _probe(field_, graph, face[0], reps[0], atts[0]) if probe else True
        out.append(Zone(tuple(sorted(face)), tuple(bslots), reps[0], atts[0], ok))
    if len(out) != k:
        raise NotStructurallyStable(f"{len(out)} zones, expected {k}")
    shift = _canonical_shift(field_)
    pairs = []
    for z in out:
        if len(z.gaps) != 2:
            raise NotStructurallyStable("zone touches infinity in more than two gaps", gaps=z.gaps)
        a, b = ((g - shift) % (2 * k) for g in z.gaps)
        pairs.append((min(a, b), max(a, b)))
    return ZoneDecomposition(tuple(out), TopologicalType(tuple(sorted(pairs))), graph)


def topological_type(decomp: ZoneDecomposition) -> TopologicalType:
    return decomp.type_code


def is_noncrossing(pairing) -> bool:
    for a, b in pairing:
        for c, d in pairing:
            if a < c < b < d:
                return False
    return True


def noncrossing_matchings(k: int) -> list[tuple]:
    """All non-crossing perfect matchings of 0..2k-1, sorted; the domain id is the index."""
    def rec(items):
        if not items:
            return [()]
        first, out = items[0], []
        for i in range(1, len(items), 2):
            inner, outer = items[1:i], items[i + 1 :]
            for a in rec(inner):
                for b in rec(outer):
                    out.append(((first, items[i]),) + a + b)
        return out

    return sorted(tuple(sorted(m)) for m in rec(list(range(2 * k))))


def classify(field: PolyField) -> TopologicalType:
    return zones(separatrices_at_infinity(field), probe=False).type_code


# ---------------------------------------------------------------------------
# DES domains

@dataclass(frozen=True)
class DesDomain:
    domain_id: int | None
    type_code: TopologicalType | None
    margin: float
    adjacent: tuple = ()
    on_bifurcation: bool = False


ALPHA_SCAN = (0.05, -0.05, 0.1, -0.1, 0.2, -0.2)


def des_domain_of(eps, k: int, margin_ladder=(0.1, 0.03, 0.01, 0.003, 0.001), seed: int = 0,
                  variant: str = "P") -> DesDomain:
    """Domain of eps; near a bifurcation, the types met by rotated fields e^{i alpha} P.

    The margin is the largest ladder step delta (relative to the scale below) for
    which eight perturbations of size delta all keep the type; 0 when none does.
    Domains are weighted-homogeneous cones (eps_j ~ lambda^{k+1-j} under
    z -> lambda z; k - j for variant Q), so the scale is max(1, |eps|) capped by
    rho^{k+1}, rho the root size max_j |eps_j|^{1/(k+1-j)}; near eps = 0 steps
    stay inside the cone.
    """
    field_ = PolyField(k, tuple(eps), 0.0, variant)
    if any(p.multiplicity > 1 for p in singular_points(field_)):
        raise Discriminant("multiple zero of P", eps=field_.eps)
    catalog = noncrossing_matchings(k)
    try:
        t = classify(field_)
    except NotStructurallyStable:
        found = []
        for al in ALPHA_SCAN:
            try:
                tt = classify(field_.rotated(al))
            except NotStructurallyStable:
                continue
            if tt not in found:
                found.append(tt)
        return DesDomain(None, None, 0.0, tuple(found), True)
    rng = np.random.default_rng(seed)
    top = k + 1 if variant == "P" else k
    rho = max(abs(e) ** (1.0 / (top - j)) for j, e in enumerate(field_.eps))
    scale = min(max(1.0, float(np.max(np.abs(field_.eps)))), rho ** top)
    margin = 0.0
    for delta in margin_ladder:
        good = True
        for _ in range(8):
            d = rng.normal(size=k) + 1j * rng.normal(size=k)
            d *= delta * scale / np.linalg.norm(d)
            try:
                if classify(PolyField(k, tuple(np.array(field_.eps) + d), 0.0, variant)) != t:
                    good = False
                    break
            except (NotStructurallyStable, MultipleRoot):
                good = False
                break
        if good:
            margin = delta * scale
            break
    return DesDomain(catalog.index(t.pairing), t, margin)


def census(k: int, samples: int = 400, box: float = 1.5, seed: int = 0):
    """Types met on random eps in a box; returns {code: count} and the number of unstable samples."""
    rng = np.random.default_rng(seed)
    counts: dict[tuple, int] = {}
    unstable = 0
    for _ in range(samples):
        eps = rng.uniform(-box, box, size=k) + 1j * rng.uniform(-box, box, size=k)
        try:
            t = classify(PolyField(k, tuple(eps)))
        except (NotStructurallyStable, MultipleRoot):
            unstable += 1
            continue
        counts[t.pairing] = counts.get(t.pairing, 0) + 1
    return counts, unstable
