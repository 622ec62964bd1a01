"""Command line front end: ``confluence <command> [--set key=value ...]``.

Each command builds an ExperimentConfig, runs it, and emits a RunRecord as
JSON (stdout or --json) plus optional SVG/CSV artifacts.  Errors are written
to stderr as one JSON object; exit codes are 0 ok, 2 config, 3 numerical.
"""

from __future__ import annotations

import argparse
import cmath
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import orbit, planar, polyfield, stokes
from .config import DEFAULTS, TOLERANCES, ExperimentConfig, cplx, cplx_list
from .errors import ConfigInvalid, ConfluenceError
from .record import RunRecord, dumps, write_atomic
from .svg import emit_svg


def threads() -> int:
    raw = os.environ.get("CONFLUENCE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigInvalid(f"CONFLUENCE_THREADS must be an integer, got '{raw}'", key="CONFLUENCE_THREADS") from None
    return max(1, n)


# ---------------------------------------------------------------------------
# parameter parsing helpers

def _eps_hat(v) -> orbit.SectorParameter:
    if isinstance(v, dict):
        extra = set(v) - {"r", "theta"}
        if extra:
            raise ConfigInvalid(f"unknown key '{sorted(extra)[0]}' in eps_hat", key=sorted(extra)[0])
        return orbit.SectorParameter(float(v["r"]), float(v["theta"]))
    return orbit.SectorParameter.from_eps(cplx(v))


def _germ(desc: dict) -> orbit.Germ:
    kind = desc.get("kind")
    if kind == "model":
        return orbit.model_germ(int(desc.get("k", 1)), cplx(desc.get("a", 0)))
    if kind == "polynomial":
        return orbit.Germ.polynomial([cplx(c) for c in desc["coeffs"]])
    raise ConfigInvalid(f"unknown germ kind '{kind}'", key="germ.kind")


def _perturbed_polynomial(base: list, eps: complex) -> orbit.Germ:
    """Germ f_eps(z) = f(z) - eps, a generic one-parameter unfolding of f."""
    c = [cplx(x) for x in base]
    c[0] -= eps
    return orbit.Germ.polynomial(c)


def _system(desc: dict, eps) -> stokes.LinearUnfolding:
    if not isinstance(desc, dict):
        raise ConfigInvalid("system must be an object", key="system")
    if desc.get("preset") == "euler":
        return stokes.LinearUnfolding.euler_companion(eps)
    if "lambdas" in desc:
        return stokes.LinearUnfolding.normal_form([cplx(x) for x in desc["lambdas"]],
                                                  [cplx(x) for x in desc.get("nus", [0] * len(desc["lambdas"]))], eps)
    if "D" in desc:
        D = [[cplx(x) for x in row] for row in desc["D"]]
        B = [[[cplx(x) for x in row] for row in mat] for mat in desc.get("B", [])]
        return stokes.LinearUnfolding(int(desc.get("k", 1)), tuple(D), tuple(B), (eps,))
    raise ConfigInvalid("system needs preset, lambdas or D", key="system")


def _field(p: dict, eps) -> polyfield.PolyField:
    k = int(p["k"])
    eps = cplx_list(eps)
    if len(eps) != k:
        raise ConfigInvalid(f"eps needs {k} entries, got {len(eps)}", key="eps")
    if p["variant"] not in ("P", "Q"):
        raise ConfigInvalid("variant must be 'P' or 'Q'", key="variant")
    return polyfield.PolyField(k, tuple(eps), float(p["alpha"]), p["variant"])


def _exact(v):
    if isinstance(v, str):
        try:
            return Fraction(v)
        except ValueError:
            return cplx(v)
    if isinstance(v, int):
        return v
    return cplx(v)


# ---------------------------------------------------------------------------
# commands: each returns (outputs, bounds, artifacts {kind: text})

def _portrait_one(p, eps):
    field = _field(p, eps)
    graph = polyfield.separatrices_at_infinity(field)
    try:
        decomp = polyfield.zones(graph, probe=False)
    except ConfluenceError:
        decomp = None
    out = {
        "eps": list(field.eps),
        "points": [{"location": q.location, "eigenvalue": q.eigenvalue, "stability": q.stability,
                    "multiplicity": q.multiplicity} for q in graph.points],
        "separatrices": [{"index": s.index, "kind": s.kind, "landing": s.landing, "status": s.status,
                          "homoclinic_partner": s.homoclinic_partner} for s in graph.separatrices],
        "zones": [{"gaps": z.gaps, "alpha": z.alpha_limit, "omega": z.omega_limit} for z in decomp.zones]
        if decomp else [],
        "type": decomp.type_code.code if decomp else None,
        "structurally_stable": decomp is not None,
    }
    return out, emit_svg(decomp if decomp is not None else graph)


def cmd_portrait(p, seed):
    grid = p.get("grid")
    epss = grid if grid else [p["eps"]]
    atlas, svgs = [], []
    for eps in epss:
        out, svg = _portrait_one(p, eps)
        atlas.append(out)
        svgs.append(svg)
    outputs = {"k": p["k"], "alpha": p["alpha"], "portraits": atlas}
    return outputs, {"separatrix_rtol": TOLERANCES["separatrix_rtol"]}, {"svg": svgs}


def cmd_zones(p, seed):
    field = _field(p, p["eps"])
    decomp = polyfield.zones(polyfield.separatrices_at_infinity(field))
    outputs = {"type": decomp.type_code.code, "pairing": decomp.type_code.pairing,
               "zones": [{"gaps": z.gaps, "boundary": z.boundary_separatrices, "alpha": z.alpha_limit,
                          "omega": z.omega_limit, "probe_ok": z.probe_ok} for z in decomp.zones],
               "catalan": polyfield.catalan(field.k)}
    return outputs, {"separatrix_rtol": TOLERANCES["separatrix_rtol"]}, {}


def _classify_point(args):
    eps, k, variant, seed, margins = args
    ladder = (0.1, 0.03, 0.01, 0.003, 0.001) if margins else ()
    try:
        d = polyfield.des_domain_of(eps, k, margin_ladder=ladder, seed=seed, variant=variant)
    except (polyfield.Discriminant, polyfield.MultipleRoot):
        return {"eps": eps, "domain": None, "type": None, "status": "discriminant", "margin": 0.0}
    return {"eps": eps, "domain": d.domain_id, "type": d.type_code.code if d.type_code else None,
            "status": "bifurcation" if d.on_bifurcation else "stable", "margin": d.margin,
            "adjacent": [t.code for t in d.adjacent]}


def cmd_classify_des(p, seed):
    k = int(p["k"])
    if p["samples"]:
        counts, unstable = polyfield.census(k, int(p["samples"]), float(p["box"]), seed)
        codes = {polyfield.TopologicalType(c).code: n for c, n in sorted(counts.items())}
        outputs = {"k": k, "mode": "census", "types": codes, "distinct": len(codes), "unstable": unstable,
                   "catalan": polyfield.catalan(k)}
        return outputs, {}, {}
    fixed = cplx_list(p["fixed"]) if p["fixed"] else [0j] * k
    if len(fixed) != k:
        raise ConfigInvalid(f"fixed needs {k} entries", key="fixed")
    vary = int(p["vary"])
    g = p["grid"]
    re = np.linspace(*map(float, g["re"][:2]), int(g["re"][2]))
    im = np.linspace(*map(float, g["im"][:2]), int(g["im"][2]))
    jobs = []
    for y in im:
        for x in re:
            eps = list(fixed)
            eps[vary] = complex(x, y)
            jobs.append((tuple(eps), k, p["variant"], seed, bool(p["margins"])))
    nt = threads()
    if nt > 1:
        with ProcessPoolExecutor(max_workers=nt) as ex:
            pts = list(ex.map(_classify_point, jobs, chunksize=8))
    else:
        pts = [_classify_point(j) for j in jobs]
    types = {}
    for q in pts:
        if q["type"] is not None:
            types[q["type"]] = types.get(q["type"], 0) + 1
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im", "domain", "type", "status", "margin"])
    for q in pts:
        e = q["eps"][vary]
        w.writerow([repr(e.real), repr(e.imag), q["domain"], q["type"] or "", q["status"], repr(q["margin"])])
    outputs = {"k": k, "mode": "grid", "vary": vary, "types": dict(sorted(types.items())), "distinct": len(types),
               "catalan": polyfield.catalan(k), "points": pts}
    return outputs, {}, {"csv": [buf.getvalue()]}


def cmd_fatou(p, seed):
    g = _germ(p["germ"])
    fc = orbit.fatou_coordinate(g, p["petal"], normalization=p["normalization"])
    pts = np.array(cplx_list(p["points"]), dtype=complex)
    if np.all(pts == 0):
        pts = np.array([fc.base_point if fc.base_point is not None else 0.1])
    vals = np.atleast_1d(fc(pts))
    defect = fc.defect(pts, g)
    outputs = {"k": fc.k, "petal": fc.kind, "points": pts, "values": vals, "base_point": fc.base_point}
    return outputs, {"abel_defect": defect, "tolerance": TOLERANCES["fatou_defect"]}, {}


def cmd_horn(p, seed):
    g = _germ(p["germ"])
    h = orbit.horn_map(g, p["end"], int(p["samples"]))
    outputs = {"horn": h.to_json(), "nonlinearity": h.nonlinearity}
    return outputs, {"defect": h.defect, "linearity_tolerance": TOLERANCES["horn_linearity"]}, {}


def cmd_lavaurs(p, seed):
    e = _eps_hat(p["eps_hat"])
    a = cplx(p["a"])
    lv = orbit.lavaurs_map(e, a)
    closed = orbit.lavaurs_closed_form(e, a)
    rel = abs(cmath.log(lv.K) - cmath.log(closed)) / max(1.0, abs(cmath.log(closed)))
    outputs = {"K": lv.K, "C": lv.C, "period": lv.period, "closed_form_K": closed}
    return outputs, {"log_K_relative_difference": rel}, {}


def cmd_resurgence(p, seed):
    n0, n1 = map(int, p["n"])
    seq = orbit.resurgence_sequence(cplx(p["psi0_linear"]), cplx(p["a"]), int(p["p"]), int(p["q"]), range(n0, n1 + 1))
    worst = max(r["residual"] for r in seq)
    mods = [abs(r["eps"]) for r in seq]
    decreasing = all(b < a for a, b in zip(mods, mods[1:]))
    return ({"sequence": seq, "strictly_decreasing": decreasing},
            {"max_residual": worst, "tolerance": TOLERANCES["resurgence_residual"]}, {})


def cmd_glutsyuk(p, seed):
    desc = p["germ"]
    eps = cplx(p["eps"])
    if desc.get("kind") == "polynomial":
        g = _perturbed_polynomial(desc["coeffs"], eps)
    else:
        g = orbit.model_germ(int(desc.get("k", 1)), cplx(desc.get("a", 0)), (-eps,))
    d = orbit.glutsyuk_comparison(g, eps, int(p["samples"]))
    outputs = {"lambda_att": d.lambda_att, "lambda_rep": d.lambda_rep, "fourier": d.fourier, "norm": d.norm}
    return outputs, {"koenigs_defect": d.koenigs_defect}, {}


def cmd_center_manifold(p, seed):
    fam = planar.SaddleNodeFamily.euler() if p["family"] == "euler" else None
    if fam is None:
        raise ConfigInvalid(f"unknown family '{p['family']}'", key="family")
    cm = planar.center_manifold_series(fam, int(p["N"]))
    xs = p["x"] if isinstance(p["x"], list) else [p["x"]]
    rows = []
    for x in map(float, xs):
        lt, bound = planar.least_term_sum(cm, x)
        bp = planar.borel_pade_sum(cm, x)
        ode = planar.integrate_center_manifold(fam, x)
        vals = [lt, bp, ode]
        spread = max(abs(a - b) for a in vals for b in vals) / max(abs(ode), 1e-300)
        rows.append({"x": x, "least_term": lt, "least_term_bound": bound, "borel_pade": bp, "ode": ode,
                     "relative_spread": spread})
    return ({"gevrey_order": str(cm.gevrey_order), "coefficients": [float(c) for c in cm.c[:12]], "values": rows},
            {"relative_tolerance": TOLERANCES["borel_relative"]}, {})


def cmd_holonomy(p, seed):
    kw = {"radius": float(p["radius"]), "samples": int(p["samples"])}
    if p["kind"] == "saddle-node":
        h = planar.saddle_node_holonomy(int(p["k"]), cplx(p["A"]), **kw)
        inv = planar.holonomy_invariants(h)
        outputs = {"multiplier": h.multiplier, "coeffs": h.coeffs[:8], "k": inv.k, "a": inv.a}
        return outputs, {"multiplier_tolerance": TOLERANCES["holonomy_multiplier"]}, {}
    if p["kind"] == "linear-saddle":
        pp, q = int(p["p"]), int(p["q"])
        h = planar.linear_saddle_holonomy(pp, q, **kw)
        expected = cmath.exp(-2j * math.pi * q / pp)
        outputs = {"multiplier": h.multiplier, "expected": expected}
        return outputs, {"multiplier_error": abs(h.multiplier - expected),
                         "tolerance": TOLERANCES["holonomy_multiplier"]}, {}
    raise ConfigInvalid(f"unknown holonomy kind '{p['kind']}'", key="kind")


def cmd_invariants(p, seed):
    r = planar.saddle_node_invariants(_exact(p["eps"]), _exact(p["A"]))
    if r["exact"]:
        out = {k: str(v) for k, v in r.items() if k != "exact"}
        out["exact"] = True
        return out, {"residual_sum": 0.0, "residual_canonical": 0.0}, {}
    return ({"mu_plus": r["mu_plus"], "mu_minus": r["mu_minus"], "exact": False},
            {"residual_sum": r["residual_sum"], "residual_canonical": r["residual_canonical"]}, {})


def cmd_return_map(p, seed):
    e = _eps_hat(p["eps_hat"])
    r = orbit.renormalized_return_map(e, cplx(p["a"]), None, p["end"], int(p["samples"]))
    outputs = {"multiplier": r.multiplier, "K": r.K, "psi_linear": r.psi_linear, "w": r.w, "tau": r.tau}
    return outputs, {}, {}


def cmd_resurgence_node(p, seed):
    n0, n1 = map(int, p["n"])
    A = float(p["A"])
    fam = planar.SaddleNodeFamily(1, (0,), A, ((2, 0, -1),))
    rows = []
    for n in range(n0, n1 + 1):
        chk = planar.resonant_node_check(fam, n)
        row = {"n": n, "eps": chk.eps, "ratio": chk.ratio, "obstruction": chk.obstruction,
               "spread": chk.spread, "log_term_detected": chk.log_term_detected}
        if A == 0:
            row["residue"] = planar.euler_log_residue(n)
        rows.append(row)
    return {"nodes": rows}, {"spread_max": max(r["spread"] for r in rows)}, {}


def cmd_monodromy(p, seed):
    eps = cplx(p["eps"])
    sysm = _system(p["system"], eps)
    r = stokes.monodromy(sysm, p["around"], p["radius"])
    ex = stokes.mu_exponents(eps, sysm.lambdas, sysm.nus)
    mu = ex.mu_plus if p["around"] == "+" else ex.mu_minus
    expected = np.exp(2j * math.pi * np.asarray(mu))
    got = np.sort_complex(np.asarray(r.eigenvalues))
    want = np.sort_complex(expected)
    err = float(np.max(np.abs(got - want)))
    outputs = {"matrix": r.matrix, "eigenvalues": r.eigenvalues, "expected": expected,
               "condition": stokes.eigenvector_condition(r.matrix)}
    return outputs, {"eigenvalue_error": err, "det_residual": r.det_residual,
                     "rtol": TOLERANCES["monodromy_rtol"]}, {}


def cmd_stokes(p, seed):
    e = _eps_hat(p["eps_hat"])
    sysm = _system(p["system"], e.eps)
    c = stokes.stokes_collection(sysm, e, route=p["route"], tol=TOLERANCES["stokes_structure"])
    return {"collection": c.to_json()}, {"structure_tolerance": TOLERANCES["stokes_structure"]}, {}


def cmd_stokes_limit(p, seed):
    sysm = _system(p["system"], 0.0)
    r = stokes.stokes_limit(sysm, float(p["eps0"]), int(p["dyadic"]))
    outputs = {"eps": r["eps"], "S_U": [c.S_U for c in r["collections"]], "classical": r["classical"].to_json(),
               "dist_U": r["dist_U"], "dist_L": r["dist_L"], "cauchy_U": r["cauchy_U"]}
    return outputs, {"final_distance": r["dist_U"][-1]}, {}


def cmd_compare_stokes(p, seed):
    cols = []
    for key in ("first", "second"):
        desc = p[key]
        if not isinstance(desc, dict):
            raise ConfigInvalid(f"'{key}' needs a system and eps_hat", key=key)
        e = _eps_hat(desc.get("eps_hat", {"r": 0.01, "theta": 0.3}))
        sysm = _system(desc.get("system", {"preset": "euler"}), e.eps)
        if "gauge" in desc:
            sysm = sysm.gauge([cplx(x) for x in desc["gauge"]])
        cols.append(stokes.stokes_collection(sysm, e))
    v = stokes.equivalence_compare(cols[0], cols[1], TOLERANCES["equivalence"])
    outputs = {"equivalent": v.equivalent, "D": v.D, "Dprime": v.Dprime, "witness": v.witness,
               "first": cols[0].to_json(), "second": cols[1].to_json()}
    return outputs, {"residual": v.residual, "tolerance": TOLERANCES["equivalence"]}, {}


def cmd_catalan(p, seed):
    k0, k1 = map(int, p["k"])
    rows = []
    for k in range(k0, k1 + 1):
        ms = polyfield.noncrossing_matchings(k)
        rows.append({"k": k, "catalan": polyfield.catalan(k), "matchings": len(ms),
                     "codes": [polyfield.TopologicalType(m).code for m in ms] if k <= 4 else []})
    return {"rows": rows}, {}, {}


COMMANDS = {
    "portrait": cmd_portrait, "zones": cmd_zones, "classify-des": cmd_classify_des, "fatou": cmd_fatou,
    "horn": cmd_horn, "lavaurs": cmd_lavaurs, "resurgence": cmd_resurgence, "glutsyuk": cmd_glutsyuk,
    "center-manifold": cmd_center_manifold, "holonomy": cmd_holonomy, "invariants": cmd_invariants,
    "return-map": cmd_return_map, "resurgence-node": cmd_resurgence_node, "monodromy": cmd_monodromy,
    "stokes": cmd_stokes, "stokes-limit": cmd_stokes_limit, "compare-stokes": cmd_compare_stokes,
    "catalan": cmd_catalan,
}
assert set(COMMANDS) == set(DEFAULTS)


# ---------------------------------------------------------------------------
# run

def _artifact_paths(base: str, n: int) -> list:
    if n == 1:
        return [base]
    stem, ext = os.path.splitext(base)
    return [f"{stem}_{i:03d}{ext}" for i in range(n)]


def run(config: ExperimentConfig) -> tuple[RunRecord, dict]:
    """Execute one config; returns the record and the artifact texts by kind."""
    fn = COMMANDS[config.command]
    t0 = time.perf_counter()
    try:
        outputs, bounds, artifacts = fn(config.params, config.seed)
    except ConfluenceError as exc:
        exc.context.setdefault("command", config.command)
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad parameters for {config.command}: {exc}", command=config.command) from None
    wall = time.perf_counter() - t0
    rec = RunRecord(config.command, config.to_dict(), dict(TOLERANCES), outputs, bounds, [], wall)
    for kind, texts in artifacts.items():
        target = config.output.get(kind)
        if target:
            rec.artifacts.extend({"kind": kind, "path": path} for path in _artifact_paths(target, len(texts)))
    return rec, artifacts


def write_outputs(config: ExperimentConfig, rec: RunRecord, artifacts: dict) -> None:
    for kind, texts in artifacts.items():
        target = config.output.get(kind)
        if target:
            for path, text in zip(_artifact_paths(target, len(texts)), texts):
                write_atomic(path, text)
    if config.output.get("json"):
        write_atomic(config.output["json"], dumps(rec.to_json()))


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigInvalid(message, key="argv")


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigInvalid(f"--set expects key=value, got '{item}'", key=item)
        key, raw = item.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="confluence", description="Numerical experiments on confluent singularities.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    for name in list(COMMANDS) + ["run"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", metavar="KEY=JSON", help="override one parameter")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--json", help="write the run record here instead of stdout")
        sp.add_argument("--svg", help="SVG output path")
        sp.add_argument("--csv", help="CSV output path")
        sp.add_argument("--no-timing", action="store_true", help="omit wall time from stdout output")
    return ap


def config_from_args(ns) -> ExperimentConfig:
    base = {}
    if ns.config:
        base = ExperimentConfig.load(ns.config).to_dict()
        if ns.command != "run" and base["command"] != ns.command:
            raise ConfigInvalid(f"config is for '{base['command']}', not '{ns.command}'", key="command")
    elif ns.command == "run":
        raise ConfigInvalid("run needs --config", key="config")
    command = base.get("command", ns.command)
    params = dict(base.get("params", {}))
    params.update(_parse_set(ns.set))
    output = dict(base.get("output", {}))
    for kind in ("json", "svg", "csv"):
        if getattr(ns, kind):
            output[kind] = getattr(ns, kind)
    seed = ns.seed if ns.seed is not None else base.get("seed", 0)
    return ExperimentConfig.build(command, params, seed, output)


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if not ns.command:
            raise ConfigInvalid("no command given", key="command")
        cfg = config_from_args(ns)
        rec, artifacts = run(cfg)
        write_outputs(cfg, rec, artifacts)
        if not cfg.output.get("json"):
            sys.stdout.write(dumps(rec.to_json(timing=not ns.no_timing)))
        return 0
    except ConfluenceError as exc:
        sys.stderr.write(json.dumps(exc.to_json(), sort_keys=True) + "\n")
        return exc.exit_code
    except NotImplementedError as exc:
        sys.stderr.write(json.dumps({"error": "NotImplemented", "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
