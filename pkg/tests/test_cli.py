from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confluence.cli import COMMANDS, main, run, write_outputs
from confluence.config import DEFAULTS, ExperimentConfig
from confluence.errors import ConfigInvalid
from confluence.polyfield import PolyField, separatrices_at_infinity, zones
from confluence.record import dumps
from confluence.svg import emit_svg

SVG_NS = "{http://www.w3.org/2000/svg}"

EULER_AT = {"system": {"preset": "euler"}, "eps_hat": {"r": 0.01, "theta": 0.3}}
PARAMS = {"compare-stokes": {"first": EULER_AT, "second": dict(EULER_AT, gauge=[1, 3])},
          "classify-des": {"grid": {"re": [-1, 1, 3], "im": [-1, 1, 3]}, "margins": False}}


def _record(command, params=None, seed=0):
    rec, art = run(ExperimentConfig.build(command, params or PARAMS.get(command, {}), seed))
    return rec, art


# ---------------------------------------------------------------------------
# configuration

def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig.build("horn", {"end": "inf", "samples": 32}, 7, {"json": "out.json"})
    path = tmp_path / "c.json"
    path.write_text(cfg.dumps())
    back = ExperimentConfig.load(str(path))
    assert back == cfg and back.dumps() == cfg.dumps()


@settings(max_examples=40, deadline=None)
@given(command=st.sampled_from(sorted(DEFAULTS)), seed=st.integers(0, 2 ** 31),
       out=st.sampled_from([{}, {"json": "a.json"}, {"svg": "p.svg", "csv": "t.csv"}]))
def test_property_config_serialization_lossless(command, seed, out):
    cfg = ExperimentConfig.build(command, {}, seed, out)
    assert ExperimentConfig.from_dict(json.loads(cfg.dumps())) == cfg


def test_unknown_key_named():
    with pytest.raises(ConfigInvalid) as info:
        ExperimentConfig.build("portrait", {"bogus": 1})
    assert info.value.context["key"] == "bogus"


def test_unknown_top_level_and_output_keys():
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_dict({"command": "catalan", "colour": 1})
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.build("catalan", {}, 0, {"png": "x.png"})
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.build("nonsense")


# ---------------------------------------------------------------------------
# run records

@pytest.mark.parametrize("command", sorted(set(COMMANDS) - {"classify-des", "resurgence-node", "stokes-limit"}))
def test_every_command_runs_with_defaults(command):
    rec, _ = _record(command)
    d = rec.to_json()
    assert d["command"] == command and d["tolerances"] and "inputs_hash" in d
    json.loads(dumps(d))


def test_classify_des_small_grid_csv():
    rec, art = _record("classify-des")
    lines = art["csv"][0].splitlines()
    assert lines[0] == "re,im,domain,type,status,margin" and len(lines) == 10


def test_determinism_excluding_timing():
    a = dumps(_record("portrait", {"k": 2, "eps": [[0, 0], [-1, 0]]})[0].to_json(timing=False))
    b = dumps(_record("portrait", {"k": 2, "eps": [[0, 0], [-1, 0]]})[0].to_json(timing=False))
    assert a == b and "wall_time" not in a


def test_timing_isolated():
    d = _record("catalan")[0].to_json()
    assert set(d["timing"]) == {"wall_time"}
    assert "wall_time" not in json.dumps({k: v for k, v in d.items() if k != "timing"})


def test_portrait_grid_writes_svg_atlas(tmp_path):
    grid = [[[0, 0], [-1, 0]], [[0, 0], [1, 0]], [[0, 0], [0.5, 0.5]]]
    cfg = ExperimentConfig.build("portrait", {"k": 2, "grid": grid}, 0,
                                 {"svg": str(tmp_path / "p.svg"), "json": str(tmp_path / "r.json")})
    rec, art = run(cfg)
    write_outputs(cfg, rec, art)
    names = sorted(os.listdir(tmp_path))
    assert names == ["p_000.svg", "p_001.svg", "p_002.svg", "r.json"]
    atlas = json.loads((tmp_path / "r.json").read_text())["outputs"]["portraits"]
    assert len(atlas) == 3 and atlas[0]["type"] != atlas[1]["type"]
    for n in names[:3]:
        ET.parse(tmp_path / n)


def test_complex_serialized_as_pairs():
    d = json.loads(dumps(_record("lavaurs")[0].to_json()))
    assert isinstance(d["outputs"]["K"], list) and len(d["outputs"]["K"]) == 2


# ---------------------------------------------------------------------------
# SVG

def _svg_counts(text):
    root = ET.fromstring(text)
    paths = root.findall(f".//{SVG_NS}path")
    seps = [p for p in paths if p.get("class", "").startswith("separatrix")]
    zone = [p for p in paths if p.get("class") == "zone"]
    circles = root.findall(f".//{SVG_NS}circle")
    warn = [t for t in root.iter(f"{SVG_NS}text") if t.get("class") == "warning"]
    return seps, zone, circles, warn


def test_svg_k1_counts():
    d = zones(separatrices_at_infinity(PolyField(1, (-0.04,))))
    seps, zone, circles, warn = _svg_counts(emit_svg(d))
    assert len(seps) == 2 and len(circles) == 2 and len(zone) == 1 and not warn
    assert {p.get("class") for p in seps} == {"separatrix repelling", "separatrix attracting"}


def test_svg_unstable_has_warning_and_no_zones():
    g = separatrices_at_infinity(PolyField(2, (complex(0.7071067811865476, 0.7071067811865476), 0)))
    seps, zone, circles, warn = _svg_counts(emit_svg(g))
    assert seps and not zone and len(warn) == 1


def test_svg_deterministic_and_legend():
    d = zones(separatrices_at_infinity(PolyField(2, (0, -1))))
    a, b = emit_svg(d), emit_svg(d)
    assert a == b
    assert "k = 2" in a and "alpha = 0" in a and "eps = (" in a


# ---------------------------------------------------------------------------
# main and exit codes

def test_main_ok(capsys):
    assert main(["catalan", "--set", "k=[1,5]", "--no-timing"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert [r["catalan"] for r in out["outputs"]["rows"]] == [1, 2, 5, 14, 42]


def test_main_config_error_exit_2(capsys):
    assert main(["portrait", "--set", "bogus=1"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigInvalid" and err["context"]["key"] == "bogus"


def test_main_unknown_command_exit_2(capsys):
    assert main(["frobnicate"]) == 2
    json.loads(capsys.readouterr().err)


def test_main_numeric_error_exit_3(capsys):
    assert main(["lavaurs", "--set", 'eps_hat={"r": 0.01, "theta": 0.2}']) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "NotSiegel" and err["context"]["command"] == "lavaurs"


def test_threads_env_validated(monkeypatch, capsys):
    monkeypatch.setenv("CONFLUENCE_THREADS", "many")
    assert main(["classify-des", "--set", 'grid={"re": [0, 1, 2], "im": [0, 1, 2]}']) == 2


def test_run_subcommand_from_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(ExperimentConfig.build("invariants", {"eps": "1/25", "A": "1"}).dumps())
    assert main(["run", "--config", str(cfg), "--no-timing"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["command"] == "invariants"


@pytest.mark.skipif(shutil.which("confluence") is None, reason="console script not installed")
def test_console_script():
    p = subprocess.run(["confluence", "catalan", "--set", "k=[3,3]"], capture_output=True, text=True)
    assert p.returncode == 0 and p.stderr == ""
    p = subprocess.run([sys.executable, "-m", "confluence.cli", "zones", "--set", "oops=1"],
                       capture_output=True, text=True)
    assert p.returncode == 2 and json.loads(p.stderr)["context"]["key"] == "oops"
