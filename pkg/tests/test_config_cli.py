import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from fstirap.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main, run
from fstirap.config import SCHEMA, build_config, parse_quantity
from fstirap.exceptions import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

GEOMETRY = {
    "W_L": "20 um", "W_C": "30 um", "wavelength": "780 nm", "v": "2 m/s",
    "Omega0_area": 50, "G0_area": 50, "z0": "31.9 um", "d": "30.2 um",
}


def _write(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


@pytest.mark.parametrize("text, kind, expected", [
    ("31.9 um", "length", 31.9e-6),
    ("780nm", "length", 780e-9),
    ("100 us", "time", 1e-4),
    ("2 m/s", "velocity", 2.0),
    ("5 Mrad/s", "frequency", 5e6),
    ("5 MHz", "frequency", 2 * math.pi * 5e6),
    ("1 kHz", "frequency", 2 * math.pi * 1e3),
    (3.5, "length", 3.5),
    ("0.5 pi", "angle", math.pi / 2),
])
def test_parse_quantity(text, kind, expected):
    assert parse_quantity(text, kind) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("bad, kind", [("3 MHz", "length"), ("abc", "length"), (True, "time"),
                                       ("1e999 m", "length")])
def test_parse_quantity_errors(bad, kind):
    with pytest.raises(ConfigError):
        parse_quantity(bad, kind, "geometry.x")


def test_area_shortcuts():
    cfg = build_config({"mode": "simulate", "geometry": GEOMETRY})
    assert cfg.geometry.Omega0 == pytest.approx(5e6)
    assert cfg.geometry.G0 == pytest.approx(50 * 2 / 30e-6)
    assert cfg.geometry.z0 == pytest.approx(31.9e-6)


def test_schema_rejects_unknown_key():
    with pytest.raises(ConfigError, match="geometry"):
        build_config({"mode": "simulate", "geometry": {**GEOMETRY, "colour": 1}})


def test_geometry2_inherits_and_is_required():
    cfg = build_config({"mode": "protocol", "protocol": "atom-atom", "geometry": GEOMETRY,
                        "geometry2": {"z0": 0, "tau": "250 us"}})
    assert cfg.geometry2.W_C == cfg.geometry.W_C
    assert cfg.geometry2.tau == pytest.approx(2.5e-4)
    with pytest.raises(ConfigError, match="geometry2"):
        build_config({"mode": "protocol", "protocol": "atom-atom", "geometry": GEOMETRY})


def test_mode_conflict():
    with pytest.raises(ConfigError, match="mode"):
        build_config({"mode": "scan", "geometry": GEOMETRY}, mode="simulate")


def test_missing_w_c_exit_2(tmp_path, capsys):
    geom = {k: v for k, v in GEOMETRY.items() if k not in ("W_C", "G0_area")}
    geom["G0"] = "3 Mrad/s"
    path = _write(tmp_path, {"mode": "simulate", "geometry": geom})
    code = main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    assert "W_C" in capsys.readouterr().err


def test_invalid_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "mode": "simulate",\n  "geometry": {,}\n}')
    assert run(path) == EXIT_CONFIG
    assert ":3:" in capsys.readouterr().err


def test_simulate_half_passage(tmp_path):
    code = main(["simulate", "--config", str(CONFIGS / "half_stirap.json"),
                 "--out", str(tmp_path), "--samples", "200"])
    assert code == EXIT_OK
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    header = lines[0].split(",")
    last = dict(zip(header, lines[-1].split(",")))
    assert 0.45 <= float(last["P_g1_0"]) <= 0.55
    assert 0.45 <= float(last["P_g2_1"]) <= 0.55
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outputs"] == ["trajectory.csv", "simulate.json", "populations.svg"]
    assert manifest["tool_version"]
    assert manifest["wall_time_s"] > 0


def test_adiabaticity_products(tmp_path):
    path = _write(tmp_path, {"mode": "adiabaticity", "geometry": GEOMETRY})
    assert run(path, out_dir=tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "adiabaticity.json").read_text())
    assert rep["pump_area_product"] == pytest.approx(50, rel=1e-14)
    assert rep["stokes_area_product"] == pytest.approx(50, rel=1e-14)


def test_microwave_interaction_product(tmp_path):
    assert run(CONFIGS / "microwave_adiabaticity.json", out_dir=tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "adiabaticity.json").read_text())
    assert rep["interaction_product"] == pytest.approx(15, rel=1e-14)


def test_manifest_round_trip(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(CONFIGS / "half_stirap.json"), "--out", str(first),
                 "--samples", "100", "--format", "csv", "--format", "json"]) == EXIT_OK
    assert main(["run", "--config", str(first / "manifest.json"), "--out", str(second)]) == EXIT_OK
    for name in ("trajectory.csv", "simulate.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_scan_cli_small(tmp_path):
    doc = {"mode": "scan", "geometry": GEOMETRY,
           "scan": {"z0_range": ["30.9 um", "32.9 um"], "d_range": ["29.2 um", "31.2 um"],
                    "resolution": [3, 3]},
           "output": {"formats": ["csv", "json", "svg"]}}
    path = _write(tmp_path, doc)
    assert main(["scan", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
    pts = json.loads((tmp_path / "o" / "operating_points.json").read_text())
    assert pts["failures"] == 0
    assert any(abs(p["z0_m"] - 31.9e-6) < 1e-9 and abs(p["d_m"] - 30.2e-6) < 1e-9
               for p in pts["points"])
    assert (tmp_path / "o" / "scan.svg").exists()


def test_protocol_overlap_is_numeric_failure(tmp_path):
    doc = {"mode": "protocol", "protocol": "atom-atom", "geometry": GEOMETRY,
           "geometry2": {"z0": 0, "tau": "10 us"}}
    assert run(_write(tmp_path, doc), out_dir=tmp_path) == EXIT_NUMERIC


def test_protocol_subcommand(tmp_path):
    assert main(["protocol", "atom-atom", "--config", str(CONFIGS / "atom_atom.json"),
                 "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "protocol_atom_atom.json").read_text())
    assert doc["concurrence"] > 0.95


def test_classify_subcommand(tmp_path):
    path = _write(tmp_path, {"mode": "classify", "geometry": GEOMETRY})
    assert run(path, out_dir=tmp_path) == EXIT_OK
    assert json.loads((tmp_path / "classify.json").read_text())["process"] == "f_STIRAP"


def test_schema_command_matches_published(capsys):
    assert main(["schema"]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed == SCHEMA
    published = Path(__file__).resolve().parents[1] / "docs" / "config_schema.json"
    assert json.loads(published.read_text()) == SCHEMA


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "fstirap.cli", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0
    assert "fstirap" in out.stdout


def test_atomic_write_leaves_no_temp_files(tmp_path):
    from fstirap.io import atomic_write_json, atomic_write_text

    atomic_write_text(tmp_path / "a.txt", "x")
    atomic_write_json(tmp_path / "b.json", {"k": 1})
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.txt", "b.json"]
