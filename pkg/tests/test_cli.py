"""Configuration schema, the run/report commands and their artifacts."""
import csv
import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from hartreelab.cli import main
from hartreelab.config import ConfigError, load_config, validate
from hartreelab.decay import case_for, classify_regime
from hartreelab.svg import line_plot

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_RUN = """\
experiment: hartree-run
name: small
grid: {dim: 1, points: 64, box_length: 40.0}
potential: {lam: 0.5, mu: 1.0}
solver: {dt: 0.02, horizon: 1.0, record_stride: 5}
"""


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestSchema:
    def test_gamma_out_of_range(self, tmp_path, capsys):
        p = write(tmp_path, SMALL_RUN.replace("mu: 1.0}", "mu: 1.0, gamma: 2}"))
        assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert "run.yaml:4: potential.gamma" in err and "3/2" in err
        assert not (tmp_path / "o").exists()

    def test_line_anchor(self, tmp_path):
        text = "experiment: hartree-run\ngrid:\n  dim: 1\n  points: 48\n  box_length: 4\n" \
               "potential: {lam: 1}\nsolver: {dt: 0.1, horizon: 1}\n"
        with pytest.raises(ConfigError, match=r"run\.yaml:4: grid\.points: must be a power of two"):
            load_config(write(tmp_path, text))

    @pytest.mark.parametrize("patch,field", [
        ("potential: {lam: 0.5, mu: 1.0, colour: red}", "potential.colour"),
        ("potential: {lam: 0.5, mu: 1.0}\nextra: 1", "extra"),
    ])
    def test_unknown_keys(self, tmp_path, patch, field):
        p = write(tmp_path, SMALL_RUN.replace("potential: {lam: 0.5, mu: 1.0}", patch))
        with pytest.raises(ConfigError, match=field):
            load_config(p)

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="solver.horizon: required"):
            validate({"experiment": "hartree-run", "grid": {"dim": 1, "points": 8, "box_length": 1},
                      "potential": {"lam": 1}, "solver": {"dt": 0.1}})

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="experiment"):
            validate({"experiment": "nope"})

    def test_type_errors(self):
        with pytest.raises(ConfigError, match="fock.cutoff: must be an integer"):
            validate({"experiment": "fock-verify", "fock": {"cutoff": 20.5}})
        with pytest.raises(ConfigError, match="potential.lam: must be a number"):
            validate({"experiment": "rate-scan", "grid": {"dim": 1, "points": 8, "box_length": 1},
                      "potential": {"lam": "big"}})

    def test_invalid_yaml(self, tmp_path, capsys):
        p = write(tmp_path, "experiment: [unclosed\n")
        assert main(["run", str(p)]) == 2
        assert "not valid YAML" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.yaml")]) == 2

    def test_defaults_filled(self):
        cfg = validate({"experiment": "fock-verify"})
        assert cfg.sections["fock"]["cutoff"] == 24 and cfg.seed == 0 and cfg.name == "fock-verify"

    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
    def test_shipped_configs_validate(self, path):
        assert load_config(path).kind == path.stem


class TestRun:
    def test_hartree_run_artifacts(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["run", str(write(tmp_path, SMALL_RUN)), "--out", str(out)]) == 0
        m = json.loads((out / "manifest.json").read_text())
        assert m["passed"] and m["checks"]["mass_conservation"]
        assert m["config"]["potential"]["gamma"] == 1.0
        assert {"numpy", "scipy", "hartreelab"} <= set(m["versions"])
        assert m["wall_time"] > 0
        for name in m["outputs"]:
            assert (out / name).exists() or Path(name).exists()
        svgs = list(out.glob("*.svg"))
        assert len(svgs) >= 3
        for s in svgs:
            ET.parse(s)
        assert "PASS hartree-run" in capsys.readouterr().out

    def test_deterministic_csv(self, tmp_path):
        p = write(tmp_path, SMALL_RUN)
        main(["run", str(p), "--out", str(tmp_path / "a")])
        main(["run", str(p), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "record.csv").read_bytes() == (tmp_path / "b" / "record.csv").read_bytes()

    def test_csv_is_rectangular(self, tmp_path):
        main(["run", str(write(tmp_path, SMALL_RUN)), "--out", str(tmp_path / "o")])
        rows = list(csv.reader((tmp_path / "o" / "record.csv").open()))
        assert len({len(r) for r in rows}) == 1 and rows[0][0] == "t"
        assert np.all(np.diff([float(r[0]) for r in rows[1:]]) > 0)

    def test_regime_sweep_matches_classifier(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", str(CONFIGS / "regime-sweep.yaml"), "--out", str(out)]) == 0
        rows = list(csv.reader((out / "regime.csv").open(newline="")))
        assert len(rows) == 4 and all(len(r) == 5 for r in rows)
        cells = ((0.5, 0.0), (1.0, 0.0), (1.25, 0.0), (1.0, 1.0))
        for row, lam in zip(rows[1:], (10.0, 0.5, -10.0)):
            for cell, (gamma, mu) in zip(row[1:], cells):
                expected = f"{classify_regime(lam, gamma, mu, 1.0)} [case {case_for(lam, gamma, mu, 1.0)}]"
                assert cell == expected

    def test_fock_verify_passes(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", str(CONFIGS / "fock-verify.yaml"), "--out", str(out)]) == 0
        report = json.loads((out / "fock_report.json").read_text())
        assert report and all(r["passed"] for r in report)

    def test_failed_check_exits_one(self, tmp_path, capsys):
        text = SMALL_RUN.replace("hartree-run", "decay-fit") + "fit: {window: [0.2, null], expect: [5.0, 6.0]}\n"
        out = tmp_path / "o"
        assert main(["run", str(write(tmp_path, text)), "--out", str(out)]) == 1
        m = json.loads((out / "manifest.json").read_text())
        assert not m["passed"] and m["checks"]["exponent_in_range"] is False
        assert "exponent_in_range" in capsys.readouterr().err


class TestReport:
    def _fake(self, root, name, passed, kind="hartree-run"):
        d = root / name
        d.mkdir(parents=True)
        (d / "manifest.json").write_text(json.dumps({
            "experiment": kind, "name": name, "passed": passed, "checks": {"c": passed},
            "summary": {}, "error": None}))

    def test_single(self, tmp_path, capsys):
        self._fake(tmp_path, "a", True)
        assert main(["report", str(tmp_path)]) == 0
        assert "1/1 pass" in (tmp_path / "summary.md").read_text()
        assert json.loads((tmp_path / "summary.json").read_text())["passed"] == 1

    def test_failures_first(self, tmp_path):
        self._fake(tmp_path, "a_ok", True)
        self._fake(tmp_path, "b_bad", False)
        self._fake(tmp_path, "c_ok", True)
        main(["report", str(tmp_path)])
        runs = json.loads((tmp_path / "summary.json").read_text())["runs"]
        assert [r["name"] for r in runs] == ["b_bad", "a_ok", "c_ok"]
        assert runs[0]["failed"] == ["c"]

    def test_regime_table_annotated(self, tmp_path):
        d = tmp_path / "fit"
        d.mkdir()
        (d / "manifest.json").write_text(json.dumps({
            "experiment": "decay-fit", "name": "fit", "passed": True, "checks": {},
            "summary": {"case": "4", "exponent": 1.49}, "error": None}))
        main(["report", str(tmp_path)])
        table = json.loads((tmp_path / "summary.json").read_text())["regime_table"]
        assert len(table) == 4 and len(table[0]) == 5
        assert any("measured p=1.490" in cell for row in table for cell in row)
        md = (tmp_path / "summary.md").read_text().split("## Regime table")[1]
        rows = [line for line in md.splitlines() if line.startswith("|")]
        assert {line.replace("\\|", "").count("|") for line in rows} == {6}

    def test_empty_directory(self, tmp_path, capsys):
        assert main(["report", str(tmp_path)]) == 2
        assert "no manifest.json" in capsys.readouterr().err

    def test_not_a_directory(self, tmp_path):
        assert main(["report", str(tmp_path / "nothing")]) == 2


def test_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2


def test_svg_plot(tmp_path):
    t = np.linspace(0, 10, 50)
    path = line_plot({"a": (1 + t, (1 + t) ** -1.5), "b": (1 + t, np.zeros(50))}, tmp_path / "p.svg",
                     title="decay <&>", logx=True, logy=True)
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    lines = [e for e in root.iter() if e.tag.endswith("polyline")]
    assert len(lines) == 1 and len(lines[0].get("points").split()) == 50
