"""Scenario runner: exit codes, schema validation, determinism, CSV output."""

import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from abconvex.cli import (
    EXIT_BAD_SCENARIO,
    EXIT_NEGATIVE,
    EXIT_OK,
    REPORT_SCHEMA_PATH,
    SCHEMA_PATH,
    ext_from_json,
    ext_to_json,
    load_schema,
    run_scenario,
)

REPO = Path(__file__).resolve().parents[1]
SCENARIOS = REPO / "scenarios"

ALL_SCENARIOS = sorted(SCENARIOS.glob("*.json"))
EXPECTED_EXITS = {
    "certify_vee_down_fail.json": EXIT_NEGATIVE,
}


def run_file(path, tmp_path, name="out.json", **kw):
    out = tmp_path / name
    code = run_scenario(str(path), out=str(out), **kw)
    report = json.loads(out.read_text()) if out.exists() else None
    return code, report, out


class TestExtRealEncoding:
    def test_round_trip(self):
        for v in (0.0, -1.5, np.inf, -np.inf, 1e300):
            assert ext_from_json(ext_to_json(v)) == v

    def test_accepts_bare_numbers(self):
        assert ext_from_json(2) == 2.0
        assert ext_from_json({"finite": 3.5}) == 3.5

    def test_rejects_junk(self):
        from abconvex.errors import ScenarioError

        with pytest.raises(ScenarioError):
            ext_from_json("inf")


class TestScenarios:
    @pytest.mark.parametrize("path", ALL_SCENARIOS, ids=lambda p: p.name)
    def test_runs_and_validates(self, path, tmp_path):
        code, report, _ = run_file(path, tmp_path)
        assert code == EXPECTED_EXITS.get(path.name, EXIT_OK)
        jsonschema.validate(report, load_schema(REPORT_SCHEMA_PATH))
        jsonschema.validate(report["scenario"], load_schema(SCHEMA_PATH))

    def test_gap_vee_down_values(self, tmp_path):
        code, report, _ = run_file(SCENARIOS / "gap_vee_down.json", tmp_path)
        assert code == EXIT_OK
        assert report["results"]["gap"] == {"finite": 1.0}
        assert report["results"]["dual"] == {"finite": -1.0}

    def test_transport_value(self, tmp_path):
        _, report, _ = run_file(SCENARIOS / "transport_2x2.json", tmp_path)
        assert report["results"]["value"] == 1.0
        assert report["results"]["slack_violations"] == 0

    def test_conic_value(self, tmp_path):
        _, report, _ = run_file(SCENARIOS / "conic_small.json", tmp_path)
        assert report["results"]["primal"] == {"finite": 11.0}

    def test_constrained_minimal_rung(self, tmp_path):
        _, report, _ = run_file(SCENARIOS / "constrained_2x2.json", tmp_path)
        assert report["results"]["minimal_rung"] == 2.0
        assert report["results"]["duality"]["gap"] == {"finite": 0.0}

    def test_conjugate_values(self, tmp_path):
        _, report, _ = run_file(SCENARIOS / "conjugate_abs.json", tmp_path)
        assert report["results"]["conjugate"] == [
            {"finite": 1.0}, {"finite": 0.0}, {"finite": 0.0},
            {"finite": 0.0}, {"finite": 1.0},
        ]

    def test_peaking_witness_values(self, tmp_path):
        _, report, _ = run_file(SCENARIOS / "peaking_demo.json", tmp_path)
        w = report["results"]["peaking_witness"]
        assert w["a"] == 4.5 and w["c"] == 0.5
        assert report["results"]["draws_verified"] == 5


class TestDeterminism:
    @pytest.mark.parametrize("name", ["peaking_demo.json", "gap_vee_down.json",
                                      "transport_2x2.json"])
    def test_byte_identical_reports(self, name, tmp_path):
        _, _, out1 = run_file(SCENARIOS / name, tmp_path, name="a.json", seed=123)
        _, _, out2 = run_file(SCENARIOS / name, tmp_path, name="b.json", seed=123)
        assert out1.read_bytes() == out2.read_bytes()

    def test_seed_changes_draws(self, tmp_path):
        _, r1, _ = run_file(SCENARIOS / "peaking_demo.json", tmp_path,
                            name="a.json", seed=1)
        _, r2, _ = run_file(SCENARIOS / "peaking_demo.json", tmp_path,
                            name="b.json", seed=2)
        assert r1["results"]["draws"] != r2["results"]["draws"]


class TestErrorPaths:
    def test_schema_violation_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"kind": "transport", "mu": [1.0]}))
        assert run_scenario(str(bad), out=str(tmp_path / "o.json")) == EXIT_BAD_SCENARIO

    def test_unreadable_exit_2(self, tmp_path):
        assert run_scenario(str(tmp_path / "missing.json")) == EXIT_BAD_SCENARIO

    def test_invariant_violation_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({
            "kind": "transport",
            "cost": [[1.0]], "mu": [1.0], "nu": [2.0],
        }))
        assert run_scenario(str(bad), out=str(tmp_path / "o.json")) == EXIT_BAD_SCENARIO

    def test_certify_above_primal_exit_2(self, tmp_path):
        sc = json.loads((SCENARIOS / "certify_vee_up.json").read_text())
        sc["alpha"] = 5.0
        p = tmp_path / "sc.json"
        p.write_text(json.dumps(sc))
        assert run_scenario(str(p), out=str(tmp_path / "o.json")) == EXIT_BAD_SCENARIO

    def test_nonmetric_domain_exit_2(self, tmp_path):
        sc = json.loads((SCENARIOS / "gap_vee_down.json").read_text())
        sc["domain"]["metric"] = {"custom": [[0, 1, 1, 1, 1]] * 5}
        p = tmp_path / "sc.json"
        p.write_text(json.dumps(sc))
        assert run_scenario(str(p), out=str(tmp_path / "o.json")) == EXIT_BAD_SCENARIO


class TestCsvAndCostCsv:
    def test_refinement_csv(self, tmp_path):
        csv_path = tmp_path / "curve.csv"
        code = run_scenario(str(SCENARIOS / "gap_refinement.json"),
                            out=str(tmp_path / "o.json"), csv_path=str(csv_path))
        assert code == EXIT_OK
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "points,spacing,gap,lsc_defect"
        assert len(lines) == 6

    def test_csv_rejected_without_curve(self, tmp_path):
        code = run_scenario(str(SCENARIOS / "transport_2x2.json"),
                            out=str(tmp_path / "o.json"),
                            csv_path=str(tmp_path / "c.csv"))
        assert code == EXIT_BAD_SCENARIO

    def test_cost_loaded_from_csv(self, tmp_path):
        cost_path = tmp_path / "cost.csv"
        cost_path.write_text("0.0,1.0\n1.0,0.0\n")
        sc = {"kind": "transport", "cost_csv": str(cost_path),
              "mu": [1.0, 0.0], "nu": [0.0, 1.0]}
        p = tmp_path / "sc.json"
        p.write_text(json.dumps(sc))
        code, report, _ = run_file(p, tmp_path)
        assert code == EXIT_OK and report["results"]["value"] == 1.0


class TestEntryPoint:
    def test_subprocess_invocation(self, tmp_path):
        out = tmp_path / "r.json"
        proc = subprocess.run(
            [sys.executable, "-m", "abconvex.cli", "transport",
             "--scenario", str(SCENARIOS / "transport_2x2.json"),
             "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert json.loads(out.read_text())["results"]["value"] == 1.0
        assert "elapsed_s=" in proc.stderr

    def test_kind_mismatch(self):
        proc = subprocess.run(
            [sys.executable, "-m", "abconvex.cli", "conic",
             "--scenario", str(SCENARIOS / "transport_2x2.json")],
            capture_output=True, text=True,
        )
        assert proc.returncode == EXIT_BAD_SCENARIO


class TestSchemaCopiesInSync:
    def test_docs_and_package_match(self):
        for name in ("schema.json", "report_schema.json"):
            docs = (REPO / "docs" / name).read_text()
            pkg = (REPO / "src" / "abconvex" / "schemas" / name).read_text()
            assert docs == pkg
