"""Command-line interface: artifacts, exit codes, reproducibility."""

import csv
import json
import signal
import socket
import subprocess
import sys
import time
import urllib.error
import urllib.request
from pathlib import Path

import pytest
from click.testing import CliRunner

from ordtox.cli import main

# deliberately small protocol so the whole file runs in seconds; keeps
# 2 x 80 = 160 pooled draws, above the 100-draw floor of the kde writer
TINY = {"chains": 2, "adapt": 200, "burnin": 200, "retained": 80, "thin": 1, "seed": 7}

AFM11_PARAMS = (
    ["mu", "cv", "tau", "r0"]
    + [f"mtd[{i}]" for i in range(1, 18)]
    + [f"r[{i}]" for i in range(1, 18)]
)


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def write_tiny_config(directory: Path, **overrides) -> Path:
    path = directory / "config.json"
    path.write_text(json.dumps({**TINY, **overrides}), encoding="utf-8")
    return path


def read_rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def tiny_cfg(tmp_path_factory) -> Path:
    return write_tiny_config(tmp_path_factory.mktemp("cfg"))


@pytest.fixture(scope="module")
def fit_dir(tmp_path_factory, tiny_cfg) -> Path:
    out = tmp_path_factory.mktemp("fit") / "run"
    result = invoke("fit", "--config", tiny_cfg, "--out", out)
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture(scope="module")
def pred_dir(tmp_path_factory, tiny_cfg) -> Path:
    out = tmp_path_factory.mktemp("pred") / "run"
    result = invoke(
        "predict",
        "--drop-cohort", "6",
        "--doses", "130,130:400",
        "--config", tiny_cfg,
        "--out", out,
    )
    assert result.exit_code == 0, result.output
    return out


class TestValidate:
    def test_bundled_ledger_is_clean(self):
        result = invoke("validate")
        assert result.exit_code == 0
        assert "17 patients, no violations" in result.output

    def test_violation_prints_and_exits_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text(
            "patient_id,cohort,okdose,aedose,grade\n1,1,60,20,2\n", encoding="utf-8"
        )
        result = invoke("validate", "--data", bad)
        assert result.exit_code == 2
        assert "patient 1: okdose 60.0 exceeds aedose 20.0" in result.output

    def test_every_violation_is_printed(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text(
            "patient_id,cohort,okdose,aedose,grade\n"
            "1,1,60,20,2\n"
            "2,1,20,20,3\n",
            encoding="utf-8",
        )
        result = invoke("validate", "--data", bad)
        assert result.exit_code == 2
        lines = [l for l in result.output.splitlines() if l.startswith("patient")]
        assert len(lines) == 2

    def test_missing_file_is_an_io_error(self, tmp_path):
        result = invoke("validate", "--data", tmp_path / "absent.csv")
        assert result.exit_code == 1
        assert "cannot read" in result.output


class TestFitArtifacts:
    def test_writes_the_four_files(self, fit_dir):
        names = sorted(p.name for p in fit_dir.iterdir())
        assert names == [
            "densities.csv",
            "diagnostics.txt",
            "samples.csv",
            "summary.csv",
        ]

    def test_samples_layout(self, fit_dir):
        rows = read_rows(fit_dir / "samples.csv")
        assert list(rows[0]) == ["chain", "iteration", "parameter", "value"]
        assert len(rows) == 2 * 80 * len(AFM11_PARAMS)
        assert {r["chain"] for r in rows} == {"1", "2"}
        assert {r["parameter"] for r in rows} == set(AFM11_PARAMS)
        iterations = {int(r["iteration"]) for r in rows}
        # thin 1 after 200 burn-in sweeps: kept sweeps are 201..280
        assert min(iterations) == 201 and max(iterations) == 280
        for r in rows[:100]:
            float(r["value"])

    def test_summary_layout(self, fit_dir):
        rows = read_rows(fit_dir / "summary.csv")
        assert [r["parameter"] for r in rows[:4]] == ["mu", "cv", "tau", "r0"]
        assert [r["parameter"] for r in rows[4:]] == [f"mtd[{i}]" for i in range(1, 18)]
        mu = rows[0]
        assert float(mu["lower95"]) < float(mu["median"]) < float(mu["upper95"])
        for column in ("mean", "sseff", "psrf", "mcse"):
            float(mu[column])

    def test_density_curves_and_pooling(self, fit_dir):
        rows = read_rows(fit_dir / "densities.csv")
        assert list(rows[0]) == ["parameter", "pooled", "members", "log_dose", "density"]
        own = {r["members"] for r in rows if r["pooled"] == "0"}
        assert own == {str(i) for i in range(1, 18)}
        # patients tolerating the same dose with the same outcome share a curve
        pooled = {r["members"] for r in rows if r["pooled"] == "1"}
        assert pooled == {"5+6", "7+9", "10+11+13+14"}
        per_curve = {}
        for r in rows:
            per_curve.setdefault((r["members"], r["pooled"]), []).append(r)
        assert all(len(v) == 512 for v in per_curve.values())

    def test_diagnostics_report(self, fit_dir):
        text = (fit_dir / "diagnostics.txt").read_text(encoding="utf-8")
        assert "seed 7" in text
        assert "worst psrf" in text
        assert "smallest sseff" in text
        assert "mtd[17]" in text


class TestFitBehaviour:
    def test_repeated_seed_reproduces_samples_byte_for_byte(self, tmp_path, tiny_cfg, fit_dir):
        again = tmp_path / "again"
        result = invoke("fit", "--config", tiny_cfg, "--out", again)
        assert result.exit_code == 0
        assert (again / "samples.csv").read_bytes() == (fit_dir / "samples.csv").read_bytes()

    def test_seed_flag_overrides_config(self, tmp_path, tiny_cfg, fit_dir):
        other = tmp_path / "other"
        result = invoke("fit", "--config", tiny_cfg, "--seed", 11, "--out", other)
        assert result.exit_code == 0
        assert (other / "samples.csv").read_bytes() != (fit_dir / "samples.csv").read_bytes()

        same = tmp_path / "same"
        result = invoke("fit", "--config", tiny_cfg, "--seed", TINY["seed"], "--out", same)
        assert result.exit_code == 0
        assert (same / "samples.csv").read_bytes() == (fit_dir / "samples.csv").read_bytes()

    def test_nested_output_directory_is_created(self, tmp_path, tiny_cfg):
        out = tmp_path / "a" / "b" / "c"
        result = invoke("fit", "--config", tiny_cfg, "--out", out)
        assert result.exit_code == 0
        assert (out / "samples.csv").exists()

    def test_invalid_data_exits_2_and_writes_nothing(self, tmp_path, tiny_cfg):
        bad = tmp_path / "bad.csv"
        bad.write_text(
            "patient_id,cohort,okdose,aedose,grade\n1,1,60,20,2\n", encoding="utf-8"
        )
        out = tmp_path / "never"
        result = invoke("fit", "--data", bad, "--config", tiny_cfg, "--out", out)
        assert result.exit_code == 2
        assert "patient 1" in result.output
        assert not out.exists()

    def test_infeasible_data_exits_3_and_names_the_patient(self, tmp_path, tiny_cfg):
        # grade 5 right above a cleared dose: no spacing ratio above 1 fits
        impossible = tmp_path / "impossible.csv"
        impossible.write_text(
            "patient_id,cohort,okdose,aedose,grade\n9,1,100,101,5\n", encoding="utf-8"
        )
        out = tmp_path / "never"
        result = invoke("fit", "--data", impossible, "--config", tiny_cfg, "--out", out)
        assert result.exit_code == 3
        assert "infeasible" in result.output
        assert "patient 9" in result.output
        assert not out.exists()

    def test_missing_data_file_exits_1(self, tmp_path, tiny_cfg):
        result = invoke(
            "fit", "--data", tmp_path / "gone.csv", "--config", tiny_cfg,
            "--out", tmp_path / "x",
        )
        assert result.exit_code == 1
        assert "cannot read" in result.output

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({**TINY, "mu": 5.0}), encoding="utf-8")
        result = invoke("fit", "--config", cfg, "--out", tmp_path / "x")
        assert result.exit_code == 2
        assert "unknown config key" in result.output


class TestPredict:
    def test_prediction_columns_and_unit_sums(self, pred_dir):
        rows = read_rows(pred_dir / "prediction.csv")
        assert list(rows[0]) == ["dose", "grade", "probability", "mcse"]
        assert len(rows) == 12
        assert [r["grade"] for r in rows[:6]] == [str(g) for g in range(6)]
        by_block = [rows[:6], rows[6:]]
        assert {b[0]["dose"] for b in by_block} == {"130.0", "400.0"}
        for block in by_block:
            assert sum(float(r["probability"]) for r in block) == 1.0

    def test_restricted_summary_covers_the_augmented_model(self, pred_dir):
        names = [r["parameter"] for r in read_rows(pred_dir / "restricted_summary.csv")]
        assert names[:4] == ["mu", "cv", "tau", "r0"]
        assert "mtd[new@0]" in names and "mtd[new@130]" in names
        # cohort 6 was dropped, so its patients must not be fitted
        assert not any(n in names for n in ("mtd[15]", "mtd[16]", "mtd[17]"))
        assert not any(n.startswith("r[") for n in names)

    def test_echoes_conditioning_in_risk_lines(self, tmp_path, tiny_cfg):
        out = tmp_path / "run"
        result = invoke(
            "predict", "--drop-cohort", "6", "--doses", "130,130:400",
            "--config", tiny_cfg, "--out", out,
        )
        assert result.exit_code == 0
        assert "dose 130: " in result.output
        assert "dose 400 after no toxicity at 130: " in result.output
        assert "P(grade 5)" in result.output

    def test_vanishing_dose_is_safe(self, tmp_path, tiny_cfg):
        out = tmp_path / "run"
        result = invoke(
            "predict", "--doses", "0.001", "--config", tiny_cfg, "--out", out
        )
        assert result.exit_code == 0
        rows = read_rows(out / "prediction.csv")
        assert len(rows) == 6
        assert float(rows[0]["probability"]) >= 0.999

    def test_scenario_file_matches_flags(self, tmp_path, tiny_cfg, pred_dir):
        scenario = tmp_path / "scenario.json"
        scenario.write_text(
            json.dumps({"drop_cohorts": ["6"], "doses": ["130", "130:400"]}),
            encoding="utf-8",
        )
        out = tmp_path / "run"
        result = invoke(
            "predict", "--scenario", scenario, "--config", tiny_cfg, "--out", out
        )
        assert result.exit_code == 0
        assert (out / "prediction.csv").read_bytes() == (
            pred_dir / "prediction.csv"
        ).read_bytes()

    def test_scenario_excludes_the_flag_form(self, tmp_path, tiny_cfg):
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps({"doses": ["130"]}), encoding="utf-8")
        result = invoke(
            "predict", "--scenario", scenario, "--doses", "130",
            "--config", tiny_cfg, "--out", tmp_path / "x",
        )
        assert result.exit_code == 2
        assert "--scenario replaces" in result.output

    def test_unknown_scenario_key_exits_2(self, tmp_path):
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps({"drop": ["6"]}), encoding="utf-8")
        result = invoke("predict", "--scenario", scenario, "--out", tmp_path / "x")
        assert result.exit_code == 2
        assert "unknown scenario key 'drop'" in result.output

    def test_missing_scenario_file_exits_1(self, tmp_path):
        result = invoke(
            "predict", "--scenario", tmp_path / "gone.json", "--out", tmp_path / "x"
        )
        assert result.exit_code == 1
        assert "cannot read" in result.output

    def test_garbled_dose_spec_exits_2(self, tmp_path):
        result = invoke("predict", "--doses", "abc", "--out", tmp_path / "x")
        assert result.exit_code == 2
        assert "bad dose spec 'abc'" in result.output

    def test_three_part_dose_spec_exits_2(self, tmp_path):
        result = invoke("predict", "--doses", "1:2:3", "--out", tmp_path / "x")
        assert result.exit_code == 2
        assert "OKDOSE:DOSE" in result.output

    def test_no_candidates_exits_2(self, tmp_path):
        result = invoke("predict", "--out", tmp_path / "x")
        assert result.exit_code == 2
        assert "at least one candidate" in result.output


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def http_json(method: str, url: str, payload=None, timeout=10.0):
    body = None if payload is None else json.dumps(payload).encode()
    request = urllib.request.Request(
        url, data=body, method=method,
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return response.status, json.loads(response.read())


def wait_for_server(port: int, proc, deadline=30.0) -> None:
    limit = time.monotonic() + deadline
    while time.monotonic() < limit:
        if proc.poll() is not None:
            raise AssertionError(f"server died early: {proc.stderr.read()}")
        try:
            status, _ = http_json("GET", f"http://127.0.0.1:{port}/health", timeout=2)
            if status == 200:
                return
        except (urllib.error.URLError, OSError):
            time.sleep(0.1)
    raise AssertionError("server did not come up")


class TestServe:
    def test_serves_sessions_then_stops_cleanly_on_interrupt(self):
        port = free_port()
        proc = subprocess.Popen(
            [sys.executable, "-m", "ordtox.cli", "serve", "--port", str(port)],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
        )
        try:
            wait_for_server(port, proc)
            base = f"http://127.0.0.1:{port}"
            status, session = http_json("POST", f"{base}/sessions", {"dataset": "afm11"})
            assert status == 201
            assert len(session["patients"]) == 17
            sid = session["session_id"]
            status, _ = http_json("POST", f"{base}/sessions/{sid}/fit", {"config": TINY})
            assert status == 200
            limit = time.monotonic() + 60
            while time.monotonic() < limit:
                _, state = http_json("GET", f"{base}/sessions/{sid}/fit")
                if state["status"] in ("done", "failed"):
                    break
                time.sleep(0.1)
            assert state["status"] == "done"
            status, summary = http_json("GET", f"{base}/sessions/{sid}/summary")
            assert status == 200
            assert len(summary["rows"]) == 21
        finally:
            proc.send_signal(signal.SIGINT)
            code = proc.wait(timeout=30)
        assert code == 0

    def test_busy_port_exits_1(self):
        with socket.socket() as sock:
            sock.bind(("127.0.0.1", 0))
            sock.listen(1)
            port = sock.getsockname()[1]
            proc = subprocess.run(
                [sys.executable, "-m", "ordtox.cli", "serve", "--port", str(port)],
                capture_output=True, text=True, timeout=60,
            )
        assert proc.returncode == 1
        assert "cannot serve" in proc.stderr
