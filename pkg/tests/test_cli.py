"""Command-line interface: config validation, artifacts, exit codes."""

import json
import math
import os

import pytest

from mfbranch.cli import (
    BRANCH_HEADER,
    THERMO_HEADER,
    dumps_json,
    format_float,
    load_config,
    main,
)
from mfbranch.errors import ConfigurationError
from mfbranch.mesh import Rectangle, UnitDisk


def write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def quick_disk_config(**overrides):
    """A sub-second run: coarse disk, natural phase truncated early."""
    cfg = {
        "domain": {"type": "disk"},
        "resolution": 12,
        "lambda_max": 6.0,
        "report_samples": 4,
        "controls": {"k_eigen": 4},
    }
    cfg.update(overrides)
    return cfg


def read_csv_columns(path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, {
        name: [row[j] for row in rows] for j, name in enumerate(header)
    }


class TestConfigValidation:
    def test_negative_tolerance_rejected(self, tmp_path):
        cfg = quick_disk_config(controls={"newton_tol": -1e-10})
        with pytest.raises(ConfigurationError, match="newton_tol"):
            load_config(write_config(tmp_path, cfg))

    def test_negative_tolerance_exits_2_without_artifacts(self, tmp_path):
        cfg = quick_disk_config(controls={"newton_tol": -1e-10})
        out = tmp_path / "artifacts"
        rc = main(["run", "--config", write_config(tmp_path, cfg), "--out", str(out)])
        assert rc == 2
        assert not out.exists()

    def test_shipped_bad_config_exits_2(self, tmp_path):
        out = tmp_path / "artifacts"
        rc = main(["run", "--config", "examples_configs/bad.json", "--out", str(out)])
        assert rc == 2
        assert not out.exists()

    def test_unknown_top_level_key_rejected(self, tmp_path):
        cfg = quick_disk_config()
        cfg["resolutoin"] = 16
        with pytest.raises(ConfigurationError, match="resolutoin"):
            load_config(write_config(tmp_path, cfg))

    def test_unknown_controls_key_rejected(self, tmp_path):
        cfg = quick_disk_config(controls={"newton_tolerance": 1e-10})
        with pytest.raises(ConfigurationError, match="newton_tolerance"):
            load_config(write_config(tmp_path, cfg))

    def test_lambda_cap_must_exceed_concentration_threshold(self, tmp_path):
        cfg = quick_disk_config(controls={"lambda_cap": 25.0})
        with pytest.raises(ConfigurationError, match="8\\*pi"):
            load_config(write_config(tmp_path, cfg))

    def test_missing_file_and_malformed_json_exit_2(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        assert main(["run", "--config", str(broken)]) == 2

    def test_domain_variants_parse(self, tmp_path):
        disk = load_config(
            write_config(tmp_path, quick_disk_config(), name="d.json")
        )
        assert isinstance(disk.domain, UnitDisk)
        cfg = quick_disk_config(domain={"type": "rectangle", "width": 4, "height": 1})
        rect = load_config(write_config(tmp_path, cfg, name="r.json"))
        assert isinstance(rect.domain, Rectangle)
        assert rect.domain.aspect_ratio == 4.0
        cfg = quick_disk_config(domain={"type": "square", "side": 2.0})
        sq = load_config(write_config(tmp_path, cfg, name="s.json"))
        assert isinstance(sq.domain, Rectangle)
        assert sq.domain.width == sq.domain.height == 2.0

    def test_azimuthal_override_only_for_disks(self, tmp_path):
        cfg = quick_disk_config(
            domain={"type": "rectangle", "width": 2, "height": 1}, n_theta=64
        )
        with pytest.raises(ConfigurationError, match="n_theta"):
            load_config(write_config(tmp_path, cfg))

    def test_lambda_start_must_be_below_concentration_threshold(self, tmp_path):
        cfg = quick_disk_config(lambda_start=9.0 * math.pi)
        with pytest.raises(ConfigurationError, match="lambda_start"):
            load_config(write_config(tmp_path, cfg))


class TestSerialization:
    def test_format_float_round_trips(self):
        for x in (math.pi, 0.1, 1e-300, -3.5e17, 1.0 / 3.0, 0.0):
            assert float(format_float(x)) == x

    def test_json_floats_use_17_digits(self):
        text = dumps_json({"value": 1.0 / 3.0})
        assert "0.33333333333333331" in text

    def test_json_rejects_non_finite(self):
        with pytest.raises(ValueError):
            dumps_json({"value": math.inf})

    def test_json_deterministic_nesting(self):
        payload = {"b": [1, {"x": 2.5}], "a": None, "flag": True}
        assert dumps_json(payload) == dumps_json(payload)
        parsed = json.loads(dumps_json(payload))
        assert parsed == {"b": [1, {"x": 2.5}], "a": None, "flag": True}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli_run")
    cfg = write_config(tmp, quick_disk_config())
    out = tmp / "artifacts"
    rc = main(["run", "--config", cfg, "--out", str(out), "--quiet"])
    assert rc == 0
    return out


class TestRunCommand:
    def test_all_artifacts_written(self, run_dir):
        for name in ("branch.csv", "thermo.csv", "landmarks.json", "report.txt"):
            assert (run_dir / name).exists(), name

    def test_branch_csv_schema(self, run_dir):
        header, cols = read_csv_columns(run_dir / "branch.csv")
        assert ",".join(header) == BRANCH_HEADER
        lam = [float(v) for v in cols["lambda"]]
        energy = [float(v) for v in cols["E"]]
        s = [float(v) for v in cols["s"]]
        beta = [float(v) for v in cols["beta"]]
        assert lam[0] == 0.0
        assert all(b == -l for b, l in zip(beta, lam))
        assert all(e2 > e1 for e1, e2 in zip(energy, energy[1:]))
        assert all(s2 > s1 for s1, s2 in zip(s, s[1:]))
        assert lam[-1] == pytest.approx(6.0, abs=1e-12)  # exact cap landing
        assert set(cols["fold_flag"]) == {"none"}

    def test_thermo_csv_schema(self, run_dir):
        header, cols = read_csv_columns(run_dir / "thermo.csv")
        assert ",".join(header) == THERMO_HEADER
        assert len(cols["E"]) == len(
            read_csv_columns(run_dir / "branch.csv")[1]["E"]
        )

    def test_landmarks_json_contents(self, run_dir):
        payload = json.loads((run_dir / "landmarks.json").read_text())
        assert payload["kind"] == "Undetermined"  # truncated run decides nothing
        assert payload["lambda_star"] is None
        assert payload["termination"] == "LambdaCap"
        assert payload["landmarks"]["E0"] > 0
        assert payload["critical_points"] == []

    def test_report_mentions_kind_and_checks(self, run_dir):
        text = (run_dir / "report.txt").read_text()
        assert "domain kind: Undetermined" in text
        assert "identity checks" in text
        assert "stability checks" in text
        assert "VIOLATED" not in text

    def test_reruns_are_byte_identical(self, run_dir, tmp_path):
        cfg = write_config(tmp_path, quick_disk_config())
        out2 = tmp_path / "second"
        assert main(["run", "--config", cfg, "--out", str(out2), "--quiet"]) == 0
        for name in ("branch.csv", "thermo.csv", "landmarks.json"):
            assert (out2 / name).read_bytes() == (run_dir / name).read_bytes()

    def test_env_var_overrides_out_dir(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, quick_disk_config())
        env_dir = tmp_path / "env_dir"
        flag_dir = tmp_path / "flag_dir"
        monkeypatch.setenv("MFBRANCH_OUT", str(env_dir))
        rc = main(["run", "--config", cfg, "--out", str(flag_dir), "--quiet"])
        assert rc == 0
        assert (env_dir / "branch.csv").exists()
        assert not flag_dir.exists()

    def test_numerical_failure_exits_1_with_record(self, tmp_path):
        cfg = quick_disk_config(
            resolution=8,
            lambda_start=5.0,
            controls={"k_eigen": 4, "newton_max_iter": 2},
        )
        out = tmp_path / "failed"
        rc = main(
            ["run", "--config", write_config(tmp_path, cfg), "--out", str(out), "--quiet"]
        )
        assert rc == 1
        report = (out / "report.txt").read_text()
        assert "FAILURE" in report
        assert "branch tracing" in report
        assert not (out / "branch.csv").exists()


class TestLandmarksCommand:
    def test_echoes_json_and_writes_single_artifact(self, tmp_path, capsys):
        cfg = write_config(tmp_path, quick_disk_config())
        out = tmp_path / "lm"
        rc = main(["landmarks", "--config", cfg, "--out", str(out), "--quiet"])
        assert rc == 0
        echoed = json.loads(capsys.readouterr().out)
        on_disk = json.loads((out / "landmarks.json").read_text())
        assert echoed == on_disk
        assert sorted(p.name for p in out.iterdir()) == ["landmarks.json"]


class TestVerifyCommand:
    def test_all_checks_pass_on_coarse_disk(self, tmp_path, capsys):
        cfg = write_config(tmp_path, quick_disk_config(resolution=10, lambda_max=5.0))
        rc = main(["verify", "--config", cfg, "--quiet"])
        output = capsys.readouterr().out
        assert rc == 0, output
        lines = [l for l in output.strip().split("\n") if l]
        assert sum(l.startswith("PASS ") for l in lines) == 7
        assert "all 7 checks passed" in output

    def test_broken_jacobian_negative_control_fails(self, tmp_path, capsys):
        cfg = quick_disk_config(
            resolution=10, lambda_max=5.0, debug_break_jacobian=True
        )
        rc = main(["verify", "--config", write_config(tmp_path, cfg), "--quiet"])
        output = capsys.readouterr().out
        assert rc == 1
        assert "FAIL jacobian-consistency" in output
        # the deliberate defect must not contaminate any other check
        assert sum(l.startswith("FAIL ") for l in output.strip().split("\n")) == 1
