"""CLI commands: reports, exit codes, determinism."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sepquant.allocator import Budget, ImportanceVector, LayerProfile, SIZE_BUDGET, solve_lp
from sepquant.cli import main
from sepquant.container import tensor, write_container

UNIFORM_8BIT_SIZE = 5128  # bytes: all fixture layer params at 8 bit


def run_cli(*args):
    return main([str(a) for a in args])


@pytest.fixture()
def scores_path(fixtures_dir, tmp_path):
    out = tmp_path / "scores.json"
    assert run_cli("analyze", fixtures_dir / "features.fmap", "--out", out) == 0
    return out


class TestAnalyze:
    def test_fixture_report_has_alpha_per_layer(self, scores_path):
        report = json.loads(scores_path.read_text())
        assert report["sample_count"] == 32
        assert [l["layer_id"] for l in report["layers"]] == [
            "conv1",
            "conv2",
            "conv3",
            "conv4",
            "head",
        ]
        for layer in report["layers"]:
            assert np.isfinite(layer["alpha"])
            assert layer["word_occurrences"] >= 1

    def test_missing_file_exits_2(self, tmp_path, capsys):
        code = run_cli("analyze", tmp_path / "nope.fmap", "--out", tmp_path / "o.json")
        assert code == 2
        assert capsys.readouterr().err.startswith("error: io:")

    def test_corrupt_container_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.fmap"
        bad.write_bytes(b"XMAP\x00\x01" + b"\x00" * 32)
        assert run_cli("analyze", bad, "--out", tmp_path / "o.json") == 2
        assert "error: container:" in capsys.readouterr().err

    def test_single_image_dump_is_valid(self, tmp_path):
        rng = np.random.default_rng(0)
        dump = tmp_path / "one.fmap"
        write_container(
            [tensor("only", rng.uniform(0, 1, size=(1, 6, 4, 4)))],
            {"layer_order": ["only"], "class_ids": [3], "sample_count": 1},
            dump,
        )
        out = tmp_path / "one.json"
        assert run_cli("analyze", dump, "--out", out) == 0
        report = json.loads(out.read_text())
        assert report["sample_count"] == 1
        assert len(report["layers"]) == 1

    def test_rerun_is_byte_identical(self, fixtures_dir, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli("analyze", fixtures_dir / "features.fmap", "--out", a)
        run_cli("analyze", fixtures_dir / "features.fmap", "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_subsampling_is_seeded(self, fixtures_dir, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli("analyze", fixtures_dir / "features.fmap", "--out", a, "--samples", 8, "--seed", 5)
        run_cli("analyze", fixtures_dir / "features.fmap", "--out", b, "--samples", 8, "--seed", 5)
        assert a.read_bytes() == b.read_bytes()
        assert json.loads(a.read_text())["sample_count"] == 8


class TestAllocate:
    def test_sixty_percent_budget_feasible(self, scores_path, fixtures_dir, tmp_path):
        out = tmp_path / "cfg.json"
        budget_bytes = 0.6 * UNIFORM_8BIT_SIZE
        code = run_cli(
            "allocate", scores_path, fixtures_dir / "profile.json",
            "--out", out, "--budget-bytes", budget_bytes,
        )
        assert code == 0
        cfg = json.loads(out.read_text())
        assert cfg["feasible"] is True
        assert cfg["size_bytes"] <= budget_bytes
        assert cfg["bits"][0] == 8 and cfg["bits"][-1] == 8  # pinned first/last
        assert all(4 <= b <= 8 for b in cfg["bits"][1:-1])

    def test_beta_zero_equals_uniform_importance(self, scores_path, fixtures_dir, tmp_path):
        out = tmp_path / "cfg.json"
        run_cli(
            "allocate", scores_path, fixtures_dir / "profile.json",
            "--out", out, "--budget-bytes", 4000, "--beta", 0,
        )
        cfg = json.loads(out.read_text())

        profile = json.loads((fixtures_dir / "profile.json").read_text())["layers"]
        profiles = [
            LayerProfile(
                l["layer_id"], l["param_count"], l["mac_count"],
                8 if i in (0, len(profile) - 1) else None,
            )
            for i, l in enumerate(profile)
        ]
        uniform = ImportanceVector(theta=[1.0] * 5, beta=0.0, alpha=[0.0] * 5)
        expected = solve_lp(uniform, profiles, Budget(SIZE_BUDGET, 4000), (4, 8))
        assert cfg["bits"] == expected.bits

    def test_infeasible_budget_exits_3(self, scores_path, fixtures_dir, tmp_path, capsys):
        code = run_cli(
            "allocate", scores_path, fixtures_dir / "profile.json",
            "--out", tmp_path / "cfg.json", "--budget-bytes", 100,
        )
        assert code == 3
        err = capsys.readouterr().err
        assert err.startswith("error: infeasible:")
        assert "minimum achievable" in err

    def test_layer_id_mismatch_exits_1(self, scores_path, fixtures_dir, tmp_path, capsys):
        scrambled = json.loads(scores_path.read_text())
        scrambled["layers"] = scrambled["layers"][::-1]
        bad = tmp_path / "scrambled.json"
        bad.write_text(json.dumps(scrambled))
        code = run_cli(
            "allocate", bad, fixtures_dir / "profile.json",
            "--out", tmp_path / "cfg.json", "--budget-mb", 1,
        )
        assert code == 1
        assert "do not match" in capsys.readouterr().err


class TestSimulate:
    def test_fixture_run(self, scores_path, fixtures_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        run_cli(
            "allocate", scores_path, fixtures_dir / "profile.json",
            "--out", cfg, "--budget-bytes", 4000,
        )
        out = tmp_path / "report.json"
        code = run_cli(
            "simulate", fixtures_dir / "model.json", cfg, fixtures_dir / "dataset.fmap",
            "--out", out,
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert 0.0 <= report["top1_accuracy"] <= 1.0
        assert len(report["per_layer_mse"]) == 5
        assert report["size_bytes"] <= 4000

    def test_layer_count_mismatch_exits_1(self, fixtures_dir, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"layer_ids": ["conv1"], "bits": [8], "activation_bits": 8}))
        code = run_cli(
            "simulate", fixtures_dir / "model.json", cfg, fixtures_dir / "dataset.fmap",
            "--out", tmp_path / "r.json",
        )
        assert code == 1
        assert "do not match" in capsys.readouterr().err


class TestPipeline:
    def _run(self, fixtures_dir, out_dir, *extra):
        return run_cli(
            "pipeline",
            "--features", fixtures_dir / "features.fmap",
            "--profile", fixtures_dir / "profile.json",
            "--model", fixtures_dir / "model.json",
            "--dataset", fixtures_dir / "dataset.fmap",
            "--out-dir", out_dir,
            "--seed", 42,
            *extra,
        )

    def test_deterministic_artifacts(self, fixtures_dir, tmp_path):
        d1, d2 = tmp_path / "run1", tmp_path / "run2"
        assert self._run(fixtures_dir, d1, "--budget-mb", 0.004) == 0
        assert self._run(fixtures_dir, d2, "--budget-mb", 0.004) == 0
        for name in ("scores.json", "bitconfig.json", "report.json"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_ptq_defaults_respect_range_and_pins(self, fixtures_dir, tmp_path):
        out = tmp_path / "ptq"
        assert self._run(fixtures_dir, out, "--bits", "2:4", "--budget-bytes", 3000) == 0
        cfg = json.loads((out / "bitconfig.json").read_text())
        assert cfg["bits"][0] == 8 and cfg["bits"][-1] == 8
        assert all(2 <= b <= 4 for b in cfg["bits"][1:-1])

    def test_stage_name_in_errors(self, fixtures_dir, tmp_path, capsys):
        code = run_cli(
            "pipeline",
            "--features", fixtures_dir / "features.fmap",
            "--profile", fixtures_dir / "profile.json",
            "--model", fixtures_dir / "model.json",
            "--dataset", tmp_path / "missing.fmap",
            "--out-dir", tmp_path / "out",
            "--budget-mb", 0.004,
        )
        assert code == 2
        assert "[simulate]" in capsys.readouterr().err


def test_module_entrypoint_smoke(fixtures_dir, tmp_path):
    src = Path(__file__).resolve().parent.parent / "src"
    out = tmp_path / "scores.json"
    proc = subprocess.run(
        [
            sys.executable, "-m", "sepquant.cli", "analyze",
            str(fixtures_dir / "features.fmap"), "--out", str(out),
        ],
        env={"PYTHONPATH": str(src), "PATH": "/usr/bin:/bin"},
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
