"""test_cli.py

End-to-end tests of the command-line modules on small configurations.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from dynkinlab import __main__ as entry
from dynkinlab.cli import bench_cli, growth_cli, simulate_cli, solve_cli, verify_cli

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

HEAT = """
[model]
name = "brownian"
params = { sigma = 1.0 }
growth_bound = 1.0

[problem]
horizon = 1.0
lower = -10.0
upper = 10.0
terminal = { kind = "cosine" }
bounds = [-10.0, 10.0]

[grid]
lo = -6.283185307179586
hi = 6.283185307179586
nodes = 41
time_steps = 20
boundary = "neumann_zero"

[mc]
n_paths = 5000
seed = 3
n_steps = 10
growth_samples = 500

[audit]
x = [0.0]
martingale_paths = 500
martingale_starts = 2
martingale_steps = 10
"""


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    """Run every command from an empty directory with no inherited settings."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("DYNKINLAB_OUT", raising=False)
    monkeypatch.delenv("DYNKINLAB_THREADS", raising=False)


def _config(tmp_path: Path, text: str = HEAT, name: str = "run.toml") -> str:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestSolve:

    def test_writes_surface_and_report(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert solve_cli.main(["--config", _config(tmp_path), "--out", str(out), "--quiet"]) == 0
        assert {"surface.csv", "surface.json", "solve.json"} <= {p.name for p in out.iterdir()}
        surface = pd.read_csv(out / "surface.csv")
        assert list(surface.columns) == ["t", "x", "v", "in_upper_region", "in_lower_region"]
        assert len(surface) == 21 * 41
        report = json.loads((out / "solve.json").read_text())
        assert report["scheme"] == "implicit_psor"
        assert report["residual_report"]["passed"]
        assert len(report["config_hash"]) == 64
        assert "PASS" in capsys.readouterr().out

    def test_output_formats_select_the_surface_files(self, tmp_path):
        out = tmp_path / "npy_only"
        text = HEAT + '\n[output]\nformats = ["npy", "json"]\n'
        assert solve_cli.main(["-c", _config(tmp_path, text), "-o", str(out), "-q"]) == 0
        names = {p.name for p in out.iterdir()}
        assert {"surface.npy", "surface.json", "solve.json"} <= names
        assert "surface.csv" not in names
        assert np.load(out / "surface.npy").shape == (21, 41)

    def test_csv_only_skips_the_surface_metadata(self, tmp_path):
        out = tmp_path / "csv_only"
        text = HEAT + '\n[output]\nformats = ["csv"]\n'
        assert solve_cli.main(["-c", _config(tmp_path, text), "-o", str(out), "-q"]) == 0
        names = {p.name for p in out.iterdir()}
        assert "surface.csv" in names
        assert "surface.json" not in names
        assert "solve.json" in names

    def test_cfl_violation_is_an_error(self, tmp_path, capsys):
        code = solve_cli.main(["-c", str(CONFIG_DIR / "cfl_violation.toml"), "-o", str(tmp_path / "cfl")])
        assert code == 2
        assert "CFL" in capsys.readouterr().err

    def test_output_directory_from_the_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DYNKINLAB_OUT", str(tmp_path / "from_env"))
        assert solve_cli.main(["--config", _config(tmp_path), "-q"]) == 0
        assert (tmp_path / "from_env" / "surface.csv").exists()

    def test_bad_thread_setting(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("DYNKINLAB_THREADS", "many")
        assert solve_cli.main(["--config", _config(tmp_path), "-o", str(tmp_path / "o")]) == 2
        assert "DYNKINLAB_THREADS" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert solve_cli.main(["--config", str(tmp_path / "nope.toml")]) == 2


class TestSimulate:

    def test_paths_and_moments(self, tmp_path):
        out = tmp_path / "sim"
        assert simulate_cli.main(["--config", _config(tmp_path), "--out", str(out), "-q"]) == 0
        paths = pd.read_csv(out / "paths.csv")
        assert len(paths) == 5000 * 11
        assert (paths.loc[paths["k"] == 0, "x"] == 0.0).all()
        moments = json.loads((out / "moments.json").read_text())
        assert moments["terminal"]["variance"][0] == pytest.approx(1.0, rel=0.1)

    def test_thread_count_gives_identical_files(self, tmp_path):
        config = _config(tmp_path)
        serial, parallel = tmp_path / "t1", tmp_path / "t3"
        assert simulate_cli.main(["-c", config, "-o", str(serial), "--threads", "1", "-q"]) == 0
        assert simulate_cli.main(["-c", config, "-o", str(parallel), "--threads", "3", "-q"]) == 0
        names = sorted(p.name for p in serial.iterdir())
        assert names == sorted(p.name for p in parallel.iterdir())
        for name in names:
            assert (serial / name).read_bytes() == (parallel / name).read_bytes(), name

    def test_needs_a_start_point(self, tmp_path):
        text = HEAT.split("[audit]")[0]
        assert simulate_cli.main(["-c", _config(tmp_path, text), "-o", str(tmp_path / "o")]) == 2


class TestVerify:

    def test_order_violation_is_an_error(self, tmp_path, capsys):
        code = verify_cli.main(["-c", str(CONFIG_DIR / "bad_order.toml"), "-o", str(tmp_path / "bad")])
        assert code == 2
        assert "Error" in capsys.readouterr().err

    def test_small_run_writes_every_check(self, tmp_path):
        out = tmp_path / "verify"
        code = verify_cli.main(["-c", _config(tmp_path), "-o", str(out), "--threads", "2", "-q"])
        assert code in (0, 1)
        result = json.loads((out / "verify.json").read_text())
        assert set(result["checks"]) == {"complementarity", "saddle_audit", "menu_ordering", "supersolution",
                                         "subsolution"}
        assert result["passed"] == (code == 0)
        assert result["metadata"]["seed"] == 3

    def test_rerun_reproduces_every_file(self, tmp_path):
        config = _config(tmp_path)
        first, second = tmp_path / "first", tmp_path / "second"
        code = verify_cli.main(["-c", config, "-o", str(first), "--threads", "1", "-q"])
        assert verify_cli.main(["-c", config, "-o", str(second), "--threads", "3", "-q"]) == code
        names = sorted(p.name for p in first.iterdir())
        assert names == sorted(p.name for p in second.iterdir())
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes(), name


class TestBench:

    def test_needs_an_oracle(self, tmp_path, capsys):
        assert bench_cli.main(["-c", _config(tmp_path), "-o", str(tmp_path / "b")]) == 2
        assert "oracle" in capsys.readouterr().err

    def test_zero_dynamics_are_reproduced_exactly(self, tmp_path):
        out = tmp_path / "bench"
        assert bench_cli.main(["-c", str(CONFIG_DIR / "zero_dynamics.toml"), "-o", str(out), "-q"]) == 0
        table = pd.read_csv(out / "bench.csv")
        assert list(table.columns) == ["level", "nodes", "time_steps", "max_error", "runtime_s"]
        assert table["level"].tolist() == [0, 1, 2]
        assert table["time_steps"].tolist() == [20, 40, 80]
        assert (table["max_error"] == 0.0).all()


class TestGrowth:

    def test_brownian_motion_has_linear_growth(self, tmp_path):
        out = tmp_path / "growth"
        assert growth_cli.main(["-c", _config(tmp_path), "-o", str(out), "-q"]) == 0
        result = json.loads((out / "growth.json").read_text())
        assert result["model"] == "brownian"
        assert result["report"]["passed"]


class TestEntryPoint:

    def test_unknown_command(self, monkeypatch, capsys):
        monkeypatch.setattr(sys, "argv", ["dynkinlab", "frobnicate"])
        with pytest.raises(SystemExit) as info:
            entry.main()
        assert info.value.code == 2
        assert "Unknown command: frobnicate" in capsys.readouterr().out

    def test_routes_to_the_command(self, tmp_path, monkeypatch):
        monkeypatch.setattr(sys, "argv", ["dynkinlab", "solve", "-c", _config(tmp_path), "-o",
                                          str(tmp_path / "routed"), "-q"])
        with pytest.raises(SystemExit) as info:
            entry.main()
        assert info.value.code == 0
        assert (tmp_path / "routed" / "solve.json").exists()
