import json
import subprocess
import sys

import numpy as np
import pytest

from bayessep.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main
from bayessep.sweep import COLUMNS, Grid, SweepConfig, evaluate_point, read_csv, run_sweep, write_csv


class TestGrid:
    def test_parse_linear_and_log(self):
        np.testing.assert_allclose(Grid.parse("1:3:3").values(), [1, 2, 3])
        np.testing.assert_allclose(Grid.parse("1:100:3:log").values(), [1, 10, 100])

    @pytest.mark.parametrize("text", ["1:2", "a:b:c", "1:2:0", "0:1:3:log", "1:2:3:cubic"])
    def test_bad(self, text):
        with pytest.raises(ValueError):
            Grid.parse(text)


class TestPoint:
    def test_unreachable_is_error_row(self):
        row = evaluate_point("moments", 0.2, 0.05)
        assert "unreachable" in row["error"]
        assert row["mmse"] == ""

    def test_negative_mu_flagged(self):
        row = evaluate_point("moments", 1.0, 0.9)
        assert row["mu"] < 0
        assert "mu<0" in row["quadrature_flags"]
        assert row["error"] == ""

    def test_fixed_cutoff(self):
        row = evaluate_point("half-gaussian", 0.5, None, cutoff=20)
        assert row["cutoff_used"] == 20 and row["frame_r"] == 0.0


class TestCsv:
    def test_round_trip_full_precision(self, tmp_path):
        cfg = SweepConfig("fig3_fixed_variance", Grid(0.2, 1.0, 3), 0.05)
        rows = run_sweep(cfg)
        path = tmp_path / "out.csv"
        write_csv(rows, path, cfg)
        text = path.read_text().splitlines()
        assert text[0].startswith("# bayessep")
        assert text[1].startswith("# config:")
        assert text[2] == ",".join(COLUMNS)
        back = read_csv(path)
        assert back[0]["error"].startswith("unreachable")
        assert back[2]["mmse"] == rows[2]["mmse"]

    def test_parallel_matches_serial(self):
        cfg = SweepConfig("fig1", Grid(0.2, 1.0, 4))
        serial = run_sweep(cfg)
        parallel = run_sweep(SweepConfig("fig1", Grid(0.2, 1.0, 4), workers=2))
        assert serial == parallel


class TestMain:
    def test_point(self, capsys):
        assert main(["point", "--sigma", "1", "--json"]) == EXIT_OK
        rec = json.loads(capsys.readouterr().out)
        assert rec["mmse"] == pytest.approx(0.194712, abs=1e-6)

    def test_point_usage_errors(self):
        assert main(["point", "--sigma", "-1"]) == EXIT_USAGE
        assert main(["point", "--prior", "displaced", "--mu", "1"]) == EXIT_USAGE
        assert main(["point", "--cutoff", "many", "--sigma", "1"]) == EXIT_USAGE
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_point_unreachable(self, capsys):
        rc = main(["point", "--prior", "displaced", "--mu-t", "0.2", "--sigma-t2", "0.05"])
        assert rc == EXIT_NUMERIC
        assert "unreachable" in capsys.readouterr().out

    def test_sweep_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["sweep", "--mode", "fig2_fixed_mean", "--fixed", "1", "--grid", "0.1:0.3:2"]
        assert main(args + ["--out", str(a)]) == EXIT_OK
        assert main(args + ["--out", str(b), "--workers", "2"]) == EXIT_OK
        strip = lambda p: [ln for ln in p.read_text().splitlines() if not ln.startswith("# config")]
        assert strip(a) == strip(b)

    def test_config_file_and_override(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("# sweep\nmode = fig1\ngrid = 0.2:0.4:2\nworkers = 1\n")
        out = tmp_path / "o.csv"
        assert main(["sweep", "--config", str(conf), "--grid", "0.3:0.3:1", "--out", str(out)]) == EXIT_OK
        rows = read_csv(out)
        assert len(rows) == 1 and rows[0]["sigma"] == pytest.approx(0.3)

    def test_config_unknown_key(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("mode = fig1\ncolour = blue\n")
        assert main(["sweep", "--config", str(conf)]) == EXIT_USAGE

    def test_sweep_needs_fixed(self):
        assert main(["sweep", "--mode", "fig2_fixed_mean", "--grid", "0.1:0.2:2"]) == EXIT_USAGE

    def test_unwritable_output(self, tmp_path):
        target = tmp_path / "missing" / "x.csv"
        assert main(["sweep", "--mode", "fig1", "--grid", "0.2:0.3:2", "--out", str(target)]) == EXIT_USAGE

    def test_validate_pass_and_injected_failure(self, capsys):
        assert main(["validate", "--only", "2,6"]) == EXIT_OK
        capsys.readouterr()
        assert main(["validate", "--only", "2", "--tolerance-scale", "0", "--json"]) == EXIT_VALIDATION
        summary = json.loads(capsys.readouterr().out.splitlines()[-1])
        assert summary["passed"] is False

    def test_console_script_module(self):
        out = subprocess.run([sys.executable, "-m", "bayessep.cli", "--version"], capture_output=True, text=True)
        assert out.returncode == 0 and "bayessep" in out.stdout
