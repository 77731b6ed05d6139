import csv
import shutil
import subprocess

import numpy as np
import pytest

from feelplot import (SCHEMA, CurveSpec, SchemaError, main, moving_average,
                      read_metrics, render)


def write_metrics(path, accs, header=None):
    header = header or SCHEMA
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for t, acc in enumerate(accs):
            w.writerow([t, f"0,{t % 3}", repr(float(acc)), repr(float(1.0 - acc)),
                        100.0, 50.0, 1, 4, 2, 2])
    return path


class TestReadMetrics:
    def test_columns_parsed(self, tmp_path):
        path = write_metrics(tmp_path / "m.csv", [0.1, 0.5, 0.9])
        data = read_metrics(path)
        assert np.array_equal(data["round"], [0, 1, 2])
        assert np.array_equal(data["acc"], [0.1, 0.5, 0.9])

    def test_missing_column_named(self, tmp_path):
        header = [c for c in SCHEMA if c != "acc"]
        path = tmp_path / "m.csv"
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            w.writerow([0, "0", 0.5, 1, 1, 1, 1, 1, 1])
        with pytest.raises(SchemaError, match="missing column 'acc'"):
            read_metrics(path)

    def test_extra_column_rejected(self, tmp_path):
        path = write_metrics(tmp_path / "m.csv", [0.1], header=SCHEMA + ["bonus"])
        with pytest.raises(SchemaError, match="unexpected columns"):
            read_metrics(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(SchemaError, match="empty file"):
            read_metrics(path)


class TestMovingAverage:
    def test_window_one_is_identity(self):
        y = np.array([0.2, 0.9, 0.1, 0.7])
        assert np.array_equal(moving_average(y, 1), y)
        assert np.array_equal(moving_average(y, 0), y)

    def test_window_three_centered_truncated(self):
        y = np.array([0.0, 3.0, 6.0, 9.0])
        out = moving_average(y, 3)
        assert out == pytest.approx([1.5, 3.0, 6.0, 7.5])

    def test_even_window(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        out = moving_average(y, 2)  # current + next, truncated at the end
        assert out == pytest.approx([1.5, 2.5, 3.5, 4.0])


class TestRender:
    def test_plot_fidelity_window_one(self, tmp_path):
        """[SECONDARY] acceptance: extracted y-series equal CSV columns."""
        rng = np.random.default_rng(0)
        curves = []
        expected = {}
        for k in (5, 10, 40):
            accs = rng.uniform(0, 1, size=30)
            path = write_metrics(tmp_path / f"metrics_K{k}.csv", accs)
            label = f"K={k}"
            curves.append(CurveSpec(label=label, path=str(path), window=1))
            expected[label] = np.array([float(repr(float(a))) for a in accs])
        out = tmp_path / "fig.png"
        fig = render(curves, out)
        lines = {line.get_label(): line for line in fig.axes[0].get_lines()}
        assert set(lines) == set(expected)
        for label, want in expected.items():
            assert np.array_equal(lines[label].get_ydata(), want)
        assert out.exists() and out.with_suffix(".svg").exists()
        print("[PASS] plot fidelity: 3 curves, y-series equal CSV columns exactly")

    def test_schema_mismatch_is_actionable(self, tmp_path):
        path = tmp_path / "bad.csv"
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["round", "accuracy"])
            w.writerow([0, 0.5])
        with pytest.raises(SchemaError, match="missing column"):
            render([CurveSpec(label="x", path=str(path))], tmp_path / "fig.png")

    def test_single_row_curve(self, tmp_path):
        path = write_metrics(tmp_path / "one.csv", [0.42])
        fig = render([CurveSpec(label="one", path=str(path))], tmp_path / "f.png")
        assert np.array_equal(fig.axes[0].get_lines()[0].get_ydata(), [0.42])

    def test_smoothing_window_applied(self, tmp_path):
        accs = [0.0, 3.0, 6.0, 9.0]
        path = write_metrics(tmp_path / "m.csv", accs)
        fig = render([CurveSpec(label="s", path=str(path), window=3)],
                     tmp_path / "f.png")
        assert fig.axes[0].get_lines()[0].get_ydata() == pytest.approx(
            [1.5, 3.0, 6.0, 7.5])

    def test_no_curves_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            render([], tmp_path / "f.png")


class TestCli:
    def test_plot_command(self, tmp_path):
        write_metrics(tmp_path / "a.csv", [0.1, 0.2])
        write_metrics(tmp_path / "b.csv", [0.3, 0.4])
        out = tmp_path / "fig.png"
        rc = main(["plot", "--out", str(out),
                   f"{tmp_path}/a.csv:K=5", f"{tmp_path}/b.csv"])
        assert rc == 0
        assert out.exists() and out.with_suffix(".svg").exists()

    def test_schema_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,2\n")
        rc = main(["plot", "--out", str(tmp_path / "f.png"), str(bad)])
        assert rc == 2
        assert "missing column" in capsys.readouterr().err

    @pytest.mark.skipif(shutil.which("feelsim") is None,
                        reason="simulator CLI not installed")
    def test_end_to_end_with_simulator(self, tmp_path):
        # integration through the public interfaces only: config file in,
        # CSVs out of the simulator, figure out of this package
        cfg = tmp_path / "cfg.json"
        cfg.write_text("""{
            "seed": 3, "devices": 4, "selected": 2, "rounds": 4,
            "dataset": {"kind": "synthetic", "classes": 2, "per_class": 12,
                        "test_per_class": 8, "dim": 3, "separation": 3.0},
            "channel": {"s_dl": 8, "s_ul": 8, "sigma2_dl": 10.0, "sigma2_ul": 10.0},
            "power_dl": 200.0, "power_ul": 120.0
        }""")
        out = tmp_path / "runs"
        subprocess.run(["feelsim", "run", "--config", str(cfg),
                        "--out", str(out), "--sweep-k", "2,4"], check=True)
        fig = tmp_path / "fig.png"
        rc = main(["plot", "--out", str(fig),
                   f"{out}/metrics_K2.csv:K=2", f"{out}/metrics_K4.csv:K=4"])
        assert rc == 0
        assert fig.exists()
