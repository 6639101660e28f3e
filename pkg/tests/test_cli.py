import json
import warnings

import numpy as np
import pytest

from bayal.cli import main, replication_seeds
from bayal.config import ConfigError, ExperimentConfig, build_config, load_config_file, parse_config_text
from bayal.evaluation import read_curves_csv
from bayal.plots import NoDataError, curve_figure, emit_plots

from conftest import write_wdbc_file

SMALL = ["--reps", "2", "--budget", "3", "--m-prior", "50"]


def run(tmp_path, *extra, name="out"):
    out = tmp_path / name
    code = main(["run", *SMALL, "--output-dir", str(out), *extra])
    return code, out


class TestConfig:
    def test_precedence(self, tmp_path):
        cfg_file = tmp_path / "c.txt"
        cfg_file.write_text("# comment\nbudget = 12\nomega=0.3  # trailing\nseed=4\n\n")
        cfg = build_config(load_config_file(cfg_file), {"budget": 7, "gamma": None})
        assert (cfg.budget, cfg.omega, cfg.seed, cfg.gamma) == (7, 0.3, 4, 0.5)
        assert build_config().budget == ExperimentConfig().budget == 30

    def test_output_dir_fallback(self, monkeypatch):
        monkeypatch.delenv("BAYAL_OUTPUT_DIR", raising=False)
        assert ExperimentConfig().resolved_output_dir() == "bayal-output"
        monkeypatch.setenv("BAYAL_OUTPUT_DIR", "/tmp/elsewhere")
        assert ExperimentConfig().resolved_output_dir() == "/tmp/elsewhere"
        assert ExperimentConfig(output_dir="x").resolved_output_dir() == "x"

    def test_every_problem_is_reported(self):
        with pytest.raises(ConfigError) as err:
            build_config({}, {"omega": 1.5, "budget": 0, "methods": ("proposed", "qbc")})
        assert len(err.value.problems) == 3

    def test_parse_errors_carry_line_numbers(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("budget=3\nnonsense\nfoo=1\nbudget=x\n", "f")
        assert [p.split(":")[0] for p in err.value.problems] == ["f line 2", "f line 3", "f line 4"]

    def test_text_round_trip(self):
        cfg = ExperimentConfig(methods=("adsl",), omega=0.3, k_cap=6)
        assert build_config(parse_config_text(cfg.to_text())) == cfg


class TestRun:
    def test_invalid_config_writes_nothing(self, tmp_path, capsys):
        code, out = run(tmp_path, "--omega", "1.5", "--budget", "0")
        assert code == 2 and not out.exists()
        err = json.loads(capsys.readouterr().err)
        assert err["status"] == "error" and err["kind"] == "config" and len(err["errors"]) == 2

    def test_missing_dataset_is_a_config_error(self, tmp_path, capsys):
        code, out = run(tmp_path, "--scenario", "wdbc", "--wdbc-path", str(tmp_path / "nope"))
        assert code == 2 and not out.exists()

    def test_artifacts(self, tmp_path):
        code, out = run(tmp_path, "--seed", "3")
        assert code == 0
        assert {p.name for p in out.iterdir()} == {"records.csv", "curves.csv", "curves.dat", "config.txt", "manifest.json"}
        man = json.loads((out / "manifest.json").read_text())
        assert man["seeds"] == replication_seeds(3, 2) and man["excluded"] == []
        assert man["config"]["budget"] == 3 and man["software"]["backend"] in ("numba", "numpy")
        curves = read_curves_csv(out / "curves.csv")
        assert list(curves) == ["proposed", "adsl"]
        assert [s.stage for s in curves["adsl"].stages] == [0, 1, 2, 3]
        # gnuplot: one block per method separated by two blank lines
        blocks = (out / "curves.dat").read_text().split("\n\n\n")
        assert len(blocks) == 2 and blocks[1].startswith("# method adsl")
        data = np.loadtxt(out / "curves.dat", comments="#")
        np.testing.assert_allclose(data[:4, 2], curves["proposed"].errors(), rtol=1e-11)

    def test_manifest_replay_is_byte_identical(self, tmp_path):
        code, a = run(tmp_path, "--seed", "5", "--methods", "proposed", name="a")
        assert code == 0
        assert main(["run", "--config", str(a / "manifest.json"), "--output-dir", str(tmp_path / "b")]) == 0
        for f in ("records.csv", "curves.csv", "curves.dat"):
            assert (a / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_config_file_run(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("methods=adsl\nscenario=uneven\nuneven_scale=1\n")
        code, out = run(tmp_path, "--config", str(cfg))
        assert code == 0
        assert list(read_curves_csv(out / "curves.csv")) == ["adsl"]

    def test_wdbc_run(self, tmp_path):
        path = write_wdbc_file(tmp_path / "wdbc.data")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            code, out = run(tmp_path, "--scenario", "wdbc", "--wdbc-path", str(path), "--methods", "adsl", "--reps", "1")
        assert code == 0
        man = json.loads((out / "manifest.json").read_text())
        assert (man["dataset"]["N"], man["dataset"]["p"]) == (569, 30)
        curves = read_curves_csv(out / "curves.csv")
        assert all(s.mean_dist is None for s in curves["adsl"].stages)


class TestPlot:
    def test_single_method(self, tmp_path):
        code, out = run(tmp_path, "--methods", "proposed", "--reps", "1")
        assert code == 0
        assert main(["plot", str(out / "curves.csv")]) == 0
        assert (out / "error_vs_n.png").stat().st_size > 0 and (out / "dist_vs_n.png").exists()
        fig = curve_figure(read_curves_csv(out / "curves.csv"))
        assert len(fig.axes[0].get_lines()) == 1

    def test_two_methods_legend(self, tmp_path):
        code, out = run(tmp_path, "--reps", "1")
        fig = curve_figure(read_curves_csv(out / "curves.csv"))
        ax = fig.axes[0]
        assert len(ax.get_lines()) == 2
        assert [t.get_text() for t in ax.get_legend().get_texts()] == ["proposed", "adsl"]
        written = emit_plots(out / "curves.csv", tmp_path / "figs")
        assert sorted(p.name for p in written) == ["dist_vs_n.png", "error_vs_n.png"]

    def test_empty_or_missing_file(self, tmp_path, capsys):
        empty = tmp_path / "curves.csv"
        empty.write_text("method,stage,n_labeled,mean_error,mean_dist,replications\n")
        with pytest.raises(NoDataError):
            emit_plots(empty)
        assert main(["plot", str(empty)]) == 1
        assert main(["plot", str(tmp_path / "missing.csv")]) == 1
        assert json.loads(capsys.readouterr().err.splitlines()[-1])["kind"] == "plot"
