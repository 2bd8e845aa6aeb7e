"""End-to-end tests of the command-line interface.

Every test drives main(argv) in-process and checks exit codes, emitted
files, and the documented determinism guarantees (same config and seed,
same bytes; worker count never changes results).
"""
import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from adaptive_lqr import CheckpointDiag, RunRecord, write_records
from adaptive_lqr.cli import ENV_SEED, main
from adaptive_lqr.records import record_filename

from conftest import GEN32_CONFIG, SCALAR_CONFIG, SCALAR_K, SCALAR_P


def base_doc():
    return {
        "n": 1,
        "d": 1,
        "system": {"A": [0.5], "B": [1.0], "Q": [1.0], "R": [1.0]},
        "sweep": {"T_grid": [4, 8, 16, 32], "seeds": 2, "seed": 0,
                  "coupled": True},
    }


def write_doc(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture()
def tiny_config(tmp_path):
    return write_doc(tmp_path, base_doc())


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    """Results of one tiny CLI sweep, shared by the read-side tests."""
    tmp = tmp_path_factory.mktemp("sweep")
    cfg = write_doc(tmp, base_doc())
    out = str(tmp / "results")
    assert main(["sweep", "--config", cfg, "--out", out]) == 0
    return out


class TestDare:
    def test_benchmark_constants(self, capsys):
        code = main(["dare", "--config", SCALAR_CONFIG, "--json"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["P"][0] == pytest.approx(SCALAR_P, abs=1e-12)
        assert doc["K"][0] == pytest.approx(SCALAR_K, abs=1e-12)
        assert doc["iterations"] == 10
        assert doc["residual"] <= 1e-12
        assert doc["closed_loop_radius"] == pytest.approx(0.5 + SCALAR_K, abs=1e-12)

    def test_memoryless_system_costs_only_state(self, tmp_path, capsys):
        doc = base_doc()
        doc["system"]["A"] = [0.0]
        code = main(["dare", "--config", write_doc(tmp_path, doc), "--json"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["P"] == [1.0]
        assert out["K"][0] == 0.0

    def test_text_output_mentions_matrices(self, capsys):
        assert main(["dare", "--config", SCALAR_CONFIG]) == 0
        out = capsys.readouterr().out
        assert "P:" in out and "K:" in out and "iterations" in out

    def test_unstabilizable_system_exits_4(self, tmp_path, capsys):
        doc = base_doc()
        doc["system"]["A"] = [1.5]
        doc["system"]["B"] = [0.0]
        assert main(["dare", "--config", write_doc(tmp_path, doc)]) == 4

    def test_missing_config_exits_2(self):
        assert main(["dare"]) == 2

    def test_malformed_config_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        assert main(["dare", "--config", str(bad)]) == 2
        extra = base_doc()
        extra["surprise"] = 1
        assert main(["dare", "--config", write_doc(tmp_path, extra)]) == 2


class TestSimulate:
    def test_row_and_column_counts(self, tiny_config, capsys):
        assert main(["simulate", "--config", tiny_config, "--horizon", "2"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 4  # header + rows t = 0, 1, 2
        assert lines[0] == "t,x0,u0,eta0,cost,reset"
        assert all(len(line.split(",")) == 6 for line in lines)

    def test_first_update_lacks_data_and_resets(self, tiny_config, capsys):
        assert main(["simulate", "--config", tiny_config, "--horizon", "4"]) == 0
        lines = capsys.readouterr().out.splitlines()
        # one transition cannot identify two parameters
        assert lines[3].split(",")[-1] == "not_identifiable"

    def test_multivariate_header(self, capsys):
        assert main(["simulate", "--config", GEN32_CONFIG, "--horizon", "2"]) == 0
        header = capsys.readouterr().out.splitlines()[0]
        assert header == "t,x0,x1,x2,u0,u1,eta0,eta1,cost,reset"

    def test_default_horizon_is_first_grid_point(self, tiny_config, capsys):
        assert main(["simulate", "--config", tiny_config]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 6  # header + rows 0..4

    def test_output_is_deterministic(self, tiny_config, capsys):
        main(["simulate", "--config", tiny_config, "--horizon", "16"])
        first = capsys.readouterr().out
        main(["simulate", "--config", tiny_config, "--horizon", "16"])
        assert capsys.readouterr().out == first

    def test_out_flag_writes_file(self, tiny_config, tmp_path, capsys):
        dest = str(tmp_path / "traj.csv")
        assert main(["simulate", "--config", tiny_config, "--horizon", "4",
                     "--out", dest]) == 0
        main(["simulate", "--config", tiny_config, "--horizon", "4"])
        assert open(dest).read() == capsys.readouterr().out


class TestSeedPrecedence:
    def test_seed_flag_changes_output(self, tiny_config, capsys):
        main(["simulate", "--config", tiny_config, "--horizon", "8"])
        base = capsys.readouterr().out
        main(["simulate", "--config", tiny_config, "--horizon", "8",
              "--seed", "5"])
        assert capsys.readouterr().out != base

    def test_env_overrides_config(self, tiny_config, capsys, monkeypatch):
        main(["simulate", "--config", tiny_config, "--horizon", "8"])
        base = capsys.readouterr().out
        monkeypatch.setenv(ENV_SEED, "5")
        main(["simulate", "--config", tiny_config, "--horizon", "8"])
        env_out = capsys.readouterr().out
        assert env_out != base
        main(["simulate", "--config", tiny_config, "--horizon", "8",
              "--seed", "5"])
        assert capsys.readouterr().out == env_out

    def test_flag_overrides_env(self, tiny_config, capsys, monkeypatch):
        main(["simulate", "--config", tiny_config, "--horizon", "8"])
        base = capsys.readouterr().out
        monkeypatch.setenv(ENV_SEED, "5")
        main(["simulate", "--config", tiny_config, "--horizon", "8",
              "--seed", "0"])
        assert capsys.readouterr().out == base

    def test_garbage_env_exits_2(self, tiny_config, monkeypatch):
        monkeypatch.setenv(ENV_SEED, "not-a-seed")
        assert main(["simulate", "--config", tiny_config, "--horizon", "8"]) == 2


class TestSweep:
    def test_writes_records_and_manifest(self, sweep_dir):
        for T in (4, 8, 16, 32):
            assert os.path.exists(os.path.join(sweep_dir, record_filename(T)))
        assert os.path.exists(os.path.join(sweep_dir, "manifest.json"))

    def test_json_summary(self, tmp_path, capsys):
        cfg = write_doc(tmp_path, base_doc())
        out = str(tmp_path / "results")
        assert main(["sweep", "--config", cfg, "--out", out, "--json"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["n_records"] == 8
        assert summary["n_replicates"] == 2
        assert summary["failed_fraction"] == 0.0
        assert len(summary["record_files"]) == 4

    def test_single_cell_sweep(self, tmp_path, capsys):
        doc = base_doc()
        doc["sweep"]["T_grid"] = [4]
        doc["sweep"]["seeds"] = 1
        cfg = write_doc(tmp_path, doc)
        out = str(tmp_path / "results")
        assert main(["sweep", "--config", cfg, "--out", out, "--json"]) == 0
        assert json.loads(capsys.readouterr().out)["n_records"] == 1
        lines = open(os.path.join(out, record_filename(4))).read().splitlines()
        assert len(lines) == 1

    def test_rerun_is_byte_identical(self, tmp_path, sweep_dir):
        cfg = write_doc(tmp_path, base_doc())
        again = str(tmp_path / "again")
        assert main(["sweep", "--config", cfg, "--out", again]) == 0
        for T in (4, 8, 16, 32):
            name = record_filename(T)
            assert (open(os.path.join(again, name), "rb").read()
                    == open(os.path.join(sweep_dir, name), "rb").read())

    def test_worker_count_does_not_change_results(self, tmp_path, sweep_dir):
        cfg = write_doc(tmp_path, base_doc())
        parallel = str(tmp_path / "parallel")
        assert main(["sweep", "--config", cfg, "--out", parallel,
                     "--jobs", "2"]) == 0
        for T in (4, 8, 16, 32):
            name = record_filename(T)
            assert (open(os.path.join(parallel, name), "rb").read()
                    == open(os.path.join(sweep_dir, name), "rb").read())

    def test_mass_divergence_exits_4(self, tmp_path):
        doc = base_doc()
        doc["system"]["x0"] = [1e13]  # beyond the tripwire from step one
        cfg = write_doc(tmp_path, doc)
        out = str(tmp_path / "results")
        assert main(["sweep", "--config", cfg, "--out", out]) == 4
        # records are still written for post-mortem inspection
        assert os.path.exists(os.path.join(out, record_filename(4)))


def planted_records_dir(tmp_path):
    """Synthetic records with regret ~ T^0.5 and errors ~ T^-0.25."""
    by_T = {}
    for T in (16, 64, 256, 1024):
        rows = []
        for rep in range(5):
            bump = 1.0 + 0.02 * rep
            cp = CheckpointDiag(
                T=T, gram=np.eye(2), lam_parallel=0.5 * T * bump,
                lam_perp=2.0 * T ** 0.5 * bump, lam_delta=1.5 * T ** 0.5 * bump,
                est_err_theta=1.2 * T ** -0.25 * bump,
                est_err_K=0.9 * T ** -0.25 * bump,
                decomp_residual=3.0 * T ** 0.25 * bump,
            )
            rows.append(RunRecord(
                T=T, seed=0, replicate_id=rep, coupled=True,
                cost_algo=1.0, cost_oracle=0.0,
                regret=2.0 * T ** 0.5 * bump,
                est_err_theta=cp.est_err_theta, est_err_K=cp.est_err_K,
                reset_count=0, last_reset_reason="none", checkpoints=(cp,),
            ))
        by_T[T] = rows
    out = tmp_path / "planted"
    out.mkdir()
    for T, rows in by_T.items():
        write_records(str(out / record_filename(T)), rows)
    return str(out)


class TestRates:
    def test_recovers_planted_slopes_via_cli(self, tmp_path, capsys):
        results = planted_records_dir(tmp_path)
        assert main(["rates", results, "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        stats = report["stats"]
        assert stats["regret"]["slope"] == pytest.approx(0.5, abs=1e-9)
        assert stats["est_err_theta"]["slope"] == pytest.approx(-0.25, abs=1e-9)
        assert stats["lam_parallel"]["slope"] == pytest.approx(1.0, abs=1e-9)
        assert stats["regret"]["passed"] is True

    def test_table_output(self, tmp_path, capsys):
        results = planted_records_dir(tmp_path)
        assert main(["rates", results]) == 0
        out = capsys.readouterr().out
        assert "statistic" in out
        assert "regret" in out
        assert "medians:" in out

    def test_real_sweep_records_are_readable(self, sweep_dir, capsys):
        assert main(["rates", sweep_dir, "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["horizons"] == [4, 8, 16, 32]
        assert report["n_records"] == 8

    def test_out_writes_report_files(self, tmp_path, capsys):
        results = planted_records_dir(tmp_path)
        report_dir = str(tmp_path / "report")
        assert main(["rates", results, "--out", report_dir]) == 0
        for name in ("rates.json", "medians.csv", "rates.png",
                     "diagnostics.png"):
            path = os.path.join(report_dir, name)
            assert os.path.exists(path), name
            assert os.path.getsize(path) > 0, name
        doc = json.load(open(os.path.join(report_dir, "rates.json")))
        assert doc["stats"]["regret"]["slope"] == pytest.approx(0.5, abs=1e-9)
        header = open(os.path.join(report_dir, "medians.csv")).readline()
        assert header.startswith("T,regret,")

    def test_too_few_horizons_exits_3(self, tmp_path):
        doc = base_doc()
        doc["sweep"]["T_grid"] = [4, 8]
        cfg = write_doc(tmp_path, doc)
        out = str(tmp_path / "results")
        assert main(["sweep", "--config", cfg, "--out", out]) == 0
        assert main(["rates", out]) == 3

    def test_empty_dir_exits_3(self, tmp_path):
        assert main(["rates", str(tmp_path)]) == 3
        assert main(["rates", str(tmp_path / "missing")]) == 3


class TestPlot:
    def test_writes_wellformed_svg(self, tmp_path):
        results = planted_records_dir(tmp_path)
        dest = str(tmp_path / "chart.svg")
        assert main(["plot", results, "--out", dest]) == 0
        root = ET.parse(dest).getroot()
        assert root.tag.endswith("svg")

    def test_default_location_is_inside_results(self, tmp_path):
        results = planted_records_dir(tmp_path)
        assert main(["plot", results]) == 0
        assert os.path.exists(os.path.join(results, "rates.svg"))

    def test_plot_is_deterministic(self, tmp_path):
        results = planted_records_dir(tmp_path)
        a, b = str(tmp_path / "a.svg"), str(tmp_path / "b.svg")
        assert main(["plot", results, "--out", a]) == 0
        assert main(["plot", results, "--out", b]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_empty_dir_exits_3(self, tmp_path):
        assert main(["plot", str(tmp_path)]) == 3


class TestGenSystem:
    ARGS = ["gen-system", "--n", "2", "--d", "1", "--spectral-radius", "0.7"]

    def test_emits_valid_config(self, capsys):
        from adaptive_lqr import config_from_dict

        assert main(self.ARGS + ["--seed", "3"]) == 0
        doc = json.loads(capsys.readouterr().out)
        cfg = config_from_dict(doc)
        assert cfg.n == 2 and cfg.d == 1
        # the dynamics matrix is rescaled to the requested radius exactly
        A = np.array(doc["system"]["A"]).reshape(2, 2)
        radius = max(abs(np.linalg.eigvals(A)))
        assert radius == pytest.approx(0.7, rel=1e-12)

    def test_scalar_system_pins_magnitude(self, capsys):
        assert main(["gen-system", "--n", "1", "--d", "1",
                     "--spectral-radius", "0.5", "--seed", "0"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert abs(doc["system"]["A"][0]) == pytest.approx(0.5, rel=1e-12)

    def test_deterministic_per_seed(self, capsys):
        main(self.ARGS + ["--seed", "9"])
        first = capsys.readouterr().out
        main(self.ARGS + ["--seed", "9"])
        assert capsys.readouterr().out == first
        main(self.ARGS + ["--seed", "10"])
        assert capsys.readouterr().out != first

    def test_out_flag(self, tmp_path, capsys):
        dest = str(tmp_path / "sys.json")
        assert main(self.ARGS + ["--seed", "3", "--out", dest]) == 0
        main(self.ARGS + ["--seed", "3"])
        assert open(dest).read() == capsys.readouterr().out

    @pytest.mark.parametrize("radius", ["0.0", "1.0", "1.5", "-0.2"])
    def test_invalid_radius_exits_2(self, radius):
        assert main(["gen-system", "--n", "1", "--d", "1",
                     "--spectral-radius", radius]) == 2

    def test_invalid_dimensions_exit_2(self):
        assert main(["gen-system", "--n", "0", "--d", "1",
                     "--spectral-radius", "0.5"]) == 2


class TestVersionFlag:
    def test_version_prints_and_exits(self, capsys):
        from adaptive_lqr import __version__

        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out
