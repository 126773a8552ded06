"""
End-to-end tests for the configuration file, the pipeline and the CLI.
"""

import datetime
import os

import numpy as np
import pandas as pd
import pytest

from cli import main
from conftest import A_STABLE_3, SIGMA_3, price_csv_text
from config import DEFAULT_LEVELS, DEFAULT_THRESHOLDS
from errors import ConfigError
from pipeline import load_config, run_pipeline, validate_config
from simulate import DgpSpec, simulate_var
from utils import dump_json, parse_json_content, read_file_content

EXPECTED_ARTIFACTS = [
    "stats.csv",
    "stats_display.csv",
    "growth_index.csv",
    "model.txt",
    "coefficients.csv",
    "sigma_u.csv",
    "granger_pvalues.csv",
    "granger_pvalues_display.csv",
    "granger_edges.csv",
    "connectedness_h10.csv",
    "connectedness_h10_display.csv",
    "spillovers_h10.csv",
    "fevd_edges.csv",
    "granger_network.dot",
    "granger_network.json",
    "fevd_network.dot",
    "fevd_network.json",
    "network_summary.csv",
    "network_degrees.csv",
    "manifest.json",
]


@pytest.fixture
def price_files(write_csv):
    """Two price files: a and b every day, c with every seventh day missing."""
    returns = simulate_var(DgpSpec(A=(A_STABLE_3,), sigma_u=SIGMA_3, n=400, seed=5)).values
    crypto = write_csv("crypto.csv", price_csv_text(returns[:, :2], ["a", "b"]))
    stock = write_csv("stock.csv", price_csv_text(returns[:, 2:], ["c"], skip=set(range(6, 401, 7))))
    return crypto, stock


@pytest.fixture
def write_config(write_csv):
    def _write(name="run.conf", **entries):
        lines = [f"{key} = {value}" for key, value in entries.items()]
        return write_csv(name, "# spillnet run\n" + "\n".join(lines) + "\n")

    return _write


def _basic_entries(**overrides):
    entries = {
        "inputs": "crypto.csv, stock.csv",
        "groups": "a:crypto, b:crypto, c:stock",
        "output_dir": "out",
        "lag": "1",
        "oracle_sims": "0",
    }
    entries.update(overrides)
    return entries


class TestValidateConfig:
    def test_empty_file(self, write_csv):
        config, problems = validate_config(write_csv("empty.conf", ""))
        assert config is None
        for key in ("inputs", "groups", "output_dir"):
            assert f"missing required key '{key}'" in problems

    def test_defaults(self, write_config):
        path = write_config(inputs="x.csv", groups="A:g", output_dir="o")
        config, problems = validate_config(path)
        assert problems == []
        assert config.lag is None
        assert config.criterion == "bic"
        assert config.pmax == 10
        assert config.horizons == (10,)
        assert config.levels == DEFAULT_LEVELS
        assert config.thresholds == DEFAULT_THRESHOLDS
        assert config.missing == "drop"
        assert config.oracle_sims == 10_000
        assert config.inputs == (os.path.join(os.path.dirname(path), "x.csv"),)

    def test_thresholds_out_of_order(self, write_config):
        config, problems = validate_config(write_config(**_basic_entries(thresholds="15, 5")))
        assert config is None
        assert "thresholds must be increasing" in problems

    def test_every_problem_reported(self, write_config):
        path = write_config(**_basic_entries(foo="1", levels="0.1, 0.05", oracle_sims="10"))
        config, problems = validate_config(path)
        assert config is None
        assert any("unknown key 'foo'" in p for p in problems)
        assert "levels must be increasing" in problems
        assert any(p.startswith("oracle_sims") for p in problems)

    def test_load_config_raises(self, write_csv):
        with pytest.raises(ConfigError, match="problem") as info:
            load_config(write_csv("empty.conf", ""))
        assert len(info.value.problems) == 3
        assert info.value.exit_code == 10


class TestRunPipeline:
    def test_artifacts(self, price_files, write_config, tmp_path):
        config = load_config(write_config(**_basic_entries()))
        assert run_pipeline(config) == 0
        out = tmp_path / "out"
        for name in EXPECTED_ARTIFACTS:
            assert (out / name).is_file(), name
        assert not (out / "fev_check.csv").exists()

        manifest = parse_json_content(read_file_content(str(out / "manifest.json")))
        assert manifest["tool"] == "spillnet"
        assert manifest["summary"]["lag"] == 1
        assert manifest["config"]["oracle_sims"] == 0
        assert {i["path"] for i in manifest["inputs"]} == set(price_files)
        assert "manifest.json" not in manifest["artifacts"]
        assert set(manifest["artifacts"]) == set(EXPECTED_ARTIFACTS) - {"manifest.json"}

        stats = pd.read_csv(out / "stats.csv", index_col=0)
        assert list(stats.index) == ["a", "b", "c"]
        table = pd.read_csv(out / "connectedness_h10.csv", index_col=0)
        assert list(table.columns) == ["a", "b", "c", "From crypto", "From stock"]
        assert list(table.index) == ["a", "b", "c", "To crypto", "To stock"]

        growth = pd.read_csv(out / "growth_index.csv", index_col=0)
        assert growth.index.name == "date"
        assert list(growth.columns) == ["a", "b", "c"]
        # 401 price rows less the 57 dates missing from stock.csv
        assert len(growth) == 344
        assert growth.index[0] == "2021-01-01"
        assert growth.iloc[0].tolist() == [0.0, 0.0, 0.0]

    def test_lag_selection_and_oracle(self, price_files, write_config, tmp_path):
        path = write_config(**_basic_entries(lag="auto", pmax="3", oracle_sims="2000", horizons="10, 5"))
        assert run_pipeline(load_config(path)) == 0
        out = tmp_path / "out"
        assert (out / "connectedness_h5.csv").is_file()
        check = pd.read_csv(out / "fev_check.csv", index_col=0)
        assert list(check.columns) == ["analytic", "empirical", "relative_error"]

    def test_align_failure_leaves_nothing(self, write_csv, write_config, tmp_path):
        returns = np.random.default_rng(0).normal(0, 1, size=(50, 1))
        write_csv("crypto.csv", price_csv_text(returns, ["a"]))
        write_csv("stock.csv", price_csv_text(returns, ["c"], start=datetime.date(2030, 1, 1)))
        config = load_config(write_config(**_basic_entries(groups="a:crypto, c:stock")))
        assert run_pipeline(config) == 20
        out = tmp_path / "out"
        assert not out.exists() or os.listdir(out) == []

    def test_fit_failure_removes_partial_outputs(self, price_files, write_config, tmp_path):
        config = load_config(write_config(**_basic_entries(lag="500")))
        assert run_pipeline(config) == 30
        assert os.listdir(tmp_path / "out") == []

    def test_deterministic(self, price_files, write_config, tmp_path):
        first = load_config(write_config("one.conf", **_basic_entries(output_dir="one", oracle_sims="2000")))
        second = load_config(write_config("two.conf", **_basic_entries(output_dir="two", oracle_sims="2000")))
        assert run_pipeline(first) == 0
        assert run_pipeline(second) == 0
        names = sorted(os.listdir(tmp_path / "one"))
        assert names == sorted(os.listdir(tmp_path / "two"))
        for name in names:
            if name == "manifest.json":
                continue
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes(), name

    def test_rerun_reproduces_manifest(self, price_files, write_config, tmp_path):
        config = load_config(write_config(**_basic_entries(oracle_sims="2000")))
        manifest = tmp_path / "out" / "manifest.json"
        assert run_pipeline(config) == 0
        first = manifest.read_bytes()
        assert run_pipeline(config) == 0
        assert manifest.read_bytes() == first

    def test_thirteen_return_series(self, write_csv, write_config, tmp_path):
        names = [f"c{k}" for k in range(5)] + [f"s{k}" for k in range(8)]
        rng = np.random.default_rng(13)
        values = rng.standard_normal((300, 13))
        lines = [",".join(["date", *names])]
        for t, row in enumerate(values):
            day = datetime.date(2022, 1, 1) + datetime.timedelta(days=t)
            lines.append(",".join([day.isoformat(), *(repr(float(v)) for v in row)]))
        write_csv("returns.csv", "\n".join(lines) + "\n")
        groups = ", ".join(f"{n}:{'crypto' if n.startswith('c') else 'stock'}" for n in names)
        path = write_config(
            inputs="returns.csv", groups=groups, output_dir="out", input_kind="returns", lag="1", oracle_sims="0"
        )
        assert run_pipeline(load_config(path)) == 0
        table = pd.read_csv(tmp_path / "out" / "connectedness_h10.csv", index_col=0)
        assert table.shape == (15, 15)
        pvalues = pd.read_csv(tmp_path / "out" / "granger_pvalues.csv", index_col=0)
        assert pvalues.shape == (13, 13)
        assert pvalues.notna().to_numpy().sum() == 156
        assert not (tmp_path / "out" / "growth_index.csv").exists()


class TestCli:
    def test_run(self, price_files, write_config, tmp_path):
        assert main(["run", write_config(**_basic_entries())]) == 0
        assert (tmp_path / "out" / "manifest.json").is_file()

    def test_run_with_bad_config(self, write_config):
        assert main(["run", write_config(**_basic_entries(thresholds="15, 5"))]) == 10

    def test_subcommand_chain(self, price_files, tmp_path):
        crypto, stock = price_files
        work = str(tmp_path / "work")
        inputs = ["--input", crypto, "--input", stock, "--groups", "a:crypto, b:crypto, c:stock"]
        assert main(["stats", *inputs, "--out-dir", work]) == 0
        assert main(["fit", *inputs, "--pmax", "3", "--out-dir", work]) == 0
        assert os.path.isfile(os.path.join(work, "lag_selection.csv"))
        model = os.path.join(work, "model.txt")
        assert main(["granger", "--model", model, "--out-dir", work]) == 0
        assert main(["fevd", "--model", model, "--horizon", "10", "--horizon", "5", "--out-dir", work]) == 0
        assert main(["network", "--model", model, "--kind", "fevd", "--out", os.path.join(work, "net", "fevd")]) == 0
        expected = ("stats.csv", "growth_index.csv", "granger_pvalues.csv", "connectedness_h5.csv")
        for name in (*expected, "net/fevd.dot", "net/fevd.json"):
            assert os.path.isfile(os.path.join(work, name)), name

    def test_fit_error_exit_code(self, price_files, tmp_path):
        crypto, stock = price_files
        argv = ["fit", "--input", crypto, "--input", stock, "--lag", "0", "--out-dir", str(tmp_path / "w")]
        assert main(argv) == 30

    def test_missing_model(self, tmp_path):
        assert main(["granger", "--model", str(tmp_path / "none.txt"), "--out-dir", str(tmp_path)]) == 30

    def test_simulate_then_stats_and_mc(self, tmp_path):
        spec = tmp_path / "dgp.json"
        spec.write_text(dump_json({"A": [[0.3, 0.0], [0.0, 0.2]], "sigma_u": [[1.0, 0.0], [0.0, 1.0]], "n": 200}))
        panel_csv = str(tmp_path / "sim.csv")
        assert main(["simulate", "--spec", str(spec), "--out", panel_csv, "--seed", "4", "--n", "300"]) == 0
        panel = pd.read_csv(panel_csv)
        assert len(panel) == 300
        assert main(["stats", "--input", panel_csv, "--input-kind", "returns", "--out-dir", str(tmp_path)]) == 0
        mc_csv = str(tmp_path / "mc.csv")
        assert main(["mc", "--spec", str(spec), "--test", "jb:y1", "--reps", "100", "--out", mc_csv]) == 0
        row = pd.read_csv(mc_csv).iloc[0]
        assert row["test"] == "jb:y1"
        assert row["reps"] == 100

    def test_simulate_bad_spec(self, tmp_path):
        spec = tmp_path / "dgp.json"
        spec.write_text(dump_json({"A": [[1.0]], "sigma_u": [[1.0]], "n": 50}))
        assert main(["simulate", "--spec", str(spec), "--out", str(tmp_path / "x.csv")]) == 70
