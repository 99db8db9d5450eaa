import json
from pathlib import Path
import unittest

from click.testing import CliRunner
import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from twimpute import __version__
from twimpute.cli import cli
from twimpute.core import TimeSeriesPanel, read_csv, write_csv
from tests.utils import ar_series, isolated_filesystem, masked_ar_panel


class CliTestCase(unittest.TestCase):
    def setUp(self) -> None:
        self.runner = CliRunner()

    def invoke(self, *args: str, exit_code: int = 0):
        result = self.runner.invoke(cli, list(args))
        self.assertEqual(result.exit_code, exit_code, msg=result.output)
        return result


class TestCliVersion(CliTestCase):
    def test_version(self):
        result = self.invoke("--version")
        self.assertIn(__version__, result.output)


class TestCliSimulate(CliTestCase):
    def test_pattern_one(self):
        with isolated_filesystem():
            self.invoke("simulate", "--model", "ar", "--n", "1000", "--pattern", "1", "--seed", "7", "--out", "data/run")
            full = read_csv("data/run.full.csv")
            masked = read_csv("data/run.masked.csv")
            self.assertFalse(full.has_missing)
            self.assertEqual(masked.missing_count, 300)
            assert_array_equal(masked.values[~masked.mask], full.values[~masked.mask])

            first = Path("data/run.masked.csv").read_bytes()
            self.invoke("simulate", "--model", "ar", "--n", "1000", "--pattern", "1", "--seed", "7", "--out", "data/run")
            self.assertEqual(Path("data/run.masked.csv").read_bytes(), first)

    def test_compositions(self):
        with isolated_filesystem():
            self.invoke("simulate", "--model", "al", "--n", "200", "--pattern", "2", "--out", "al")
            full = read_csv("al.full.csv")
            self.assertEqual(full.d, 3)
            assert_allclose(full.values.sum(axis=1), 1.0, atol=1e-12)
            self.assertEqual(read_csv("al.masked.csv").missing_count, 3 * 60)

    def test_from_run_config(self):
        with isolated_filesystem():
            with open("run.json", "w") as f:
                json.dump({"seed": 2, "out": "cfg", "simulate": {"model": "cyc", "n": 50}}, f)
            self.invoke("simulate", "--config", "run.json")
            self.assertEqual(read_csv("cfg.full.csv").n, 50)
            self.assertEqual(read_csv("cfg.masked.csv").missing_count, 15)

    def test_unknown_model(self):
        with isolated_filesystem():
            result = self.invoke("simulate", "--model", "garch", "--out", "x", exit_code=2)
            self.assertIn("garch", result.output)

    def test_missing_out(self):
        with isolated_filesystem():
            self.invoke("simulate", "--model", "ar", exit_code=2)

    def test_invalid_run_config(self):
        with isolated_filesystem():
            with open("run.json", "w") as f:
                json.dump({"simulate": {"n": 5}}, f)
            self.invoke("simulate", "--config", "run.json", "--out", "x", exit_code=2)


class TestCliImpute(CliTestCase):
    def test_linear(self):
        with isolated_filesystem():
            Path("in.csv").write_text("1\nNaN\n3\n")
            self.invoke("impute", "--in", "in.csv", "--method", "linear", "--out", "out.csv")
            self.assertEqual(Path("out.csv").read_text(), "1.0\n2.0\n3.0\n")
            with open("out.json") as f:
                report = json.load(f)
            self.assertEqual(report["method"], "linear")
            self.assertTrue(report["converged"])

    def test_header(self):
        with isolated_filesystem():
            Path("in.csv").write_text("x\n1\nNA\n3\n")
            self.invoke("impute", "--in", "in.csv", "--method", "mean", "--header", "--out", "out.csv")
            assert_array_equal(read_csv("out.csv").values[:, 0], [1.0, 2.0, 3.0])

    def test_fully_observed(self):
        with isolated_filesystem():
            panel = TimeSeriesPanel(ar_series(40, seed=5))
            write_csv(panel, "in.csv")
            self.invoke("impute", "--in", "in.csv", "--method", "twi", "--out", "out.csv")
            self.assertEqual(Path("out.csv").read_bytes(), Path("in.csv").read_bytes())
            with open("out.json") as f:
                report = json.load(f)
            self.assertEqual(report["iterations"], 0)

    def test_twi(self):
        with isolated_filesystem():
            panel = masked_ar_panel(60, fraction=0.2, seed=3)
            write_csv(panel, "in.csv")
            self.invoke("impute", "--in", "in.csv", "--method", "twi", "--p", "3", "--n1", "0.4", "--out", "out.csv")
            imputed = read_csv("out.csv")
            self.assertFalse(imputed.has_missing)
            assert_array_equal(imputed.values[~panel.mask], panel.values[~panel.mask])
            with open("out.json") as f:
                report = json.load(f)
            self.assertEqual(report["method"], "twi")
            self.assertEqual(report["segments"][0]["cutoff"], 24)
            self.assertGreater(len(report["objective_trace"]), 0)

    def test_ktwi_cutoffs(self):
        with isolated_filesystem():
            write_csv(masked_ar_panel(80, fraction=0.2, seed=4), "in.csv")
            self.invoke(
                "impute", "--in", "in.csv", "--method", "ktwi", "--p", "3",
                "--cutoffs", "0.25,0.5,0.75", "--out", "out.csv",
            )
            with open("out.json") as f:
                report = json.load(f)
            self.assertEqual([s["cutoff"] for s in report["segments"]], [20, 40, 60])

    def test_box_constraint(self):
        with isolated_filesystem():
            panel = TimeSeriesPanel(np.clip(masked_ar_panel(60, seed=6).values, -0.5, 0.5))
            write_csv(panel, "in.csv")
            self.invoke(
                "impute", "--in", "in.csv", "--method", "twi", "--p", "3",
                "--constraints", '{"kind": "box", "lower": -0.5, "upper": 0.5}', "--out", "out.csv",
            )
            imputed = read_csv("out.csv").values
            self.assertTrue(np.all(imputed >= -0.5 - 1e-9))
            self.assertTrue(np.all(imputed <= 0.5 + 1e-9))

    def test_constraints_file(self):
        with isolated_filesystem():
            write_csv(masked_ar_panel(40, seed=7), "in.csv")
            Path("box.json").write_text('{"kind": "box", "lower": 10, "upper": 11}')
            result = self.invoke(
                "impute", "--in", "in.csv", "--constraints", "box.json", "--out", "out.csv", exit_code=2
            )
            self.assertIn("(0, 0)", result.output)

    def test_integrated(self):
        with isolated_filesystem():
            levels = np.cumsum(ar_series(61, seed=8, phi=-0.5)[:, 0])
            mask = np.zeros(61, dtype=bool)
            mask[[10, 11, 30, 45]] = True
            panel = TimeSeriesPanel(levels, mask)
            write_csv(panel, "in.csv")
            self.invoke("impute", "--in", "in.csv", "--method", "twi", "--p", "3", "--integrated", "--out", "out.csv")
            imputed = read_csv("out.csv").values[:, 0]
            assert_array_equal(imputed[~mask], levels[~mask])

    def test_integrated_needs_twi(self):
        with isolated_filesystem():
            Path("in.csv").write_text("1\nNaN\n3\n4\n")
            self.invoke("impute", "--in", "in.csv", "--method", "linear", "--integrated", "--out", "o.csv", exit_code=2)

    def test_unknown_method(self):
        with isolated_filesystem():
            Path("in.csv").write_text("1\nNaN\n3\n")
            self.invoke("impute", "--in", "in.csv", "--method", "spline", "--out", "out.csv", exit_code=2)

    def test_ragged_csv(self):
        with isolated_filesystem():
            Path("in.csv").write_text("1,2\n3\n")
            result = self.invoke("impute", "--in", "in.csv", "--out", "out.csv", exit_code=2)
            self.assertIn("row 1", result.output)


class TestCliBenchmark(CliTestCase):
    def run_benchmark(self, out: str):
        return self.invoke(
            "benchmark", "--models", "ar", "--patterns", "1", "--methods", "linear",
            "--reps", "3", "--n", "100", "--seed", "1", "--jobs", "1", "--out", out,
        )

    def test_results(self):
        with isolated_filesystem():
            result = self.run_benchmark("results")
            self.assertIn("results.csv", result.output)
            self.assertIn("results.json", result.output)
            text = Path("results.csv").read_text()
            self.assertTrue(text.startswith("model,pattern,method,metric,value,stderr\n"))
            self.assertIn("ar,1,linear,wasserstein_loss,", text)
            with open("results.json") as f:
                records = json.load(f)
            self.assertTrue(all(r["model"] == "ar" for r in records))

    def test_deterministic(self):
        with isolated_filesystem():
            self.run_benchmark("a")
            self.run_benchmark("b")
            self.assertEqual(Path("a.csv").read_bytes(), Path("b.csv").read_bytes())

    def test_unknown_method(self):
        with isolated_filesystem():
            self.invoke("benchmark", "--methods", "spline", "--reps", "1", "--out", "x", exit_code=2)


class TestCliEvaluate(CliTestCase):
    def test_identical(self):
        with isolated_filesystem():
            write_csv(TimeSeriesPanel(ar_series(50, seed=9)), "a.csv")
            result = self.invoke("evaluate", "--imputed", "a.csv", "--truth", "a.csv", "--lags", "3")
            summary = json.loads(result.output)
            self.assertAlmostEqual(summary["wasserstein_loss"], 0.0, delta=1e-6)
            column = summary["columns"][0]
            self.assertEqual(column["acf"]["rmse"], 0.0)
            self.assertEqual(len(column["pacf"]["imputed"]), 4)

    def test_missing_cells(self):
        with isolated_filesystem():
            Path("a.csv").write_text("1\nNaN\n3\n4\n")
            Path("b.csv").write_text("1\n2\n3\n4\n")
            self.invoke("evaluate", "--imputed", "a.csv", "--truth", "b.csv", exit_code=2)

    def test_constant_series(self):
        with isolated_filesystem():
            Path("a.csv").write_text("1\n" * 20)
            self.invoke("evaluate", "--imputed", "a.csv", "--truth", "a.csv", exit_code=3)


class TestCliTheory(CliTestCase):
    def test_identified(self):
        result = self.invoke("theory", "markov", "--p", "0.3", "--q", "0.2", "--k1", "3", "--k2", "5")
        self.assertEqual(result.output.strip(), "identified: a = 0.8, b = 0.3")

    def test_equal_cadences(self):
        result = self.invoke("theory", "markov", "--p", "0.3", "--q", "0.2", "--k1", "4", "--k2", "4")
        self.assertIn("non-identified", result.output)

    def test_affine_family(self):
        result = self.invoke(
            "theory", "markov", "--p", "0.3", "--q", "0.2", "--k1", "3", "--k2", "5", "--no-stability"
        )
        self.assertIn("affine family", result.output)

    def test_invalid(self):
        self.invoke("theory", "markov", "--p", "1.5", "--q", "0.2", "--k1", "3", "--k2", "5", exit_code=2)


class TestCliConfigInit(CliTestCase):
    def test_init(self):
        with isolated_filesystem():
            result = self.invoke("config", "init")
            self.assertIn("wrote twimpute.json", result.output)
            self.assertTrue(Path("twimpute.schema.json").exists())
            with open("twimpute.json") as f:
                self.assertEqual(json.load(f)["$schema"], "twimpute.schema.json")

            result = self.invoke("config", "init")
            self.assertIn("kept twimpute.json", result.output)

    def test_root_and_overwrite(self):
        with isolated_filesystem():
            self.invoke("config", "init", "--root", "proj")
            result = self.invoke("config", "init", "--root", "proj", "--overwrite")
            self.assertIn("wrote", result.output)
            self.assertTrue(Path("proj/twimpute.json").exists())

    def test_no_schema(self):
        with isolated_filesystem():
            self.invoke("config", "init", "--no-schema")
            with open("twimpute.json") as f:
                self.assertNotIn("$schema", json.load(f))
            self.assertFalse(Path("twimpute.schema.json").exists())

    def test_written_config_drives_simulate(self):
        with isolated_filesystem():
            self.invoke("config", "init")
            self.invoke("simulate", "--config", "twimpute.json", "--n", "40", "--out", "sim")
            self.assertEqual(read_csv("sim.masked.csv").missing_count, 12)
