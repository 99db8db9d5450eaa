import math
from pathlib import Path
import unittest

import numpy as np
from numpy.testing import assert_array_equal

from twimpute.core import (
    ImputationResult,
    TimeSeriesPanel,
    TraceSegment,
    TwiConfig,
    read_csv,
    write_array,
    write_csv,
)
from twimpute.errors import ConfigError, CsvFormatError
from tests.utils import isolated_filesystem


class TestPanel(unittest.TestCase):
    def test_mask_from_nan(self):
        panel = TimeSeriesPanel([1.0, math.nan, 3.0])
        self.assertEqual(panel.shape, (3, 1))
        assert_array_equal(panel.mask[:, 0], [False, True, False])
        self.assertEqual(panel.missing_count, 1)
        self.assertTrue(panel.has_missing)

    def test_explicit_mask_hides_value(self):
        """A masked cell is stored as NaN whatever value was passed"""
        panel = TimeSeriesPanel([[1.0, 2.0], [3.0, 4.0]], [[False, True], [False, False]])
        self.assertTrue(math.isnan(panel.values[0, 1]))
        self.assertEqual(panel.values[1, 1], 4.0)

    def test_mask_shape_mismatch(self):
        with self.assertRaises(ConfigError):
            TimeSeriesPanel(np.zeros((4, 2)), np.zeros((4, 3), dtype=bool))

    def test_non_finite_observed(self):
        with self.assertRaises(ConfigError):
            TimeSeriesPanel([1.0, math.inf, 2.0])

    def test_empty(self):
        with self.assertRaises(ConfigError):
            TimeSeriesPanel(np.zeros((0, 1)))

    def test_read_only(self):
        panel = TimeSeriesPanel([1.0, 2.0])
        with self.assertRaises(ValueError):
            panel.values[0, 0] = 5.0
        with self.assertRaises(ValueError):
            panel.mask[0, 0] = True

    def test_fill_restores_observed(self):
        panel = TimeSeriesPanel([1.0, math.nan, 3.0])
        filled = panel.fill([[9.0], [2.0], [9.0]])
        assert_array_equal(filled[:, 0], [1.0, 2.0, 3.0])

    def test_column(self):
        panel = TimeSeriesPanel([[1.0, math.nan], [2.0, 3.0]])
        column = panel.column(1)
        self.assertEqual(column.shape, (2, 1))
        assert_array_equal(column.mask[:, 0], [True, False])

    def test_equality(self):
        a = TimeSeriesPanel([1.0, math.nan])
        b = TimeSeriesPanel([1.0, math.nan])
        self.assertEqual(a, b)
        self.assertNotEqual(a, TimeSeriesPanel([1.0, 2.0]))


class TestTwiConfig(unittest.TestCase):
    def test_for_length(self):
        cfg = TwiConfig.for_length(1000)
        self.assertEqual(cfg.n1, 400)
        self.assertEqual(cfg.p, 6)
        self.assertEqual(cfg.lam, 0.0)

    def test_sizes(self):
        cfg = TwiConfig(n1=40, p=6)
        self.assertEqual(cfg.pre_size(), 36)
        self.assertEqual(cfg.post_size(100), 59)

    def test_cutoff_range(self):
        TwiConfig(n1=6, p=6).validate(100)
        TwiConfig(n1=93, p=6).validate(100)
        for n1 in (5, 94):
            with self.assertRaises(ConfigError):
                TwiConfig(n1=n1, p=6).validate(100)

    def test_invalid_fields(self):
        for kwargs in (
            {"p": 0},
            {"lam": -1.0},
            {"cost_order": 0.5},
            {"ot_method": "greedy"},
            {"subproblem_method": "newton"},
            {"tol_rel": 0.0},
            {"max_outer_iters": 0},
            {"ot_method": "sinkhorn", "sinkhorn_epsilon": 0.0},
        ):
            with self.subTest(**kwargs), self.assertRaises(ConfigError):
                TwiConfig(n1=40, **kwargs).validate(100)

    def test_with_cutoff(self):
        cfg = TwiConfig(n1=40, p=3, lam=0.5).with_cutoff(60)
        self.assertEqual((cfg.n1, cfg.p, cfg.lam), (60, 3, 0.5))


class TestResult(unittest.TestCase):
    def test_report(self):
        result = ImputationResult(
            imputed=np.zeros((5, 1)),
            mask=np.zeros((5, 1), dtype=bool),
            plan=None,
            objective_trace=[3.0, 2.0, 1.0],
            converged=True,
            iterations=3,
            segments=[TraceSegment(10, 0, 2), TraceSegment(20, 2, 3)],
        )
        report = result.report()
        self.assertEqual(report["iterations"], 3)
        self.assertEqual([s["cutoff"] for s in report["segments"]], [10, 20])
        self.assertEqual(report["segments"][0]["trace"], [3.0, 2.0])
        self.assertEqual(result.segment_traces(), [[3.0, 2.0], [1.0]])


class TestCsv(unittest.TestCase):
    def write(self, text: str) -> Path:
        path = Path("data.csv")
        path.write_text(text)
        return path

    def test_missing_tokens(self):
        with isolated_filesystem():
            panel = read_csv(self.write("1.5,NA\n2,\nNaN,4\n"))
            self.assertEqual(panel.shape, (3, 2))
            assert_array_equal(panel.mask, [[False, True], [False, True], [True, False]])
            self.assertEqual(panel.values[0, 0], 1.5)

    def test_header(self):
        with isolated_filesystem():
            panel = read_csv(self.write("a,b\n1,2\n"), header=True)
            self.assertEqual(panel.shape, (1, 2))

    def test_ragged(self):
        with isolated_filesystem():
            with self.assertRaises(CsvFormatError) as ctx:
                read_csv(self.write("1,2\n3\n"))
            self.assertEqual(ctx.exception.row, 1)

    def test_empty(self):
        with isolated_filesystem():
            with self.assertRaises(CsvFormatError) as ctx:
                read_csv(self.write(""))
            self.assertIsNone(ctx.exception.row)

    def test_unparseable(self):
        with isolated_filesystem():
            with self.assertRaises(CsvFormatError):
                read_csv(self.write("1\nabc\n"))

    def test_write_read(self):
        values = np.array([[0.1, math.nan], [1e-17, -3.25], [math.pi, 2.0]])
        with isolated_filesystem():
            panel = TimeSeriesPanel(values)
            write_csv(panel, "out/panel.csv")
            self.assertEqual(read_csv("out/panel.csv"), panel)

    def test_write_array(self):
        with isolated_filesystem():
            write_array([1.0, 2.0, 3.0], "imputed.csv")
            self.assertEqual(Path("imputed.csv").read_text(), "1.0\n2.0\n3.0\n")
