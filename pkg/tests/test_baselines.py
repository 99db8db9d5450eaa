import math
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from twimpute.baselines import LOCF, Linear, Mean, ScalarFilter, get_baseline, impute_baseline
from twimpute.core import TimeSeriesPanel
from twimpute.errors import ConfigError
from tests.utils import ar_series, masked_ar_panel

NAN = math.nan


class TestSimpleBaselines(unittest.TestCase):
    def test_linear(self):
        imputed = impute_baseline(TimeSeriesPanel([1.0, NAN, 3.0]), "linear")
        assert_array_equal(imputed[:, 0], [1.0, 2.0, 3.0])

    def test_linear_flat_ends(self):
        imputed = impute_baseline(TimeSeriesPanel([NAN, 2.0, NAN, 4.0, NAN]), Linear())
        assert_array_equal(imputed[:, 0], [2.0, 2.0, 3.0, 4.0, 4.0])

    def test_linear_needs_two(self):
        with self.assertRaises(ConfigError):
            impute_baseline(TimeSeriesPanel([NAN, 2.0, NAN]), Linear())

    def test_locf(self):
        imputed = impute_baseline(TimeSeriesPanel([NAN, 2.0, NAN, 4.0, NAN]), LOCF())
        assert_array_equal(imputed[:, 0], [2.0, 2.0, 2.0, 4.0, 4.0])

    def test_mean(self):
        imputed = impute_baseline(TimeSeriesPanel([1.0, NAN, 3.0, NAN]), Mean())
        assert_array_equal(imputed[:, 0], [1.0, 2.0, 3.0, 2.0])

    def test_columns_independent(self):
        panel = TimeSeriesPanel([[1.0, 10.0], [NAN, NAN], [3.0, 30.0]])
        assert_array_equal(impute_baseline(panel, "linear"), [[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])

    def test_all_missing_column(self):
        with self.assertRaises(ConfigError):
            impute_baseline(TimeSeriesPanel([[1.0, NAN], [2.0, NAN]]), "mean")

    def test_unknown(self):
        with self.assertRaises(ConfigError):
            get_baseline("kalman")


class TestScalarFilter(unittest.TestCase):
    def test_keeps_observed(self):
        panel = masked_ar_panel(200, fraction=0.1, seed=0)
        imputed = impute_baseline(panel, "scalarf")
        observed = ~panel.mask
        assert_array_equal(imputed[observed], panel.values[observed])
        self.assertTrue(np.all(np.isfinite(imputed)))

    def test_tracks_autoregression(self):
        """On an exact AR(1) path the imputation is close to the one-step prediction"""
        n = 120
        rng = np.random.default_rng(1)
        x = np.empty(n)
        x[0] = 1.0
        for t in range(1, n):
            x[t] = 0.7 * x[t - 1] + 0.1 * rng.standard_normal()
        mask = np.zeros(n, dtype=bool)
        mask[[40, 80]] = True
        imputed = impute_baseline(TimeSeriesPanel(x, mask), ScalarFilter(ar_order=1))
        assert_allclose(imputed[[40, 80], 0], 0.7 * x[[39, 79]], atol=0.1)

    def test_matches_ridge_least_squares(self):
        """The effects solve the ridge problem written as an augmented least-squares fit"""
        q, ridge = 2, 1e-4
        x = ar_series(150, seed=2)[:, 0]
        missing = np.zeros(150, dtype=bool)
        missing[[10, 37, 38, 90, 141]] = True
        current = np.where(missing, 0.0, x)

        index = np.flatnonzero(missing)
        rows = []
        for t in range(q, 150):
            lags = [current[t - i] for i in range(1, q + 1)]
            rows.append([1.0] + lags + [float(t == s) for s in index])
        design = np.array(rows)
        penalty = np.sqrt(np.r_[0.0, np.full(design.shape[1] - 1, ridge)])
        stacked = np.vstack([design, np.diag(penalty)])
        target = np.r_[current[q:], np.zeros(design.shape[1])]
        coef, *_ = np.linalg.lstsq(stacked, target, rcond=None)

        imputed = impute_baseline(TimeSeriesPanel(x, missing), ScalarFilter(ar_order=q, ridge=ridge))
        assert_allclose(imputed[index, 0], -coef[1 + q :], rtol=1e-6, atol=1e-8)

    def test_index_without_regression_row(self):
        values = np.sin(np.arange(40.0))
        mask = np.zeros(40, dtype=bool)
        mask[2] = mask[20] = True
        imputed = impute_baseline(TimeSeriesPanel(values, mask), ScalarFilter(ar_order=6))
        self.assertAlmostEqual(imputed[2, 0], 0.0, places=12)

    def test_too_short(self):
        with self.assertRaises(ConfigError):
            impute_baseline(TimeSeriesPanel([1.0, NAN, 3.0]), ScalarFilter(ar_order=6))
