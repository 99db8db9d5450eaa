"""
Reference imputers: linear interpolation, LOCF, mean, and the scalar filter.

Every method works column by column and returns a fully observed n x d array
that agrees with the panel at every observed cell.
"""
from dataclasses import dataclass
import logging
from typing import Union

import numpy as np
import pandas as pd
from scipy import linalg

from .core import TimeSeriesPanel
from .errors import ConfigError, NumericalError
from .types import BoolArray, FloatArray

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Linear:
    """Piecewise-linear between observed neighbours, flat beyond the ends"""

    def impute_column(self, values: FloatArray, missing: BoolArray) -> FloatArray:
        if (~missing).sum() < 2:
            raise ConfigError("linear interpolation needs at least 2 observed values")
        t = np.arange(values.size)
        return np.interp(t, t[~missing], values[~missing])


@dataclass(frozen=True)
class LOCF:
    """Last observation carried forward; a leading gap takes the first observation"""

    def impute_column(self, values: FloatArray, missing: BoolArray) -> FloatArray:
        series = pd.Series(np.where(missing, np.nan, values))
        return series.ffill().bfill().to_numpy()


@dataclass(frozen=True)
class Mean:
    def impute_column(self, values: FloatArray, missing: BoolArray) -> FloatArray:
        mean = np.nanmean(np.where(missing, np.nan, values))
        return np.where(missing, mean, values)


@dataclass(frozen=True)
class ScalarFilter:
    """
    Intervention-analysis imputer.

    Missing cells start at zero. An AR(`ar_order`) with intercept is fitted
    with one indicator regressor per missing time index, using a ridge
    penalty on every coefficient but the intercept. Each missing value is
    then the current value minus its estimated intervention effect. Repeating
    the pass `iterations` times feeds each estimate into the next fit.
    """

    ar_order: int = 6
    ridge: float = 1e-4
    iterations: int = 1

    def fit_effects(self, series: FloatArray, missing: BoolArray) -> FloatArray:
        """Intervention effects beta_s, zero for indices without a regression row"""
        q = self.ar_order
        n = series.size
        index = np.flatnonzero(missing)
        target = series[q:]

        lags = np.column_stack([series[q - i : n - i] for i in range(1, q + 1)])
        indicators = (np.arange(q, n)[:, None] == index[None, :]).astype(np.float64)
        design = np.column_stack([np.ones(n - q), lags, indicators])

        penalty = np.full(design.shape[1], self.ridge)
        penalty[0] = 0.0
        gram = design.T @ design + np.diag(penalty)
        try:
            coef = linalg.solve(gram, design.T @ target, assume_a="sym")
        except linalg.LinAlgError as e:
            raise NumericalError(f"scalar filter design is singular: {e}") from e
        return coef[1 + q :]

    def impute_column(self, values: FloatArray, missing: BoolArray) -> FloatArray:
        if self.ar_order < 1:
            raise ConfigError(f"ar_order must be >= 1, got {self.ar_order}")
        if values.size <= self.ar_order + 1:
            raise ConfigError("series too short for the scalar filter AR order")
        current = np.where(missing, 0.0, values)
        for _ in range(max(1, self.iterations)):
            effects = self.fit_effects(current, missing)
            current = current.copy()
            current[missing] = current[missing] - effects
        return current


BaselineMethod = Union[Linear, LOCF, Mean, ScalarFilter]

BASELINES = {
    "linear": Linear,
    "locf": LOCF,
    "mean": Mean,
    "scalarf": ScalarFilter,
}


def get_baseline(name: str) -> BaselineMethod:
    try:
        return BASELINES[name]()
    except KeyError:
        raise ConfigError(f"unknown baseline {name!r}") from None


def impute_baseline(panel: TimeSeriesPanel, method: Union[BaselineMethod, str]) -> FloatArray:
    """
    Impute every column of `panel` independently with `method`.

    Raises
    ------
    ConfigError
        A column with no observed value, or too few for the method.
    """
    if isinstance(method, str):
        method = get_baseline(method)

    out = np.empty(panel.shape, order="F")
    for j in range(panel.d):
        missing = panel.mask[:, j]
        if missing.all():
            raise ConfigError(f"column {j} has no observed values")
        values = np.where(missing, 0.0, panel.values[:, j])
        if not missing.any():
            out[:, j] = values
            continue
        out[:, j] = method.impute_column(values, missing)

    return panel.fill(out)
