"""
Admissible sets C for the imputation and their Euclidean projections.

Every set is convex and immutable after construction. `project` never mutates
its input.
"""
from abc import ABC, abstractmethod
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .core import TimeSeriesPanel, _as_matrix
from .errors import ConfigError, InfeasibleConstraintError
from .types import ArrayLike, BoolArray, FloatArray

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9


class ConstraintSet(ABC):
    """A closed convex set of n x d imputations"""

    # the observed-cell equality this set enforces, if any
    observed: Optional["ObservedEquality"] = None

    @abstractmethod
    def project(self, point: ArrayLike) -> FloatArray:
        """Euclidean projection of `point` onto the set"""
        pass  # pragma: no cover

    def validate(self, n: int, d: int) -> "ConstraintSet":
        return self

    def contains(self, point: ArrayLike, tol: float = 1e-8) -> bool:
        array = _as_matrix(point)
        return bool(np.max(np.abs(self.project(array) - array), initial=0.0) <= tol)


class ObservedEquality(ConstraintSet):
    """w agrees with the observed data wherever the mask is False"""

    def __init__(self, mask: ArrayLike, values: ArrayLike) -> None:
        self.mask: BoolArray = np.array(mask, dtype=bool).reshape(_as_matrix(values).shape)
        self.values: FloatArray = np.where(self.mask, 0.0, _as_matrix(values))
        self.observed = self

    @classmethod
    def of(cls, panel: TimeSeriesPanel) -> "ObservedEquality":
        return cls(panel.mask, panel.values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mask.shape

    def validate(self, n: int, d: int) -> "ObservedEquality":
        if self.shape != (n, d):
            raise ConfigError(f"observed mask has shape {self.shape}, expected {(n, d)}")
        return self

    def project(self, point: ArrayLike) -> FloatArray:
        out = np.array(_as_matrix(point))
        out[~self.mask] = self.values[~self.mask]
        return out


class LinearEquality(ConstraintSet):
    """
    {w : K w = b}, with K (m x n) shared by every column and b of shape (m,)
    or (m, d).
    """

    def __init__(self, K: ArrayLike, b: ArrayLike) -> None:
        K = np.atleast_2d(np.asarray(K, dtype=np.float64))
        b = np.asarray(b, dtype=np.float64)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if b.shape[0] != K.shape[0]:
            raise ConfigError(f"K has {K.shape[0]} rows but b has {b.shape[0]}")

        self.K: FloatArray = K
        self.b: FloatArray = b
        self._pinv = linalg.pinv(K)
        self.rank = int(np.linalg.matrix_rank(K))

        if self.rank < K.shape[0]:
            residual = K @ (self._pinv @ b) - b
            if np.max(np.abs(residual)) > FEASIBILITY_TOL * (1 + np.max(np.abs(b))):
                raise InfeasibleConstraintError(
                    "K w = b has no solution: b is not in the range of K"
                )

    @property
    def n(self) -> int:
        return self.K.shape[1]

    def rhs(self, d: int) -> FloatArray:
        if self.b.shape[1] == d:
            return self.b
        if self.b.shape[1] == 1:
            return np.repeat(self.b, d, axis=1)
        raise ConfigError(f"b has {self.b.shape[1]} columns, expected 1 or {d}")

    def validate(self, n: int, d: int) -> "LinearEquality":
        if self.n != n:
            raise ConfigError(f"K has {self.n} columns, expected {n}")
        self.rhs(d)
        return self

    def residual(self, point: ArrayLike) -> FloatArray:
        array = _as_matrix(point)
        return self.K @ array - self.rhs(array.shape[1])

    def project(self, point: ArrayLike) -> FloatArray:
        array = _as_matrix(point)
        return array - self._pinv @ self.residual(array)


class Box(ConstraintSet):
    """lower <= w <= upper on missing cells, composed with observed equality"""

    def __init__(
        self,
        observed: ObservedEquality,
        lower: ArrayLike = -np.inf,
        upper: ArrayLike = np.inf,
    ) -> None:
        self.observed = observed
        self.lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), observed.shape)
        self.upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), observed.shape)

        bad = np.argwhere(self.lower > self.upper)
        if bad.size:
            t, j = bad[0]
            raise InfeasibleConstraintError(f"cell ({t}, {j}): lower bound exceeds upper bound")

        values = observed.values
        outside = ~observed.mask & ((values < self.lower) | (values > self.upper))
        bad = np.argwhere(outside)
        if bad.size:
            t, j = bad[0]
            raise InfeasibleConstraintError(
                f"cell ({t}, {j}): observed value {values[t, j]} lies outside "
                f"[{self.lower[t, j]}, {self.upper[t, j]}]"
            )

    def validate(self, n: int, d: int) -> "Box":
        self.observed.validate(n, d)
        return self

    def project(self, point: ArrayLike) -> FloatArray:
        clipped = np.clip(_as_matrix(point), self.lower, self.upper)
        return self.observed.project(clipped)


def _capped_simplex(x: FloatArray, free: BoolArray, target: FloatArray, iters=100) -> FloatArray:
    """
    Row-wise projection of the free entries onto {0 <= y <= 1, sum y = target}
    by bisection on the shift tau in y = clip(x - tau, 0, 1).
    """
    big = np.max(np.abs(x)) + 2.0
    lo = np.where(free, x, big).min(axis=1) - 1.0
    hi = np.where(free, x, -big).max(axis=1)
    for _ in range(iters):
        tau = 0.5 * (lo + hi)
        total = np.where(free, np.clip(x - tau[:, None], 0.0, 1.0), 0.0).sum(axis=1)
        too_big = total > target
        lo = np.where(too_big, tau, lo)
        hi = np.where(too_big, hi, tau)
    tau = 0.5 * (lo + hi)
    return np.clip(x - tau[:, None], 0.0, 1.0)


class Simplex(ConstraintSet):
    """
    Rows sum to one, composed with observed equality.

    With `box` (the default) every missing cell is also kept in [0, 1], which
    is what compositional data needs. Without it only the affine sum-to-one
    constraint is enforced.
    """

    def __init__(self, observed: ObservedEquality, box: bool = True) -> None:
        self.observed = observed
        self.box = box

        mask, values = observed.mask, observed.values
        observed_sum = np.where(mask, 0.0, values).sum(axis=1)
        free_count = mask.sum(axis=1)

        for t in range(mask.shape[0]):
            if free_count[t] == 0 and abs(observed_sum[t] - 1.0) > 1e-8:
                raise InfeasibleConstraintError(
                    f"row {t} is fully observed but sums to {observed_sum[t]}"
                )
            if not box:
                continue
            cells = np.argwhere(~mask[t] & ((values[t] < 0) | (values[t] > 1)))
            if cells.size:
                j = cells[0][0]
                raise InfeasibleConstraintError(
                    f"cell ({t}, {j}): observed value {values[t, j]} lies outside [0, 1]"
                )
            if free_count[t] and not (-1e-12 <= 1.0 - observed_sum[t] <= free_count[t] + 1e-12):
                raise InfeasibleConstraintError(
                    f"row {t}: observed cells sum to {observed_sum[t]}, "
                    f"the {free_count[t]} missing cells cannot make up the rest in [0, 1]"
                )

        self._free = mask
        self._target = 1.0 - observed_sum
        self._free_count = free_count

    def validate(self, n: int, d: int) -> "Simplex":
        self.observed.validate(n, d)
        return self

    def project(self, point: ArrayLike) -> FloatArray:
        array = self.observed.project(point)
        rows = self._free_count > 0
        if not rows.any():
            return array
        free = self._free[rows]
        x = array[rows]
        target = self._target[rows]
        if self.box:
            y = _capped_simplex(x, free, target)
        else:
            excess = np.where(free, x, 0.0).sum(axis=1) - target
            y = x - (excess / self._free_count[rows])[:, None]
        array[rows] = np.where(free, y, x)
        return array


class Intersection(ConstraintSet):
    """
    The intersection of convex sets, projected onto with Dykstra's algorithm.
    """

    def __init__(
        self,
        parts: Sequence[ConstraintSet],
        max_iters: int = 100,
        tol: float = 1e-12,
    ) -> None:
        if not parts:
            raise ConfigError("an intersection needs at least one set")
        self.parts = tuple(parts)
        self.max_iters = max_iters
        self.tol = tol
        self.observed = next((c.observed for c in self.parts if c.observed is not None), None)

    def validate(self, n: int, d: int) -> "Intersection":
        for part in self.parts:
            part.validate(n, d)
        return self

    def project(self, point: ArrayLike) -> FloatArray:
        x = _as_matrix(point)
        increments = [np.zeros_like(x) for _ in self.parts]
        for iteration in range(self.max_iters):
            previous = x
            for i, part in enumerate(self.parts):
                y = part.project(x + increments[i])
                increments[i] = x + increments[i] - y
                x = y
            if np.max(np.abs(x - previous)) <= self.tol:
                break
        else:
            logger.debug(f"Dykstra stopped at the {self.max_iters}-iteration cap")
        return x


def difference(raw: TimeSeriesPanel) -> TimeSeriesPanel:
    """
    First differences y_t = x_{t+1} - x_t. A difference is observed only when
    both of its endpoints are.
    """
    if raw.n < 2:
        raise ConfigError("cannot difference a series with fewer than 2 points")
    values = np.diff(np.nan_to_num(raw.values), axis=0)
    mask = raw.mask[1:] | raw.mask[:-1]
    return TimeSeriesPanel(values, mask)


class CumulativeSum(LinearEquality):
    """
    Equalities tying an imputation of the differenced series to the observed
    levels: for every observed t after the anchor t0,
    w_{t0+1} + ... + w_t = x_t - x_{t0} (w_s is the difference x_s - x_{s-1},
    stored at position s - 1).
    """

    def __init__(self, anchor: int, base: float, ends: Sequence[int], targets: ArrayLike, n: int):
        K = np.zeros((len(ends), n - 1))
        for row, t in enumerate(ends):
            K[row, anchor:t] = 1.0
        super().__init__(K, targets)
        self.anchor = anchor
        self.base = float(base)
        self.ends = tuple(ends)

    def integrate(self, w: ArrayLike) -> FloatArray:
        """Levels x_0..x_{n-1} from differences, pinned at the anchor"""
        diffs = _as_matrix(w)
        levels = np.concatenate([np.zeros((1, diffs.shape[1])), np.cumsum(diffs, axis=0)])
        return levels - levels[self.anchor] + self.base


def build_cumsum_constraints(raw: TimeSeriesPanel) -> CumulativeSum:
    """
    Cumulative-sum constraints for imputing the differences of a univariate
    I(1) series. The first observed index is the anchor.
    """
    if raw.d != 1:
        raise ConfigError("cumulative-sum constraints need a univariate series")
    observed = np.flatnonzero(~raw.mask[:, 0])
    if observed.size < 2:
        raise ConfigError("at least 2 observed values are needed to difference")

    anchor = int(observed[0])
    base = raw.values[anchor, 0]
    ends = [int(t) for t in observed[1:]]
    targets = raw.values[ends, 0] - base
    return CumulativeSum(anchor, base, ends, targets, raw.n)


def from_dict(description: dict, panel: TimeSeriesPanel) -> ConstraintSet:
    """
    Build a constraint set from its JSON description, e.g.
    {"kind": "box", "lower": 0, "upper": 1} or
    {"kind": "intersection", "parts": [{"kind": "box", ...}, {"kind": "simplex"}]}.
    """
    kind = description.get("kind", "observed")
    observed = ObservedEquality.of(panel)
    if kind == "observed":
        return observed
    if kind == "box":
        return Box(
            observed,
            lower=description.get("lower", -np.inf),
            upper=description.get("upper", np.inf),
        )
    if kind == "simplex":
        return Simplex(observed, box=bool(description.get("box", True)))
    if kind == "linear":
        return LinearEquality(description["K"], description["b"])
    if kind == "cumsum":
        return build_cumsum_constraints(panel)
    if kind == "intersection":
        return Intersection(
            [from_dict(part, panel) for part in description.get("parts", [])],
            max_iters=int(description.get("max_iters", 100)),
        )
    raise ConfigError(f"unknown constraint kind {kind!r}")
