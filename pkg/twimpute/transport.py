"""
Discrete optimal transport between uniform empirical measures.
"""
from dataclasses import dataclass
import logging
from typing import Tuple

import numpy as np
import ot

from .errors import NumericalError
from .types import ArrayLike, FloatArray

logger = logging.getLogger(__name__)

CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class TransportPlan:
    """
    A coupling Pi between the pre and post embeddings.

    Rows sum to 1/r and columns to 1/c. Entries in [-1e-12, 0) are clamped to
    zero on construction.
    """

    matrix: FloatArray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("a transport plan is a matrix")
        matrix[(matrix < 0) & (matrix >= -CLAMP_TOL)] = 0.0
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    @property
    def row_mass(self) -> float:
        return 1.0 / self.matrix.shape[0]

    @property
    def col_mass(self) -> float:
        return 1.0 / self.matrix.shape[1]

    def marginal_error(self) -> float:
        """Largest deviation of a row or column sum from its uniform mass"""
        rows = np.abs(self.matrix.sum(axis=1) - self.row_mass).max()
        cols = np.abs(self.matrix.sum(axis=0) - self.col_mass).max()
        return float(max(rows, cols))

    def cost(self, cost: ArrayLike) -> float:
        return float(np.sum(self.matrix * np.asarray(cost)))

    def nonzero(self):
        """(rows, cols, values) of the support"""
        rows, cols = np.nonzero(self.matrix)
        return rows, cols, self.matrix[rows, cols]


def _check_cost(cost: ArrayLike) -> FloatArray:
    matrix = np.array(cost, dtype=np.float64)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise ValueError(f"cost must be a non-empty matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("cost matrix has non-finite entries")
    return matrix


def _uniform(size: int) -> FloatArray:
    return np.full(size, 1.0 / size)


def _solve_lp(a: FloatArray, b: FloatArray, cost: FloatArray) -> FloatArray:
    """Network simplex for general marginals; only the uniform case is public"""
    max_iter = max(100_000, 50 * cost.shape[0] * cost.shape[1])
    plan, log = ot.emd(a, b, cost, numItermax=max_iter, log=True)
    code = log.get("result_code", 1)
    if code in (0, 2):
        raise NumericalError(f"network simplex failed: {log.get('warning')}")
    if code != 1:
        logger.warning(f"network simplex returned a non-optimal plan: {log.get('warning')}")
    return np.asarray(plan)


def solve_exact(cost: ArrayLike) -> Tuple[TransportPlan, float]:
    """
    Exact OT between uniform measures via network simplex.

    Returns the optimal plan and <plan, cost>.
    """
    matrix = _check_cost(cost)
    r, c = matrix.shape
    plan = TransportPlan(_solve_lp(_uniform(r), _uniform(c), matrix))
    return plan, plan.cost(matrix)


def round_to_coupling(plan: FloatArray, a: FloatArray, b: FloatArray) -> FloatArray:
    """
    Project an approximate coupling onto the exact marginals (a, b) by row and
    column down-scaling followed by a rank-one correction.
    """
    plan = np.array(plan, dtype=np.float64)
    row_sums = plan.sum(axis=1)
    scale = np.minimum(a / np.where(row_sums > 0, row_sums, 1.0), 1.0)
    plan *= scale[:, None]
    col_sums = plan.sum(axis=0)
    scale = np.minimum(b / np.where(col_sums > 0, col_sums, 1.0), 1.0)
    plan *= scale[None, :]
    err_a = a - plan.sum(axis=1)
    err_b = b - plan.sum(axis=0)
    total = np.abs(err_a).sum()
    if total > 0:
        plan += np.outer(err_a, err_b) / total
    return plan


def solve_sinkhorn(
    cost: ArrayLike,
    epsilon: float,
    max_iters: int = 10000,
    tol: float = 1e-9,
) -> Tuple[TransportPlan, float]:
    """
    Entropy-regularised OT (log-domain Sinkhorn), rounded to a feasible plan.

    The reported cost is <plan, cost> of the rounded plan, not the regularised
    objective.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    matrix = _check_cost(cost)
    r, c = matrix.shape
    a, b = _uniform(r), _uniform(c)

    raw, log = ot.sinkhorn(
        a,
        b,
        matrix,
        reg=epsilon,
        method="sinkhorn_log",
        numItermax=max_iters,
        stopThr=tol,
        log=True,
    )
    raw = np.asarray(raw)
    if not np.all(np.isfinite(raw)) or np.any(raw.sum(axis=1) <= 0):
        raise NumericalError(
            f"Sinkhorn underflow at epsilon={epsilon:g}; use a larger epsilon"
        )
    errors = log.get("err") or [0.0]
    if errors[-1] > tol:
        logger.warning(f"Sinkhorn stopped before tolerance, marginal err={errors[-1]:.2e}")

    plan = TransportPlan(round_to_coupling(raw, a, b))
    return plan, plan.cost(matrix)


def solve(cost: ArrayLike, method: str = "exact", **kwargs) -> Tuple[TransportPlan, float]:
    if method == "exact":
        return solve_exact(cost)
    return solve_sinkhorn(cost, **kwargs)


def solve_1d_monotone(k: float, a: ArrayLike, b: ArrayLike) -> float:
    """
    OT cost |x - y|^k between uniform measures on sorted scalars `a` and `b`,
    using the monotone (quantile) coupling.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if k < 1:
        raise ValueError(f"cost order must be >= 1, got {k}")
    if a.size == 0 or b.size == 0:
        raise ValueError("supports must be non-empty")
    if np.any(np.diff(a) < 0) or np.any(np.diff(b) < 0):
        raise ValueError("supports must be sorted ascending")

    r, c = a.size, b.size
    # cumulative masses on the integer grid 0..r*c
    cum_a = np.arange(1, r + 1) * c
    cum_b = np.arange(1, c + 1) * r
    breaks = np.union1d(cum_a, cum_b)
    mass = np.diff(breaks, prepend=0) / (r * c)
    ia = np.searchsorted(cum_a, breaks, side="left")
    ib = np.searchsorted(cum_b, breaks, side="left")
    return float(np.sum(mass * np.abs(a[ia] - b[ib]) ** k))
