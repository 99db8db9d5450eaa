"""
The TWI objective F(w, Pi) and its quadratic form H(Pi) for the squared
Euclidean ground cost.
"""
from dataclasses import dataclass
import logging
from typing import Optional

import numpy as np
from scipy import sparse

from .core import TwiConfig, _as_matrix
from .embed import EmbeddingView, pairwise_cost
from .errors import ConfigError, UnsupportedCostError
from .transport import TransportPlan
from .types import ArrayLike, FloatArray

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2000


def _check_plan(plan: TransportPlan, n: int, cfg: TwiConfig):
    expected = (cfg.pre_size(), cfg.post_size(n))
    if plan.shape != expected:
        raise ConfigError(
            f"plan shape {plan.shape} does not match {expected} for n={n}, n1={cfg.n1}, p={cfg.p}"
        )


def eval_F(w: ArrayLike, plan: TransportPlan, cfg: TwiConfig) -> float:
    """
    F(w, Pi) = sum_ij pi_ij ||v_i(w) - v_j(w)||^k + (lambda / 2) ||w||_F^2
    """
    array = _as_matrix(w)
    cfg.validate(array.shape[0])
    _check_plan(plan, array.shape[0], cfg)
    view = EmbeddingView.of(array, cfg)
    cost = pairwise_cost(view.pre(), view.post(), cfg.cost_order)
    return plan.cost(cost) + 0.5 * cfg.lam * float(np.sum(array**2))


def _blocks(cfg: TwiConfig):
    """
    Yield (pre_offset, post_offset) for each lag h. Row i of Pi acts on
    w[pre_offset + i] and column j on w[post_offset + j].
    """
    for h in range(cfg.p):
        yield cfg.p - 1 - h, cfg.n1 + 1 - h


def build_matrix(plan: TransportPlan, cfg: TwiConfig, n: int) -> sparse.csr_matrix:
    """
    Assemble H(Pi) = sum_h A_h(Pi) + (lambda / 2) I as a sparse matrix,
    regardless of the cost order.
    """
    r, c = plan.shape
    rows, cols, vals = plan.nonzero()

    diagonal = np.full(n, 0.5 * cfg.lam)
    off_rows, off_cols, off_vals = [], [], []
    for pre, post in _blocks(cfg):
        diagonal[pre : pre + r] += 1.0 / r
        diagonal[post : post + c] += 1.0 / c
        off_rows.append(rows + pre)
        off_cols.append(cols + post)
        off_vals.append(-vals)

    i = np.concatenate(off_rows)
    j = np.concatenate(off_cols)
    v = np.concatenate(off_vals)
    index = np.arange(n)
    matrix = sparse.coo_matrix(
        (
            np.concatenate([diagonal, v, v]),
            (np.concatenate([index, i, j]), np.concatenate([index, j, i])),
        ),
        shape=(n, n),
    )
    # duplicates are summed on conversion
    return matrix.tocsr()


@dataclass(frozen=True)
class QuadraticForm:
    """
    H(Pi) for a fixed plan, with F(w, Pi) = trace(w^T H w) when k = 2.

    Each column of a multivariate w contributes independently.
    """

    matrix: sparse.csr_matrix
    lam: float
    p: int
    n1: int

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> FloatArray:
        if self.n > DENSE_LIMIT:
            logger.warning(f"densifying a {self.n} x {self.n} quadratic form")
        return self.matrix.toarray()

    def diagonal(self) -> FloatArray:
        return self.matrix.diagonal()

    def apply(self, w: ArrayLike) -> FloatArray:
        array = np.asarray(w, dtype=np.float64)
        return np.asarray(self.matrix @ array)

    def value(self, w: ArrayLike) -> float:
        array = _as_matrix(w)
        return float(np.sum(array * self.apply(array)))

    def gradient(self, w: ArrayLike) -> FloatArray:
        return 2.0 * self.apply(_as_matrix(w))

    def max_eigenvalue(self, iterations: int = 20, seed: int = 0) -> float:
        """Power-iteration estimate of the largest eigenvalue"""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(self.n)
        estimate = 0.0
        for _ in range(iterations):
            y = self.matrix @ x
            norm = np.linalg.norm(y)
            if norm == 0:
                return 0.0
            estimate = float(x @ y / (x @ x))
            x = y / norm
        return max(estimate, float(x @ (self.matrix @ x)))


def assemble_H(plan: TransportPlan, cfg: TwiConfig, n: Optional[int] = None) -> QuadraticForm:
    """
    Build the quadratic form of F(., Pi). Only defined for the squared cost.

    `n` defaults to the series length implied by the plan and cut-off.
    """
    if not cfg.is_quadratic:
        raise UnsupportedCostError(
            f"H(Pi) exists only for cost order 2, got {cfg.cost_order}"
        )
    if n is None:
        n = cfg.n1 + 1 + plan.shape[1]
    cfg.validate(n)
    _check_plan(plan, n, cfg)
    return QuadraticForm(build_matrix(plan, cfg, n), cfg.lam, cfg.p, cfg.n1)


def gradient_F(w: ArrayLike, plan: TransportPlan, cfg: TwiConfig) -> FloatArray:
    """
    Gradient of F in w for any cost order k >= 1.

    For a pair with difference D = v_i - v_j and rho = ||D||, the gradient of
    rho^k in D is k rho^(k-2) D (zero at rho = 0), scattered back onto the
    lagged coordinates.
    """
    array = _as_matrix(w)
    n, d = array.shape
    view = EmbeddingView.of(array, cfg)
    rows, cols, vals = plan.nonzero()

    pre_t = np.asarray(view.indices_pre)[rows]
    post_t = np.asarray(view.indices_post)[cols]
    diff = view.pre()[rows] - view.post()[cols]

    k = cfg.cost_order
    rho = np.linalg.norm(diff, axis=1)
    if k == 2.0:
        coef = 2.0 * vals
    else:
        safe = np.where(rho > 0, rho, 1.0)
        coef = np.where(rho > 0, vals * k * safe ** (k - 2.0), 0.0)
    weighted = (coef[:, None] * diff).reshape(-1, d, cfg.p)

    grad = cfg.lam * array
    for h in range(cfg.p):
        np.add.at(grad, pre_t - h, weighted[:, :, h])
        np.add.at(grad, post_t - h, -weighted[:, :, h])
    return grad
