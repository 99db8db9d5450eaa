"""
Alternating minimization for TWI and its multi-cut-off refinement.

Each outer iteration solves (a) the optimal transport problem between the
pre and post embeddings of the current imputation and (b) the minimization of
F(w, Pi) over the admissible set with the plan held fixed.
"""
from dataclasses import dataclass, replace
import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.sparse import linalg as splinalg

from . import transport
from .baselines import LOCF, Linear, Mean, impute_baseline, get_baseline
from .constraints import (
    ConstraintSet,
    LinearEquality,
    ObservedEquality,
    build_cumsum_constraints,
    difference,
)
from .core import ImputationResult, TimeSeriesPanel, TraceSegment, TwiConfig, _as_matrix
from .embed import cost_matrix
from .errors import ConfigError, ConvergenceError, SingularSubproblemError
from .objective import QuadraticForm, build_matrix, eval_F, gradient_F
from .transport import TransportPlan
from .types import ArrayLike, Cutoff, FloatArray
from .utils import resolve_cutoff

logger = logging.getLogger(__name__)

FALLBACK_LAMBDA = 1e-8
POWER_ITERATIONS = 20


# ---------------------------------------------------------------------------
# initialization


class InitStrategy:
    """Produces the starting imputation w^(0)"""

    def initialize(self, panel: TimeSeriesPanel) -> FloatArray:
        raise NotImplementedError  # pragma: no cover


@dataclass(frozen=True)
class LinearInterpolation(InitStrategy):
    def initialize(self, panel: TimeSeriesPanel) -> FloatArray:
        return impute_baseline(panel, Linear())


@dataclass(frozen=True)
class LastObservation(InitStrategy):
    def initialize(self, panel: TimeSeriesPanel) -> FloatArray:
        return impute_baseline(panel, LOCF())


@dataclass(frozen=True)
class MeanFill(InitStrategy):
    def initialize(self, panel: TimeSeriesPanel) -> FloatArray:
        return impute_baseline(panel, Mean())


@dataclass(frozen=True, eq=False)
class Provided(InitStrategy):
    """An externally produced starting point, e.g. a Kalman smoother's output"""

    values: FloatArray

    def initialize(self, panel: TimeSeriesPanel) -> FloatArray:
        start = _as_matrix(self.values)
        if start.shape != panel.shape:
            raise ConfigError(f"initial imputation has shape {start.shape}, expected {panel.shape}")
        if not np.all(np.isfinite(start[panel.mask])):
            raise ConfigError("initial imputation has non-finite missing cells")
        return panel.fill(start)


INITS = {
    "linear": LinearInterpolation,
    "lin": LinearInterpolation,
    "locf": LastObservation,
    "mean": MeanFill,
}


def get_init(name: str) -> InitStrategy:
    try:
        return INITS[name.lower()]()
    except KeyError:
        raise ConfigError(f"unknown initialization {name!r}") from None


# ---------------------------------------------------------------------------
# step (b)


def _cholesky_solve(matrix: FloatArray, rhs: FloatArray, ridge: float):
    factor = linalg.cho_factor(matrix + ridge * np.eye(matrix.shape[0]))
    return linalg.cho_solve(factor, rhs)


def _solve_observed(
    H: QuadraticForm, constraint: ObservedEquality, current: FloatArray
) -> Tuple[FloatArray, float]:
    """
    Minimize w^T H w over the missing cells of each column, observed cells
    fixed: H_MM w_M = -H_MO x_O.
    """
    out = constraint.project(current)
    matrix = H.matrix
    ridge_used = 0.0
    for j in range(out.shape[1]):
        missing = constraint.mask[:, j]
        if not missing.any():
            continue
        free = np.flatnonzero(missing)
        fixed = np.flatnonzero(~missing)
        H_mm = matrix[free][:, free].toarray()
        rhs = -(matrix[free][:, fixed] @ out[fixed, j])
        try:
            out[free, j] = _cholesky_solve(H_mm, rhs, 0.0)
        except linalg.LinAlgError:
            logger.warning(
                f"reduced system for column {j} is singular, retrying with lambda={FALLBACK_LAMBDA:g}"
            )
            try:
                out[free, j] = _cholesky_solve(H_mm, rhs, 0.5 * FALLBACK_LAMBDA)
            except linalg.LinAlgError as e:
                raise SingularSubproblemError(
                    f"reduced system for column {j} is singular; use lambda > 0"
                ) from e
            ridge_used = FALLBACK_LAMBDA
    return out, ridge_used


def _solve_linear(
    H: QuadraticForm, constraint: LinearEquality, current: FloatArray
) -> Tuple[FloatArray, float]:
    """
    Minimize w^T H w subject to K w = b, column by column with a shared K.
    """
    d = current.shape[1]
    K, b = constraint.K, constraint.rhs(d)

    if H.lam > 0:
        lu = splinalg.splu(H.matrix.tocsc())
        HinvKt = lu.solve(np.ascontiguousarray(K.T))
        schur = K @ HinvKt
        multipliers = linalg.lstsq(schur, b)[0]
        return HinvKt @ multipliers, 0.0

    n, m = K.shape[1], K.shape[0]
    dense = H.dense()
    for ridge in (0.0, 0.5 * FALLBACK_LAMBDA):
        kkt = np.block([[2.0 * (dense + ridge * np.eye(n)), K.T], [K, np.zeros((m, m))]])
        rhs = np.vstack([np.zeros((n, d)), b])
        try:
            solution = linalg.solve(kkt, rhs)
        except linalg.LinAlgError:
            logger.warning(f"KKT system is singular, retrying with lambda={FALLBACK_LAMBDA:g}")
            continue
        if np.all(np.isfinite(solution)):
            return solution[:n], 2.0 * ridge
    raise SingularSubproblemError("KKT system is singular; use lambda > 0")


class _Smooth:
    """f(w) = F(w, Pi) with its gradient, for the proximal solver"""

    def __init__(self, plan: TransportPlan, cfg: TwiConfig, H: QuadraticForm) -> None:
        self.plan = plan
        self.cfg = cfg
        self.H = H

    def value(self, w: FloatArray) -> float:
        if self.cfg.is_quadratic:
            return self.H.value(w)
        return eval_F(w, self.plan, self.cfg)

    def gradient(self, w: FloatArray) -> FloatArray:
        if self.cfg.is_quadratic:
            return self.H.gradient(w)
        return gradient_F(w, self.plan, self.cfg)


def proximal_gradient(
    f: _Smooth,
    constraint: ConstraintSet,
    start: FloatArray,
    lipschitz: float,
    tol: float = 1e-8,
    max_iters: int = 100_000,
) -> FloatArray:
    """
    Accelerated projected gradient (FISTA) with backtracking and a
    function-value restart.

    Stops once the gradient mapping ||x - P(x - g / L)|| * L falls below
    tol * (1 + ||grad f(x0)||).
    """
    x = constraint.project(start)
    fx = f.value(x)
    y, t = x, 1.0
    restarted = True
    step = 1.0 / max(lipschitz, 1e-12)
    threshold = tol * (1.0 + np.linalg.norm(f.gradient(x)))
    mapping = math.inf

    for _ in range(max_iters):
        fy, gy = f.value(y), f.gradient(y)
        while True:
            z = constraint.project(y - step * gy)
            diff = z - y
            fz = f.value(z)
            bound = fy + np.sum(gy * diff) + np.sum(diff**2) / (2.0 * step)
            if fz <= bound + 1e-12 * max(1.0, abs(fy)) or step < 1e-20:
                break
            step *= 0.5

        mapping = np.linalg.norm(diff) / step
        if fz > fx and not restarted:
            # momentum overshot: restart from the last accepted point
            y, t, restarted = x, 1.0, True
            continue

        if mapping <= threshold:
            return z if fz <= fx else x

        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = z + ((t - 1.0) / t_next) * (z - x)
        x, fx, t, restarted = z, fz, t_next, False

    raise ConvergenceError(
        f"proximal gradient did not converge in {max_iters} iterations "
        f"(gradient mapping {mapping:.3e}, objective {fx:.6g})",
        iterations=max_iters,
        residual=float(mapping),
    )


def _step_b(
    plan: TransportPlan,
    constraint: ConstraintSet,
    cfg: TwiConfig,
    current: FloatArray,
) -> Tuple[FloatArray, float]:
    n = current.shape[0]
    H = QuadraticForm(build_matrix(plan, cfg, n), cfg.lam, cfg.p, cfg.n1)

    if cfg.is_quadratic and cfg.subproblem_method == "direct":
        if type(constraint) is ObservedEquality:
            return _solve_observed(H, constraint, current)
        if isinstance(constraint, LinearEquality):
            return _solve_linear(H, constraint, current)

    lipschitz = 2.0 * H.max_eigenvalue(POWER_ITERATIONS)
    f = _Smooth(plan, cfg, H)
    solution = proximal_gradient(
        f, constraint, current, lipschitz, tol=cfg.prox_tol, max_iters=cfg.prox_max_iters
    )
    return solution, 0.0


def solve_subproblem(
    plan: TransportPlan,
    constraint: ConstraintSet,
    cfg: TwiConfig,
    current: ArrayLike,
) -> FloatArray:
    """
    argmin over w in C of F(w, Pi) for a fixed plan.

    Observed-equality and linear-equality sets with the squared cost are
    solved directly; every other combination uses projected gradient started
    at `current`.
    """
    array = _as_matrix(current)
    cfg.validate(array.shape[0])
    constraint.validate(*array.shape)
    solution, _ = _step_b(plan, constraint, cfg, array)
    return solution


# ---------------------------------------------------------------------------
# alternating minimization


def _solve_plan(w: FloatArray, cfg: TwiConfig) -> Tuple[TransportPlan, float]:
    cost = cost_matrix(w, cfg)
    if cfg.ot_method == "exact":
        return transport.solve_exact(cost)
    return transport.solve_sinkhorn(
        cost,
        epsilon=cfg.sinkhorn_epsilon,
        max_iters=cfg.sinkhorn_max_iters,
        tol=cfg.sinkhorn_tol,
    )


def _alternate(
    constraint: ConstraintSet,
    cfg: TwiConfig,
    start: FloatArray,
    result: ImputationResult,
) -> FloatArray:
    """Alternate steps (a) and (b) from `start`, appending to `result`'s traces"""
    w = start
    previous = None
    first = len(result.objective_trace)

    for iteration in range(1, cfg.max_outer_iters + 1):
        plan, transport_cost = _solve_plan(w, cfg)
        after_a = transport_cost + 0.5 * cfg.lam * float(np.sum(w**2))
        result.interleaved_trace.append(after_a)
        if previous is None:
            previous = after_a

        w, ridge = _step_b(plan, constraint, cfg, w)
        result.lam_used = max(result.lam_used, ridge)
        after_b = eval_F(w, plan, cfg)
        result.objective_trace.append(after_b)
        result.interleaved_trace.append(after_b)
        result.plan = plan
        result.iterations += 1

        decrease = (previous - after_b) / max(previous, 1e-12)
        logger.debug(f"n1={cfg.n1} iteration {iteration}: F={after_b:.6g}, relative decrease {decrease:.2e}")
        previous = after_b
        if decrease < cfg.tol_rel:
            result.converged = True
            break
    else:
        result.converged = False

    result.segments.append(TraceSegment(cfg.n1, first, len(result.objective_trace)))
    logger.info(
        f"n1={cfg.n1}: {'converged' if result.converged else 'stopped'} after "
        f"{len(result.objective_trace) - first} iterations, F={result.objective_trace[-1]:.6g}"
    )
    return w


def _prepare(
    panel: TimeSeriesPanel,
    constraint: Optional[ConstraintSet],
    init: Optional[InitStrategy],
) -> Tuple[ConstraintSet, FloatArray]:
    if constraint is None:
        constraint = ObservedEquality.of(panel)
    constraint.validate(panel.n, panel.d)
    start = (init or LinearInterpolation()).initialize(panel)
    return constraint, constraint.project(start)


def _finish(panel: TimeSeriesPanel, constraint: ConstraintSet, w: FloatArray, result: ImputationResult):
    if constraint.observed is not None:
        w = panel.fill(w)
    result.imputed = w
    return result


def _unchanged(panel: TimeSeriesPanel, lam: float = 0.0) -> ImputationResult:
    return ImputationResult(
        imputed=np.array(np.nan_to_num(panel.values), order="F"),
        mask=panel.mask,
        plan=None,
        converged=True,
        iterations=0,
        lam_used=lam,
    )


def twi(
    panel: TimeSeriesPanel,
    constraint: Optional[ConstraintSet] = None,
    cfg: Optional[TwiConfig] = None,
    init: Optional[InitStrategy] = None,
) -> ImputationResult:
    """
    Temporal Wasserstein imputation by alternating minimization.

    Parameters
    ----------
    `panel` : TimeSeriesPanel
        The data with its missing-cell mask.
    `constraint` : ConstraintSet, optional
        The admissible set; observed equality when omitted.
    `cfg` : TwiConfig, optional
        Defaults to n1 = floor(0.4 n), p = 6, lambda = 0.
    `init` : InitStrategy, optional
        Starting imputation; linear interpolation when omitted.

    Returns
    -------
    ImputationResult
        With observed cells restored bit-exactly whenever the admissible set
        fixes them.
    """
    cfg = (cfg or TwiConfig.for_length(panel.n)).validate(panel.n)
    if not panel.has_missing:
        result = _unchanged(panel, cfg.lam)
        result.segments.append(TraceSegment(cfg.n1, 0, 0))
        return result

    constraint, start = _prepare(panel, constraint, init)
    result = ImputationResult(imputed=start, mask=panel.mask, plan=None, lam_used=cfg.lam)
    w = _alternate(constraint, cfg, start, result)
    return _finish(panel, constraint, w, result)


def default_cutoffs(n: int) -> List[int]:
    return [int(math.floor(f * n)) for f in (0.25, 0.5, 0.75)]


def k_twi(
    panel: TimeSeriesPanel,
    constraint: Optional[ConstraintSet] = None,
    cfg: Optional[TwiConfig] = None,
    cutoffs: Optional[Sequence[Cutoff]] = None,
    init: Optional[InitStrategy] = None,
) -> ImputationResult:
    """
    Run TWI once per cut-off, each run warm-started from the previous
    imputation. The result carries the last plan and one trace segment per
    cut-off.
    """
    cfg = cfg or TwiConfig.for_length(panel.n)
    resolved = [resolve_cutoff(c, panel.n) for c in (cutoffs or default_cutoffs(panel.n))]
    configs = [cfg.with_cutoff(c).validate(panel.n) for c in resolved]

    if not panel.has_missing:
        result = _unchanged(panel, cfg.lam)
        result.segments.extend(TraceSegment(c.n1, 0, 0) for c in configs)
        return result

    constraint, w = _prepare(panel, constraint, init)
    result = ImputationResult(imputed=w, mask=panel.mask, plan=None, lam_used=cfg.lam)
    converged = True
    for sub in configs:
        w = constraint.project(w)
        w = _alternate(constraint, sub, w, result)
        converged = converged and result.converged
    result.converged = converged
    return _finish(panel, constraint, w, result)


# ---------------------------------------------------------------------------
# I(1) series


def impute_integrated(
    raw: TimeSeriesPanel,
    cfg: Optional[TwiConfig] = None,
    cutoffs: Optional[Sequence[Cutoff]] = None,
    init: Optional[InitStrategy] = None,
) -> ImputationResult:
    """
    Impute a univariate I(1) series through its first differences.

    TWI (or k-TWI when `cutoffs` is given) runs on the differenced series
    under cumulative-sum constraints that keep every observed level; the
    returned `imputed` holds the levels, while the plan and traces refer to
    the differences.
    """
    diffs = difference(raw)
    constraint = build_cumsum_constraints(raw)
    start = (init or LinearInterpolation()).initialize(raw)
    provided = Provided(np.diff(start, axis=0))
    cfg = cfg or TwiConfig.for_length(diffs.n)

    if cutoffs is None:
        result = twi(diffs, constraint, cfg, provided)
    else:
        result = k_twi(diffs, constraint, cfg, cutoffs, provided)

    levels = constraint.integrate(result.imputed)
    levels = raw.fill(levels)
    return replace(result, imputed=levels, mask=raw.mask)


# ---------------------------------------------------------------------------
# diagnostics


def stationarity_residuals(
    w: ArrayLike, plan: TransportPlan, cfg: TwiConfig, mask: ArrayLike
) -> FloatArray:
    """
    Fixed-point residuals w_s - (sum_{t != s} -H_st w_t) / H_ss at every
    missing cell (zero elsewhere). At a minimizer with observed cells fixed
    they all vanish.
    """
    array = _as_matrix(w)
    missing = np.array(mask, dtype=bool).reshape(array.shape)
    H = build_matrix(plan, cfg, array.shape[0])
    residual = np.asarray(H @ array) / H.diagonal()[:, None]
    return np.where(missing, residual, 0.0)


def single_missing_weights(plan: TransportPlan, cfg: TwiConfig, s: int) -> FloatArray:
    """
    Weights c_t with w_s = sum_t c_t w_t when only index s is missing. With
    lambda = 0 they are nonnegative and sum to one.
    """
    n = cfg.n1 + 1 + plan.shape[1]
    if not 0 <= s < n:
        raise IndexError(f"index {s} outside a series of length {n}")
    row = build_matrix(plan, cfg, n)[s].toarray().ravel()
    weights = -row / row[s]
    weights[s] = 0.0
    return weights


@dataclass(frozen=True)
class EmIdentityCheck:
    """Largest deviation from the conditional-expectation identity, over `checked` cells"""

    max_violation: float
    checked: int

    @property
    def applicable(self) -> bool:
        return self.checked > 0


def em_identity_check(result: ImputationResult, cfg: TwiConfig) -> EmIdentityCheck:
    """
    For a missing w_s with p-1 <= s <= n1-p+1, a fixed point satisfies
    w_s = (1/p) sum_h E_Pi[ lag-h coordinate of v | u = v_{s+h} ], i.e.
    w_s = (r/p) sum_h sum_j pi_{s+h-p+1, j} w_{n1+1+j-h}.
    """
    if cfg.lam != 0 or not cfg.is_quadratic:
        raise ConfigError("the identity holds only for lambda = 0 and the squared cost")
    if result.plan is None:
        return EmIdentityCheck(0.0, 0)

    w = _as_matrix(result.imputed)
    Pi = result.plan.matrix
    r = Pi.shape[0]
    p, n1 = cfg.p, cfg.n1
    worst, checked = 0.0, 0
    for s in range(p - 1, n1 - p + 2):
        for j in np.flatnonzero(result.mask[s]):
            expectation = 0.0
            for h in range(p):
                i = s + h - p + 1
                post = w[n1 + 1 - h : n1 + 1 - h + Pi.shape[1], j]
                expectation += Pi[i] @ post
            worst = max(worst, abs(r / p * expectation - w[s, j]))
            checked += 1
    return EmIdentityCheck(float(worst), checked)


# ---------------------------------------------------------------------------
# method dispatch


def parse_method(name: str) -> Tuple[str, Optional[str]]:
    """Split "ktwi_locf" into ("ktwi", "locf"); baselines have no init"""
    family, _, init = name.lower().partition("_")
    if family in ("twi", "ktwi"):
        return family, init or "linear"
    get_baseline(name)
    return name.lower(), None


def impute(
    panel: TimeSeriesPanel,
    method: str = "twi",
    constraint: Optional[ConstraintSet] = None,
    cfg: Optional[TwiConfig] = None,
    cutoffs: Optional[Sequence[Cutoff]] = None,
    init: Union[InitStrategy, str, None] = None,
) -> ImputationResult:
    """
    Impute `panel` with a baseline ("linear", "locf", "mean", "scalarf") or
    with TWI / k-TWI ("twi", "ktwi", optionally suffixed with an init such as
    "twi_locf").
    """
    family, init_name = parse_method(method)
    if family not in ("twi", "ktwi"):
        result = _unchanged(panel)
        result.imputed = impute_baseline(panel, family)
        return result

    if isinstance(init, str):
        init = get_init(init)
    init = init or get_init(init_name)
    if family == "twi":
        return twi(panel, constraint, cfg, init)
    return k_twi(panel, constraint, cfg, cutoffs, init)
