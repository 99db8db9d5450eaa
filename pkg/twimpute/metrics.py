"""
Evaluation of imputations: Wasserstein loss between embedded marginals,
autocovariance diagnostics, downstream parameter estimates, and the Monte
Carlo benchmark that ties them together.
"""
from dataclasses import dataclass, field
import json
import logging
import math
import os
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from joblib import Parallel, delayed
import numpy as np
import pandas as pd
from scipy import linalg
from statsmodels.tsa.arima.estimators.hannan_rissanen import hannan_rissanen
from statsmodels.tsa.stattools import levinson_durbin

from .constraints import ObservedEquality, Simplex
from .core import TimeSeriesPanel, TwiConfig, _as_matrix
from .dgp import DgpSpec, MissingPattern, apply_pattern, centered_sigmoid, generate
from .embed import embedding_matrix, pairwise_cost
from .errors import ConfigError, NumericalError, TwimputeError
from .solver import default_cutoffs, impute, impute_integrated, get_init, parse_method
from .transport import solve_exact
from .types import ArrayLike, FloatArray
from .utils import replicate_seed

logger = logging.getLogger(__name__)

ACF_LAGS = (0, 1, 2)
LOG_RATIO_FLOOR = 1e-10


def marginal_wasserstein(
    imputed: ArrayLike, truth: ArrayLike, embed_p: int = 3, k: float = 2.0
) -> float:
    """
    Order-k Wasserstein distance between the empirical distributions of the
    embed_p-dimensional delay embeddings of two panels of the same shape.
    """
    a, b = _as_matrix(imputed), _as_matrix(truth)
    if a.shape != b.shape:
        raise ConfigError(f"shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] < embed_p:
        raise ConfigError(f"series of length {a.shape[0]} has no {embed_p}-dimensional embedding")
    n = a.shape[0]
    cost = pairwise_cost(
        embedding_matrix(a, embed_p, embed_p - 1, n),
        embedding_matrix(b, embed_p, embed_p - 1, n),
        k,
    )
    _, optimum = solve_exact(cost)
    return max(optimum, 0.0) ** (1.0 / k)


def acovf(series: ArrayLike, max_lag: int) -> FloatArray:
    """gamma(h) = (n - h)^-1 sum_t (z_t - zbar)(z_{t-h} - zbar), h = 0..max_lag"""
    z = np.asarray(series, dtype=np.float64).ravel()
    n = z.size
    if n <= max_lag:
        raise ConfigError(f"need more than {max_lag} observations, got {n}")
    centered = z - z.mean()
    return np.array(
        [centered[h:] @ centered[: n - h] / (n - h) for h in range(max_lag + 1)]
    )


def acf(series: ArrayLike, max_lag: int) -> FloatArray:
    gamma = acovf(series, max_lag)
    if gamma[0] == 0:
        raise NumericalError("autocorrelation of a constant series is undefined")
    return gamma / gamma[0]


def pacf(series: ArrayLike, max_lag: int) -> FloatArray:
    """Partial autocorrelations at lags 0..max_lag by Durbin-Levinson"""
    rho = acf(series, max_lag)
    if max_lag == 0:
        return np.ones(1)
    _, _, partial, _, _ = levinson_durbin(rho, nlags=max_lag, isacov=True)
    return np.asarray(partial)


# ---------------------------------------------------------------------------
# downstream estimators


def _ols(y: FloatArray, X: FloatArray) -> FloatArray:
    coef, _, rank, _ = linalg.lstsq(X, y)
    if rank < X.shape[1]:
        raise NumericalError("singular design in downstream regression")
    return coef


def _arma11(x: FloatArray) -> Dict[str, float]:
    long_order = int(math.ceil(2.0 * math.log(x.size)))
    params, _ = hannan_rissanen(
        x, ar_order=1, ma_order=1, demean=True, initial_ar_order=long_order, unbiased=False
    )
    return {"phi1": float(params.ar_params[0]), "phi2": float(params.ma_params[0])}


def fit_ar(x: FloatArray) -> Dict[str, float]:
    coef = _ols(x[1:], np.column_stack([np.ones(x.size - 1), x[:-1]]))
    return {"phi": float(coef[1])}


def fit_tar(x: FloatArray, grid: int = 200) -> Dict[str, float]:
    """
    Two-regime TAR(1) without intercepts; the threshold is chosen from a grid
    of `grid` quantiles of x_{t-1} between 10% and 90% by minimum pooled SSE.
    """
    lag, y = x[:-1], x[1:]
    order = np.argsort(lag, kind="stable")
    lag, y = lag[order], y[order]
    sxy, sxx, syy = np.cumsum(lag * y), np.cumsum(lag * lag), np.cumsum(y * y)

    thresholds = np.quantile(lag, np.linspace(0.1, 0.9, grid))
    best = None
    for tau in thresholds:
        m = int(np.searchsorted(lag, tau, side="right"))
        if m == 0 or m == lag.size:
            continue
        lo = (sxy[m - 1], sxx[m - 1], syy[m - 1])
        hi = (sxy[-1] - lo[0], sxx[-1] - lo[1], syy[-1] - lo[2])
        if lo[1] <= 0 or hi[1] <= 0:
            continue
        sse = lo[2] - lo[0] ** 2 / lo[1] + hi[2] - hi[0] ** 2 / hi[1]
        if best is None or sse < best[0]:
            best = (sse, lo[0] / lo[1], hi[0] / hi[1], float(tau))
    if best is None:
        raise NumericalError("no admissible threshold for the TAR fit")
    _, phi1, phi2, tau = best
    return {"phi1": float(phi1), "phi2": float(phi2), "tau": tau}


def fit_nlvar(x: FloatArray) -> Dict[str, float]:
    prev, now = x[:-1], x[1:]
    first = _ols(now[:, 0], np.column_stack([prev[:, 0], centered_sigmoid(3.0 * prev[:, 1])]))
    second = _ols(now[:, 1], prev)
    return {
        "phi11": float(first[0]),
        "phi12": float(first[1]),
        "phi21": float(second[0]),
        "phi22": float(second[1]),
    }


def fit_al(x: FloatArray) -> Dict[str, float]:
    """VAR(1) with intercept on the additive log-ratios log(x_j / x_d)"""
    clipped = np.clip(x, LOG_RATIO_FLOOR, 1.0)
    y = np.log(clipped[:, :-1] / clipped[:, -1:])
    design = np.column_stack([np.ones(y.shape[0] - 1), y[:-1]])
    out = {}
    for j in range(y.shape[1]):
        coef = _ols(y[1:, j], design)
        out[f"c{j + 1}"] = float(coef[0])
        for l in range(y.shape[1]):
            out[f"a{j + 1}{l + 1}"] = float(coef[1 + l])
    return out


def fit_downstream(imputed: ArrayLike, model_tag: str) -> Dict[str, float]:
    """Estimate the generating model's parameters from an imputed panel"""
    x = _as_matrix(imputed)
    tag = model_tag.lower()
    if tag == "ar":
        return fit_ar(x[:, 0])
    if tag == "arma":
        return _arma11(x[:, 0])
    if tag == "tar":
        return fit_tar(x[:, 0])
    if tag == "i1":
        return {"phi": _arma11(np.diff(x[:, 0]))["phi1"]}
    if tag == "nlvar":
        return fit_nlvar(x)
    if tag == "al":
        return fit_al(x)
    raise ConfigError(f"no downstream estimator for model {model_tag!r}")


def true_parameters(spec: DgpSpec) -> Dict[str, float]:
    model = spec.model
    tag = spec.tag
    if tag == "ar":
        return {"phi": model.phi}
    if tag == "arma":
        return {"phi1": model.phi1, "phi2": model.phi2}
    if tag == "tar":
        return {"phi1": model.phi1, "phi2": model.phi2, "tau": model.tau}
    if tag == "i1":
        return {"phi": model.phi}
    if tag == "nlvar":
        return {"phi11": model.phi11, "phi12": model.phi12, "phi21": model.phi21, "phi22": model.phi22}
    if tag == "al":
        return {"c1": 0.1, "a11": 0.7, "a12": -0.5, "c2": 0.1, "a21": 0.0, "a22": -0.7}
    return {}


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class EvalReport:
    """
    Monte Carlo summary for one (model, pattern, method) cell.

    `acf_rmse` maps lag h to the RMSE of gamma(w, h) around the replicate
    average of gamma(x, h); `parameter_errors` maps parameter names to RMSEs.
    """

    model: str
    pattern: str
    method: str
    wasserstein_loss: float
    wasserstein_stderr: float
    acf_rmse: Dict[int, float] = field(default_factory=dict)
    parameter_errors: Dict[str, float] = field(default_factory=dict)
    n_reps: int = 0
    failures: int = 0
    fit_failures: int = 0

    def rows(self) -> List[dict]:
        key = {"model": self.model, "pattern": self.pattern, "method": self.method}
        out = [
            dict(key, metric="wasserstein_loss", value=self.wasserstein_loss, stderr=self.wasserstein_stderr),
            dict(key, metric="failures", value=float(self.failures), stderr=0.0),
            dict(key, metric="fit_failures", value=float(self.fit_failures), stderr=0.0),
        ]
        out += [
            dict(key, metric=f"acf_rmse_lag{h}", value=v, stderr=math.nan)
            for h, v in self.acf_rmse.items()
        ]
        out += [
            dict(key, metric=f"rmse_{name}", value=v, stderr=math.nan)
            for name, v in self.parameter_errors.items()
        ]
        return out


def worker_count(requested: Optional[int] = None) -> int:
    """Pool size, capped by the TWIMPUTE_THREADS environment variable"""
    count = requested or os.cpu_count() or 1
    cap = os.environ.get("TWIMPUTE_THREADS")
    if cap:
        count = min(count, max(1, int(cap)))
    return count


def _constraint_for(tag: str, panel: TimeSeriesPanel):
    if tag == "al":
        return Simplex(ObservedEquality.of(panel), box=True)
    return ObservedEquality.of(panel)


def run_method(
    method: str,
    masked: TimeSeriesPanel,
    truth: TimeSeriesPanel,
    tag: str,
    p: int = 6,
) -> FloatArray:
    """Impute `masked` the way the benchmark does for model `tag`"""
    if method == "identity":
        return np.array(truth.values)

    family, init = parse_method(method)
    if tag == "i1" and family in ("twi", "ktwi"):
        n = masked.n - 1
        cfg = TwiConfig.for_length(n, p=p)
        cutoffs = default_cutoffs(n) if family == "ktwi" else None
        return impute_integrated(masked, cfg, cutoffs, get_init(init)).imputed

    cfg = TwiConfig.for_length(masked.n, p=p)
    constraint = _constraint_for(tag, masked)
    return impute(masked, method, constraint, cfg, default_cutoffs(masked.n)).imputed


def _replicate(
    dgp: DgpSpec, pattern: MissingPattern, methods: Sequence[str], seed: int, index: int
) -> dict:
    data_seed = replicate_seed(seed, 2 * index)
    truth = generate(dgp.with_seed(data_seed))
    masked = apply_pattern(truth, pattern, replicate_seed(seed, 2 * index + 1))
    tag = dgp.tag

    def scored(values: FloatArray) -> FloatArray:
        # I(1) series are compared on their differences
        return np.diff(values, axis=0) if tag == "i1" else values

    reference = scored(truth.values)
    has_estimator = bool(true_parameters(dgp))
    out = {"truth_acov": [acovf(reference[:, j], max(ACF_LAGS)) for j in range(reference.shape[1])]}
    for method in methods:
        try:
            imputed = run_method(method, masked, truth, tag)
            series = scored(imputed)
            entry = {
                "loss": marginal_wasserstein(series, reference),
                "acov": [acovf(series[:, j], max(ACF_LAGS)) for j in range(series.shape[1])],
                "params": {},
                "fit_failed": False,
            }
            if has_estimator:
                try:
                    entry["params"] = fit_downstream(imputed, tag)
                except (ValueError, TwimputeError, linalg.LinAlgError) as e:
                    logger.warning(f"replicate {index}, method {method}: downstream fit failed: {e}")
                    entry["fit_failed"] = True
        except (TwimputeError, linalg.LinAlgError) as e:
            logger.warning(f"replicate {index}, method {method} failed: {e}")
            entry = None
        out[method] = entry
    return out


def _summarize(
    dgp: DgpSpec, pattern_label: str, method: str, replicates: List[dict]
) -> EvalReport:
    entries = [r[method] for r in replicates if r[method] is not None]
    failures = len(replicates) - len(entries)
    fit_failures = sum(1 for e in entries if e["fit_failed"])
    if not entries:
        return EvalReport(dgp.tag, pattern_label, method, math.nan, math.nan, n_reps=len(replicates), failures=failures)

    losses = np.array([e["loss"] for e in entries])
    stderr = float(losses.std(ddof=1) / math.sqrt(losses.size)) if losses.size > 1 else 0.0

    # reference autocovariances averaged over every replicate
    truth = np.mean([r["truth_acov"] for r in replicates], axis=0)
    estimates = np.array([e["acov"] for e in entries])
    acf_rmse = {
        h: float(np.mean(np.sqrt(np.mean((estimates[:, :, h] - truth[None, :, h]) ** 2, axis=0))))
        for h in ACF_LAGS
    }

    truth_params = true_parameters(dgp)
    parameter_errors = {}
    for name, value in truth_params.items():
        estimates_p = np.array([e["params"][name] for e in entries if name in e["params"]])
        if estimates_p.size:
            parameter_errors[name] = float(np.sqrt(np.mean((estimates_p - value) ** 2)))

    report = EvalReport(
        dgp.tag,
        pattern_label,
        method,
        float(losses.mean()),
        stderr,
        acf_rmse,
        parameter_errors,
        n_reps=len(replicates),
        failures=failures,
        fit_failures=fit_failures,
    )
    logger.info(
        f"{report.model}/{report.pattern}/{report.method}: loss {report.wasserstein_loss:.3f} "
        f"({report.wasserstein_stderr:.3f}), {failures} failures, {fit_failures} failed fits"
    )
    return report


def benchmark(
    dgp: DgpSpec,
    pattern: MissingPattern,
    methods: Sequence[str],
    n_reps: int,
    seed: int = 0,
    pattern_label: Optional[str] = None,
    n_jobs: Optional[int] = None,
) -> List[EvalReport]:
    """
    Monte Carlo comparison of imputation methods on one DGP and pattern.

    Each replicate draws its data and mask from seeds derived from
    (seed, replicate index), so results do not depend on the pool size.
    Failed imputations count as failures and are left out of the averages.
    """
    if n_reps < 1:
        raise ConfigError(f"n_reps must be >= 1, got {n_reps}")
    for method in methods:
        if method != "identity":
            parse_method(method)

    replicates = Parallel(n_jobs=worker_count(n_jobs))(
        delayed(_replicate)(dgp, pattern, methods, seed, i) for i in range(n_reps)
    )
    label = pattern_label or type(pattern).__name__
    return [_summarize(dgp, label, method, replicates) for method in methods]


def results_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """Long table with columns model, pattern, method, metric, value, stderr"""
    rows = [row for report in reports for row in report.rows()]
    return pd.DataFrame(rows, columns=["model", "pattern", "method", "metric", "value", "stderr"])


def write_results(frame: pd.DataFrame, out: Union[Path, str]) -> List[Path]:
    """Write `<out>.csv` and `<out>.json`"""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out.with_name(out.name + ".csv")
    json_path = out.with_name(out.name + ".json")
    frame.to_csv(csv_path, index=False, lineterminator="\n")
    records = json.loads(frame.to_json(orient="records"))
    with json_path.open("w") as f:
        json.dump(records, f, indent=2)
    return [csv_path, json_path]
