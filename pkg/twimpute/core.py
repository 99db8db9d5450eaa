"""
Data model: panels of (possibly multivariate) series with missing cells,
the TWI configuration, imputation results and CSV I/O.
"""
import csv
from dataclasses import dataclass, field, replace
import logging
import math
from pathlib import Path
from typing import TYPE_CHECKING, FrozenSet, Iterable, List, Optional, Union

import numpy as np

from .errors import ConfigError, CsvFormatError
from .types import ArrayLike, BoolArray, FloatArray

if TYPE_CHECKING:  # pragma: no cover
    from .transport import TransportPlan

logger = logging.getLogger(__name__)

DEFAULT_MISSING_TOKENS: FrozenSet[str] = frozenset({"", "NaN", "NA"})

OT_METHODS = ("exact", "sinkhorn")
SUBPROBLEM_METHODS = ("direct", "proximal")


def _as_matrix(values: ArrayLike) -> FloatArray:
    array = np.array(values, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise ConfigError(f"expected a 1-d or 2-d array, got {array.ndim} dimensions")
    return array


class TimeSeriesPanel:
    """
    An n x d panel of observations with a missing-cell mask.

    Rows are time points 0..n-1 and columns are series. `mask` is True where a
    value is missing. Masked cells are stored as NaN so nothing downstream can
    pick up a stale number. Both arrays are read-only and stored column-major.

    Parameters
    ----------
    `values` : array-like, shape (n,) or (n, d)
        The observations. Entries behind the mask are ignored.
    `mask` : array-like of bool, optional
        Missing-cell indicator. If omitted it is derived from NaNs in `values`.
    """

    def __init__(self, values: ArrayLike, mask: Optional[ArrayLike] = None) -> None:
        array = _as_matrix(values)

        if mask is None:
            missing = np.isnan(array)
        else:
            missing = np.array(mask, dtype=bool)
            if missing.ndim == 1:
                missing = missing.reshape(-1, 1)
            if missing.shape != array.shape:
                raise ConfigError(
                    f"mask shape {missing.shape} does not match values {array.shape}"
                )

        n, d = array.shape
        if n < 1 or d < 1:
            raise ConfigError(f"a panel needs n >= 1 and d >= 1, got {n} x {d}")

        observed = array[~missing]
        if not np.all(np.isfinite(observed)):
            raise ConfigError("observed cells must hold finite values")

        array = np.asfortranarray(np.where(missing, np.nan, array))
        missing = np.asfortranarray(missing)
        array.flags.writeable = False
        missing.flags.writeable = False

        self._values = array
        self._mask = missing

    @property
    def values(self) -> FloatArray:
        return self._values

    @property
    def mask(self) -> BoolArray:
        return self._mask

    @property
    def shape(self):
        return self._values.shape

    @property
    def n(self) -> int:
        return self._values.shape[0]

    @property
    def d(self) -> int:
        return self._values.shape[1]

    @property
    def missing_count(self) -> int:
        return int(self._mask.sum())

    @property
    def has_missing(self) -> bool:
        return bool(self._mask.any())

    def column(self, j: int) -> "TimeSeriesPanel":
        return TimeSeriesPanel(self._values[:, j], self._mask[:, j])

    def fill(self, imputed: ArrayLike) -> FloatArray:
        """Return a writable copy of `imputed` with every observed cell restored"""
        out = np.array(_as_matrix(imputed), dtype=np.float64, order="F")
        if out.shape != self.shape:
            raise ConfigError(f"imputation shape {out.shape} does not match {self.shape}")
        out[~self._mask] = self._values[~self._mask]
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeriesPanel):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self._mask, other._mask)
            and np.array_equal(self._values, other._values, equal_nan=True)
        )

    def __repr__(self) -> str:
        return f"TimeSeriesPanel(n={self.n}, d={self.d}, missing={self.missing_count})"


@dataclass(frozen=True)
class TwiConfig:
    """
    Hyperparameters of one TWI run.

    `n1` splits the embeddings into the pre (p-1..n1) and post (n1+1..n-1)
    samples. `lam` is the ridge weight lambda, `cost_order` the power k of the
    Euclidean ground cost.
    """

    n1: int
    p: int = 6
    lam: float = 0.0
    cost_order: float = 2.0
    ot_method: str = "exact"
    sinkhorn_epsilon: float = 1e-2
    sinkhorn_max_iters: int = 10000
    sinkhorn_tol: float = 1e-9
    max_outer_iters: int = 100
    tol_rel: float = 1e-6
    subproblem_method: str = "direct"
    prox_tol: float = 1e-8
    prox_max_iters: int = 100_000

    @classmethod
    def for_length(cls, n: int, fraction: float = 0.4, **kwargs) -> "TwiConfig":
        """Default configuration for a series of length `n` (n1 = floor(0.4 n))"""
        return cls(n1=int(math.floor(fraction * n)), **kwargs)

    def with_cutoff(self, n1: int) -> "TwiConfig":
        return replace(self, n1=int(n1))

    def validate(self, n: int) -> "TwiConfig":
        if self.p < 1:
            raise ConfigError(f"lag order p must be >= 1, got {self.p}")
        if not (self.p - 1 < self.n1 < n - self.p):
            raise ConfigError(
                f"cut-off n1={self.n1} must satisfy {self.p - 1} < n1 < {n - self.p}"
            )
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.cost_order < 1:
            raise ConfigError(f"cost order k must be >= 1, got {self.cost_order}")
        if self.tol_rel <= 0:
            raise ConfigError(f"tol_rel must be > 0, got {self.tol_rel}")
        if self.max_outer_iters < 1:
            raise ConfigError("max_outer_iters must be >= 1")
        if self.ot_method not in OT_METHODS:
            raise ConfigError(f"unknown ot_method {self.ot_method!r}")
        if self.ot_method == "sinkhorn" and self.sinkhorn_epsilon <= 0:
            raise ConfigError("sinkhorn epsilon must be > 0")
        if self.subproblem_method not in SUBPROBLEM_METHODS:
            raise ConfigError(f"unknown subproblem_method {self.subproblem_method!r}")
        return self

    @property
    def is_quadratic(self) -> bool:
        return self.cost_order == 2.0

    def pre_size(self) -> int:
        """Number of embeddings before the cut-off, n1 - p + 2"""
        return self.n1 - self.p + 2

    def post_size(self, n: int) -> int:
        """Number of embeddings after the cut-off, n - n1 - 1"""
        return n - self.n1 - 1


@dataclass(frozen=True)
class TraceSegment:
    """The slice of an objective trace produced with one cut-off"""

    cutoff: int
    start: int
    stop: int


@dataclass
class ImputationResult:
    """
    Output of TWI / k-TWI.

    `objective_trace` holds F(w^(t), Pi^(t)) after every step (b);
    `interleaved_trace` additionally holds F(w^(t-1), Pi^(t)) after every
    step (a), so it reads a, b, a, b, ... and is non-increasing within a
    segment when the exact OT solver is used.
    """

    imputed: FloatArray
    mask: BoolArray
    plan: Optional["TransportPlan"]
    objective_trace: List[float] = field(default_factory=list)
    interleaved_trace: List[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    segments: List[TraceSegment] = field(default_factory=list)
    lam_used: float = 0.0

    def segment_traces(self) -> List[List[float]]:
        return [self.objective_trace[s.start : s.stop] for s in self.segments]

    def report(self) -> dict:
        """JSON-serialisable summary (the CLI impute report)"""
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "objective_trace": [float(v) for v in self.objective_trace],
            "segments": [
                {
                    "cutoff": s.cutoff,
                    "trace": [float(v) for v in self.objective_trace[s.start : s.stop]],
                }
                for s in self.segments
            ],
            "lambda": self.lam_used,
        }


def _parse_cell(token: str, missing_tokens: FrozenSet[str], row: int, col: int):
    stripped = token.strip()
    if stripped in missing_tokens:
        return math.nan, True
    try:
        return float(stripped), False
    except ValueError:
        raise CsvFormatError(
            f"row {row}, column {col}: cannot parse {token!r} as a number", row=row
        ) from None


def read_csv(
    path: Union[Path, str],
    missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS,
    header: bool = False,
) -> TimeSeriesPanel:
    """
    Read a rectangular CSV of numbers into a panel.

    Parameters
    ----------
    `path` : Path or str
        The file to read. One row per time point, one column per series.
    `missing_tokens` : set of str, default {"", "NaN", "NA"}
        Cell contents (after stripping whitespace) that mark a missing value.
    `header` : bool, default False
        Skip the first line.

    Raises
    ------
    CsvFormatError
        Ragged rows (with the 0-based data row index) or an empty file.
    """
    tokens = frozenset(missing_tokens)
    with Path(path).open("r", newline="") as f:
        rows = list(csv.reader(f))

    if header and rows:
        rows = rows[1:]

    width = next((len(r) for r in rows if r), 0)
    if not rows or width == 0:
        raise CsvFormatError(f"{path}: no rows or no columns", row=None)

    values = np.empty((len(rows), width))
    mask = np.zeros((len(rows), width), dtype=bool)
    for i, row in enumerate(rows):
        # a blank line is a missing observation in a single-column file
        if not row and width == 1:
            row = [""]
        if len(row) != width:
            raise CsvFormatError(
                f"{path}: row {i} has {len(row)} fields, expected {width}", row=i
            )
        for j, token in enumerate(row):
            values[i, j], mask[i, j] = _parse_cell(token, tokens, i, j)

    return TimeSeriesPanel(values, mask)


def write_csv(panel: TimeSeriesPanel, path: Union[Path, str]) -> None:
    """
    Write a panel as headerless CSV. Masked cells are written as "NaN";
    observed values use the shortest representation that round-trips.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for values, missing in zip(panel.values, panel.mask):
            writer.writerow(
                ["NaN" if m else repr(float(v)) for v, m in zip(values, missing)]
            )


def write_array(values: ArrayLike, path: Union[Path, str]) -> None:
    """Write a fully observed array (an imputation) as CSV"""
    write_csv(TimeSeriesPanel(values), path)
