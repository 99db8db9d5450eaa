"""
Synthetic data-generating processes and missing-data patterns.

Everything here is a pure function of its arguments and a seed; the same
(spec, seed) always produces the same panel and the same mask.
"""
from dataclasses import dataclass, field
import logging
from typing import Dict, Optional, Type, Union

import numpy as np
from scipy.signal import lfilter

from .core import TimeSeriesPanel, _as_matrix
from .errors import ConfigError
from .types import ArrayLike, BoolArray, FloatArray

logger = logging.getLogger(__name__)

STATIONARY_BURN_IN = 200


def centered_sigmoid(z: ArrayLike) -> FloatArray:
    """s(z) = 1 / (1 + exp(-z)) - 0.5"""
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64))) - 0.5


@dataclass(frozen=True)
class AR:
    """x_t = phi x_{t-1} + e_t"""

    phi: float = 0.8
    stationary = True

    def simulate(self, size: int, rng: np.random.Generator) -> FloatArray:
        eps = rng.standard_normal(size)
        return lfilter([1.0], [1.0, -self.phi], eps)


@dataclass(frozen=True)
class ARMA:
    """(1 - phi1 B) x_t = (1 + phi2 B) e_t"""

    phi1: float = 0.8
    phi2: float = -0.6
    stationary = True

    def simulate(self, size: int, rng: np.random.Generator) -> FloatArray:
        eps = rng.standard_normal(size)
        return lfilter([1.0, self.phi2], [1.0, -self.phi1], eps)


@dataclass(frozen=True)
class TAR:
    """
    x_t = phi1 x_{t-1} + e_t if x_{t-1} <= tau, else
    x_t = phi2 x_{t-1} + sigma2 e_t
    """

    phi1: float = -2.0
    phi2: float = 0.7
    tau: float = 1.0
    sigma2: float = 0.5
    stationary = True

    def simulate(self, size: int, rng: np.random.Generator) -> FloatArray:
        eps = rng.standard_normal(size)
        x = np.zeros(size)
        prev = 0.0
        for t in range(size):
            if prev <= self.tau:
                prev = self.phi1 * prev + eps[t]
            else:
                prev = self.phi2 * prev + self.sigma2 * eps[t]
            x[t] = prev
        return x


@dataclass(frozen=True)
class I1:
    """x_t = x_{t-1} + z_t + e_{t,2}, z_t = phi z_{t-1} + sigma e_{t,1}"""

    phi: float = -0.7
    sigma: float = 0.5
    stationary = False

    def simulate(self, size: int, rng: np.random.Generator) -> FloatArray:
        eps = rng.standard_normal((size, 2))
        z = lfilter([self.sigma], [1.0, -self.phi], eps[:, 0])
        return np.cumsum(z + eps[:, 1])


@dataclass(frozen=True)
class CYC:
    """x_t = 10 cos(0.23 pi t) + 6 cos(0.17 pi t) + 0.5 e_t"""

    noise: bool = True
    stationary = False

    def simulate(self, size: int, rng: np.random.Generator) -> FloatArray:
        t = np.arange(size)
        trend = 10.0 * np.cos(0.23 * np.pi * t) + 6.0 * np.cos(0.17 * np.pi * t)
        if not self.noise:
            return trend
        return trend + 0.5 * rng.standard_normal(size)


@dataclass(frozen=True)
class NLVAR:
    """
    x_{t,1} = phi11 x_{t-1,1} + phi12 s(3 x_{t-1,2}) + 0.25 e_{t,1}
    x_{t,2} = phi21 x_{t-1,1} + phi22 x_{t-1,2} + 3 e_{t,2}
    """

    phi11: float = 0.3
    phi12: float = 8.0
    phi21: float = 0.0
    phi22: float = 0.4
    stationary = True

    def simulate(self, size: int, rng: np.random.Generator) -> FloatArray:
        eps = rng.standard_normal((size, 2))
        x = np.zeros((size, 2))
        x1 = x2 = 0.0
        for t in range(size):
            x1, x2 = (
                self.phi11 * x1 + self.phi12 * centered_sigmoid(3.0 * x2) + 0.25 * eps[t, 0],
                self.phi21 * x1 + self.phi22 * x2 + 3.0 * eps[t, 1],
            )
            x[t] = x1, x2
        return x


@dataclass(frozen=True)
class AL:
    """
    Additive logistic compositions of a latent VAR(1):
    y_{t,1} = 0.1 + 0.7 y_{t-1,1} - 0.5 y_{t-1,2} + 0.2 e_{t,1}
    y_{t,2} = 0.1 - 0.7 y_{t-1,2} + 0.2 e_{t,2}
    """

    stationary = True

    def simulate(self, size: int, rng: np.random.Generator) -> FloatArray:
        eps = rng.standard_normal((size, 2))
        y = np.zeros((size, 2))
        y1 = y2 = 0.0
        for t in range(size):
            y1, y2 = (
                0.1 + 0.7 * y1 - 0.5 * y2 + 0.2 * eps[t, 0],
                0.1 - 0.7 * y2 + 0.2 * eps[t, 1],
            )
            y[t] = y1, y2
        return additive_logistic(y)


def additive_logistic(y: ArrayLike) -> FloatArray:
    """Map n x (d-1) reals to n x d compositions, the last part being the base"""
    latent = _as_matrix(y)
    # shift by the row max (including the base's 0) so exp never overflows
    shift = np.maximum(latent.max(axis=1, keepdims=True), 0.0)
    parts = np.exp(latent - shift)
    base = np.exp(-shift)
    total = parts.sum(axis=1, keepdims=True) + base
    return np.hstack([parts / total, base / total])


Model = Union[AR, ARMA, TAR, I1, CYC, NLVAR, AL]

MODELS: Dict[str, Type] = {
    "ar": AR,
    "arma": ARMA,
    "tar": TAR,
    "i1": I1,
    "cyc": CYC,
    "nlvar": NLVAR,
    "al": AL,
}


def get_model(tag: str, **params) -> Model:
    try:
        return MODELS[tag.lower()](**params)
    except KeyError:
        raise ConfigError(f"unknown model {tag!r}, expected one of {sorted(MODELS)}") from None


@dataclass(frozen=True)
class DgpSpec:
    """
    A model, a length and a seed. `burn_in` defaults to 200 for stationary
    models and 0 for the I(1) and cyclic ones.
    """

    model: Model
    n: int
    seed: int = 0
    burn_in: Optional[int] = None

    @classmethod
    def of(cls, tag: str, n: int, seed: int = 0, burn_in: Optional[int] = None, **params) -> "DgpSpec":
        return cls(get_model(tag, **params), n, seed, burn_in)

    @property
    def tag(self) -> str:
        return type(self.model).__name__.lower()

    @property
    def effective_burn_in(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return STATIONARY_BURN_IN if self.model.stationary else 0

    def with_seed(self, seed: int) -> "DgpSpec":
        return DgpSpec(self.model, self.n, seed, self.burn_in)


def generate(spec: DgpSpec) -> TimeSeriesPanel:
    """Simulate a fully observed panel"""
    if spec.n < 10:
        raise ConfigError(f"series length must be >= 10, got {spec.n}")
    burn_in = spec.effective_burn_in
    if burn_in < 0:
        raise ConfigError(f"burn-in must be >= 0, got {burn_in}")
    rng = np.random.default_rng(spec.seed)
    values = spec.model.simulate(spec.n + burn_in, rng)
    return TimeSeriesPanel(values[burn_in:])


@dataclass(frozen=True)
class PatternI:
    """`count` time indices drawn uniformly without replacement"""

    count: int = 300
    per_column: bool = False

    def mask(self, n: int, d: int, rng: np.random.Generator) -> BoolArray:
        if self.count > n:
            raise ConfigError(f"cannot remove {self.count} of {n} observations")
        out = np.zeros((n, d), dtype=bool)
        if self.per_column:
            for j in range(d):
                out[rng.choice(n, self.count, replace=False), j] = True
        else:
            out[rng.choice(n, self.count, replace=False), :] = True
        return out


@dataclass(frozen=True)
class PatternII:
    """`run` consecutive indices starting at `offset` in every `block`"""

    block: int = 20
    run: int = 6
    offset: int = 7

    def mask(self, n: int, d: int, rng: np.random.Generator) -> BoolArray:
        if self.run < 1 or self.offset < 0 or self.offset + self.run > self.block:
            raise ConfigError(
                f"run {self.run} at offset {self.offset} does not fit in a block of {self.block}"
            )
        position = np.arange(n) % self.block
        rows = (position >= self.offset) & (position < self.offset + self.run)
        return np.repeat(rows[:, None], d, axis=1)


@dataclass(frozen=True, eq=False)
class Custom:
    missing: BoolArray = field(repr=False)

    def mask(self, n: int, d: int, rng: np.random.Generator) -> BoolArray:
        out = np.array(self.missing, dtype=bool)
        if out.ndim == 1:
            out = np.repeat(out[:, None], d, axis=1)
        if out.shape != (n, d):
            raise ConfigError(f"custom mask has shape {out.shape}, expected {(n, d)}")
        return out


@dataclass(frozen=True)
class ProtectTail:
    """Apply `inner` to all but the last `m` rows, which stay observed"""

    inner: "MissingPattern"
    m: int

    def mask(self, n: int, d: int, rng: np.random.Generator) -> BoolArray:
        if not 0 <= self.m < n:
            raise ConfigError(f"cannot protect {self.m} of {n} rows")
        head = self.inner.mask(n - self.m, d, rng)
        return np.vstack([head, np.zeros((self.m, d), dtype=bool)])


MissingPattern = Union[PatternI, PatternII, Custom, ProtectTail]


def parse_pattern(tag: Union[str, int], n: int, fraction: float = 0.3) -> MissingPattern:
    """
    Pattern from a CLI tag: "1"/"I" drops round(fraction * n) random indices
    (300 at n = 1000), "2"/"II" drops 6 of every 20.
    """
    key = str(tag).strip().upper()
    if key in ("1", "I"):
        return PatternI(count=int(round(fraction * n)))
    if key in ("2", "II"):
        return PatternII()
    raise ConfigError(f"unknown missing pattern {tag!r}")


def apply_pattern(panel: TimeSeriesPanel, pattern: MissingPattern, seed: int = 0) -> TimeSeriesPanel:
    """Mask `panel` with `pattern`; cells already missing stay missing"""
    rng = np.random.default_rng(seed)
    mask = pattern.mask(panel.n, panel.d, rng)
    return TimeSeriesPanel(panel.values, mask | panel.mask)
