"""
Identification of imputation rules for a stationary two-state Markov chain.

Before the cut-off every k1-th value is missing, after it every k2-th. A
missing value is imputed as 1 with probability `a` when its left neighbour is
1 and with probability `b` when it is 0; (a1, b1) are used before the cut-off
and (a2, b2) after. Zero Wasserstein loss means both sides share the same
2-dimensional marginal, which pins the rules down when k1 != k2.
"""
from dataclasses import dataclass
import logging
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError, NumericalError
from .types import FloatArray

logger = logging.getLogger(__name__)

# outcome order of the marginal of (w_t, w_{t-1})
STATES = ((1, 1), (1, 0), (0, 1), (0, 0))


@dataclass(frozen=True)
class MarkovScenario:
    """
    `p` = P(1 | 0), `q` = P(0 | 1); `k1`, `k2` are the missing cadences
    before and after the cut-off.
    """

    p: float
    q: float
    k1: int
    k2: int

    def __post_init__(self):
        if not (0 < self.p < 1 and 0 < self.q < 1):
            raise ConfigError(f"transition probabilities must lie in (0, 1), got p={self.p}, q={self.q}")
        if self.k1 <= 2 or self.k2 <= 2:
            raise ConfigError(f"cadences must exceed 2, got k1={self.k1}, k2={self.k2}")

    @property
    def lambda1(self) -> float:
        """Stationary probability of state 0"""
        return self.q / (self.p + self.q)

    @property
    def lambda2(self) -> float:
        """Stationary probability of state 1"""
        return self.p / (self.p + self.q)

    def true_marginal(self) -> FloatArray:
        l1, l2 = self.lambda1, self.lambda2
        return np.array([l2 * (1 - self.q), l1 * self.p, l2 * self.q, l1 * (1 - self.p)])

    def stable_solution(self) -> Tuple[float, float]:
        """The rule that imputes like the chain itself"""
        return 1.0 - self.q, self.p


def implied_marginal(s: MarkovScenario, a: float, b: float, kk: int) -> FloatArray:
    """
    Marginal of (w_t, w_{t-1}) over STATES when every kk-th value is imputed
    with the rule (a, b): a fraction 1/kk of the pairs end in an imputed value.
    """
    if not (0 <= a <= 1 and 0 <= b <= 1):
        raise ConfigError(f"imputation probabilities must lie in [0, 1], got a={a}, b={b}")
    l1, l2 = s.lambda1, s.lambda2
    imputed = np.array([l2 * a, l1 * b, l2 * (1 - a), l1 * (1 - b)])
    weight = 1.0 / kk
    return (1.0 - weight) * s.true_marginal() + weight * imputed


@dataclass(frozen=True)
class AffineFamily:
    """
    Solutions without the stability requirement:
    a2 = a* + (k2 / k1)(a1 - a*) and b2 = b* + (k2 / k1)(b1 - b*), with
    (a*, b*) = (1 - q, p). Free parameters a1, b1 range over intervals that
    keep every probability in [0, 1].
    """

    scenario: MarkovScenario

    @property
    def slope(self) -> float:
        return self.scenario.k2 / self.scenario.k1

    def at(self, a1: float, b1: float) -> Tuple[float, float, float, float]:
        """(a1, b1, a2, b2) for the chosen free parameters"""
        a_star, b_star = self.scenario.stable_solution()
        a2 = a_star + self.slope * (a1 - a_star)
        b2 = b_star + self.slope * (b1 - b_star)
        return a1, b1, a2, b2

    def _interval(self, centre: float) -> Tuple[float, float]:
        # need 0 <= centre + slope * (x - centre) <= 1 and 0 <= x <= 1
        lo = centre - centre / self.slope
        hi = centre + (1.0 - centre) / self.slope
        return max(0.0, lo), min(1.0, hi)

    def a1_interval(self) -> Tuple[float, float]:
        return self._interval(self.scenario.stable_solution()[0])

    def b1_interval(self) -> Tuple[float, float]:
        return self._interval(self.scenario.stable_solution()[1])


@dataclass(frozen=True)
class Identification:
    """
    Outcome of `solve_identification`: either a unique rule, a
    non-identified flag (k1 == k2 under stability), or an affine family.
    """

    identified: bool
    solution: Optional[Tuple[float, float]] = None
    family: Optional[AffineFamily] = None

    def describe(self) -> str:
        if self.solution is not None:
            a, b = self.solution
            return f"identified: a = {a:.12g}, b = {b:.12g}"
        if self.family is not None:
            s = self.family.scenario
            a_star, b_star = s.stable_solution()
            (alo, ahi), (blo, bhi) = self.family.a1_interval(), self.family.b1_interval()
            return (
                f"affine family: a2 = {a_star:.12g} + {self.family.slope:.12g} (a1 - {a_star:.12g}), "
                f"b2 = {b_star:.12g} + {self.family.slope:.12g} (b1 - {b_star:.12g}), "
                f"a1 in [{alo:.6g}, {ahi:.6g}], b1 in [{blo:.6g}, {bhi:.6g}]"
            )
        return "non-identified: any a1 = a2, b1 = b2 gives zero loss"


def identification_system(s: MarkovScenario) -> Tuple[FloatArray, FloatArray]:
    """
    Linear system A (a, b) = r whose solutions are the stable rules with
    implied_marginal(a, b, k1) == implied_marginal(a, b, k2).

    implied_marginal is affine in (a, b), so its coefficients are read off by
    evaluating it at (0, 0), (1, 0) and (0, 1). Rows are the (1, 1) and (1, 0)
    outcomes; the other two outcomes repeat them with the opposite sign.
    """

    def difference(a: float, b: float) -> FloatArray:
        return implied_marginal(s, a, b, s.k1) - implied_marginal(s, a, b, s.k2)

    offset = difference(0.0, 0.0)
    A = np.column_stack([difference(1.0, 0.0) - offset, difference(0.0, 1.0) - offset])
    return A[:2], -offset[:2]


def solve_stable_rule(s: MarkovScenario) -> Tuple[float, float]:
    """
    The unique (a, b) with a1 = a2 = a, b1 = b2 = b giving zero loss.

    Raises
    ------
    NumericalError
        The system is singular, which happens exactly when k1 == k2.
    """
    A, rhs = identification_system(s)
    try:
        a, b = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"identification system is singular for k1={s.k1}, k2={s.k2}") from e
    return float(a), float(b)


def solve_identification(s: MarkovScenario, enforce_stability: bool = True) -> Identification:
    """
    Solve for imputation rules with matching marginals on both sides.

    With stability (a1 = a2, b1 = b2) the solution of `identification_system`
    is (1 - q, p) unless k1 == k2, in which case every rule matches.
    """
    if enforce_stability:
        try:
            return Identification(identified=True, solution=solve_stable_rule(s))
        except NumericalError:
            logger.info("equal cadences: the imputation rule is not identified")
            return Identification(identified=False)
    return Identification(identified=False, family=AffineFamily(s))
