import contextlib
import os
import shutil
import tempfile
from typing import Iterator, Optional, cast, Union

import numpy as np
from scipy.signal import lfilter

from twimpute.core import TimeSeriesPanel
from twimpute.transport import TransportPlan, solve_exact


@contextlib.contextmanager
def isolated_filesystem(
    temp_dir: Optional[Union[str, os.PathLike]] = None
) -> Iterator[str]:
    """A context manager that creates a temporary directory and
    changes the current working directory to it. This isolates tests
    that affect the contents of the CWD to prevent them from
    interfering with each other.

    :param temp_dir: Create the temporary directory under this
        directory. If given, the created directory is not removed
        when exiting.
    """
    cwd = os.getcwd()
    dt = tempfile.mkdtemp(dir=temp_dir)  # type: ignore[type-var]
    os.chdir(dt)

    try:
        yield cast(str, dt)
    finally:
        os.chdir(cwd)

        if temp_dir is None:
            try:
                shutil.rmtree(dt)
            except OSError:  # noqa: B014
                pass


def ar_series(n: int, seed: int = 0, phi: float = 0.8, d: int = 1) -> np.ndarray:
    """n x d independent AR(1) columns"""
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((n, d))
    return lfilter([1.0], [1.0, -phi], eps, axis=0)


def random_mask(n: int, d: int, fraction: float, seed: int = 0, keep_ends: bool = True) -> np.ndarray:
    """Random missing cells; the first and last rows stay observed when `keep_ends`"""
    rng = np.random.default_rng(seed)
    mask = rng.random((n, d)) < fraction
    if keep_ends:
        mask[0] = mask[-1] = False
    return mask


def masked_ar_panel(n: int, fraction: float = 0.2, seed: int = 0, d: int = 1) -> TimeSeriesPanel:
    return TimeSeriesPanel(ar_series(n, seed, d=d), random_mask(n, d, fraction, seed + 1))


def random_plan(r: int, c: int, seed: int = 0) -> TransportPlan:
    """
    A dense feasible coupling: the average of the independent coupling and an
    optimal plan for a random cost.
    """
    rng = np.random.default_rng(seed)
    optimal, _ = solve_exact(rng.random((r, c)))
    return TransportPlan(0.5 * np.full((r, c), 1.0 / (r * c)) + 0.5 * optimal.matrix)


def assert_non_increasing(testcase, trace, slack: float = 1e-10):
    for before, after in zip(trace, trace[1:]):
        testcase.assertLessEqual(after, before + slack * max(1.0, abs(before)))
