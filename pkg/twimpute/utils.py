import math
import os
from pathlib import Path
from typing import Callable, TypeVar, Union, no_type_check

import numpy as np

from .errors import ConfigError
from .types import Cutoff


_TValue = TypeVar("_TValue")

# we have to ignore here since type narrowing doesn't work for the else case
# https://github.com/python/mypy/issues/11907
@no_type_check
def make_callable(
    value: Union[_TValue, Callable[..., _TValue]] = None
) -> Callable[..., _TValue]:
    """
    Given a value or callable that returns a value, create a function that returns the value.
    This is to normalize a Union[Callable[..., T], T] into just Callable[..., T]
    """
    if callable(value):
        return value
    else:
        return lambda *args, **kwargs: value


def get_relative(config_path: Path, schema_path: Path):
    """Get the relative path to move from a run config to its schema file"""
    return Path(os.path.relpath(schema_path, config_path.parent))


def resolve_cutoff(value: Cutoff, n: int) -> int:
    """
    Turn a cut-off into an absolute index.

    Floats strictly between 0 and 1 are fractions of `n` (floor(f * n));
    anything else must be a whole number and is used as is.
    """
    if isinstance(value, float) and 0.0 < value < 1.0:
        return int(math.floor(value * n))
    if float(value) != int(value):
        raise ConfigError(f"cut-off {value!r} is neither a fraction nor an index")
    return int(value)


def replicate_seed(seed: int, index: int) -> int:
    """Derive an independent 64-bit seed for replicate `index`"""
    state = np.random.SeedSequence([seed, index]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])
