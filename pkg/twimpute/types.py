from typing import Callable, Sequence, TypeVar, Union

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
BoolArray = npt.NDArray[np.bool_]

# anything numpy can turn into a float array
ArrayLike = Union[FloatArray, Sequence[float], Sequence[Sequence[float]]]

TSchema = Union[Callable[[], Union[dict, None]], dict, None]
"""Run config schema, can be the schema itself, or a function to retrieve it"""

_TV = TypeVar("_TV")

MaybeCallable = Union[Callable[..., _TV], _TV]

# a cut-off given either as an absolute index or as a fraction of n
Cutoff = Union[int, float]
