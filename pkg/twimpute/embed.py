"""
Delay embeddings v_t(w) and the pre/post supports split at the cut-off.
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.spatial.distance import cdist

from .core import TwiConfig, _as_matrix
from .types import ArrayLike, FloatArray


def embed_vector(w: ArrayLike, i: int, p: int) -> FloatArray:
    """
    The delay vector at time `i`.

    For a single series this is (w_i, w_{i-1}, ..., w_{i-p+1}); for d series
    the p lags of each series are stacked series by series.
    """
    array = _as_matrix(w)
    if i < p - 1 or i >= array.shape[0]:
        raise IndexError(f"time index {i} has no lag-{p} embedding in a series of length {array.shape[0]}")
    return array[i - p + 1 : i + 1][::-1].T.reshape(-1).copy()


def embedding_matrix(w: ArrayLike, p: int, start: int, stop: int) -> FloatArray:
    """
    Stack the embeddings v_t for t in [start, stop) as rows.

    Equivalent to calling `embed_vector` for every t, done with a strided view.
    """
    array = _as_matrix(w)
    if start < p - 1:
        raise IndexError(f"embeddings start at index {p - 1}, got {start}")
    # windows[t - p + 1, l, :] = (w_{t-p+1,l}, ..., w_{t,l})
    windows = sliding_window_view(array, p, axis=0)[start - p + 1 : stop - p + 1]
    return np.ascontiguousarray(windows[:, :, ::-1]).reshape(windows.shape[0], -1)


@dataclass(frozen=True)
class EmbeddingView:
    """
    The two empirical marginal supports of a panel at cut-off `n1`.

    Rows of `pre()` are v_t for t = p-1..n1, rows of `post()` are v_t for
    t = n1+1..n-1.
    """

    source: FloatArray
    p: int
    n1: int

    @classmethod
    def of(cls, w: ArrayLike, cfg: TwiConfig) -> "EmbeddingView":
        array = _as_matrix(w)
        cfg.validate(array.shape[0])
        return cls(array, cfg.p, cfg.n1)

    @property
    def n(self) -> int:
        return self.source.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.p * self.source.shape[1]

    @property
    def indices_pre(self) -> range:
        return range(self.p - 1, self.n1 + 1)

    @property
    def indices_post(self) -> range:
        return range(self.n1 + 1, self.n)

    def pre(self) -> FloatArray:
        return embedding_matrix(self.source, self.p, self.p - 1, self.n1 + 1)

    def post(self) -> FloatArray:
        return embedding_matrix(self.source, self.p, self.n1 + 1, self.n)


def pairwise_cost(u: FloatArray, v: FloatArray, k: float = 2.0) -> FloatArray:
    """||u_i - v_j||^k for every row pair; k = 2 avoids the square root"""
    if k == 2.0:
        return cdist(u, v, "sqeuclidean")
    return cdist(u, v, "euclidean") ** k


def cost_matrix(w: ArrayLike, cfg: TwiConfig) -> FloatArray:
    """
    The (n1-p+2) x (n-n1-1) ground-cost matrix between the pre and post
    embeddings of `w`.
    """
    view = EmbeddingView.of(w, cfg)
    return pairwise_cost(view.pre(), view.post(), cfg.cost_order)
