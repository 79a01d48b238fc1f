"""Numeric kernels: cosine, standardization, mean pooling and PCA.

Sums go through ``math.fsum`` (exactly rounded), which makes pooling and
statistics independent of element order and of how callers parallelize.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .encoder import EmbeddingVector
from .errors import DimensionMismatch, EmptyInput, InsufficientRows, KTooLarge, ZeroVector

VectorLike = Union[EmbeddingVector, np.ndarray, Sequence[float]]


class Population(str, enum.Enum):
    pair = "pair"
    batch = "batch"


def _array(v: VectorLike) -> np.ndarray:
    if isinstance(v, EmbeddingVector):
        return v.values
    return np.asarray(v, dtype=float)


def cosine(x: VectorLike, y: VectorLike) -> float:
    a, b = _array(x), _array(y)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot compare vectors of shape {a.shape} and {b.shape}")
    peak_a, peak_b = float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0))
    if peak_a == 0.0 or peak_b == 0.0:
        raise ZeroVector("cosine is undefined for an all-zero vector")
    # power-of-two rescaling is exact and keeps the squared sums clear of under/overflow
    a = np.ldexp(a, -math.frexp(peak_a)[1])
    b = np.ldexp(b, -math.frexp(peak_b)[1])
    sa = math.fsum(a * a)
    sb = math.fsum(b * b)
    value = math.fsum(a * b) / math.sqrt(sa * sb)
    return min(1.0, max(-1.0, value))


def column_fsum(rows: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(col) for col in rows.T])


def mean_pool(vectors: Sequence[VectorLike]) -> np.ndarray:
    if len(vectors) == 0:
        raise EmptyInput("mean_pool needs at least one vector")
    rows = np.array([_array(v) for v in vectors], dtype=float)
    if rows.ndim != 2:
        raise DimensionMismatch("vectors must share one length")
    return column_fsum(rows) / rows.shape[0]


@dataclass(frozen=True, eq=False)
class StandardizationStats:
    means: np.ndarray
    stds: np.ndarray
    population: Population

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist(),
                "population": self.population.value}


def fit_standardizer(rows: Sequence[VectorLike], population: Population = Population.batch) -> StandardizationStats:
    """Per-dimension population mean and standard deviation (divide by N)."""
    if len(rows) == 0:
        raise EmptyInput("fit_standardizer needs at least one row")
    data = np.array([_array(r) for r in rows], dtype=float)
    if data.ndim != 2:
        raise DimensionMismatch("rows must share one length")
    n = data.shape[0]
    means = column_fsum(data) / n
    centered = data - means
    stds = np.sqrt(column_fsum(centered * centered) / n)
    return StandardizationStats(means, stds, Population(population))


def apply_standardizer(row: VectorLike, stats: StandardizationStats) -> np.ndarray:
    x = _array(row)
    if x.shape != stats.means.shape:
        raise DimensionMismatch(f"row has length {x.shape[0]}, stats have {stats.means.shape[0]}")
    out = np.zeros_like(x)
    live = stats.stds > 0
    out[live] = (x[live] - stats.means[live]) / stats.stds[live]
    return out


@dataclass(frozen=True, eq=False)
class PCAModel:
    components: np.ndarray  # k x input_dimension, orthonormal rows
    explained_variance: np.ndarray
    mean: np.ndarray
    total_variance: float

    @property
    def k(self) -> int:
        return int(self.components.shape[0])

    @property
    def input_dimension(self) -> int:
        return int(self.components.shape[1])

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance == 0:
            return np.zeros(self.k)
        return self.explained_variance / self.total_variance


def covariance(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample covariance (divide by N-1) and column means, both fsum-accumulated."""
    n, d = data.shape
    mean = column_fsum(data) / n
    centered = data - mean
    cov = np.empty((d, d))
    for i in range(d):
        prods = centered[:, i:i + 1] * centered[:, i:]
        cov[i, i:] = column_fsum(prods) / (n - 1)
        cov[i:, i] = cov[i, i:]
    return cov, mean


def _apply_sign_convention(vec: np.ndarray) -> np.ndarray:
    # largest |entry| positive; argmax returns the lowest index on ties
    return -vec if vec[int(np.argmax(np.abs(vec)))] < 0 else vec


def pca_fit(rows: Sequence[VectorLike], k: int) -> PCAModel:
    data = np.array([_array(r) for r in rows], dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise InsufficientRows(f"PCA needs at least 2 rows, got {len(rows)}")
    n, d = data.shape
    if k < 1 or k > min(n - 1, d):
        raise KTooLarge(f"k={k} exceeds min(rows-1, dimension)={min(n - 1, d)}")

    cov, mean = covariance(data)
    eigvals, eigvecs = np.linalg.eigh(cov)
    # descending eigenvalue; equal eigenvalues keep eigh's order
    order = np.argsort(-eigvals, kind="stable")[:k]
    components = np.array([_apply_sign_convention(eigvecs[:, j]) for j in order])
    explained = np.clip(eigvals[order], 0.0, None)
    total = math.fsum(np.clip(eigvals, 0.0, None))
    return PCAModel(components, explained, mean, total)


def pca_transform(row: VectorLike, model: PCAModel) -> np.ndarray:
    x = _array(row)
    if x.shape != (model.input_dimension,):
        raise DimensionMismatch(f"row has length {x.shape[0]}, model expects {model.input_dimension}")
    centered = x - model.mean
    return np.array([math.fsum(c * centered) for c in model.components])


def pca_inverse(projected: np.ndarray, model: PCAModel) -> np.ndarray:
    return model.mean + column_fsum(projected[:, None] * model.components)
