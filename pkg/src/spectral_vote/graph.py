"""Similarity graph over feature-grid cells.

Edge weights are cosine similarities clamped at zero, so every weight lies in
[0, 1]. Self-loops are kept (w_ii = 1): they cancel inside L = diag(d) - W and
keep every degree positive, which the generalised eigenproblem relies on.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from spectral_vote.exceptions import (
    DegenerateFeatureError,
    ParameterError,
    ShapeMismatchError,
)
from spectral_vote.logging_config import get_logger
from spectral_vote.models import AffinityGraph

if TYPE_CHECKING:
    import numpy.typing as npt

    from spectral_vote.models import FeatureMap

logger = get_logger(__name__)


def _freeze(array: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    array.setflags(write=False)
    return array


def graph_from_adjacency(W: npt.ArrayLike) -> AffinityGraph:
    """Build degrees and Laplacian for a given symmetric, non-negative W.

    Raises:
        ShapeMismatchError: If W is not square and symmetric
    """
    weights = np.array(W, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:  # noqa: PLR2004
        msg = f"Adjacency must be a square matrix, got shape {weights.shape}"
        raise ShapeMismatchError(msg)
    if not np.array_equal(weights, weights.T):
        msg = "Adjacency matrix must be symmetric"
        raise ShapeMismatchError(msg)
    if np.any(weights < 0.0):
        msg = "Adjacency weights must be non-negative"
        raise ParameterError(msg)
    degrees = weights.sum(axis=1)
    laplacian = np.diag(degrees) - weights
    return AffinityGraph(W=_freeze(weights), d=_freeze(degrees), L=_freeze(laplacian))


def build_graph(features: FeatureMap) -> AffinityGraph:
    """Build the clamped-cosine affinity graph of a feature map.

    Cells are vertices in row-major order; w_ij = max(0, cos(f_i, f_j)).

    Raises:
        DegenerateFeatureError: If a cell's feature vector has zero norm
    """
    vectors = features.vectors()
    norms = np.linalg.norm(vectors, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        cell = int(zero[0])
        row, col = divmod(cell, features.width)
        msg = f"Feature vector of cell {cell} (row {row}, col {col}) has zero norm"
        raise DegenerateFeatureError(msg)

    unit = vectors / norms[:, np.newaxis]
    cosine = unit @ unit.T
    weights = np.clip(cosine, 0.0, 1.0)
    # Exact symmetry and unit self-similarity despite rounding in the product
    weights = 0.5 * (weights + weights.T)
    np.fill_diagonal(weights, 1.0)

    logger.debug("Built affinity graph with %d vertices", weights.shape[0])
    return graph_from_adjacency(weights)


def laplacian_quadratic(graph: AffinityGraph, x: npt.ArrayLike) -> float:
    """Return x^T L x, which equals 1/2 * sum_ij w_ij (x_i - x_j)^2.

    Raises:
        ShapeMismatchError: If x does not have one entry per vertex
    """
    vector = np.asarray(x, dtype=np.float64)
    if vector.shape != (graph.n,):
        msg = f"Vector has shape {vector.shape}, graph has {graph.n} vertices"
        raise ShapeMismatchError(msg)
    return float(vector @ graph.L @ vector)
