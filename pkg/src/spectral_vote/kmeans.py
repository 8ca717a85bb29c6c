"""Seeded Lloyd's k-means with k-means++ initialisation.

Randomness comes from numpy's PCG64 ``Generator`` seeded with the caller's
integer, so the same seed and input give bit-identical assignments on every
platform. One run per call; callers restart by changing the seed.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from spectral_vote.exceptions import ParameterError, ShapeMismatchError
from spectral_vote.logging_config import get_logger
from spectral_vote.models import Clustering

if TYPE_CHECKING:
    import numpy.typing as npt

MAX_ITERATIONS = 100
POINTS_NDIM = 2

logger = get_logger(__name__)


def _squared_distances(
    points: npt.NDArray[np.float64], centers: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """(n, k) matrix of squared Euclidean distances."""
    diff = points[:, np.newaxis, :] - centers[np.newaxis, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans_plusplus_init(
    points: npt.NDArray[np.float64], k: int, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    """Pick k initial centres, each drawn proportional to squared distance."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[int(rng.integers(n))]
    closest = _squared_distances(points, centers[:1])[:, 0]
    for i in range(1, k):
        total = float(closest.sum())
        # All remaining points coincide with a centre: any choice is equivalent
        if total > 0:
            index = int(rng.choice(n, p=closest / total))
        else:
            index = int(rng.integers(n))
        centers[i] = points[index]
        new_distances = _squared_distances(points, centers[i : i + 1])[:, 0]
        closest = np.minimum(closest, new_distances)
    return centers


def _repair_empty_clusters(
    points: npt.NDArray[np.float64],
    labels: npt.NDArray[np.int64],
    centers: npt.NDArray[np.float64],
) -> None:
    """Give each empty cluster the point farthest from its centre, in place.

    Only points from clusters with more than one member are stolen, so no
    repair ever empties another cluster.
    """
    k = centers.shape[0]
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        gaps = np.einsum("nd,nd->n", points - centers[labels], points - centers[labels])
        gaps = np.where(counts[labels] > 1, gaps, -1.0)
        stolen = int(np.argmax(gaps))
        counts[labels[stolen]] -= 1
        labels[stolen] = empty
        counts[empty] = 1
        centers[empty] = points[stolen]


def _cluster_means(
    points: npt.NDArray[np.float64], labels: npt.NDArray[np.int64], k: int
) -> npt.NDArray[np.float64]:
    sums = np.zeros((k, points.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    return sums / counts[:, np.newaxis]


def _inertia(
    points: npt.NDArray[np.float64],
    labels: npt.NDArray[np.int64],
    centers: npt.NDArray[np.float64],
) -> float:
    residual = points - centers[labels]
    return float(np.einsum("nd,nd->", residual, residual))


def kmeans(points: npt.ArrayLike, k: int, seed: int) -> Clustering:
    """Cluster the rows of ``points`` into k non-empty groups.

    Lloyd iterations run until the assignment stops changing or for at most
    100 iterations. Squared Euclidean distance on the raw rows.

    Args:
        points: (n, dim) finite real matrix
        k: Cluster count, 1 <= k <= n
        seed: Non-negative integer seed for the PCG64 generator

    Returns:
        Clustering with labels in [0, k), no empty cluster

    Raises:
        ParameterError: If k is out of range or points are not finite
        ShapeMismatchError: If points is not a 2-D matrix
    """
    data = np.asarray(points, dtype=np.float64)
    if data.ndim != POINTS_NDIM:
        msg = f"Points must be an (n, dim) matrix, got shape {data.shape}"
        raise ShapeMismatchError(msg)
    n = data.shape[0]
    if not 1 <= k <= n:
        msg = f"k must lie in [1, {n}], got {k}"
        raise ParameterError(msg)
    if not np.isfinite(data).all():
        msg = "Points must be finite"
        raise ParameterError(msg)

    rng = np.random.default_rng(seed)
    centers = kmeans_plusplus_init(data, k, rng)
    distances = _squared_distances(data, centers)
    labels = np.argmin(distances, axis=1).astype(np.int64)
    initial_inertia = float(distances.min(axis=1).sum())
    _repair_empty_clusters(data, labels, centers)

    n_iter = 0
    for n_iter in range(1, MAX_ITERATIONS + 1):  # noqa: B007
        centers = _cluster_means(data, labels, k)
        new_labels = np.argmin(_squared_distances(data, centers), axis=1).astype(np.int64)
        _repair_empty_clusters(data, new_labels, centers)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    centers = _cluster_means(data, labels, k)
    inertia = _inertia(data, labels, centers)
    logger.debug("k-means k=%d converged after %d iterations", k, n_iter)
    return Clustering(
        assignments=labels,
        centers=centers,
        inertia=inertia,
        initial_inertia=initial_inertia,
        n_iter=n_iter,
    )
