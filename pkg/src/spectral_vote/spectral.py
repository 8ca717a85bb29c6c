"""Normalised spectral clustering of feature maps into mask partitions.

graph -> k smallest generalised eigenvectors -> k-means on the n x k rows ->
one mask per cluster at feature resolution. Rows are not renormalised.
``generate_candidates`` repeats this per (feature source, k) and pools the
masks; each run draws its seed from the root seed and its own tag, so adding
a source never changes the randomness of the others.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING

import numpy as np

from spectral_vote.eigen import smallest_generalized_eigenpairs
from spectral_vote.exceptions import ParameterError, ShapeMismatchError
from spectral_vote.graph import build_graph
from spectral_vote.kmeans import kmeans
from spectral_vote.logging_config import get_logger
from spectral_vote.models import BinaryMask, CandidatePool, CandidateTag, MaskSet

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

    from spectral_vote.models import FeatureMap

SPECTRAL = "spectral"
KMEANS = "kmeans"
METHODS = (SPECTRAL, KMEANS)

logger = get_logger(__name__)


def derive_seed(root: int, *parts: str | int) -> int:
    """Mix a root seed with tags into an independent 64-bit seed.

    The seed is the first 8 bytes (little-endian) of BLAKE2b over the UTF-8
    string "root|part1|part2|...".
    """
    key = "|".join(str(part) for part in (root, *parts))
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _labels_to_masks(
    labels: npt.NDArray[np.int64], k: int, grid: tuple[int, int]
) -> tuple[BinaryMask, ...]:
    label_grid = labels.reshape(grid)
    return tuple(BinaryMask(label_grid == cluster) for cluster in range(k))


def _check_k(features: FeatureMap, k: int) -> None:
    if not 1 <= k <= features.n_cells:
        msg = f"k must lie in [1, {features.n_cells}], got {k}"
        raise ParameterError(msg)


def spectral_cluster(
    features: FeatureMap, k: int, seed: int, source: str = ""
) -> MaskSet:
    """Partition the feature grid into k masks by normalised spectral clustering.

    Raises:
        ParameterError: If k is outside [1, h*w]
        DegenerateFeatureError: If a cell has a zero feature vector
    """
    _check_k(features, k)
    graph = build_graph(features)
    basis = smallest_generalized_eigenpairs(graph, k)
    clustering = kmeans(basis.U, k, seed)
    logger.debug(
        "Spectral clustering %s k=%d: eigenvalues %s", source or "-", k, basis.eigenvalues
    )
    masks = _labels_to_masks(clustering.assignments, k, features.grid)
    return MaskSet(masks=masks, source=source, k=k, seed=seed, method=SPECTRAL)


def kmeans_cluster(features: FeatureMap, k: int, seed: int, source: str = "") -> MaskSet:
    """Baseline: k-means directly on the raw per-cell feature vectors.

    Raises:
        ParameterError: If k is outside [1, h*w]
    """
    _check_k(features, k)
    clustering = kmeans(features.vectors(), k, seed)
    masks = _labels_to_masks(clustering.assignments, k, features.grid)
    return MaskSet(masks=masks, source=source, k=k, seed=seed, method=KMEANS)


def cluster_features(
    features: FeatureMap, k: int, seed: int, source: str = "", method: str = SPECTRAL
) -> MaskSet:
    """Dispatch to spectral clustering or the k-means baseline.

    Raises:
        ParameterError: If the method is unknown
    """
    if method == SPECTRAL:
        return spectral_cluster(features, k, seed, source)
    if method == KMEANS:
        return kmeans_cluster(features, k, seed, source)
    msg = f"Unknown clustering method {method!r}, expected one of {METHODS}"
    raise ParameterError(msg)


def check_shared_grid(feature_sets: Sequence[tuple[str, FeatureMap]]) -> None:
    """Raise ShapeMismatchError unless every source shares the first one's grid."""
    if not feature_sets:
        return
    grid = feature_sets[0][1].grid
    for source, features in feature_sets:
        if features.grid != grid:
            msg = f"Source {source!r} has grid {features.grid}, expected {grid}"
            raise ShapeMismatchError(msg)


def generate_candidates(
    feature_sets: Sequence[tuple[str, FeatureMap]],
    ks: Sequence[int],
    seed: int,
    *,
    method: str = SPECTRAL,
    workers: int = 1,
) -> CandidatePool:
    """Cluster every (source, k) pair and pool the masks with provenance.

    Masks are ordered by source (input order), then k (input order), then
    cluster index, whatever order the runs finish in.

    Raises:
        ParameterError: If no sources or no ks are given
        ShapeMismatchError: If the feature maps do not share one grid
    """
    if not feature_sets or not ks:
        msg = "Candidate generation needs at least one source and one k"
        raise ParameterError(msg)
    check_shared_grid(feature_sets)

    runs = [(source, features, k) for source, features in feature_sets for k in ks]

    def run(job: tuple[str, FeatureMap, int]) -> MaskSet:
        source, features, k = job
        return cluster_features(features, k, derive_seed(seed, source, k), source, method)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            mask_sets = list(executor.map(run, runs))
    else:
        mask_sets = [run(job) for job in runs]

    masks: list[BinaryMask] = []
    provenance: list[CandidateTag] = []
    for mask_set in mask_sets:
        for cluster, mask in enumerate(mask_set.masks):
            masks.append(mask)
            provenance.append(CandidateTag(mask_set.source, mask_set.k, cluster))
    logger.debug("Generated %d candidates from %d runs", len(masks), len(runs))
    return CandidatePool(masks=tuple(masks), provenance=tuple(provenance))
