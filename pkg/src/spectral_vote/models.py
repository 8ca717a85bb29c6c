"""Shared data models for spectral clustering, voting and evaluation.

Every model is immutable after construction: arrays are copied on the way in
and marked read-only, so models can be shared freely between worker threads.
Models store raw arrays - formatting happens at the I/O and CLI layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from spectral_vote.exceptions import (
    FeatureDataError,
    FeatureShapeError,
    ParameterError,
    ShapeMismatchError,
)

if TYPE_CHECKING:
    from pathlib import Path

    import numpy.typing as npt

FEATURE_NDIM = 3
MASK_NDIM = 2


def _frozen_copy[T: np.generic](array: npt.ArrayLike, dtype: type[T]) -> npt.NDArray[T]:
    """Copy into a fresh read-only array of the given dtype."""
    copied = np.array(array, dtype=dtype)
    copied.setflags(write=False)
    return copied


def _grid_shape(values: npt.NDArray[np.generic], what: str) -> None:
    if values.ndim != MASK_NDIM or 0 in values.shape:
        msg = f"{what} must be a non-empty 2-D grid, got shape {values.shape}"
        raise ShapeMismatchError(msg)


# =============================================================================
# Pixel-level containers
# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class FeatureMap:
    """Dense per-cell features, shape (height, width, channels), 64-bit."""

    data: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        """Validate shape and finiteness, then freeze a 64-bit copy."""
        data = _frozen_copy(self.data, np.float64)
        if data.ndim != FEATURE_NDIM or 0 in data.shape:
            msg = f"Feature array must be (height, width, channels), got {data.shape}"
            raise FeatureShapeError(msg)
        if not np.isfinite(data).all():
            raise FeatureDataError
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    @property
    def grid(self) -> tuple[int, int]:
        return self.height, self.width

    @property
    def n_cells(self) -> int:
        return self.height * self.width

    def vectors(self) -> npt.NDArray[np.float64]:
        """One row per grid cell, row-major: shape (h*w, D)."""
        return self.data.reshape(self.n_cells, self.channels)


@dataclass(frozen=True, slots=True, eq=False)
class BinaryMask:
    """Boolean foreground mask, row-major (height, width)."""

    bits: npt.NDArray[np.bool_]

    def __post_init__(self) -> None:
        """Validate the grid, then freeze a boolean copy."""
        bits = _frozen_copy(self.bits, np.bool_)
        _grid_shape(bits, "Mask")
        object.__setattr__(self, "bits", bits)

    def __eq__(self, other: object) -> bool:
        """Masks are equal when their grids and bits are equal."""
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return bool(np.array_equal(self.bits, other.bits))

    __hash__ = None  # type: ignore[assignment]

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def grid(self) -> tuple[int, int]:
        return self.height, self.width

    @property
    def area(self) -> int:
        """Number of foreground pixels."""
        return int(np.count_nonzero(self.bits))

    def complement(self) -> BinaryMask:
        return BinaryMask(~self.bits)


@dataclass(frozen=True, slots=True, eq=False)
class SoftMask:
    """Real-valued mask prediction in [0, 1], row-major (height, width)."""

    values: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        """Validate the grid and value range, then freeze a 64-bit copy."""
        values = _frozen_copy(self.values, np.float64)
        _grid_shape(values, "Soft mask")
        if not np.isfinite(values).all() or values.min() < 0.0 or values.max() > 1.0:
            msg = "Soft mask values must lie within [0, 1]"
            raise ParameterError(msg)
        object.__setattr__(self, "values", values)

    @property
    def grid(self) -> tuple[int, int]:
        return int(self.values.shape[0]), int(self.values.shape[1])


# =============================================================================
# Graph, spectrum and clustering
# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class AffinityGraph:
    """Similarity graph: adjacency W, degrees d and Laplacian L = diag(d) - W."""

    W: npt.NDArray[np.float64]
    d: npt.NDArray[np.float64]
    L: npt.NDArray[np.float64]

    @property
    def n(self) -> int:
        return int(self.W.shape[0])


@dataclass(frozen=True, slots=True, eq=False)
class EigenBasis:
    """The k smallest generalised eigenpairs, eigenvalues ascending."""

    eigenvalues: npt.NDArray[np.float64]
    U: npt.NDArray[np.float64]  # n x k, column j pairs with eigenvalues[j]

    @property
    def k(self) -> int:
        return int(self.eigenvalues.shape[0])


@dataclass(frozen=True, slots=True, eq=False)
class Clustering:
    """Result of one seeded k-means run."""

    assignments: npt.NDArray[np.int64]
    centers: npt.NDArray[np.float64]
    inertia: float
    initial_inertia: float  # inertia of the seeded centres' assignment
    n_iter: int

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])


@dataclass(frozen=True, slots=True)
class CandidateTag:
    """Provenance of one candidate mask."""

    source: str
    k: int
    cluster: int

    def __str__(self) -> str:
        return f"{self.source}/k{self.k}/c{self.cluster}"

    def as_dict(self) -> dict[str, str | int]:
        return {"source": self.source, "k": self.k, "cluster": self.cluster}


@dataclass(frozen=True, slots=True, eq=False)
class MaskSet:
    """One clustering run as a partition of the feature grid into k masks."""

    masks: tuple[BinaryMask, ...]
    source: str
    k: int
    seed: int
    method: str = "spectral"

    @property
    def grid(self) -> tuple[int, int]:
        return self.masks[0].grid


# =============================================================================
# Voting
# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class CandidatePool:
    """Candidate masks on a shared grid, each tagged with its provenance."""

    masks: tuple[BinaryMask, ...]
    provenance: tuple[CandidateTag, ...]

    def __post_init__(self) -> None:
        """Enforce a non-empty pool of non-empty masks on one grid."""
        if not self.masks:
            msg = "Candidate pool must hold at least one mask"
            raise ParameterError(msg)
        if len(self.masks) != len(self.provenance):
            msg = "Every candidate mask needs exactly one provenance tag"
            raise ParameterError(msg)
        grid = self.masks[0].grid
        for tag, mask in zip(self.provenance, self.masks, strict=True):
            if mask.grid != grid:
                msg = f"Candidate {tag} has grid {mask.grid}, pool grid is {grid}"
                raise ShapeMismatchError(msg)
            if mask.area == 0:
                msg = f"Candidate {tag} is an empty mask"
                raise ParameterError(msg)

    def __len__(self) -> int:
        return len(self.masks)

    @property
    def grid(self) -> tuple[int, int]:
        return self.masks[0].grid

    def subset(self, indices: list[int]) -> CandidatePool:
        return CandidatePool(
            masks=tuple(self.masks[i] for i in indices),
            provenance=tuple(self.provenance[i] for i in indices),
        )


@dataclass(frozen=True, slots=True, eq=False)
class VoteResult:
    """Winner of winner-takes-all voting and how it was reached."""

    winner: BinaryMask
    winner_provenance: CandidateTag
    mean_iou: float
    filtered_count: int  # survivors of the framing prior
    tie_broken: bool
    pool_size: int  # candidates before the framing prior


# =============================================================================
# Losses
# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class PredictionBatch:
    """n_q soft mask predictions on one grid plus their objectness scores."""

    masks: tuple[SoftMask, ...]
    objectness: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        """Enforce n_q >= 1, one shared grid and objectness within [0, 1]."""
        objectness = _frozen_copy(self.objectness, np.float64).reshape(-1)
        if not self.masks:
            msg = "Prediction batch must hold at least one mask"
            raise ParameterError(msg)
        if objectness.shape[0] != len(self.masks):
            msg = f"{len(self.masks)} masks but {objectness.shape[0]} objectness scores"
            raise ShapeMismatchError(msg)
        grid = self.masks[0].grid
        if any(mask.grid != grid for mask in self.masks):
            msg = "All predicted masks must share one grid"
            raise ShapeMismatchError(msg)
        out_of_range = np.any((objectness < 0) | (objectness > 1))
        if not np.isfinite(objectness).all() or out_of_range:
            msg = "Objectness scores must lie within [0, 1]"
            raise ParameterError(msg)
        object.__setattr__(self, "objectness", objectness)

    @property
    def n_q(self) -> int:
        return len(self.masks)

    @property
    def grid(self) -> tuple[int, int]:
        return self.masks[0].grid


@dataclass(frozen=True, slots=True, eq=False)
class TotalLoss:
    """Objective value, its two terms and gradients in original index order."""

    value: float
    mask_term: float
    rank_term: float
    order: tuple[int, ...]
    mask_gradients: npt.NDArray[np.float64]  # (n_q, height, width)
    objectness_gradient: npt.NDArray[np.float64]  # (n_q,)


@dataclass(frozen=True, slots=True)
class GradientCheckReport:
    """Largest analytic-vs-finite-difference deviation seen per loss."""

    seed: int
    trials: int
    tolerance: float
    max_deviation: dict[str, float] = field(default_factory=dict[str, float])

    @property
    def passed(self) -> bool:
        return all(dev <= self.tolerance for dev in self.max_deviation.values())


# =============================================================================
# Evaluation and batch inputs
# =============================================================================


@dataclass(frozen=True, slots=True)
class EvalRecord:
    """Scores for one prediction against its ground truth."""

    name: str
    iou: float
    accuracy: float
    max_f_beta: float


@dataclass(frozen=True, slots=True)
class EvalReport:
    """Per-image records plus unweighted dataset means."""

    records: tuple[EvalRecord, ...]
    missing: tuple[str, ...]
    iou: float
    accuracy: float
    max_f_beta: float


@dataclass(frozen=True, slots=True)
class Manifest:
    """Per-image feature file paths grouped by feature source name."""

    paths: dict[str, dict[str, Path]]

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(self.paths)

    def image_ids(self) -> tuple[str, ...]:
        """Sorted union of image ids over all sources."""
        images = {image for per_source in self.paths.values() for image in per_source}
        return tuple(sorted(images))
