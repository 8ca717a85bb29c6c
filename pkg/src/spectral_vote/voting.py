"""Pseudo-mask selection by the framing prior and winner-takes-all IoU voting.

Framing prior: a mask whose foreground bounding box spans the full grid width
or the full grid height is treated as background and dropped, unless that
would drop every candidate. Distinctiveness prior: the salient region recurs
across re-clusterings, so the survivor with the highest mean IoU against the
other survivors wins. All IoUs here are computed on the shared feature grid.
"""

from __future__ import annotations

import dataclasses
from typing import TYPE_CHECKING

import numpy as np

from spectral_vote.logging_config import get_logger
from spectral_vote.models import VoteResult
from spectral_vote.spectral import SPECTRAL, derive_seed, generate_candidates

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

    from spectral_vote.models import BinaryMask, CandidatePool, FeatureMap

# Scores within this distance of the best count as tied
TIE_TOLERANCE = 1e-12

logger = get_logger(__name__)


def spans_frame(mask: BinaryMask) -> bool:
    """True if the foreground bounding box reaches full width or full height."""
    rows = np.flatnonzero(mask.bits.any(axis=1))
    cols = np.flatnonzero(mask.bits.any(axis=0))
    if rows.size == 0:
        return False
    box_height = int(rows[-1] - rows[0]) + 1
    box_width = int(cols[-1] - cols[0]) + 1
    return box_height == mask.height or box_width == mask.width


def framing_filter(pool: CandidatePool) -> CandidatePool:
    """Drop frame-spanning masks; keep the whole pool if all of them span."""
    keep = [i for i, mask in enumerate(pool.masks) if not spans_frame(mask)]
    if not keep:
        logger.debug("Every candidate spans the frame; keeping all %d", len(pool))
        return pool
    if len(keep) == len(pool):
        return pool
    return pool.subset(keep)


def pairwise_iou_table(pool: CandidatePool) -> npt.NDArray[np.float64]:
    """All-pairs IoU matrix of the pool's masks (diagonal is 1)."""
    flat = np.stack([mask.bits.reshape(-1) for mask in pool.masks]).astype(np.int64)
    intersection = flat @ flat.T
    areas = np.diag(intersection)
    union = areas[:, np.newaxis] + areas[np.newaxis, :] - intersection
    return intersection / union


def winner_takes_all(pool: CandidatePool, seed: int) -> VoteResult:
    """Pick the mask with the highest mean IoU against all other masks.

    A singleton pool returns its mask with score 0. Tied best scores are
    broken uniformly at random among all tied masks using ``seed``.
    """
    size = len(pool)
    if size == 1:
        return VoteResult(
            winner=pool.masks[0],
            winner_provenance=pool.provenance[0],
            mean_iou=0.0,
            filtered_count=1,
            tie_broken=False,
            pool_size=1,
        )

    table = pairwise_iou_table(pool)
    np.fill_diagonal(table, 0.0)
    scores = table.sum(axis=1) / (size - 1)
    best = float(scores.max())
    tied = np.flatnonzero(scores >= best - TIE_TOLERANCE)

    tie_broken = tied.size > 1
    if tie_broken:
        rng = np.random.default_rng(seed)
        winner = int(tied[int(rng.integers(tied.size))])
        logger.debug("Broke a %d-way tie at score %.6f", tied.size, best)
    else:
        winner = int(tied[0])

    return VoteResult(
        winner=pool.masks[winner],
        winner_provenance=pool.provenance[winner],
        mean_iou=float(scores[winner]),
        filtered_count=size,
        tie_broken=bool(tie_broken),
        pool_size=size,
    )


def vote_on_pool(pool: CandidatePool, seed: int) -> VoteResult:
    """Framing filter then winner-takes-all, recording pool and survivor counts."""
    survivors = framing_filter(pool)
    result = winner_takes_all(survivors, derive_seed(seed, "tie-break"))
    return dataclasses.replace(result, filtered_count=len(survivors), pool_size=len(pool))


def candidate_pool(
    feature_sets: Sequence[tuple[str, FeatureMap]],
    ks: Sequence[int],
    seed: int,
    *,
    method: str = SPECTRAL,
    workers: int = 1,
) -> CandidatePool:
    """The candidate pool that ``select_pseudo_mask`` votes over for this seed."""
    return generate_candidates(
        feature_sets, ks, derive_seed(seed, "candidates"), method=method, workers=workers
    )


def select_pseudo_mask(
    feature_sets: Sequence[tuple[str, FeatureMap]],
    ks: Sequence[int],
    seed: int,
    *,
    method: str = SPECTRAL,
    workers: int = 1,
) -> VoteResult:
    """Generate candidates, apply the framing prior and vote for the winner."""
    pool = candidate_pool(feature_sets, ks, seed, method=method, workers=workers)
    return vote_on_pool(pool, seed)
