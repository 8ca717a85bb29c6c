"""Tests for the framing prior, winner-takes-all voting and pseudo-mask selection."""

import numpy as np
import pytest

from spectral_vote.metrics import iou
from spectral_vote.models import BinaryMask, CandidatePool, CandidateTag
from spectral_vote.voting import (
    candidate_pool,
    framing_filter,
    pairwise_iou_table,
    select_pseudo_mask,
    spans_frame,
    vote_on_pool,
    winner_takes_all,
)
from tests.scenes import (
    constant_features,
    planted_blob_mask,
    planted_blob_sources,
    two_block_features,
)

GRID = (10, 10)


def _box(top: int, left: int, height: int, width: int) -> BinaryMask:
    bits = np.zeros(GRID, dtype=bool)
    bits[top : top + height, left : left + width] = True
    return BinaryMask(bits)


def _pool(*masks: BinaryMask) -> CandidatePool:
    tags = tuple(CandidateTag("test", len(masks), i) for i in range(len(masks)))
    return CandidatePool(masks=masks, provenance=tags)


BAND = _box(2, 0, 2, 10)  # full width
COLUMN = _box(0, 7, 10, 1)  # full height
BLOB = _box(4, 4, 3, 3)
CORNER = _box(0, 0, 3, 3)


# =============================================================================
# Framing prior
# =============================================================================


def test_spans_frame_checks_bounding_box_extent() -> None:
    assert spans_frame(BAND)
    assert spans_frame(COLUMN)
    assert not spans_frame(BLOB)
    assert not spans_frame(CORNER)
    # Bounding box, not pixels: two isolated cells at opposite edges span the width
    bits = np.zeros(GRID, dtype=bool)
    bits[3, 0] = bits[5, 9] = True
    assert spans_frame(BinaryMask(bits))


def test_framing_filter_keeps_only_the_blob() -> None:
    filtered = framing_filter(_pool(BAND, BLOB))
    assert len(filtered) == 1
    assert filtered.masks[0] == BLOB
    assert filtered.provenance[0].cluster == 1


def test_framing_filter_keeps_everything_when_all_span() -> None:
    pool = _pool(BAND, COLUMN, _box(8, 0, 1, 10))
    assert framing_filter(pool) is pool


def test_framing_filter_leaves_single_blob_unchanged() -> None:
    pool = _pool(BLOB)
    assert framing_filter(pool) is pool


# =============================================================================
# Winner-takes-all
# =============================================================================


def test_pairwise_iou_table_hand_values() -> None:
    a = _box(0, 0, 2, 2)
    b = _box(0, 1, 2, 2)  # overlaps a in 2 pixels, union 6
    table = pairwise_iou_table(_pool(a, b, BLOB))
    np.testing.assert_allclose(np.diag(table), 1.0)
    assert table[0, 1] == pytest.approx(2 / 6)
    assert table[1, 0] == table[0, 1]
    assert table[0, 2] == 0.0


def test_repeated_mask_wins_over_disjoint_one() -> None:
    """Pool {A, A, B}: score(A) = (1 + 0) / 2 = 0.5, score(B) = 0."""
    result = winner_takes_all(_pool(BLOB, BLOB, CORNER), seed=0)
    assert result.winner == BLOB
    assert result.winner_provenance.cluster in {0, 1}
    assert result.mean_iou == pytest.approx(0.5)


def test_singleton_pool_scores_zero() -> None:
    result = winner_takes_all(_pool(BLOB), seed=3)
    assert result.winner == BLOB
    assert result.mean_iou == 0.0
    assert not result.tie_broken
    assert result.pool_size == 1


def test_disjoint_pair_is_a_seeded_tie() -> None:
    pool = _pool(BLOB, CORNER)
    winners = set()
    for seed in range(40):
        result = winner_takes_all(pool, seed)
        again = winner_takes_all(pool, seed)
        assert result.tie_broken
        assert result.mean_iou == 0.0
        assert result.winner_provenance == again.winner_provenance
        winners.add(result.winner_provenance.cluster)
    assert winners == {0, 1}


def test_clear_winner_is_not_a_tie() -> None:
    """Blob, wide and big score 0.555, 0.615 and 0.42; wide wins outright."""
    wide = _box(4, 4, 3, 4)
    big = _box(3, 3, 5, 5)
    result = winner_takes_all(_pool(BLOB, wide, big), seed=0)
    assert not result.tie_broken
    assert result.winner == wide
    assert result.mean_iou == pytest.approx((9 / 12 + 12 / 25) / 2)


def test_vote_on_pool_reports_pool_and_survivor_counts() -> None:
    result = vote_on_pool(_pool(BAND, BLOB, BLOB, COLUMN), seed=1)
    assert result.winner == BLOB
    assert result.pool_size == 4
    assert result.filtered_count == 2
    assert result.mean_iou == pytest.approx(1.0)


# =============================================================================
# Full selection
# =============================================================================


def test_planted_blob_scene_selects_the_blob() -> None:
    result = select_pseudo_mask(planted_blob_sources(), (2, 3, 4), seed=0)
    assert iou(result.winner, planted_blob_mask()) == 1.0
    assert result.pool_size == 27
    assert result.filtered_count >= 6


def test_voting_beats_a_random_candidate_on_the_planted_scene() -> None:
    """Baseline: pick a candidate uniformly at random instead of voting."""
    pool = candidate_pool(planted_blob_sources(), (2, 3, 4), seed=0)
    rng = np.random.default_rng(0)
    picks = rng.integers(len(pool), size=50)
    random_iou = np.mean([iou(pool.masks[i], planted_blob_mask()) for i in picks])
    voted = vote_on_pool(pool, seed=0)
    assert iou(voted.winner, planted_blob_mask()) > random_iou


def test_two_frame_spanning_halves_are_both_kept() -> None:
    result = select_pseudo_mask([("blocks", two_block_features())], (2,), seed=5)
    assert result.pool_size == 2
    assert result.filtered_count == 2
    assert result.tie_broken
    assert result.winner.area == 32


def test_constant_features_still_return_a_pool_member() -> None:
    sources = [(name, constant_features()) for name in ("a", "b", "c")]
    pool = candidate_pool(sources, (2, 3, 4), seed=2)
    result = select_pseudo_mask(sources, (2, 3, 4), seed=2)
    assert any(mask == result.winner for mask in pool.masks)
    assert result.pool_size == 27


def test_selection_is_deterministic_for_a_seed() -> None:
    first = select_pseudo_mask(planted_blob_sources(), (2, 3), seed=11)
    second = select_pseudo_mask(planted_blob_sources(), (2, 3), seed=11, workers=3)
    assert first.winner_provenance == second.winner_provenance
    assert first.winner == second.winner


@pytest.mark.slow
def test_planted_blob_wins_for_nearly_every_seed() -> None:
    sources = planted_blob_sources()
    truth = planted_blob_mask()
    exact = 0
    for seed in range(100):
        pool = candidate_pool(sources, (2, 3, 4), seed)
        assert not any(spans_frame(mask) for mask in framing_filter(pool).masks)
        exact += iou(vote_on_pool(pool, seed).winner, truth) == 1.0
    assert exact >= 95


# =============================================================================
# Baselines
# =============================================================================

# 4x4 blob near the top-left corner, clear of the border
OFF_CENTRE = (slice(1, 5), slice(1, 5))


def _centre_prior_pick(pool: CandidatePool) -> BinaryMask:
    """Baseline: the mask whose pixels lie closest to the grid centre on average."""
    height, width = pool.grid
    rows, cols = np.indices(pool.grid)
    distance = np.hypot(rows - (height - 1) / 2, cols - (width - 1) / 2)
    means = [float(distance[mask.bits].mean()) for mask in pool.masks]
    return pool.masks[int(np.argmin(means))]


@pytest.fixture
def off_centre_pool() -> CandidatePool:
    return candidate_pool(planted_blob_sources(*OFF_CENTRE), (2, 3, 4), seed=0)


def test_centre_prior_prefers_the_middle_of_the_grid() -> None:
    centred = _box(3, 3, 4, 4)
    assert _centre_prior_pick(_pool(CORNER, centred, BAND)) == centred


def test_framing_prior_beats_centre_and_random_baselines(
    off_centre_pool: CandidatePool,
) -> None:
    truth = planted_blob_mask(*OFF_CENTRE)
    rng = np.random.default_rng(0)
    picks = rng.integers(len(off_centre_pool), size=50)
    random_iou = np.mean([iou(off_centre_pool.masks[i], truth) for i in picks])
    centre_iou = iou(_centre_prior_pick(off_centre_pool), truth)

    with_prior = iou(vote_on_pool(off_centre_pool, seed=0).winner, truth)
    without_prior = iou(winner_takes_all(off_centre_pool, seed=0).winner, truth)

    assert with_prior == 1.0
    assert with_prior > centre_iou
    assert with_prior > random_iou
    assert with_prior >= without_prior


# =============================================================================
# Properties
# =============================================================================


def _random_pool(rng: np.random.Generator, size: int) -> CandidatePool:
    masks: list[BinaryMask] = []
    for _ in range(size):
        top, left = (int(value) for value in rng.integers(0, 9, size=2))
        height = int(rng.integers(1, 11 - top))
        width = int(rng.integers(1, 11 - left))
        masks.append(_box(top, left, height, width))
    return _pool(*masks)


def _brute_force_scores(pool: CandidatePool) -> list[float]:
    """Mean IoU of each mask against every other mask, one pair at a time."""
    size = len(pool)
    return [
        sum(iou(pool.masks[i], pool.masks[j]) for j in range(size) if j != i)
        / (size - 1)
        for i in range(size)
    ]


@pytest.mark.parametrize("seed", range(20))
def test_framing_filter_is_idempotent(seed: int) -> None:
    once = framing_filter(_random_pool(np.random.default_rng(seed), 8))
    twice = framing_filter(once)
    assert twice.masks == once.masks
    assert twice.provenance == once.provenance


@pytest.mark.parametrize("seed", range(20))
def test_winner_score_is_the_brute_force_maximum(seed: int) -> None:
    rng = np.random.default_rng(seed)
    pool = _random_pool(rng, int(rng.integers(2, 9)))
    result = winner_takes_all(pool, seed)
    scores = _brute_force_scores(pool)
    assert result.mean_iou == pytest.approx(max(scores), abs=1e-12)
    assert scores[result.winner_provenance.cluster] == pytest.approx(max(scores))


def test_winner_ignores_pool_order_without_ties() -> None:
    checked = 0
    for seed in range(30):
        rng = np.random.default_rng(seed)
        pool = _random_pool(rng, 6)
        result = winner_takes_all(pool, seed)
        if result.tie_broken:
            continue
        shuffled = pool.subset(rng.permutation(len(pool)).tolist())
        again = winner_takes_all(shuffled, seed + 1)
        assert again.winner == result.winner
        assert again.winner_provenance == result.winner_provenance
        checked += 1
    assert checked > 0


def test_duplicating_the_winner_keeps_it_winning() -> None:
    checked = 0
    for seed in range(30):
        pool = _random_pool(np.random.default_rng(seed), 6)
        result = winner_takes_all(pool, seed)
        if result.tie_broken:
            continue
        extended = CandidatePool(
            masks=(*pool.masks, result.winner),
            provenance=(*pool.provenance, CandidateTag("copy", 0, 0)),
        )
        assert winner_takes_all(extended, seed).winner == result.winner
        checked += 1
    assert checked > 0
