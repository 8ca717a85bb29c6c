"""Training objective on soft mask predictions, with analytic gradients.

- Mask loss: Dice loss with smoothing 1.0, averaged over all n_q predictions
  (every prediction is pulled towards the one pseudo-mask).
- Ranking loss: predictions are re-ordered by mask loss ascending (stable),
  then sum_{i<j} max(0, o_j - o_i) over the re-ordered objectness scores.
  The hinge has zero margin and zero subgradient at o_j == o_i.
- Total loss: mask term + lambda * ranking term. Per-layer supervision is
  the caller's sum of ``total_loss`` over layers.

``run_gradient_checks`` compares every analytic gradient with central finite
differences on random inputs kept away from hinge kinks and order changes.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from spectral_vote.exceptions import (
    InvalidPermutationError,
    ParameterError,
    ShapeMismatchError,
)
from spectral_vote.logging_config import get_logger
from spectral_vote.models import (
    BinaryMask,
    GradientCheckReport,
    PredictionBatch,
    SoftMask,
    TotalLoss,
)

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    import numpy.typing as npt

DICE_SMOOTHING = 1.0
DEFAULT_LAMBDA = 1.0
DEFAULT_TRIALS = 100
INFERENCE_THRESHOLD = 0.5

# Gradient check settings
FD_STEP = 1e-5
FD_TOLERANCE = 1e-6
CHECK_GRID = (4, 4)
CHECK_N_Q = 3
MIN_SCORE_GAP = 1e-3  # objectness pairs closer than this sit too near a hinge kink
MIN_LOSS_GAP = 1e-4  # dice losses closer than this could swap order under a step
VALUE_RANGE = (0.05, 0.95)

logger = get_logger(__name__)


# =============================================================================
# Loss terms
# =============================================================================


def dice_loss(
    pred: SoftMask, target: BinaryMask
) -> tuple[float, npt.NDArray[np.float64]]:
    """Dice loss 1 - (2*sum(p*g) + 1) / (sum(p) + sum(g) + 1) and its gradient.

    Raises:
        ShapeMismatchError: If the grids differ
    """
    if pred.grid != target.grid:
        msg = f"Prediction grid {pred.grid} differs from target {target.grid}"
        raise ShapeMismatchError(msg)
    p = pred.values
    g = target.bits.astype(np.float64)
    numerator = 2.0 * float(np.sum(p * g)) + DICE_SMOOTHING
    denominator = float(np.sum(p)) + float(np.sum(g)) + DICE_SMOOTHING
    loss = 1.0 - numerator / denominator
    gradient = (numerator - 2.0 * g * denominator) / denominator**2
    return loss, gradient


def rank_predictions(batch: PredictionBatch, pseudo: BinaryMask) -> tuple[int, ...]:
    """Prediction indices sorted by Dice loss ascending, ties in index order."""
    losses = [dice_loss(mask, pseudo)[0] for mask in batch.masks]
    return tuple(sorted(range(batch.n_q), key=losses.__getitem__))


def _check_permutation(order: Sequence[int], n_q: int) -> npt.NDArray[np.int64]:
    indices = np.asarray(order, dtype=np.int64)
    if indices.shape != (n_q,) or not np.array_equal(np.sort(indices), np.arange(n_q)):
        msg = f"Order {tuple(order)} is not a permutation of 0..{n_q - 1}"
        raise InvalidPermutationError(msg)
    return indices


def ranking_loss(
    objectness: npt.ArrayLike, order: Sequence[int]
) -> tuple[float, npt.NDArray[np.float64]]:
    """Hinge ranking loss over objectness re-indexed by ``order``.

    Returns:
        Loss value and gradient with respect to objectness in original index order

    Raises:
        InvalidPermutationError: If order is not a permutation of 0..n_q-1
    """
    scores = np.asarray(objectness, dtype=np.float64).reshape(-1)
    indices = _check_permutation(order, scores.shape[0])
    ranked = scores[indices]

    # gaps[i, j] = o_j - o_i, counted only for i < j
    gaps = ranked[np.newaxis, :] - ranked[:, np.newaxis]
    active = np.triu(gaps > 0.0, k=1)
    loss = float(np.sum(gaps[active]))

    ranked_gradient = active.sum(axis=0).astype(np.float64) - active.sum(axis=1)
    gradient = np.empty_like(ranked_gradient)
    gradient[indices] = ranked_gradient
    return loss, gradient


def total_loss(
    batch: PredictionBatch, pseudo: BinaryMask, lam: float = DEFAULT_LAMBDA
) -> TotalLoss:
    """Mean Dice loss over all predictions plus lambda times the ranking loss."""
    terms = [dice_loss(mask, pseudo) for mask in batch.masks]
    losses = [loss for loss, _ in terms]
    order = tuple(sorted(range(batch.n_q), key=losses.__getitem__))

    mask_term = sum(losses) / batch.n_q
    mask_gradients = np.stack([gradient for _, gradient in terms]) / batch.n_q
    rank_term, rank_gradient = ranking_loss(batch.objectness, order)
    return TotalLoss(
        value=mask_term + lam * rank_term,
        mask_term=mask_term,
        rank_term=rank_term,
        order=order,
        mask_gradients=mask_gradients,
        objectness_gradient=lam * rank_gradient,
    )


def select_inference_mask(batch: PredictionBatch) -> BinaryMask:
    """Binarise (value > 0.5) the prediction with the highest objectness."""
    best = int(np.argmax(batch.objectness))
    return BinaryMask(batch.masks[best].values > INFERENCE_THRESHOLD)


# =============================================================================
# Gradient checks
# =============================================================================


def _central_difference(
    func: Callable[[npt.NDArray[np.float64]], float], point: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    estimate = np.empty_like(point)
    for index in np.ndindex(point.shape):
        shifted = point.copy()
        shifted[index] = point[index] + FD_STEP
        upper = func(shifted)
        shifted[index] = point[index] - FD_STEP
        lower = func(shifted)
        estimate[index] = (upper - lower) / (2.0 * FD_STEP)
    return estimate


def _spread_scores(rng: np.random.Generator, count: int) -> npt.NDArray[np.float64]:
    """Objectness scores whose pairwise gaps all exceed MIN_SCORE_GAP."""
    while True:
        scores = rng.uniform(*VALUE_RANGE, size=count)
        if count < 2 or np.min(np.diff(np.sort(scores))) > MIN_SCORE_GAP:  # noqa: PLR2004
            return scores


def _random_target(rng: np.random.Generator) -> BinaryMask:
    return BinaryMask(rng.random(CHECK_GRID) < 0.5)  # noqa: PLR2004


def _check_dice(rng: np.random.Generator) -> float:
    values = rng.uniform(*VALUE_RANGE, size=CHECK_GRID)
    target = _random_target(rng)
    _, analytic = dice_loss(SoftMask(values), target)
    numeric = _central_difference(lambda p: dice_loss(SoftMask(p), target)[0], values)
    return float(np.max(np.abs(analytic - numeric)))


def _check_ranking(rng: np.random.Generator) -> float:
    scores = _spread_scores(rng, CHECK_N_Q)
    order = tuple(int(i) for i in rng.permutation(CHECK_N_Q))
    _, analytic = ranking_loss(scores, order)
    numeric = _central_difference(lambda o: ranking_loss(o, order)[0], scores)
    return float(np.max(np.abs(analytic - numeric)))


def _separated_batch(
    rng: np.random.Generator,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], BinaryMask]:
    """Masks, objectness and pseudo-mask whose Dice losses are well apart."""
    while True:
        masks = rng.uniform(*VALUE_RANGE, size=(CHECK_N_Q, *CHECK_GRID))
        pseudo = _random_target(rng)
        losses = np.sort([dice_loss(SoftMask(mask), pseudo)[0] for mask in masks])
        if np.min(np.diff(losses)) > MIN_LOSS_GAP:
            return masks, _spread_scores(rng, CHECK_N_Q), pseudo


def _check_total(rng: np.random.Generator) -> float:
    masks, scores, pseudo = _separated_batch(rng)

    def batch_of(
        mask_values: npt.NDArray[np.float64], objectness: npt.NDArray[np.float64]
    ) -> PredictionBatch:
        return PredictionBatch(tuple(SoftMask(m) for m in mask_values), objectness)

    result = total_loss(batch_of(masks, scores), pseudo)
    numeric_masks = _central_difference(
        lambda m: total_loss(batch_of(m, scores), pseudo).value, masks
    )
    numeric_scores = _central_difference(
        lambda o: total_loss(batch_of(masks, o), pseudo).value, scores
    )
    return max(
        float(np.max(np.abs(result.mask_gradients - numeric_masks))),
        float(np.max(np.abs(result.objectness_gradient - numeric_scores))),
    )


def run_gradient_checks(
    seed: int, trials: int, tolerance: float = FD_TOLERANCE
) -> GradientCheckReport:
    """Largest analytic-vs-central-difference deviation per loss over seeded trials.

    Raises:
        ParameterError: If trials < 1
    """
    if trials < 1:
        msg = f"trials must be >= 1, got {trials}"
        raise ParameterError(msg)

    rng = np.random.default_rng(seed)
    checks = {
        "dice_loss": _check_dice,
        "ranking_loss": _check_ranking,
        "total_loss": _check_total,
    }
    worst = dict.fromkeys(checks, 0.0)
    for _ in range(trials):
        for name, check in checks.items():
            worst[name] = max(worst[name], check(rng))
    logger.debug("Gradient checks seed=%d trials=%d: %s", seed, trials, worst)
    return GradientCheckReport(
        seed=seed, trials=trials, tolerance=tolerance, max_deviation=worst
    )
