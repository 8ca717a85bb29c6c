"""Batch commands behind the CLI: cluster, vote, pseudo-label, upper-bound,
evaluate and loss-check.

Each image is processed independently on a thread pool sized by
``--workers``; outputs go to per-image files written atomically, so worker
count never changes the output tree. Every run of an image draws its
randomness from ``derive_seed(root seed, "image", image id)``, which makes
``cluster`` followed by ``vote`` agree with ``pseudo-label``.

Progress lines go to stderr; files carry all machine-readable output.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from spectral_vote.array_io import (
    atomic_write_bytes,
    read_feature_map,
    read_gray,
    read_manifest,
    read_mask,
    resize_mask_nearest,
    write_json,
    write_mask,
)
from spectral_vote.exceptions import (
    EXIT_INPUT_ERROR,
    BaseSpectralVoteError,
    FileNotExistsError,
    GradientCheckError,
    ManifestError,
    MissingPairsError,
    ParameterError,
)
from spectral_vote.logging_config import get_logger
from spectral_vote.losses import run_gradient_checks
from spectral_vote.metrics import (
    evaluate_pair,
    iou,
    report_as_csv,
    report_as_dict,
    summarise,
    upper_bound_iou,
)
from spectral_vote.models import CandidatePool, CandidateTag
from spectral_vote.spectral import check_shared_grid, cluster_features, derive_seed
from spectral_vote.voting import candidate_pool, vote_on_pool

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence
    from pathlib import Path

    from spectral_vote.config import RunConfig
    from spectral_vote.models import (
        BinaryMask,
        EvalRecord,
        FeatureMap,
        Manifest,
        VoteResult,
    )

MASK_SUFFIXES = (".png", ".pgm")
ERRORS_FILE = "errors.json"
REPORT_FILE = "report.json"
UPPER_BOUND_FILE = "upper_bound.json"
UPSAMPLED_DIR = "upsampled"

logger = get_logger(__name__)


@dataclass(frozen=True, slots=True)
class ImageFailure:
    """One image that could not be processed."""

    image: str
    error: str
    message: str
    exit_code: int

    def as_dict(self) -> dict[str, str]:
        return {"image": self.image, "error": self.error, "message": self.message}


# =============================================================================
# Shared plumbing
# =============================================================================


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def image_seed(root: int, image: str) -> int:
    """Root seed of one image's runs."""
    return derive_seed(root, "image", image)


def _require(value: Path | None, flag: str) -> Path:
    if value is None:
        msg = f"{flag} is required for this command"
        raise ParameterError(msg)
    return value


def _selected_sources(manifest: Manifest, config: RunConfig) -> tuple[str, ...]:
    if config.sources is None:
        return manifest.sources
    unknown = [source for source in config.sources if source not in manifest.paths]
    if unknown:
        msg = f"Sources not in manifest: {', '.join(unknown)}"
        raise ManifestError(msg)
    return config.sources


def _load_feature_sets(
    manifest: Manifest, image: str, sources: Sequence[str]
) -> list[tuple[str, FeatureMap]]:
    feature_sets: list[tuple[str, FeatureMap]] = []
    for source in sources:
        path = manifest.paths[source].get(image)
        if path is None:
            msg = f"Image {image!r} has no feature file for source {source!r}"
            raise ManifestError(msg)
        feature_sets.append((source, read_feature_map(path)))
    return feature_sets


def _find_mask_file(directory: Path, stem: str) -> Path:
    for suffix in MASK_SUFFIXES:
        candidate = directory / f"{stem}{suffix}"
        if candidate.is_file():
            return candidate
    msg = f"We couldn't find your file: no ground truth for {stem!r} in {directory}"
    raise FileNotExistsError(msg)


def _mask_files(directory: Path) -> dict[str, Path]:
    if not directory.is_dir():
        msg = f"We couldn't find your file: {directory} is not a directory"
        raise FileNotExistsError(msg)
    return {
        path.stem: path
        for path in sorted(directory.iterdir())
        if path.suffix.lower() in MASK_SUFFIXES and path.is_file()
    }


def _guarded[T](work: Callable[[str], T], image: str) -> T | ImageFailure:
    try:
        return work(image)
    except BaseSpectralVoteError as e:
        return ImageFailure(image, type(e).__name__, str(e), e.exit_code)
    except OSError as e:
        return ImageFailure(image, type(e).__name__, str(e), EXIT_INPUT_ERROR)


def _run_images[T](
    images: Sequence[str],
    work: Callable[[str], T],
    config: RunConfig,
    execution_id: str,
) -> tuple[dict[str, T], list[ImageFailure]]:
    """Run ``work`` per image; stop at the first failure unless keep_going."""
    results: dict[str, T] = {}
    failures: list[ImageFailure] = []
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        futures = [executor.submit(_guarded, work, image) for image in images]
        for image, future in zip(images, futures, strict=True):
            outcome = future.result()
            if isinstance(outcome, ImageFailure):
                failures.append(outcome)
                _progress(f"❌ {image}: {outcome.message}")
                logger.info("[%s] %s failed: %s", execution_id, image, outcome.error)
                if not config.keep_going:
                    for pending in futures:
                        pending.cancel()
                    break
            else:
                results[image] = outcome
    return results, failures


def _finish(
    out_dir: Path, processed: int, failures: list[ImageFailure], execution_id: str
) -> int:
    """Write errors.json when anything failed and pick the exit code."""
    if not failures:
        logger.info("[%s] Processed %d images", execution_id, processed)
        return 0
    ordered = sorted(failures, key=lambda failure: failure.image)
    write_json(
        out_dir / ERRORS_FILE,
        {
            "failed": len(ordered),
            "processed": processed,
            "failures": [failure.as_dict() for failure in ordered],
        },
    )
    _progress(f"❌ {len(ordered)} image(s) failed, see {out_dir / ERRORS_FILE}")
    return max(failure.exit_code for failure in ordered)


# =============================================================================
# cluster / vote / pseudo-label
# =============================================================================


def _mask_set_paths(out_dir: Path, image: str, source: str, k: int) -> tuple[Path, str]:
    return out_dir / image, f"{source}_k{k}"


def cmd_cluster(config: RunConfig, execution_id: str) -> int:
    """Write every (source, k) partition of every manifest image as PGMs + sidecar."""
    manifest = read_manifest(_require(config.manifest, "--manifest"))
    out_dir = _require(config.out_dir, "--out")
    sources = _selected_sources(manifest, config)
    images = manifest.image_ids()

    def work(image: str) -> int:
        feature_sets = _load_feature_sets(manifest, image, sources)
        check_shared_grid(feature_sets)
        candidate_root = derive_seed(image_seed(config.seed, image), "candidates")
        run_index = 0
        written = 0
        for source, features in feature_sets:
            for k in config.ks:
                seed = derive_seed(candidate_root, source, k)
                mask_set = cluster_features(features, k, seed, source, config.method)
                directory, stem = _mask_set_paths(out_dir, image, source, k)
                files: list[str] = []
                for cluster, mask in enumerate(mask_set.masks):
                    name = f"{stem}_c{cluster}.pgm"
                    write_mask(mask, directory / name)
                    files.append(name)
                write_json(
                    directory / f"{stem}.json",
                    {
                        "image": image,
                        "source": source,
                        "k": k,
                        "seed": seed,
                        "method": mask_set.method,
                        "grid": list(mask_set.grid),
                        "run_index": run_index,
                        "masks": files,
                        "areas": [mask.area for mask in mask_set.masks],
                    },
                )
                run_index += 1
                written += len(files)
        _progress(f"🧩 {image}: {written} masks")
        return written

    results, failures = _run_images(images, work, config, execution_id)
    _progress(f"✅ Created: {sum(results.values())} masks in {out_dir}")
    return _finish(out_dir, len(results), failures, execution_id)


def _vote_payload(
    image: str, seed: int, result: VoteResult, extra: dict[str, Any]
) -> dict[str, Any]:
    return {
        "image": image,
        "seed": seed,
        "winner": result.winner_provenance.as_dict(),
        "mean_iou": result.mean_iou,
        "tie_broken": result.tie_broken,
        "pool_size": result.pool_size,
        "filtered_count": result.filtered_count,
        "grid": list(result.winner.grid),
        **extra,
    }


def _write_winner(
    config: RunConfig, out_dir: Path, image: str, winner: BinaryMask
) -> dict[str, Any]:
    """Write the winner (and optional copies); return sidecar fields about them."""
    extra: dict[str, Any] = {"files": {"mask": f"{image}.pgm"}}
    write_mask(winner, out_dir / f"{image}.pgm")
    if config.upsample is not None:
        upsampled = resize_mask_nearest(winner, *config.upsample)
        name = f"{UPSAMPLED_DIR}/{image}.pgm"
        write_mask(upsampled, out_dir / name)
        extra["files"]["upsampled"] = name
    if config.gt_dir is not None:
        gt = read_mask(_find_mask_file(config.gt_dir, image))
        extra["gt_iou"] = iou(resize_mask_nearest(winner, *gt.grid), gt)
    return extra


def cmd_pseudo_label(config: RunConfig, execution_id: str) -> int:
    """Select and write one pseudo-mask per manifest image."""
    manifest = read_manifest(_require(config.manifest, "--manifest"))
    out_dir = _require(config.out_dir, "--out")
    sources = _selected_sources(manifest, config)

    def work(image: str) -> float:
        feature_sets = _load_feature_sets(manifest, image, sources)
        seed = image_seed(config.seed, image)
        pool = candidate_pool(feature_sets, config.ks, seed, method=config.method)
        result = vote_on_pool(pool, seed)
        extra = _write_winner(config, out_dir, image, result.winner)
        extra.update({"ks": list(config.ks), "sources": list(sources)})
        extra["method"] = config.method
        write_json(out_dir / f"{image}.json", _vote_payload(image, seed, result, extra))
        _progress(f"🗳️ {image}: winner {result.winner_provenance} of {len(pool)}")
        return result.mean_iou

    results, failures = _run_images(manifest.image_ids(), work, config, execution_id)
    _progress(f"✅ Created: {len(results)} pseudo-masks in {out_dir}")
    return _finish(out_dir, len(results), failures, execution_id)


def _read_cluster_sidecar(sidecar: Path) -> tuple[int, str, int, list[str]]:
    """Run index, source, k and mask file names of one ``cluster`` sidecar.

    Raises:
        ManifestError: If the file is not JSON or misses or mistypes a field
    """
    msg = f"{sidecar}: not a cluster sidecar"
    try:
        payload = json.loads(sidecar.read_text(encoding="utf-8"))
        run_index = int(payload["run_index"])
        source = payload["source"]
        k = int(payload["k"])
        names = payload["masks"]
    except (ValueError, KeyError, TypeError):
        raise ManifestError(msg) from None
    if not isinstance(source, str) or not isinstance(names, list) or not names:
        raise ManifestError(msg)
    mask_names = [name for name in names if isinstance(name, str)]  # pyright: ignore[reportUnknownVariableType]
    if len(mask_names) != len(names):  # pyright: ignore[reportUnknownArgumentType]
        raise ManifestError(msg)
    return run_index, source, k, mask_names


def _pool_from_cluster_dir(directory: Path) -> CandidatePool:
    """Rebuild a candidate pool from one image's ``cluster`` output directory."""
    sidecars = sorted(directory.glob("*.json"))
    runs = [_read_cluster_sidecar(sidecar) for sidecar in sidecars]
    if not runs:
        msg = f"{directory}: no cluster sidecars found"
        raise ManifestError(msg)

    masks: list[BinaryMask] = []
    provenance: list[CandidateTag] = []
    for _, source, k, names in sorted(runs, key=lambda run: run[0]):
        for cluster, name in enumerate(names):
            masks.append(read_mask(directory / name))
            provenance.append(CandidateTag(source, k, cluster))
    return CandidatePool(masks=tuple(masks), provenance=tuple(provenance))


def cmd_vote(config: RunConfig, candidates_dir: Path, execution_id: str) -> int:
    """Vote over masks written by ``cluster``: one image per subdirectory."""
    out_dir = _require(config.out_dir, "--out")
    if not candidates_dir.is_dir():
        msg = f"We couldn't find your file: {candidates_dir} is not a directory"
        raise FileNotExistsError(msg)
    images = sorted(path.name for path in candidates_dir.iterdir() if path.is_dir())

    def work(image: str) -> float:
        pool = _pool_from_cluster_dir(candidates_dir / image)
        seed = image_seed(config.seed, image)
        result = vote_on_pool(pool, seed)
        extra = _write_winner(config, out_dir, image, result.winner)
        write_json(out_dir / f"{image}.json", _vote_payload(image, seed, result, extra))
        _progress(f"🗳️ {image}: winner {result.winner_provenance} of {len(pool)}")
        return result.mean_iou

    results, failures = _run_images(images, work, config, execution_id)
    _progress(f"✅ Created: {len(results)} pseudo-masks in {out_dir}")
    return _finish(out_dir, len(results), failures, execution_id)


def cmd_upper_bound(config: RunConfig, execution_id: str) -> int:
    """Compare each image's voted pseudo-mask with the best candidate in its pool."""
    manifest = read_manifest(_require(config.manifest, "--manifest"))
    out_dir = _require(config.out_dir, "--out")
    gt_dir = _require(config.gt_dir, "--gt")
    sources = _selected_sources(manifest, config)

    def work(image: str) -> dict[str, Any]:
        feature_sets = _load_feature_sets(manifest, image, sources)
        seed = image_seed(config.seed, image)
        pool = candidate_pool(feature_sets, config.ks, seed, method=config.method)
        result = vote_on_pool(pool, seed)
        gt = read_mask(_find_mask_file(gt_dir, image))
        upsampled = [resize_mask_nearest(mask, *gt.grid) for mask in pool.masks]
        best, index = upper_bound_iou(upsampled, gt)
        return {
            "image": image,
            "pseudo_mask_iou": iou(resize_mask_nearest(result.winner, *gt.grid), gt),
            "upper_bound_iou": best,
            "upper_bound_candidate": pool.provenance[index].as_dict(),
            "pool_size": len(pool),
        }

    results, failures = _run_images(manifest.image_ids(), work, config, execution_id)
    records = [results[image] for image in sorted(results)]
    count = len(records)
    write_json(
        out_dir / UPPER_BOUND_FILE,
        {
            "images": records,
            "mean": {
                "pseudo_mask_iou": sum(r["pseudo_mask_iou"] for r in records) / count
                if count
                else 0.0,
                "upper_bound_iou": sum(r["upper_bound_iou"] for r in records) / count
                if count
                else 0.0,
            },
            "ks": list(config.ks),
            "sources": list(sources),
        },
    )
    _progress(f"✅ Created: {out_dir / UPPER_BOUND_FILE}")
    return _finish(out_dir, count, failures, execution_id)


# =============================================================================
# evaluate / loss-check
# =============================================================================


def cmd_evaluate(
    pred_dir: Path,
    gt_dir: Path,
    out_dir: Path,
    *,
    allow_missing: bool = False,
    csv_path: Path | None = None,
    execution_id: str = "",
) -> int:
    """Score predictions against same-named ground truths; write report.json.

    A pair that cannot be scored (unreadable file, empty ground truth) is
    left out of the means and listed in errors.json.

    Raises:
        MissingPairsError: If no filename appears in both directories
    """
    predictions = _mask_files(pred_dir)
    truths = _mask_files(gt_dir)
    common = sorted(predictions.keys() & truths.keys())
    missing = sorted(predictions.keys() ^ truths.keys())
    if not common:
        raise MissingPairsError

    def score(name: str) -> EvalRecord:
        return evaluate_pair(name, read_gray(predictions[name]), read_mask(truths[name]))

    records: list[EvalRecord] = []
    failures: list[ImageFailure] = []
    for name in common:
        outcome = _guarded(score, name)
        if isinstance(outcome, ImageFailure):
            failures.append(outcome)
            _progress(f"❌ {name}: {outcome.message}")
            logger.info("[%s] %s failed: %s", execution_id, name, outcome.error)
        else:
            records.append(outcome)

    report = summarise(records, missing)
    write_json(out_dir / REPORT_FILE, report_as_dict(report))
    if csv_path is not None:
        atomic_write_bytes(csv_path, report_as_csv(report).encode("utf-8"))

    _progress(
        f"✅ Evaluated {len(records)} images: IoU {report.iou:.3f}, "
        f"Acc {report.accuracy:.3f}, max-Fβ {report.max_f_beta:.3f}"
    )
    exit_code = _finish(out_dir, len(records), failures, execution_id)
    if missing:
        _progress(f"⚠️ Unmatched files: {', '.join(missing)}")
        if not allow_missing:
            exit_code = max(exit_code, EXIT_INPUT_ERROR)
    return exit_code


def cmd_loss_check(seed: int, trials: int) -> int:
    """Run the gradient checks and print the largest deviation per loss.

    Raises:
        GradientCheckError: If any deviation exceeds the tolerance
    """
    report = run_gradient_checks(seed, trials)
    for name, deviation in report.max_deviation.items():
        print(f"{name}: max deviation {deviation:.3e}")
    if not report.passed:
        failed = [
            name for name, dev in report.max_deviation.items() if dev > report.tolerance
        ]
        msg = (
            f"Gradient check failed for {', '.join(failed)} "
            f"(tolerance {report.tolerance})"
        )
        raise GradientCheckError(msg)
    return 0
