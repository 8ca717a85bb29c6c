"""Spectral-vote CLI entry point."""

import argparse
import sys
import uuid
from collections.abc import Callable
from pathlib import Path

from spectral_vote.commands import (
    cmd_cluster,
    cmd_evaluate,
    cmd_loss_check,
    cmd_pseudo_label,
    cmd_upper_bound,
    cmd_vote,
)
from spectral_vote.config import DEFAULT_KS, RunConfig, parse_ks, parse_seed, resolve_seed
from spectral_vote.exceptions import EXIT_INPUT_ERROR, BaseSpectralVoteError
from spectral_vote.logging_config import get_logger, setup_logging
from spectral_vote.losses import DEFAULT_TRIALS
from spectral_vote.spectral import METHODS, SPECTRAL

ARGPARSE_ERROR_CODE = 2  # argparse uses exit code 2 for argument errors
HELP_HINT = "\nTry: spectral-vote --help"


def _argparse_type[T](parse: Callable[[str], T]) -> Callable[[str], T]:
    """Turn a ParameterError-raising parser into an argparse type."""

    def convert(text: str) -> T:
        try:
            return parse(text)
        except BaseSpectralVoteError as e:
            raise argparse.ArgumentTypeError(str(e)) from None

    return convert


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        msg = f"expected a positive integer, got {text!r}"
        raise argparse.ArgumentTypeError(msg) from None
    if value < 1:
        msg = f"expected a positive integer, got {value}"
        raise argparse.ArgumentTypeError(msg)
    return value


def _sources(text: str) -> tuple[str, ...]:
    names = tuple(dict.fromkeys(part.strip() for part in text.split(",") if part.strip()))
    if not names:
        msg = "at least one source name is required"
        raise argparse.ArgumentTypeError(msg)
    return names


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, required=True, help="Output directory")
    parser.add_argument(
        "--seed",
        type=_argparse_type(parse_seed),
        default=None,
        help="Root seed in [0, 2^64); defaults to $SPECTRAL_VOTE_SEED, then 0",
    )
    parser.add_argument(
        "--workers", type=_positive_int, default=1, help="Images processed in parallel"
    )
    parser.add_argument(
        "--keep-going",
        action="store_true",
        help="Continue past failing images (exit status still reports the failure)",
    )


def _add_candidate_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--manifest", type=Path, required=True, help="JSON manifest of feature files"
    )
    parser.add_argument(
        "--sources",
        type=_sources,
        default=None,
        help="Comma-separated feature sources to use (default: all in the manifest)",
    )
    parser.add_argument(
        "--ks",
        type=_argparse_type(parse_ks),
        default=DEFAULT_KS,
        help="Comma-separated cluster counts (default: 2,3,4)",
    )
    parser.add_argument(
        "--method",
        choices=METHODS,
        default=SPECTRAL,
        help="Spectral clustering or the raw-feature k-means baseline",
    )


def _add_winner_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--upsample",
        nargs=2,
        type=_positive_int,
        metavar=("H", "W"),
        default=None,
        help="Also write a nearest-neighbour upsampled copy at H x W",
    )
    parser.add_argument(
        "--gt", type=Path, default=None, help="Ground-truth directory; records gt_iou"
    )


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per batch command."""
    parser = argparse.ArgumentParser(
        prog="spectral-vote",
        description="Pseudo-masks for salient object detection by spectral "
        "clustering and winner-takes-all voting",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""✅ Example manifest

📋 EXPECTED FORMAT:
   ┌─────────────────────────────────────────
   │ {"sources": {
   │   "vit_s16": {"img_001": "feats/vit_s16/img_001.npy"},
   │   "vit_b8":  {"img_001": "feats/vit_b8/img_001.npy"}}}
   └─────────────────────────────────────────

🔧 REQUIREMENTS:
   - Feature files: .npy version 1.0, shape (height, width, channels)
   - Element type: little-endian float32 or float64, no NaN or infinity
   - Every source of an image must share one (height, width) grid

💡 Exit status: 0 success, 1 input error, 2 numerical error
""",
    )
    parser.add_argument(
        "--log-file", default="spectral_vote.log", help="Log file (default: %(default)s)"
    )
    parser.add_argument(
        "--verbose", action="store_true", help="Echo debug logs to stderr"
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    cluster = commands.add_parser("cluster", help="Write every candidate partition")
    _add_candidate_options(cluster)
    _add_common(cluster)

    pseudo = commands.add_parser("pseudo-label", help="Select one pseudo-mask per image")
    _add_candidate_options(pseudo)
    _add_winner_options(pseudo)
    _add_common(pseudo)

    vote = commands.add_parser("vote", help="Vote over the output of 'cluster'")
    vote.add_argument(
        "--candidates", type=Path, required=True, help="Output directory of 'cluster'"
    )
    _add_winner_options(vote)
    _add_common(vote)

    upper = commands.add_parser(
        "upper-bound", help="Compare pseudo-masks with the best candidate per image"
    )
    _add_candidate_options(upper)
    upper.add_argument("--gt", type=Path, required=True, help="Ground-truth directory")
    _add_common(upper)

    evaluate = commands.add_parser(
        "evaluate", help="Score predictions against ground truth"
    )
    evaluate.add_argument("--pred", type=Path, required=True, help="Prediction directory")
    evaluate.add_argument("--gt", type=Path, required=True, help="Ground-truth directory")
    evaluate.add_argument("--out", type=Path, required=True, help="Output directory")
    evaluate.add_argument(
        "--allow-missing",
        action="store_true",
        help="Exit 0 even when some files have no counterpart",
    )
    evaluate.add_argument("--csv", type=Path, default=None, help="Also write a CSV table")

    loss_check = commands.add_parser("loss-check", help="Verify the loss gradients")
    loss_check.add_argument(
        "--seed", type=_argparse_type(parse_seed), default=None, help="Root seed"
    )
    loss_check.add_argument(
        "--trials",
        type=_positive_int,
        default=DEFAULT_TRIALS,
        help="Random trials per loss (default: %(default)s)",
    )
    return parser


def parse_arguments(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    return build_parser().parse_args(argv)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        manifest=getattr(args, "manifest", None),
        sources=getattr(args, "sources", None),
        ks=getattr(args, "ks", DEFAULT_KS),
        seed=resolve_seed(args.seed),
        out_dir=args.out,
        gt_dir=getattr(args, "gt", None),
        workers=args.workers,
        upsample=tuple(args.upsample) if getattr(args, "upsample", None) else None,
        keep_going=args.keep_going,
        method=getattr(args, "method", SPECTRAL),
    )


def _dispatch(args: argparse.Namespace, execution_id: str) -> int:
    if args.command == "evaluate":
        return cmd_evaluate(
            args.pred,
            args.gt,
            args.out,
            allow_missing=args.allow_missing,
            csv_path=args.csv,
            execution_id=execution_id,
        )
    if args.command == "loss-check":
        return cmd_loss_check(resolve_seed(args.seed), args.trials)

    config = _config_from_args(args)
    if args.command == "cluster":
        return cmd_cluster(config, execution_id)
    if args.command == "pseudo-label":
        return cmd_pseudo_label(config, execution_id)
    if args.command == "vote":
        return cmd_vote(config, args.candidates, execution_id)
    return cmd_upper_bound(config, execution_id)


def main(argv: list[str] | None = None) -> None:
    """Main entry point for the spectral-vote CLI."""
    try:
        args = parse_arguments(argv)
    except SystemExit as e:
        if e.code == ARGPARSE_ERROR_CODE:
            # Display after argparse's message
            print(HELP_HINT, file=sys.stderr)
            sys.exit(EXIT_INPUT_ERROR)
        else:
            # Re-raise other SystemExits (like --help which should exit normally)
            raise

    setup_logging(args.log_file, verbose=args.verbose)
    logger = get_logger(__name__)
    execution_id = str(uuid.uuid4())[:8]
    logger.info("[%s] Starting %s", execution_id, args.command)

    # Main processing with single exception handler
    try:
        exit_code = _dispatch(args, execution_id)
    except BaseSpectralVoteError as e:
        # All our custom exceptions
        print(f"❌ {e}", file=sys.stderr)
        print(HELP_HINT, file=sys.stderr)
        logger.info("[%s] %s: %s", execution_id, type(e).__name__, e)
        sys.exit(e.exit_code)
    except OSError as e:
        # System errors from file operations
        print(f"❌ {e}", file=sys.stderr)
        print(HELP_HINT, file=sys.stderr)
        logger.exception("[%s] System error", execution_id)
        sys.exit(EXIT_INPUT_ERROR)

    logger.info("[%s] Finished %s with status %d", execution_id, args.command, exit_code)
    if exit_code:
        sys.exit(exit_code)
