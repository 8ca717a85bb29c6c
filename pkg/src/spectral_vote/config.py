"""Run configuration for the batch commands.

Values come from argparse; the seed falls back to the SPECTRAL_VOTE_SEED
environment variable and then to 0.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import TYPE_CHECKING

from spectral_vote.exceptions import ParameterError

if TYPE_CHECKING:
    from pathlib import Path

SEED_ENV_VAR = "SPECTRAL_VOTE_SEED"
DEFAULT_SEED = 0
DEFAULT_KS = (2, 3, 4)
MAX_SEED = 2**64


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Everything one batch command needs, resolved from flags and environment."""

    manifest: Path | None = None
    sources: tuple[str, ...] | None = None  # None selects every manifest source
    ks: tuple[int, ...] = DEFAULT_KS
    seed: int = DEFAULT_SEED
    out_dir: Path | None = None
    gt_dir: Path | None = None
    workers: int = 1
    upsample: tuple[int, int] | None = None
    keep_going: bool = False
    method: str = "spectral"

    def __post_init__(self) -> None:
        """Reject empty or non-positive cluster counts and bad worker counts."""
        if not self.ks or any(k < 1 for k in self.ks):
            msg = f"ks must be a non-empty list of positive integers, got {self.ks}"
            raise ParameterError(msg)
        if self.workers < 1:
            msg = f"workers must be >= 1, got {self.workers}"
            raise ParameterError(msg)
        if not 0 <= self.seed < MAX_SEED:
            msg = f"seed must lie in [0, 2^64), got {self.seed}"
            raise ParameterError(msg)


def parse_seed(text: str) -> int:
    """Parse a base-10 seed in [0, 2^64)."""
    try:
        seed = int(text, 10)
    except ValueError:
        msg = f"Seed must be a base-10 integer, got {text!r}"
        raise ParameterError(msg) from None
    if not 0 <= seed < MAX_SEED:
        msg = f"Seed must lie in [0, 2^64), got {seed}"
        raise ParameterError(msg)
    return seed


def resolve_seed(flag_value: int | None) -> int:
    """Pick the seed: explicit flag, else the environment variable, else 0."""
    if flag_value is not None:
        return flag_value
    env_value = os.environ.get(SEED_ENV_VAR, "").strip()
    if env_value:
        return parse_seed(env_value)
    return DEFAULT_SEED


def parse_ks(text: str) -> tuple[int, ...]:
    """Parse '2,3,4' into (2, 3, 4), dropping repeats but keeping first order.

    Raises:
        ParameterError: If the list is empty or holds a non-positive integer
    """
    ks: list[int] = []
    for part in text.split(","):
        token = part.strip()
        if not token:
            continue
        try:
            k = int(token)
        except ValueError:
            msg = f"Cluster count must be an integer, got {token!r}"
            raise ParameterError(msg) from None
        if k < 1:
            msg = f"Cluster count must be >= 1, got {k}"
            raise ParameterError(msg)
        if k not in ks:
            ks.append(k)
    if not ks:
        msg = "At least one cluster count is required"
        raise ParameterError(msg)
    return tuple(ks)
