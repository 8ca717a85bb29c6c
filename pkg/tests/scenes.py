"""Synthetic feature scenes shared by module and CLI tests.

- Two-block map: left and right halves hold orthogonal constant vectors.
- Planted blob: a blob (6x6 and centred by default) with its own feature
  direction inside a 12x12 grid whose background splits into three bands.
  Band vectors share a common direction (pairwise cosine BAND_COSINE) and
  are orthogonal to the blob, so the graph has exactly two components and,
  while the blob keeps off the border, every background-containing mask
  spans the frame.
"""

from __future__ import annotations

import json
from typing import TYPE_CHECKING

import numpy as np

from spectral_vote.array_io import write_feature_map
from spectral_vote.models import BinaryMask, FeatureMap

if TYPE_CHECKING:
    from pathlib import Path

    import numpy.typing as npt

BLOB_GRID = (12, 12)
BLOB_ROWS = slice(3, 9)
BLOB_COLS = slice(3, 9)
BLOB_CHANNELS = 5
BAND_COSINE = 0.25


def two_block_features(height: int = 8, width: int = 8) -> FeatureMap:
    """Left half along e0, right half along e1."""
    data = np.zeros((height, width, 2))
    data[:, : width // 2, 0] = 1.0
    data[:, width // 2 :, 1] = 1.0
    return FeatureMap(data)


def two_block_masks(height: int = 8, width: int = 8) -> tuple[BinaryMask, BinaryMask]:
    left = np.zeros((height, width), dtype=bool)
    left[:, : width // 2] = True
    return BinaryMask(left), BinaryMask(~left)


def constant_features(height: int = 6, width: int = 6, channels: int = 3) -> FeatureMap:
    return FeatureMap(np.ones((height, width, channels)))


def planted_blob_bits(
    rows: slice = BLOB_ROWS, cols: slice = BLOB_COLS
) -> npt.NDArray[np.bool_]:
    bits = np.zeros(BLOB_GRID, dtype=bool)
    bits[rows, cols] = True
    return bits


def planted_blob_mask(rows: slice = BLOB_ROWS, cols: slice = BLOB_COLS) -> BinaryMask:
    return BinaryMask(planted_blob_bits(rows, cols))


def planted_blob_features(
    bands: str = "rows", rows: slice = BLOB_ROWS, cols: slice = BLOB_COLS
) -> FeatureMap:
    """Blob along e0; background bands of 4 rows (or columns) along g_i.

    g_i = sqrt(c) * e1 + sqrt(1 - c) * e_(i + 2), so cos(g_i, g_j) = c.
    """
    height, width = BLOB_GRID
    data = np.zeros((height, width, BLOB_CHANNELS))
    common = np.sqrt(BAND_COSINE)
    own = np.sqrt(1.0 - BAND_COSINE)
    for row in range(height):
        for col in range(width):
            band = (row if bands == "rows" else col) // 4
            data[row, col, 1] = common
            data[row, col, 2 + band] = own
    blob = planted_blob_bits(rows, cols)
    data[blob] = 0.0
    data[blob, 0] = 1.0
    return FeatureMap(data)


def planted_blob_sources(
    rows: slice = BLOB_ROWS, cols: slice = BLOB_COLS
) -> list[tuple[str, FeatureMap]]:
    """Three sources sharing the blob with differently banded clutter."""
    by_rows = planted_blob_features("rows", rows, cols)
    by_cols = planted_blob_features("cols", rows, cols)
    scaled = FeatureMap(by_rows.data * 3.0)
    return [("rows", by_rows), ("cols", by_cols), ("scaled", scaled)]


def write_manifest(
    root: Path, scenes: dict[str, list[tuple[str, FeatureMap]]]
) -> Path:
    """Write feature files for {image: [(source, features)]} and a manifest."""
    sources: dict[str, dict[str, str]] = {}
    for image, feature_sets in scenes.items():
        for source, features in feature_sets:
            relative = f"feats/{source}/{image}.npy"
            write_feature_map(features, root / relative)
            sources.setdefault(source, {})[image] = relative
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"sources": sources}), encoding="utf-8")
    return manifest
