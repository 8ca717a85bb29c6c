"""Reading and writing of feature maps, masks, manifests and JSON sidecars.

Feature maps use the version 1.0 ``.npy`` layout: (height, width, channels),
C order, little-endian 32- or 64-bit floats. Channel-first arrays must be
transposed by the caller before writing. Masks are written as 8-bit PGM
(foreground 255, background 0); PGM and PNG are read back. Every writer goes
through write-temp-then-rename so concurrent workers never expose half files.
"""

from __future__ import annotations

import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.lib import format as npy_format
from PIL import Image, UnidentifiedImageError

from spectral_vote.exceptions import (
    FeatureFormatError,
    FeatureShapeError,
    FileNotExistsError,
    ManifestError,
    MaskFormatError,
    ParameterError,
)
from spectral_vote.logging_config import get_logger
from spectral_vote.models import FEATURE_NDIM, BinaryMask, FeatureMap, Manifest

if TYPE_CHECKING:
    import numpy.typing as npt

NPY_VERSION = (1, 0)
FEATURE_DTYPES = ("<f4", "<f8")
MASK_FOREGROUND = 255
GRAY_THRESHOLD = 127  # gray values above this read back as foreground

logger = get_logger(__name__)


# =============================================================================
# Atomic writes
# =============================================================================


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    """Write bytes to a temp file in the target directory, then rename over.

    Raises:
        OSError: If the directory cannot be created or written
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(
        dir=path.parent, prefix=f".{path.name}.", suffix=".tmp"
    )
    tmp_path = Path(tmp_name)
    try:
        with os.fdopen(fd, "wb") as fp:
            fp.write(payload)
        tmp_path.replace(path)
    except BaseException:
        tmp_path.unlink(missing_ok=True)
        raise


def write_json(path: Path, payload: Any) -> None:  # noqa: ANN401
    """Write JSON with sorted keys, so identical payloads give identical bytes."""
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def _read_input_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError:  # in-built
        msg = f"We couldn't find your file: {path}"
        raise FileNotExistsError(msg) from None


# =============================================================================
# Feature maps
# =============================================================================


def read_feature_map(path: Path) -> FeatureMap:
    """Read a (height, width, channels) feature map, widening to 64-bit.

    Raises:
        FileNotExistsError: If the file is missing
        FeatureFormatError: On a bad magic string, version, header or payload size
        FeatureShapeError: If the stored array is not three-dimensional
        FeatureDataError: If any value is NaN or infinite
    """
    fp = io.BytesIO(_read_input_bytes(path))
    try:
        version = npy_format.read_magic(fp)
        if version != NPY_VERSION:
            msg = f"{path}: unsupported array file version {version[0]}.{version[1]}"
            raise FeatureFormatError(msg)
        shape, fortran_order, dtype = npy_format.read_array_header_1_0(fp)
    except (ValueError, TypeError, SyntaxError):
        msg = f"{path}: malformed array file header"
        raise FeatureFormatError(msg) from None

    if fortran_order:
        msg = f"{path}: fortran-order payloads are not supported"
        raise FeatureFormatError(msg)
    if dtype.str not in FEATURE_DTYPES:
        msg = f"{path}: element type {dtype.str} is not '<f4' or '<f8'"
        raise FeatureFormatError(msg)
    if len(shape) != FEATURE_NDIM:
        msg = f"{path}: expected shape (height, width, channels), got {shape}"
        raise FeatureShapeError(msg)

    payload = fp.read()
    expected = math.prod(shape) * dtype.itemsize
    if len(payload) != expected:
        msg = f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        raise FeatureFormatError(msg)

    data = np.frombuffer(payload, dtype=dtype).reshape(shape).astype(np.float64)
    logger.debug("Read feature map %s with shape %s (%s)", path, shape, dtype.str)
    return FeatureMap(data)


def write_feature_map(features: FeatureMap, path: Path) -> None:
    """Write a feature map as a version 1.0, C-order, '<f8' array file."""
    buffer = io.BytesIO()
    array = np.ascontiguousarray(features.data, dtype="<f8")
    npy_format.write_array(buffer, array, version=NPY_VERSION, allow_pickle=False)
    atomic_write_bytes(path, buffer.getvalue())


# =============================================================================
# Masks
# =============================================================================


def encode_mask(mask: BinaryMask) -> bytes:
    """Encode a mask as binary PGM (P5, maxval 255) bytes."""
    gray = mask.bits.astype(np.uint8) * np.uint8(MASK_FOREGROUND)
    buffer = io.BytesIO()
    Image.fromarray(gray).save(buffer, format="PPM")
    return buffer.getvalue()


def write_mask(mask: BinaryMask, path: Path) -> None:
    """Write a mask as an 8-bit PGM: foreground 255, background 0.

    Raises:
        OSError: If the path is not writable
    """
    atomic_write_bytes(path, encode_mask(mask))


def read_gray(path: Path) -> npt.NDArray[np.uint8]:
    """Read a single-channel PGM or PNG as 0..255 integers.

    Raises:
        FileNotExistsError: If the file is missing
        MaskFormatError: If the image cannot be decoded
    """
    raw = _read_input_bytes(path)
    try:
        with Image.open(io.BytesIO(raw)) as image:
            gray = image if image.mode == "L" else image.convert("L")
            return np.asarray(gray, dtype=np.uint8).copy()
    except (UnidentifiedImageError, OSError, ValueError):
        msg = f"{path}: not a readable single-channel image"
        raise MaskFormatError(msg) from None


def read_mask(path: Path) -> BinaryMask:
    """Read a PGM or PNG mask; gray values above 127 are foreground."""
    return BinaryMask(read_gray(path) > GRAY_THRESHOLD)


def resize_gray_nearest[T: np.generic](
    grid: npt.NDArray[T], target_h: int, target_w: int
) -> npt.NDArray[T]:
    """Nearest-neighbour resample: output (i, j) reads source (i*h//H, j*w//W).

    Raises:
        ParameterError: If a target dimension is not positive
    """
    if target_h < 1 or target_w < 1:
        msg = f"Target size must be positive, got {target_h}x{target_w}"
        raise ParameterError(msg)
    rows = (np.arange(target_h) * grid.shape[0]) // target_h
    cols = (np.arange(target_w) * grid.shape[1]) // target_w
    return grid[np.ix_(rows, cols)]


def resize_mask_nearest(mask: BinaryMask, target_h: int, target_w: int) -> BinaryMask:
    """Resample a mask to (target_h, target_w); binary masks stay binary.

    Raises:
        ParameterError: If a target dimension is not positive
    """
    if (target_h, target_w) == mask.grid:
        return mask
    return BinaryMask(resize_gray_nearest(mask.bits, target_h, target_w))


# =============================================================================
# Manifests
# =============================================================================


def _manifest_entries(raw: object, path: Path) -> dict[str, dict[str, Path]]:
    if not isinstance(raw, dict) or not isinstance(raw.get("sources"), dict):  # pyright: ignore[reportUnknownMemberType]
        msg = f"{path}: manifest needs a top-level 'sources' object"
        raise ManifestError(msg)
    base = path.parent
    entries: dict[str, dict[str, Path]] = {}
    sources: dict[object, object] = raw["sources"]  # pyright: ignore[reportUnknownVariableType]
    for source, images in sources.items():
        if not isinstance(source, str) or not isinstance(images, dict) or not images:
            msg = f"{path}: source {source!r} must map image ids to file paths"
            raise ManifestError(msg)
        entries[source] = {}
        for image_id, file_name in images.items():  # pyright: ignore[reportUnknownVariableType]
            if not isinstance(image_id, str) or not isinstance(file_name, str):
                msg = f"{path}: entry {image_id!r} of source {source!r} is not a path"
                raise ManifestError(msg)
            entries[source][image_id] = base / file_name
    if not entries:
        msg = f"{path}: manifest lists no feature sources"
        raise ManifestError(msg)
    return entries


def read_manifest(path: Path) -> Manifest:
    """Read a JSON manifest of feature files grouped by source name.

    Layout: ``{"sources": {"<source>": {"<image_id>": "<file.npy>"}}}``.
    Relative file paths resolve against the manifest's own directory.

    Raises:
        FileNotExistsError: If the manifest is missing
        ManifestError: If the JSON or its structure is invalid
    """
    raw_bytes = _read_input_bytes(path)
    try:
        raw = json.loads(raw_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        msg = f"{path}: manifest is not valid UTF-8 JSON"
        raise ManifestError(msg) from None
    return Manifest(_manifest_entries(raw, path))
