"""
Raster file formats.

Native raster (.ras):  b"RASTER <width> <height>\\n" then width*height
                       little-endian float64 values, row-major.
Label raster (.lab):   b"LABELS <width> <height>\\n" then width*height
                       uint8 labels, row-major.
PGM export (.pgm):     binary P5, 16-bit big-endian, linear min-max scaling
                       recorded in a header comment. View-only.
"""

from pathlib import Path
from typing import Optional, Union

import numpy as np

from errors import DomainError, RasterFormatError

RASTER_MAGIC = b"RASTER"
LABELS_MAGIC = b"LABELS"
PGM_MAX = 65535
# longest header we will scan for the terminating newline
MAX_HEADER_SIZE = 64

PathLike = Union[str, Path]


def _encode(magic: bytes, array: np.ndarray, dtype: str) -> bytes:
    height, width = array.shape
    header = magic + f" {width} {height}\n".encode("ascii")
    return header + np.ascontiguousarray(array, dtype=dtype).tobytes()


def _decode(content: bytes, magic: bytes, dtype: str) -> np.ndarray:
    newline = content.find(b"\n", 0, MAX_HEADER_SIZE)
    if newline < 0:
        raise RasterFormatError("header is not terminated by a newline", min(len(content), MAX_HEADER_SIZE))

    tokens = content[:newline].split(b" ")
    if tokens[0] != magic:
        raise RasterFormatError(f"expected magic {magic.decode()!r}, found {tokens[0][:16]!r}", 0)
    if len(tokens) != 3:
        raise RasterFormatError(f"header needs '{magic.decode()} <width> <height>'", len(tokens[0]))

    dims = []
    offset = len(tokens[0]) + 1
    for token in tokens[1:]:
        if not token.isdigit() or int(token) == 0:
            raise RasterFormatError(f"bad dimension {token!r}", offset)
        dims.append(int(token))
        offset += len(token) + 1
    width, height = dims

    start = newline + 1
    itemsize = np.dtype(dtype).itemsize
    expected = width * height * itemsize
    found = len(content) - start
    if found < expected:
        raise RasterFormatError(f"truncated payload: expected {expected} bytes, found {found}", start + found)
    if found > expected:
        raise RasterFormatError(f"{found - expected} trailing bytes after payload", start + expected)
    return np.frombuffer(content, dtype=dtype, count=width * height, offset=start).reshape(height, width).copy()


def encode_raster(raster) -> bytes:
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim != 2:
        raise DomainError(f"raster must be 2-D, got shape {raster.shape}")
    return _encode(RASTER_MAGIC, raster, "<f8")


def decode_raster(content: bytes) -> np.ndarray:
    return _decode(content, RASTER_MAGIC, "<f8").astype(np.float64)


def write_raster(path: PathLike, raster) -> None:
    """Write a raster in the native lossless format."""
    Path(path).write_bytes(encode_raster(raster))


def read_raster(path: PathLike) -> np.ndarray:
    """
    Read a native raster.

    Raises:
        RasterFormatError: on a malformed header or a payload of the wrong size
    """
    return decode_raster(Path(path).read_bytes())


def write_labels(path: PathLike, labels) -> None:
    """Write a label raster (values 0-255)."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise DomainError(f"label raster must be 2-D, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() > 255:
        raise DomainError("labels must fit in an unsigned byte")
    Path(path).write_bytes(_encode(LABELS_MAGIC, labels, "u1"))


def read_labels(path: PathLike, expected_shape: Optional[tuple[int, int]] = None) -> np.ndarray:
    """
    Read a label raster, optionally checking it matches an intensity raster's shape.

    Raises:
        RasterFormatError: on malformed content or a dimension mismatch
    """
    labels = _decode(Path(path).read_bytes(), LABELS_MAGIC, "u1")
    if expected_shape is not None and labels.shape != tuple(expected_shape):
        raise RasterFormatError(
            f"label raster is {labels.shape[1]}x{labels.shape[0]}, expected "
            f"{expected_shape[1]}x{expected_shape[0]}",
            len(LABELS_MAGIC) + 1,
        )
    return labels


def encode_pgm(raster) -> bytes:
    """16-bit binary PGM with linear min-max scaling; a constant raster maps to 0."""
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim != 2:
        raise DomainError(f"raster must be 2-D, got shape {raster.shape}")
    low, high = float(raster.min()), float(raster.max())
    span = high - low
    scaled = np.zeros(raster.shape) if span == 0 else (raster - low) / span * PGM_MAX
    height, width = raster.shape
    header = (
        f"P5\n# linear min-max scaling: 0 = {low:.9g}, {PGM_MAX} = {high:.9g}\n"
        f"{width} {height}\n{PGM_MAX}\n"
    ).encode("ascii")
    return header + np.rint(scaled).astype(">u2").tobytes()


def export_pgm(raster, path: PathLike) -> None:
    """Write a view-only 16-bit PGM; not suitable for measuring."""
    Path(path).write_bytes(encode_pgm(raster))


def save_raster(path: PathLike, raster) -> None:
    """
    Write a raster in the format named by the file extension.

    Raises:
        DomainError: if the extension is not .ras or .pgm
    """
    suffix = Path(path).suffix.lower()
    if suffix == ".ras":
        write_raster(path, raster)
    elif suffix == ".pgm":
        export_pgm(raster, path)
    else:
        raise DomainError(f"Unsupported raster extension: {suffix or '(none)'}. Supported: .ras, .pgm")
