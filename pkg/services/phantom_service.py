"""
Phantom generation and speckle corruption for the Monte Carlo protocol.

Geometry "lines-block-v1" for a side N divisible by 16:
  - background at background_mean everywhere else
  - vertical line at column N/8, horizontal line at row 7N/8, both full length
  - diagonal line row = col + N/2 for col in [0, N/2)
  - centered square block of side N/4 at line_mean
  - edge band: pixels within 2 of the block perimeter, on either side
  - ENL patch: N/4 square at rows [N/16, 5N/16), cols [11N/16, 15N/16),
    clear of every structure
Lines carry label 1, the block interior 2, the edge band 3 and the rest 0.
"""

import logging
from typing import Optional, Union

import numpy as np

from errors import DomainError, GeometryError
from schemas import BACKGROUND, BLOCK, EDGE_BAND, LINE, PhantomGeometry, PhantomSpec
from services.gamma_model import speckle_field
from services.speckle_filters import check_raster

logger = logging.getLogger(__name__)

BAND_WIDTH = 2


def phantom_geometry(spec: PhantomSpec) -> PhantomGeometry:
    """Resolve the pixel layout and closed-form label counts of a phantom."""
    side = spec.side
    if side % 16 != 0:
        raise GeometryError(f"side must be a multiple of 16 for the {spec.geometry} layout, got {side}")

    block_side = side // 4
    block_start = (side - block_side) // 2
    inner = block_side - 2 * BAND_WIDTH
    outer = block_side + 2 * BAND_WIDTH
    # three full or half-length lines meeting pairwise in three distinct pixels
    line_count = side + side + side // 2 - 3

    label_counts = {
        LINE: line_count,
        BLOCK: inner * inner,
        EDGE_BAND: outer * outer - inner * inner,
    }
    label_counts[BACKGROUND] = side * side - sum(label_counts.values())

    patch_start = side // 16
    return PhantomGeometry(
        side=side,
        block_start=block_start,
        block_stop=block_start + block_side,
        band_width=BAND_WIDTH,
        vertical_col=side // 8,
        horizontal_row=7 * side // 8,
        diagonal_offset=side // 2,
        diagonal_length=side // 2,
        patch_rows=(patch_start, patch_start + side // 4),
        patch_cols=(side - patch_start - side // 4, side - patch_start),
        label_counts=dict(sorted(label_counts.items())),
    )


def _labels(geometry: PhantomGeometry) -> np.ndarray:
    side = geometry.side
    labels = np.full((side, side), BACKGROUND, dtype=np.uint8)

    lo = geometry.block_start - geometry.band_width
    hi = geometry.block_stop + geometry.band_width
    labels[lo:hi, lo:hi] = EDGE_BAND
    labels[lo + 2 * geometry.band_width:hi - 2 * geometry.band_width,
           lo + 2 * geometry.band_width:hi - 2 * geometry.band_width] = BLOCK

    line_mask = np.zeros_like(labels, dtype=bool)
    line_mask[:, geometry.vertical_col] = True
    line_mask[geometry.horizontal_row, :] = True
    cols = np.arange(geometry.diagonal_length)
    line_mask[cols + geometry.diagonal_offset, cols] = True
    if (labels[line_mask] != BACKGROUND).any():
        raise GeometryError("lines cross the block or its edge band")
    labels[line_mask] = LINE
    return labels


def generate_phantom(spec: Optional[PhantomSpec] = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Build the noise-free phantom and its label raster.

    Returns:
        (truth intensities, labels), both side x side

    Raises:
        GeometryError: if the layout does not fit or the label counts disagree
            with the closed-form counts
    """
    spec = spec or PhantomSpec()
    geometry = phantom_geometry(spec)
    labels = _labels(geometry)

    counts = {int(k): int(v) for k, v in zip(*np.unique(labels, return_counts=True))}
    if counts != {k: v for k, v in geometry.label_counts.items() if v}:
        raise GeometryError(f"label counts {counts} differ from the layout's {geometry.label_counts}")

    (r0, r1), (c0, c1) = geometry.patch_rows, geometry.patch_cols
    if (labels[r0:r1, c0:c1] != BACKGROUND).any():
        raise GeometryError("ENL patch overlaps a structure")

    truth = np.full(labels.shape, spec.background_mean, dtype=np.float64)
    truth[geometry.block_start:geometry.block_stop, geometry.block_start:geometry.block_stop] = spec.line_mean
    truth[labels == LINE] = spec.line_mean
    return truth, labels


def enl_patch(image: np.ndarray, geometry: PhantomGeometry) -> np.ndarray:
    """Values of the designated homogeneous background patch."""
    (r0, r1), (c0, c1) = geometry.patch_rows, geometry.patch_cols
    return np.asarray(image)[r0:r1, c0:c1]


def corrupt(truth, looks: float, seed: Union[int, np.random.Generator]) -> np.ndarray:
    """
    Multiply truth by independent unit-mean Γ(L, L) speckle.

    Each pixel is then distributed as Γ(L, L/λ_pixel); the draw depends only on seed.

    Raises:
        DomainError: if a truth pixel is not positive or looks is not positive
    """
    raster = check_raster(truth)
    if not looks > 0:
        raise DomainError(f"looks must be positive, got {looks!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return raster * speckle_field(raster.shape, looks, rng)
