"""
Image quality measures for despeckling assessment.

Sample statistics use the unbiased (n - 1) variance throughout.
"""

import logging
import math

import numpy as np
from scipy import ndimage

from errors import DegenerateSampleError, DomainError
from schemas import EDGE_BAND, LINE, MetricsRecord, PhantomGeometry
from services.gamma_model import as_sample
from services.phantom_service import enl_patch

logger = logging.getLogger(__name__)


def _aligned(*rasters) -> list[np.ndarray]:
    arrays = [np.asarray(r, dtype=np.float64) for r in rasters]
    shape = arrays[0].shape
    for array in arrays[1:]:
        if array.shape != shape:
            raise DomainError(f"rasters are not aligned: {shape} vs {array.shape}")
    return arrays


def enl(region) -> float:
    """
    Equivalent number of looks, mean² / variance.

    Raises:
        DegenerateSampleError: if the region has zero variance
    """
    values = as_sample(region).array
    if values.size < 2:
        raise DomainError("ENL needs at least 2 values")
    variance = float(np.var(values, ddof=1))
    if variance == 0:
        raise DegenerateSampleError("ENL of a constant region is unbounded")
    return float(np.mean(values)) ** 2 / variance


def line_preservation(filtered, truth, labels) -> float:
    """Mean relative absolute deviation |filtered - truth| / truth over line pixels; 0 is perfect."""
    filtered, truth, labels = _aligned(filtered, truth, labels)
    on_line = labels == LINE
    if not on_line.any():
        raise DomainError("label raster has no line pixels")
    return float(np.mean(np.abs(filtered[on_line] - truth[on_line]) / truth[on_line]))


def gradient_magnitude(image) -> np.ndarray:
    """Central-difference gradient magnitude with mirror padding."""
    padded = np.pad(np.asarray(image, dtype=np.float64), 1, mode="reflect")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return np.hypot(gx, gy)


def edge_gradient(filtered, labels) -> float:
    """Mean gradient magnitude over the edge band."""
    filtered, labels = _aligned(filtered, labels)
    band = labels == EDGE_BAND
    if not band.any():
        raise DomainError("label raster has no edge-band pixels")
    return float(np.mean(gradient_magnitude(filtered)[band]))


def edge_variance(filtered, labels, geometry: PhantomGeometry) -> float:
    """Variance of filtered values over the edge-band pixels inside the block."""
    filtered, labels = _aligned(filtered, labels)
    inside = np.zeros(labels.shape, dtype=bool)
    inside[geometry.block_start:geometry.block_stop, geometry.block_start:geometry.block_stop] = True
    band = (labels == EDGE_BAND) & inside
    if band.sum() < 2:
        raise DomainError("edge band has fewer than two interior pixels")
    return float(np.var(filtered[band], ddof=1))


def q_index(x, y) -> float:
    """
    Universal image quality index: correlation x luminance x contrast.

    Raises:
        DegenerateSampleError: if either image has zero variance
    """
    x, y = (a.ravel() for a in _aligned(x, y))
    if x.size < 2:
        raise DomainError("Q index needs at least 2 pixels")
    mean_x, mean_y = float(np.mean(x)), float(np.mean(y))
    var_x, var_y = float(np.var(x, ddof=1)), float(np.var(y, ddof=1))
    if var_x == 0 or var_y == 0:
        raise DegenerateSampleError("Q index is undefined for a constant image")
    if mean_x == 0 and mean_y == 0:
        raise DegenerateSampleError("Q index is undefined when both means are zero")
    s_xy = math.sqrt(var_x * var_y)
    covariance = float(np.sum((x - mean_x) * (y - mean_y))) / (x.size - 1)

    correlation = covariance / s_xy
    luminance = 2.0 * mean_x * mean_y / (mean_x ** 2 + mean_y ** 2)
    contrast = 2.0 * s_xy / (var_x + var_y)
    return float(np.clip(correlation, -1.0, 1.0) * luminance * contrast)


def laplacian(image) -> np.ndarray:
    """Four-neighbor discrete Laplacian with mirror padding."""
    raster = np.asarray(image, dtype=np.float64)
    if raster.ndim != 2 or min(raster.shape) < 3:
        raise DomainError(f"Laplacian needs a raster of at least 3x3, got {raster.shape}")
    return ndimage.laplace(raster, mode="mirror")


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of two flattened arrays, clipped to [-1, 1]."""
    x, y = np.ravel(x), np.ravel(y)
    dx, dy = x - np.mean(x), y - np.mean(y)
    sxx, syy = float(np.sum(dx * dx)), float(np.sum(dy * dy))
    if sxx == 0 or syy == 0:
        raise DegenerateSampleError("correlation is undefined for a constant input")
    return float(np.clip(np.sum(dx * dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def beta_rho(x, y) -> float:
    """Correlation between the Laplacians of two images."""
    x, y = _aligned(x, y)
    return pearson(laplacian(x), laplacian(y))


def measure(
    filtered,
    truth,
    labels,
    geometry: PhantomGeometry,
    replicate: int = 0,
    looks: float = 0.0,
    filter_name: str = "",
) -> MetricsRecord:
    """
    Compute all six measures of one filtered replicate against the phantom.

    A constant ENL patch is recorded as +inf with the nel_degenerate flag;
    other degenerate measures are recorded as NaN with a flag.
    """
    flags = []
    try:
        nel = enl(enl_patch(filtered, geometry))
    except DegenerateSampleError:
        logger.warning("replicate %d (%s, L=%g): constant ENL patch", replicate, filter_name, looks)
        nel, flags = math.inf, flags + ["nel_degenerate"]

    values = {}
    for name, compute in (("q_index", lambda: q_index(filtered, truth)), ("beta_rho", lambda: beta_rho(filtered, truth))):
        try:
            values[name] = compute()
        except DegenerateSampleError:
            logger.warning("replicate %d (%s, L=%g): degenerate %s", replicate, filter_name, looks, name)
            values[name], flags = math.nan, flags + [f"{name}_degenerate"]

    return MetricsRecord(
        replicate=replicate,
        looks=looks,
        filter_name=filter_name,
        nel=nel,
        line_pres=line_preservation(filtered, truth, labels),
        edge_grad=edge_gradient(filtered, labels),
        edge_var=edge_variance(filtered, labels, geometry),
        q_index=values["q_index"],
        beta_rho=values["beta_rho"],
        flags=flags,
    )
