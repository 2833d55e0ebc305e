"""
Speckle filters: the stochastic-distance (Kullback–Leibler) filter over
Nagao–Matsuyama windows, the Lee filter and a boxcar mean filter.

Every filter reads only from its input raster and writes each output pixel
once, with mirror reflection at the borders.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from errors import DegenerateSampleError, DomainError
from schemas import FilterConfig, RegionSample, TestOutcome, WindowMaskSet
from services.divergence_tests import chi2_p_values, decide, kl_kernel, kl_statistic, statistic_prefactor
from services.gamma_model import as_sample, fit_gamma, looks_beyond_range, newton_looks, newton_start
from services.window_masks import NAGAO_MATSUYAMA_MASKS, WINDOW_RADIUS, mask_indices, membership

logger = logging.getLogger(__name__)

FILTER_METHODS = {
    "kl": {
        "name": "kl",
        "display_name": "Kullback-Leibler",
        "code": "KL",
        "description": "Stochastic-distance filter over Nagao-Matsuyama regions",
    },
    "lee": {
        "name": "lee",
        "display_name": "Lee",
        "code": "L",
        "description": "Local-statistics MMSE filter",
    },
    "mean": {
        "name": "mean",
        "display_name": "Mean",
        "code": "M",
        "description": "Boxcar mean",
    },
}


def check_raster(image) -> np.ndarray:
    """
    Return image as a 2-D float64 array of positive finite intensities.

    Raises:
        DomainError: naming the first offending coordinate
    """
    raster = np.asarray(image, dtype=np.float64)
    if raster.ndim != 2 or raster.size == 0:
        raise DomainError(f"expected a nonempty 2-D raster, got shape {raster.shape}")
    bad = ~(np.isfinite(raster) & (raster > 0))
    if bad.any():
        row, col = (int(v) for v in np.argwhere(bad)[0])
        raise DomainError(f"pixel ({row}, {col}) holds {raster[row, col]!r}; intensities must be positive")
    return raster


def mirror_pad(image: np.ndarray, radius: int) -> np.ndarray:
    """Pad by reflection about the edge pixels (the edge itself is not repeated)."""
    return np.pad(image, radius, mode="reflect")


def ordered_sum(values: np.ndarray) -> np.ndarray:
    """Sum over the last axis in a fixed left-to-right order."""
    total = values[..., 0].copy()
    for j in range(1, values.shape[-1]):
        total = total + values[..., j]
    return total


def _windows(image: np.ndarray, radius: int) -> np.ndarray:
    side = 2 * radius + 1
    return sliding_window_view(mirror_pad(image, radius), (side, side))


def extract_regions(image, center: tuple[int, int], masks: WindowMaskSet = NAGAO_MATSUYAMA_MASKS) -> list[RegionSample]:
    """The nine samples of the 5x5 neighborhood of center, read after mirror reflection."""
    raster = check_raster(image)
    row, col = center
    if not (0 <= row < raster.shape[0] and 0 <= col < raster.shape[1]):
        raise DomainError(f"center {center} lies outside a raster of shape {raster.shape}")
    window = _windows(raster, WINDOW_RADIUS)[row, col]
    return [RegionSample.from_array(window[rows, cols]) for rows, cols in mask_indices(masks)]


def pooled_looks(values: np.ndarray, logs: np.ndarray, config: FilterConfig) -> np.ndarray:
    """
    Vectorized maximum-likelihood L̂ over the last axis, clamped to the config range.

    Samples whose root lies beyond max_looks (including constant samples) get
    max_looks; elements where Newton does not converge fall back to moments.
    """
    count = values.shape[-1]
    mean = ordered_sum(values) / count
    log_gap = np.log(mean) - ordered_sum(logs) / count
    deviations = values - mean[..., None]
    variance = ordered_sum(deviations * deviations) / count

    beyond = looks_beyond_range(log_gap, config.max_looks) | (variance <= 0)
    moments = mean * mean / np.where(beyond, 1.0, variance)
    initial = newton_start(np.where(beyond, 1.0, moments), (config.min_looks, config.max_looks))
    looks, converged, _ = newton_looks(np.where(beyond, 1.0, log_gap), initial)

    failed = ~converged & ~beyond
    if failed.any():
        logger.warning("Newton did not converge on %d samples; using moments estimates", int(failed.sum()))
        looks = np.where(failed, moments, looks)
    looks = np.clip(looks, config.min_looks, config.max_looks)
    return np.where(beyond, config.max_looks, looks)


def _region_decisions(windows: np.ndarray, log_windows: np.ndarray, masks: WindowMaskSet, config: FilterConfig):
    """KL statistics and acceptance flags of the eight regions for every window."""
    indices = mask_indices(masks)
    rows, cols = indices[0]
    central, central_logs = windows[..., rows, cols], log_windows[..., rows, cols]
    m = central.shape[-1]
    central_mean = ordered_sum(central) / m

    sums, statistics, accepted = [], [], []
    for rows, cols in indices[1:]:
        region = windows[..., rows, cols]
        n = region.shape[-1]
        region_sum = ordered_sum(region)
        if config.looks_mode == "fixed":
            looks = np.full(central_mean.shape, config.nominal_looks)
        else:
            pooled = np.concatenate([central, region], axis=-1)
            pooled_logs = np.concatenate([central_logs, log_windows[..., rows, cols]], axis=-1)
            looks = pooled_looks(pooled, pooled_logs, config)
        statistic = statistic_prefactor(m, n) * kl_kernel(central_mean, region_sum / n, looks)
        p_values = chi2_p_values(statistic, config.degrees_of_freedom)
        sums.append(region_sum)
        statistics.append(statistic)
        accepted.append(p_values >= config.significance)
    return ordered_sum(central), sums, np.stack(statistics, axis=-1), np.stack(accepted, axis=-1)


def _kl_windows(windows: np.ndarray, log_windows: np.ndarray, masks: WindowMaskSet, config: FilterConfig):
    """Filtered values and acceptance counts for a block of windows."""
    central_sum, sums, _, accepted = _region_decisions(windows, log_windows, masks, config)
    sizes = masks.region_sizes

    if config.dedupe:
        table = membership(masks)
        union = np.broadcast_to(table[0], accepted.shape[:-1] + table[0].shape).copy()
        for i in range(accepted.shape[-1]):
            union |= accepted[..., i, None] & table[i + 1]
        flat = windows.reshape(windows.shape[:-2] + (-1,))
        total = ordered_sum(np.where(union, flat, 0.0))
        count = ordered_sum(union.astype(np.float64))
    else:
        total = central_sum
        count = np.full(central_sum.shape, float(sizes[0]))
        for i, region_sum in enumerate(sums):
            total = total + np.where(accepted[..., i], region_sum, 0.0)
            count = count + np.where(accepted[..., i], float(sizes[i + 1]), 0.0)

    return total / count, accepted.sum(axis=-1)


def _kl_bands(image: np.ndarray, masks: WindowMaskSet, config: FilterConfig, workers: int):
    windows = _windows(image, WINDOW_RADIUS)
    log_windows = _windows(np.log(image), WINDOW_RADIUS)
    bands = np.array_split(np.arange(image.shape[0]), max(1, min(workers, image.shape[0])))

    def run(band: np.ndarray):
        rows = slice(int(band[0]), int(band[-1]) + 1)
        return _kl_windows(windows[rows], log_windows[rows], masks, config)

    if workers <= 1 or len(bands) == 1:
        results = [run(band) for band in bands]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run, bands))
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def filter_pixel_kl(
    image,
    center: tuple[int, int],
    masks: WindowMaskSet = NAGAO_MATSUYAMA_MASKS,
    config: Optional[FilterConfig] = None,
) -> float:
    """Stochastic-distance filtered value of one pixel."""
    config = config or FilterConfig()
    raster = check_raster(image)
    row, col = center
    if not (0 <= row < raster.shape[0] and 0 <= col < raster.shape[1]):
        raise DomainError(f"center {center} lies outside a raster of shape {raster.shape}")
    windows = _windows(raster, WINDOW_RADIUS)[row:row + 1, col:col + 1]
    log_windows = _windows(np.log(raster), WINDOW_RADIUS)[row:row + 1, col:col + 1]
    values, _ = _kl_windows(windows, log_windows, masks, config)
    return float(values[0, 0])


def kl_filter(image, config: Optional[FilterConfig] = None, masks: WindowMaskSet = NAGAO_MATSUYAMA_MASKS,
              workers: int = 1) -> np.ndarray:
    """Stochastic-distance filter of a whole raster; identical output for any worker count."""
    config = config or FilterConfig()
    values, _ = _kl_bands(check_raster(image), masks, config, workers)
    return values


def acceptance_map(image, config: Optional[FilterConfig] = None, masks: WindowMaskSet = NAGAO_MATSUYAMA_MASKS,
                   workers: int = 1) -> np.ndarray:
    """Number of accepted regions (0-8) at every pixel."""
    config = config or FilterConfig()
    _, counts = _kl_bands(check_raster(image), masks, config, workers)
    return counts


def _region_looks(central: RegionSample, region: RegionSample, config: FilterConfig) -> float:
    if config.looks_mode == "fixed":
        return config.nominal_looks
    pooled = RegionSample(values=central.values + region.values)
    try:
        return fit_gamma(pooled, (config.min_looks, config.max_looks)).params.looks
    except DegenerateSampleError:
        return config.max_looks


def region_outcomes(samples: list[RegionSample], config: Optional[FilterConfig] = None) -> list[TestOutcome]:
    """
    Test each of samples[1:] against the central sample samples[0].

    Returns:
        One TestOutcome per directional region
    """
    config = config or FilterConfig()
    samples = [as_sample(sample) for sample in samples]
    if len(samples) < 2:
        raise DomainError("need a central sample and at least one region")
    central = samples[0]
    central_mean = float(np.mean(central.array))
    outcomes = []
    for region in samples[1:]:
        looks = _region_looks(central, region, config)
        statistic = kl_statistic(central, region, looks, (central_mean, float(np.mean(region.array))))
        outcomes.append(decide(statistic, config.degrees_of_freedom, config.significance))
    return outcomes



def filter_from_regions(samples: list[RegionSample], config: Optional[FilterConfig] = None) -> float:
    """
    Accept/average rule on nine given samples.

    The output pools the central sample with every accepted region, counting a
    value once per sample it appears in; with all regions rejected it is the
    central mean.
    """
    config = config or FilterConfig()
    samples = [as_sample(sample) for sample in samples]
    outcomes = region_outcomes(samples, config)
    pooled = list(samples[0].values)
    for region, outcome in zip(samples[1:], outcomes):
        if outcome.accepted:
            pooled.extend(region.values)
    return float(np.mean(pooled))


def lee_filter(image, nominal_looks: float, window_side: int = 5) -> np.ndarray:
    """
    Lee local-statistics MMSE filter.

    x̂ = z̄ + w (z - z̄) with w = max(0, 1 - C_u² / C_z²), C_u² = 1 / L and
    C_z² = local variance / z̄² over the window (population moments).
    """
    if window_side not in (3, 5, 7):
        raise DomainError(f"window_side must be 3, 5 or 7, got {window_side!r}")
    if nominal_looks <= 0:
        raise DomainError(f"nominal_looks must be positive, got {nominal_looks!r}")
    raster = check_raster(image)
    windows = _windows(raster, window_side // 2)
    local_mean = windows.mean(axis=(-2, -1))
    local_var = ((windows - local_mean[..., None, None]) ** 2).mean(axis=(-2, -1))

    with np.errstate(divide="ignore", invalid="ignore"):
        cz2 = local_var / (local_mean * local_mean)
        weight = np.where(cz2 > 0, np.maximum(0.0, 1.0 - (1.0 / nominal_looks) / cz2), 0.0)
    return local_mean + weight * (raster - local_mean)


def mean_filter(image, window_side: int = 3) -> np.ndarray:
    """Boxcar mean with mirror padding."""
    if window_side < 1 or window_side % 2 == 0:
        raise DomainError(f"window_side must be a positive odd integer, got {window_side!r}")
    raster = check_raster(image)
    return _windows(raster, window_side // 2).mean(axis=(-2, -1))


def filter_image(image, config: Optional[FilterConfig] = None, workers: int = 1) -> np.ndarray:
    """Apply the filter selected by config.method to a whole raster."""
    config = config or FilterConfig()
    if config.method == "kl":
        return kl_filter(image, config, workers=workers)
    if config.method == "lee":
        return lee_filter(image, config.nominal_looks, config.lee_window)
    return mean_filter(image, config.mean_window)
