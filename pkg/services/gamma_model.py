"""
Gamma model service for intensity data under the multiplicative model.

Z = X * Y with constant backscatter X = λ and unit-mean speckle Y ~ Γ(L, L),
so Z ~ Γ(L, L/λ) with E[Z] = λ and Var[Z] = λ²/L. Every function in the
package uses this shape/rate parameterization.
"""

import logging
from typing import Union

import numpy as np
from pydantic import ValidationError
from scipy.special import digamma, gammaln, polygamma, xlogy

from errors import DegenerateSampleError, DomainError
from schemas import MAX_LOOKS, MIN_LOOKS, GammaFit, GammaParams, RegionSample

logger = logging.getLogger(__name__)

LOOKS_RANGE = (MIN_LOOKS, MAX_LOOKS)
NEWTON_TOLERANCE = 1e-10
NEWTON_MAX_ITERATIONS = 100

ArrayLike = Union[float, np.ndarray]


def as_sample(values) -> RegionSample:
    """Wrap raw intensities in a RegionSample, raising DomainError on bad values."""
    if isinstance(values, RegionSample):
        return values
    try:
        return RegionSample.from_array(values)
    except ValidationError as e:
        raise DomainError(f"invalid region sample: {e.errors()[0]['msg']}") from None


def make_params(looks: float, mean: float) -> GammaParams:
    """Build GammaParams, raising DomainError instead of a validation error."""
    try:
        return GammaParams(looks=looks, mean=mean)
    except ValidationError as e:
        raise DomainError(f"invalid Gamma parameters: {e.errors()[0]['msg']}") from None


def log_density(z: ArrayLike, looks: ArrayLike, mean: ArrayLike) -> ArrayLike:
    """
    Vectorized log f_Z(z; L, λ) = L log(L/λ) - log Γ(L) + (L-1) log z - L z / λ.

    No validation; callers guarantee z, looks and mean are positive.
    """
    return looks * np.log(looks / mean) - gammaln(looks) + xlogy(looks - 1.0, z) - looks * z / mean


def gamma_density(z: float, params: GammaParams) -> float:
    """
    Density of Γ(L, L/λ) at z, evaluated in log space.

    Raises:
        DomainError: if z is not a positive finite number
    """
    if not np.isfinite(z) or z <= 0:
        raise DomainError(f"density is defined for z > 0, got {z!r}")
    return float(np.exp(log_density(z, params.looks, params.mean)))


def log_likelihood(sample: RegionSample, params: GammaParams) -> float:
    """Sum of log densities over the sample values."""
    sample = as_sample(sample)
    return float(np.sum(log_density(sample.array, params.looks, params.mean)))


def _check_spread(values: np.ndarray) -> None:
    if values.size < 2:
        raise DomainError(f"estimation needs at least 2 values, got {values.size}")
    if np.ptp(values) == 0:
        raise DegenerateSampleError(f"sample of {values.size} values has zero variance")


def moments_estimate(sample: RegionSample, looks_range: tuple[float, float] = LOOKS_RANGE) -> GammaParams:
    """
    Method-of-moments estimate: λ = mean, L = mean² / variance.

    The variance is the population (1/n) moment. L is clamped to looks_range.
    """
    values = as_sample(sample).array
    _check_spread(values)
    mean = float(np.mean(values))
    variance = float(np.mean((values - mean) ** 2))
    looks = float(np.clip(mean * mean / variance, *looks_range))
    return make_params(looks, mean)


def newton_looks(
    log_gap: np.ndarray,
    initial: np.ndarray,
    tolerance: float = NEWTON_TOLERANCE,
    max_iterations: int = NEWTON_MAX_ITERATIONS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Solve log L - ψ(L) = log_gap elementwise by safeguarded Newton iteration.

    log_gap is log(sample mean) - mean(log sample), the sufficient statistic of
    the profile likelihood in L; it must be positive. Each element stops being
    updated as soon as it converges, so its trajectory does not depend on the
    other elements of the array.

    Returns:
        (looks, converged mask, iterations used per element)
    """
    gap = np.asarray(log_gap, dtype=np.float64)
    looks = np.array(initial, dtype=np.float64, copy=True)
    active = np.ones(gap.shape, dtype=bool)
    iterations = np.zeros(gap.shape, dtype=np.int64)

    for _ in range(max_iterations):
        if not active.any():
            break
        current = looks[active]
        f = np.log(current) - digamma(current) - gap[active]
        slope = 1.0 / current - polygamma(1, current)
        proposed = current - f / slope
        # the function is convex and decreasing: an overshoot lands left of zero
        proposed = np.where(proposed > 0, proposed, current / 10.0)
        done = np.abs(proposed - current) <= tolerance * current
        looks[active] = proposed
        iterations[active] += 1
        still = active.copy()
        still[active] = ~done
        active = still

    return looks, ~active, iterations


def looks_beyond_range(log_gap: ArrayLike, max_looks: float) -> ArrayLike:
    """
    True where the profile-likelihood root certainly exceeds max_looks.

    log L - ψ(L) > 1/(2L) for every L > 0, so the root is above 1/(2 log_gap).
    A nonpositive gap means the spread is below the resolution of the logs.
    """
    gap = np.asarray(log_gap, dtype=np.float64)
    return (gap <= 0) | (0.5 >= max_looks * gap)


def newton_start(moments_looks: ArrayLike, looks_range: tuple[float, float]) -> ArrayLike:
    """Moments estimate kept within a decade of the clamp range."""
    return np.clip(moments_looks, looks_range[0] / 10.0, looks_range[1] * 10.0)


def fit_gamma(sample: RegionSample, looks_range: tuple[float, float] = LOOKS_RANGE) -> GammaFit:
    """
    Maximum-likelihood fit of Γ(L, L/λ) with convergence diagnostics.

    λ is the sample mean exactly. L solves the profile-likelihood equation,
    starting from the moments estimate. If Newton does not converge within
    NEWTON_MAX_ITERATIONS the moments estimate is returned instead.

    Raises:
        DegenerateSampleError: if the sample has zero variance
        DomainError: if the sample holds fewer than two values or a nonpositive one
    """
    values = as_sample(sample).array
    _check_spread(values)
    moments = moments_estimate(sample, looks_range)
    mean = float(np.mean(values))
    log_gap = np.log(mean) - float(np.mean(np.log(values)))

    if looks_beyond_range(log_gap, looks_range[1]):
        return GammaFit(params=make_params(looks_range[1], mean), converged=True, iterations=0, method="newton")

    initial = newton_start(moments.mean ** 2 / float(np.mean((values - mean) ** 2)), looks_range)
    looks, converged, iterations = newton_looks(np.array(log_gap), np.array(initial))
    if not bool(converged) or not np.isfinite(looks):
        logger.warning("Newton did not converge after %d iterations; using moments estimate", int(iterations))
        return GammaFit(params=moments, converged=False, iterations=int(iterations), method="moments")

    clamped = float(np.clip(looks, *looks_range))
    return GammaFit(params=make_params(clamped, mean), converged=True, iterations=int(iterations), method="newton")


def mle_estimate(sample: RegionSample, looks_range: tuple[float, float] = LOOKS_RANGE) -> GammaParams:
    """Maximum-likelihood estimate (L, λ); see fit_gamma."""
    return fit_gamma(sample, looks_range).params


def speckle_field(shape: tuple[int, ...], looks: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean Γ(L, L) speckle drawn from rng."""
    if looks <= 0:
        raise DomainError(f"looks must be positive, got {looks!r}")
    return rng.gamma(shape=looks, scale=1.0 / looks, size=shape)


def sample_gamma(params: GammaParams, count: int, rng: Union[np.random.Generator, int]) -> RegionSample:
    """
    Draw count independent values from Γ(L, L/λ).

    rng is a numpy Generator or an integer seed; numpy's Marsaglia–Tsang
    rejection sampler makes the draws a function of the seed stream only.
    """
    if count < 1:
        raise DomainError(f"count must be at least 1, got {count}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    draws = params.mean * speckle_field((count,), params.looks, rng)
    return RegionSample.from_array(draws)
