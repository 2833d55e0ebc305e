"""Tests for the stochastic-distance, Lee and mean filters."""

import numpy as np
import pytest

from errors import DomainError
from schemas import FilterConfig, RegionSample
from services.phantom_service import enl_patch
from services.quality_metrics import enl
from services.speckle_filters import (
    acceptance_map,
    extract_regions,
    filter_from_regions,
    filter_image,
    filter_pixel_kl,
    kl_filter,
    lee_filter,
    mean_filter,
    pooled_looks,
    region_outcomes,
)
from services.window_masks import membership

FIXED_ONE_LOOK = FilterConfig(looks_mode="fixed", nominal_looks=1.0)


def _samples(central, regions):
    return [RegionSample(values=central)] + [RegionSample(values=r) for r in regions]


class TestRegionRule:

    def test_discrepant_region_rejected(self):
        samples = _samples([30.0] * 9, [[3000.0] * 7] + [[30.0] * 7] * 7)
        outcomes = region_outcomes(samples, FIXED_ONE_LOOK)
        assert [o.accepted for o in outcomes] == [False] + [True] * 7
        assert filter_from_regions(samples, FIXED_ONE_LOOK) == pytest.approx(30.0, rel=1e-15)

    def test_discrepant_region_rejected_with_pooled_looks(self):
        samples = _samples([30.0] * 9, [[3000.0] * 7] + [[30.0] * 7] * 7)
        outcomes = region_outcomes(samples, FilterConfig())
        assert not outcomes[0].accepted
        assert all(o.accepted for o in outcomes[1:])

    def test_all_rejected_gives_central_mean(self):
        central = [28.0, 29.0, 30.0, 31.0, 32.0, 30.0, 29.0, 31.0, 30.0]
        samples = _samples(central, [[300.0] * 7] * 8)
        assert not any(o.accepted for o in region_outcomes(samples, FIXED_ONE_LOOK))
        assert filter_from_regions(samples, FIXED_ONE_LOOK) == pytest.approx(30.0, rel=1e-15)

    def test_outcomes_carry_the_level(self):
        samples = _samples([30.0] * 9, [[45.0] * 7] * 8)
        for outcome in region_outcomes(samples, FilterConfig(looks_mode="fixed", significance=0.01)):
            assert outcome.significance == 0.01
            assert outcome.accepted == (outcome.p_value >= 0.01)

    def test_needs_a_region(self):
        with pytest.raises(DomainError):
            region_outcomes([RegionSample(values=[1.0, 2.0])])


class TestKullbackLeiblerFilter:

    def test_constant_fixed_point(self):
        image = np.full((12, 12), 30.0)
        assert np.array_equal(kl_filter(image), image)
        assert np.array_equal(kl_filter(image, FilterConfig(dedupe=True)), image)

    @pytest.mark.parametrize("factor", [0.1, 7.3])
    def test_scale_equivariance(self, speckled_64, factor):
        base = kl_filter(speckled_64)
        scaled = kl_filter(speckled_64 * factor)
        np.testing.assert_allclose(scaled, base * factor, rtol=1e-9)

    def test_acceptances_monotone_in_level(self, speckled_64):
        counts = [acceptance_map(speckled_64, FilterConfig(significance=eta)) for eta in (0.01, 0.05, 0.2)]
        assert (counts[0] >= counts[1]).all()
        assert (counts[1] >= counts[2]).all()
        assert counts[0].min() >= 0 and counts[0].max() <= 8

    def test_same_output_for_any_worker_count(self, speckled_64):
        single = kl_filter(speckled_64, workers=1)
        assert np.array_equal(single, kl_filter(speckled_64, workers=4))
        assert np.array_equal(single, kl_filter(speckled_64, workers=7))
        assert np.array_equal(single, kl_filter(speckled_64, workers=1))

    def test_single_pixel_matches_whole_raster(self, speckled_64):
        whole = kl_filter(speckled_64)
        for center in [(0, 0), (0, 63), (20, 20), (31, 45), (63, 63)]:
            assert filter_pixel_kl(speckled_64, center) == whole[center]

    def test_single_pixel_matches_region_rule(self, speckled_64):
        for center in [(1, 1), (20, 20), (40, 10)]:
            regions = extract_regions(speckled_64, center)
            expected = filter_from_regions(regions, FIXED_ONE_LOOK)
            assert filter_pixel_kl(speckled_64, center, config=FIXED_ONE_LOOK) == pytest.approx(expected, rel=1e-12)

    def test_output_within_window_range(self, speckled_64):
        filtered = kl_filter(speckled_64)
        padded = np.pad(speckled_64, 2, mode="reflect")
        windows = np.lib.stride_tricks.sliding_window_view(padded, (5, 5))
        assert (filtered >= windows.min(axis=(-2, -1)) - 1e-12).all()
        assert (filtered <= windows.max(axis=(-2, -1)) + 1e-12).all()

    def test_union_weighting(self, speckled_64):
        accept_all = {"looks_mode": "fixed", "nominal_looks": 1e-6}
        center = (30, 30)
        window = speckled_64[28:33, 28:33].ravel()
        weights = membership().sum(axis=0)

        multiset = filter_pixel_kl(speckled_64, center, config=FilterConfig(**accept_all))
        assert multiset == pytest.approx(np.sum(weights * window) / weights.sum(), rel=1e-12)

        deduplicated = filter_pixel_kl(speckled_64, center, config=FilterConfig(dedupe=True, **accept_all))
        assert deduplicated == pytest.approx(window.mean(), rel=1e-12)

    def test_reduces_speckle(self, noisy_small_phantom):
        noisy, truth, labels, geometry = noisy_small_phantom
        filtered = kl_filter(noisy)
        assert enl(enl_patch(filtered, geometry)) > 2 * enl(enl_patch(noisy, geometry))

    @pytest.mark.slow
    def test_reduces_speckle_on_every_seed(self):
        for seed in range(20):
            noisy = 30.0 * np.random.default_rng(seed).gamma(4.0, 0.25, size=(128, 128))
            assert enl(kl_filter(noisy)) > enl(noisy)

    def test_rejects_nonpositive_pixel(self):
        image = np.full((6, 6), 30.0)
        image[1, 2] = 0.0
        with pytest.raises(DomainError, match=r"\(1, 2\)"):
            kl_filter(image)

    def test_rejects_non_raster(self):
        with pytest.raises(DomainError):
            kl_filter(np.ones(10))


class TestRegionExtraction:

    def test_constant_image(self):
        regions = extract_regions(np.full((6, 6), 30.0), (0, 5))
        assert all(set(r.values) == {30.0} for r in regions)

    def test_corner_uses_mirror_reflection(self):
        image = np.arange(1.0, 37.0).reshape(6, 6)
        central = extract_regions(image, (0, 0))[0].values
        expected = [image[1, 1], image[1, 0], image[1, 1],
                    image[0, 1], image[0, 0], image[0, 1],
                    image[1, 1], image[1, 0], image[1, 1]]
        assert central == expected

    def test_nine_samples(self):
        regions = extract_regions(np.arange(1.0, 50.0).reshape(7, 7), (3, 3))
        assert [r.size for r in regions] == [9] + [7] * 8
        assert regions[1].values[-1] == 25.0

    def test_center_outside(self):
        with pytest.raises(DomainError):
            extract_regions(np.ones((5, 5)), (5, 0))


class TestPooledLooks:

    def test_constant_samples_take_the_upper_bound(self):
        values = np.full((3, 16), 30.0)
        looks = pooled_looks(values, np.log(values), FilterConfig())
        assert (looks == 1000.0).all()

    def test_matches_scalar_fit(self, rng):
        from services.gamma_model import fit_gamma

        values = rng.gamma(3.0, 10.0, size=(5, 16))
        looks = pooled_looks(values, np.log(values), FilterConfig())
        for row, estimate in zip(values, looks):
            assert estimate == pytest.approx(fit_gamma(RegionSample.from_array(row)).params.looks, rel=1e-8)


class TestLeeFilter:

    def test_impulse_matches_hand_weight(self):
        image = np.full((9, 9), 30.0)
        image[4, 4] = 3000.0
        mean = (24 * 30.0 + 3000.0) / 25
        variance = (24 * 30.0 ** 2 + 3000.0 ** 2) / 25 - mean ** 2
        weight = 1.0 - 1.0 / (variance / mean ** 2)
        out = lee_filter(image, nominal_looks=1.0, window_side=5)
        assert 30.0 < out[4, 4] < 3000.0
        assert out[4, 4] == pytest.approx(mean + weight * (3000.0 - mean), rel=1e-10)

    def test_constant_fixed_point(self):
        image = np.full((8, 8), 55.0)
        assert np.allclose(lee_filter(image, 4.0), image, rtol=1e-15)

    def test_weight_clipped_to_zero(self):
        rng = np.random.default_rng(4)
        image = 30.0 * rng.gamma(1.0, 1.0, size=(32, 32))
        # C_u² = 4 exceeds every local C_z², so w = 0
        out = lee_filter(image, nominal_looks=0.25, window_side=3)
        local = mean_filter(image, 3)
        assert np.allclose(out, local, rtol=1e-12)

    @pytest.mark.parametrize("side", [1, 4, 9])
    def test_window_sizes(self, side):
        with pytest.raises(DomainError):
            lee_filter(np.ones((8, 8)), 1.0, side)


class TestMeanFilter:

    def test_single_bright_pixel(self):
        image = np.full((5, 5), 30.0)
        image[2, 2] = 90.0
        assert mean_filter(image, 3)[2, 2] == pytest.approx((8 * 30.0 + 90.0) / 9)
        assert mean_filter(image, 3)[2, 2] == pytest.approx(36.67, abs=5e-3)

    def test_even_window_rejected(self):
        with pytest.raises(DomainError):
            mean_filter(np.ones((5, 5)), 4)


class TestDispatch:

    def test_methods(self, speckled_64):
        assert np.array_equal(filter_image(speckled_64, FilterConfig(method="mean")), mean_filter(speckled_64, 3))
        assert np.array_equal(
            filter_image(speckled_64, FilterConfig(method="lee", nominal_looks=2.0, lee_window=7)),
            lee_filter(speckled_64, 2.0, 7),
        )
        assert np.array_equal(filter_image(speckled_64), kl_filter(speckled_64))
