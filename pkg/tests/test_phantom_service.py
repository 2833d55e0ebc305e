import numpy as np
import pytest
from pydantic import ValidationError

from errors import DomainError, GeometryError
from schemas import BACKGROUND, BLOCK, EDGE_BAND, LINE, PhantomSpec
from services.phantom_service import corrupt, enl_patch, generate_phantom, phantom_geometry
from services.quality_metrics import enl


class TestGeometry:

    def test_default_label_counts(self, default_phantom):
        _, _, labels, geometry = default_phantom
        expected = {BACKGROUND: 60275, LINE: 637, BLOCK: 3600, EDGE_BAND: 1024}
        assert geometry.label_counts == expected
        values, counts = np.unique(labels, return_counts=True)
        assert dict(zip(values.tolist(), counts.tolist())) == expected

    def test_default_layout(self, default_phantom):
        _, _, _, geometry = default_phantom
        assert (geometry.block_start, geometry.block_stop) == (96, 160)
        assert geometry.vertical_col == 32
        assert geometry.horizontal_row == 224
        assert geometry.patch_rows == (16, 80)
        assert geometry.patch_cols == (176, 240)

    def test_small_side_counts(self, small_phantom):
        _, _, labels, geometry = small_phantom
        assert geometry.label_counts == {BACKGROUND: 3539, LINE: 157, BLOCK: 144, EDGE_BAND: 256}
        assert labels.shape == (64, 64)

    def test_band_inside_block(self, default_phantom):
        _, _, labels, geometry = default_phantom
        inside = labels[geometry.block_start:geometry.block_stop, geometry.block_start:geometry.block_stop]
        assert (inside == EDGE_BAND).sum() == 496

    def test_side_not_multiple_of_16(self):
        with pytest.raises(GeometryError):
            phantom_geometry(PhantomSpec(side=72))

    def test_side_too_small(self):
        with pytest.raises(ValidationError):
            PhantomSpec(side=32)

    def test_levels_must_differ(self):
        with pytest.raises(ValidationError):
            PhantomSpec(background_mean=30.0, line_mean=30.0)


class TestTruth:

    def test_two_levels(self, default_phantom):
        _, truth, labels, geometry = default_phantom
        assert set(np.unique(truth).tolist()) == {30.0, 120.0}
        assert (truth[labels == LINE] == 120.0).all()
        assert (truth[labels == BLOCK] == 120.0).all()
        assert (truth[labels == BACKGROUND] == 30.0).all()
        lo, hi = geometry.block_start, geometry.block_stop
        assert (truth[lo:hi, lo:hi] == 120.0).all()

    def test_patch_is_background(self, default_phantom):
        _, truth, labels, geometry = default_phantom
        assert enl_patch(truth, geometry).shape == (64, 64)
        assert (enl_patch(labels, geometry) == BACKGROUND).all()

    def test_custom_levels(self):
        truth, labels = generate_phantom(PhantomSpec(side=64, background_mean=10.0, line_mean=5.0))
        assert (truth[labels == LINE] == 5.0).all()
        assert (truth[labels == BACKGROUND] == 10.0).all()

    def test_deterministic(self):
        first = generate_phantom(PhantomSpec(side=128))
        second = generate_phantom(PhantomSpec(side=128))
        assert np.array_equal(first[0], second[0])
        assert np.array_equal(first[1], second[1])


class TestCorruption:

    @pytest.mark.parametrize("looks,tolerance", [(1.0, 0.05), (4.0, 0.2)])
    def test_homogeneous_enl(self, looks, tolerance):
        noisy = corrupt(np.full((256, 256), 30.0), looks, 3)
        assert enl(noisy) == pytest.approx(looks, abs=tolerance)
        assert noisy.mean() == pytest.approx(30.0, rel=0.01)

    def test_same_seed_same_image(self, small_phantom):
        _, truth, _, _ = small_phantom
        assert np.array_equal(corrupt(truth, 4.0, 12), corrupt(truth, 4.0, 12))
        assert not np.array_equal(corrupt(truth, 4.0, 12), corrupt(truth, 4.0, 13))

    def test_pixels_independent(self):
        noisy = corrupt(np.full((256, 256), 30.0), 1.0, 8)
        horizontal = np.corrcoef(noisy[:, :-1].ravel(), noisy[:, 1:].ravel())[0, 1]
        vertical = np.corrcoef(noisy[:-1, :].ravel(), noisy[1:, :].ravel())[0, 1]
        assert abs(horizontal) < 0.02
        assert abs(vertical) < 0.02

    def test_multiplicative(self, small_phantom):
        _, truth, _, _ = small_phantom
        noisy = corrupt(truth, 4.0, 1)
        speckle = corrupt(np.ones_like(truth), 4.0, 1)
        np.testing.assert_allclose(noisy, truth * speckle, rtol=1e-15)

    def test_invalid_input(self):
        with pytest.raises(DomainError):
            corrupt(np.zeros((4, 4)), 1.0, 0)
        with pytest.raises(DomainError):
            corrupt(np.ones((4, 4)), 0.0, 0)
