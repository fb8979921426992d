import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from triseg.volume import (DataError, Volume, MultiModalSample, crop_resize,
                           normalize_intensity, region_masks)


def vol(arr, spacing=(1.0, 1.0, 1.0)):
    return Volume(np.asarray(arr), spacing)


class TestVolumeValidation:
    def test_rejects_non_3d(self):
        with pytest.raises(DataError):
            Volume(np.zeros((4, 4)))

    def test_rejects_bad_spacing(self):
        with pytest.raises(DataError):
            Volume(np.zeros((4, 4, 4)), spacing=(1.0, 0.0, 1.0))

    def test_sample_requires_matching_shapes(self):
        mods = [vol(np.zeros((4, 4, 4), np.float32)) for _ in range(4)]
        label = Volume(np.zeros((4, 4, 5), np.uint8))
        with pytest.raises(DataError):
            MultiModalSample(mods, label)

    def test_sample_requires_four_modalities(self):
        mods = [vol(np.zeros((4, 4, 4), np.float32)) for _ in range(3)]
        with pytest.raises(DataError):
            MultiModalSample(mods, Volume(np.zeros((4, 4, 4), np.uint8)))


class TestRegionMasks:
    def test_all_zero_label(self):
        wt, tc, et = region_masks(Volume(np.zeros((3, 3, 3), np.uint8)))
        assert wt.values.sum() == tc.values.sum() == et.values.sum() == 0

    def test_single_enhancing_voxel_in_all_regions(self):
        lab = np.zeros((3, 3, 3), np.uint8)
        lab[1, 1, 1] = 4
        wt, tc, et = region_masks(Volume(lab))
        for m in (wt, tc, et):
            assert m.values.sum() == 1 and m.values[1, 1, 1] == 1

    def test_membership_grid(self):
        lab = np.array([1, 2, 4, 0], np.uint8).reshape(1, 1, 4)
        wt, tc, et = region_masks(Volume(lab))
        assert wt.values.ravel().tolist() == [1, 1, 1, 0]
        assert tc.values.ravel().tolist() == [1, 0, 1, 0]
        assert et.values.ravel().tolist() == [0, 0, 1, 0]

    def test_invalid_value_named_in_error(self):
        lab = np.full((2, 2, 2), 3, np.uint8)
        with pytest.raises(DataError, match="3"):
            region_masks(Volume(lab))

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_nesting_for_random_labels(self, seed):
        rng = np.random.default_rng(seed)
        lab = rng.choice([0, 1, 2, 4], size=(5, 5, 5)).astype(np.uint8)
        wt, tc, et = region_masks(Volume(lab))
        assert (et.values <= tc.values).all()
        assert (tc.values <= wt.values).all()


class TestNormalizeIntensity:
    def test_all_zero_errors(self):
        with pytest.raises(DataError):
            normalize_intensity(vol(np.zeros((3, 3, 3), np.float32)))

    def test_constant_nonzero_maps_to_zeros(self):
        v = np.zeros((3, 3, 3), np.float32)
        v[0] = 5.0
        out = normalize_intensity(vol(v))
        assert (out.values == 0).all()

    def test_hand_zscore(self):
        v = np.zeros((1, 1, 5), np.float32)
        v[0, 0, :3] = [1, 2, 3]
        out = normalize_intensity(vol(v)).values[0, 0]
        np.testing.assert_allclose(out[:3], [-1.2247449, 0.0, 1.2247449], atol=1e-6)
        assert out[3] == out[4] == 0

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_support_mean_zero_std_one(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.uniform(0.5, 2.0, size=(6, 6, 6)).astype(np.float32)
        v[rng.random((6, 6, 6)) < 0.4] = 0.0
        if not (v != 0).any():
            return
        out = normalize_intensity(vol(v)).values
        support = out[v != 0]
        assert abs(support.mean()) < 1e-5
        if support.std() > 0:
            assert abs(support.std() - 1.0) < 1e-4
        assert (out[v == 0] == 0).all()


class TestCropResize:
    def test_identity_when_target_is_bbox(self):
        v = np.zeros((8, 8, 8), np.float32)
        v[2:6, 1:5, 3:7] = np.random.default_rng(0).uniform(1, 2, (4, 4, 4)).astype(np.float32)
        out = crop_resize(vol(v), (4, 4, 4))
        np.testing.assert_array_equal(out.values, v[2:6, 1:5, 3:7])

    def test_label_value_set_preserved(self):
        lab = np.zeros((8, 8, 8), np.uint8)
        lab[2:6, 2:6, 2:6] = np.random.default_rng(1).choice([1, 2, 4], (4, 4, 4)).astype(np.uint8)
        out = crop_resize(vol(lab), (3, 5, 7))
        assert out.values.dtype == np.uint8
        assert set(np.unique(out.values)) <= {0, 1, 2, 4}

    def test_downsample_constant_cube(self):
        v = np.zeros((8, 8, 8), np.float32)
        v[2:6, 2:6, 2:6] = 1.0
        out = crop_resize(vol(v), (2, 2, 2))
        np.testing.assert_array_equal(out.values, np.ones((2, 2, 2), np.float32))

    def test_spacing_rescaled(self):
        v = np.zeros((8, 8, 8), np.float32)
        v[0:4, 0:4, 0:4] = 1.0
        out = crop_resize(vol(v, spacing=(2.0, 2.0, 2.0)), (8, 8, 8))
        assert out.spacing == (1.0, 1.0, 1.0)

    def test_empty_volume_errors(self):
        with pytest.raises(DataError):
            crop_resize(vol(np.zeros((4, 4, 4), np.float32)), (2, 2, 2))
