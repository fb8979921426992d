import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from triseg.metrics import (MetricInputError, border_mask, dice_score,
                            hausdorff_distance, joint_intensity_histogram,
                            aggregate_region_metrics, RegionMetrics)
from triseg.synth import CorrelationSpec, generate_synthetic_sample
from triseg.volume import region_masks


def brute_force_hd(a, b, spacing=(1.0, 1.0, 1.0)):
    """All-pairs oracle over border voxel sets."""
    pa = np.argwhere(border_mask(a)) * np.asarray(spacing)
    pb = np.argwhere(border_mask(b)) * np.asarray(spacing)
    d = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(-1))
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def random_mask(rng, shape, p=0.3):
    m = rng.random(shape) < p
    if not m.any():
        m[tuple(c // 2 for c in shape)] = True
    return m


class TestDiceScore:
    def test_identical_masks(self):
        m = np.zeros((4, 4, 4), bool)
        m[1:3, 1:3, 1:3] = True
        assert dice_score(m, m) == 1.0

    def test_counting_example(self):
        # TP=3, FP=1, FN=2 -> 6/9
        p = np.zeros((1, 1, 6), bool)
        t = np.zeros((1, 1, 6), bool)
        p[0, 0, :4] = True          # 4 positives
        t[0, 0, [0, 1, 2, 4, 5]] = True  # overlap 3, misses 2
        assert dice_score(p, t) == pytest.approx(6 / 9)

    def test_disjoint_masks(self):
        p = np.zeros((2, 2, 2), bool); p[0] = True
        t = np.zeros((2, 2, 2), bool); t[1] = True
        assert dice_score(p, t) == 0.0

    def test_empty_conventions(self):
        e = np.zeros((3, 3, 3), bool)
        m = e.copy(); m[1, 1, 1] = True
        assert dice_score(e, e) == 1.0
        assert dice_score(e, m) == 0.0
        assert dice_score(m, e) == 0.0

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_mask(rng, (5, 5, 5)), random_mask(rng, (5, 5, 5))
        assert dice_score(a, b) == dice_score(b, a)


class TestHausdorff:
    def test_identical_masks_zero(self):
        m = np.zeros((5, 5, 5), bool)
        m[1:4, 1:4, 1:4] = True
        assert hausdorff_distance(m, m) == 0.0

    def test_three_four_five(self):
        a = np.zeros((6, 6, 6), bool); a[0, 0, 0] = True
        b = np.zeros((6, 6, 6), bool); b[3, 4, 0] = True
        assert hausdorff_distance(a, b) == pytest.approx(5.0)

    def test_spacing_scales(self):
        a = np.zeros((4, 4, 4), bool); a[0, 0, 0] = True
        b = np.zeros((4, 4, 4), bool); b[2, 0, 0] = True
        assert hausdorff_distance(a, b, spacing=(2.5, 1.0, 1.0)) == pytest.approx(5.0)

    def test_empty_mask_undefined(self):
        m = np.zeros((3, 3, 3), bool)
        full = ~m
        assert hausdorff_distance(m, full) is None
        assert hausdorff_distance(full, m) is None

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_matches_brute_force_oracle(self, seed):
        rng = np.random.default_rng(seed)
        shape = tuple(int(x) for x in rng.integers(3, 9, size=3))
        a, b = random_mask(rng, shape), random_mask(rng, shape)
        spacing = tuple(rng.choice([0.5, 1.0, 2.0], size=3))
        got = hausdorff_distance(a, b, spacing)
        assert got == pytest.approx(brute_force_hd(a, b, spacing), abs=1e-9)

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_mask(rng, (6, 6, 6)), random_mask(rng, (6, 6, 6))
        assert hausdorff_distance(a, b) == hausdorff_distance(b, a)

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_added_voxel_changes_hd_boundedly(self, seed):
        rng = np.random.default_rng(seed)
        a = random_mask(rng, (6, 6, 6))
        b = a.copy()
        free = np.argwhere(~b)
        if free.size == 0:
            return
        new = tuple(free[rng.integers(len(free))])
        b[new] = True
        hd = hausdorff_distance(a, b)
        dist_to_old_surface = np.sqrt(
            ((np.argwhere(border_mask(a)) - np.asarray(new)) ** 2).sum(-1)).min()
        assert hd <= dist_to_old_surface + 1e-9

    def test_hd95_leq_exact(self):
        rng = np.random.default_rng(3)
        a, b = random_mask(rng, (8, 8, 8)), random_mask(rng, (8, 8, 8))
        assert hausdorff_distance(a, b, percentile=95) <= hausdorff_distance(a, b) + 1e-12


class TestBorderMask:
    def test_solid_cube_border_is_shell(self):
        m = np.zeros((6, 6, 6), bool)
        m[1:5, 1:5, 1:5] = True
        border = border_mask(m)
        assert border.sum() == 4 ** 3 - 2 ** 3

    def test_volume_boundary_counts_as_border(self):
        m = np.ones((3, 3, 3), bool)
        assert border_mask(m).sum() == 27 - 1  # only the center voxel is interior


class TestJointHistogram:
    def test_identical_volumes_concentrate_on_diagonal(self):
        rng = np.random.default_rng(0)
        v = rng.uniform(0, 1, (6, 6, 6))
        counts, _, _ = joint_intensity_histogram(v, v, bins=8)
        off_diag = counts.sum() - np.trace(counts)
        assert off_diag == 0

    def test_total_equals_mask_count(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(5, 5, 5)), rng.normal(size=(5, 5, 5))
        mask = rng.random((5, 5, 5)) < 0.5
        counts, _, _ = joint_intensity_histogram(a, b, bins=4, mask=mask)
        assert counts.sum() == mask.sum()

    def test_planted_quadratic_traced(self):
        spec = CorrelationSpec().with_noise(0.0)
        s = generate_synthetic_sample(2, (32, 32, 32), spec)
        wt = region_masks(s.label)[0].values.astype(bool)
        a, b, c = spec.coefficients[0]
        counts, xe, ye = joint_intensity_histogram(
            s.modality(1), s.modality(3), bins=16, mask=wt)
        xc = (xe[:-1] + xe[1:]) / 2
        bin_h = ye[1] - ye[0]
        for i, j in zip(*np.nonzero(counts)):
            expected = a * xc[i] ** 2 + b * xc[i] + c
            lo, hi = ye[j], ye[j + 1]
            assert lo - bin_h <= expected <= hi + bin_h

    def test_empty_mask_errors(self):
        v = np.ones((3, 3, 3))
        with pytest.raises(MetricInputError):
            joint_intensity_histogram(v, v, bins=4, mask=np.zeros((3, 3, 3), bool))

    def test_too_few_bins(self):
        v = np.ones((3, 3, 3))
        with pytest.raises(MetricInputError):
            joint_intensity_histogram(v, v, bins=1)


def test_aggregate_excludes_undefined_hd():
    rows = [RegionMetrics("a", "wt", 0.8, 2.0),
            RegionMetrics("b", "wt", 0.6, None),
            RegionMetrics("a", "tc", 0.5, 1.0),
            RegionMetrics("b", "tc", 0.7, 3.0),
            RegionMetrics("a", "et", 1.0, 0.0),
            RegionMetrics("b", "et", 0.0, None)]
    agg = aggregate_region_metrics(rows)
    assert agg["wt"]["hd_defined"] == 1
    assert agg["wt"]["hd_mean"] == 2.0
    assert agg["tc"]["dice_mean"] == pytest.approx(0.6)
    assert agg["tc"]["hd_mean"] == pytest.approx(2.0)
