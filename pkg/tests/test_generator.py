import numpy as np
import pytest

from psvrtlab import generator as G


def fresh_rng(seed=0):
    return np.random.default_rng(seed)


class TestImageParams:
    def test_rejects_items_larger_than_image(self):
        with pytest.raises(G.InfeasibleParamsError):
            G.ImageParams(m=5, n=4, k=2)

    def test_rejects_too_many_items(self):
        # two 4x4 squares cannot fit disjointly in 4x4
        with pytest.raises(G.InfeasibleParamsError):
            G.ImageParams(m=4, n=4, k=2)
        with pytest.raises(G.InfeasibleParamsError):
            G.ImageParams(m=4, n=11, k=5)  # floor(11/4)^2 = 4 < 5

    def test_rejects_single_item(self):
        with pytest.raises(G.InfeasibleParamsError):
            G.ImageParams(m=4, n=60, k=1)

    def test_accepts_exact_tiling(self):
        p = G.ImageParams(m=4, n=8, k=4)
        assert p.max_offset == 4


class TestSampleItem:
    def test_m1_is_forced_to_single_set_bit(self):
        for seed in range(10):
            item = G.sample_item(fresh_rng(seed), 1)
            assert item.tolist() == [[1]]

    def test_never_all_zero(self):
        rng = fresh_rng(1)
        for _ in range(500):
            assert G.sample_item(rng, 2).any()

    def test_mean_bit_density_near_half(self):
        # for m=4 the all-zero rejection shifts the mean by < 2**-16
        rng = fresh_rng(2)
        draws = np.stack([G.sample_item(rng, 4) for _ in range(100_000)])
        assert abs(draws.mean() - 0.5) < 0.01

    def test_deterministic_per_seed(self):
        a = G.sample_item(fresh_rng(7), 5)
        b = G.sample_item(fresh_rng(7), 5)
        assert np.array_equal(a, b)


class TestSampleDistinctItems:
    def test_pairwise_distinct(self):
        rng = fresh_rng(3)
        for _ in range(10_000):
            a, b = G.sample_distinct_items(rng, 3, 2)
            assert not np.array_equal(a, b)

    def test_single_valid_pattern_is_infeasible(self):
        with pytest.raises(G.InfeasibleDistinctSetError):
            G.sample_distinct_items(fresh_rng(0), 1, 2)

    def test_six_distinct_of_511(self):
        items = G.sample_distinct_items(fresh_rng(4), 3, 6)
        keys = {it.tobytes() for it in items}
        assert len(keys) == 6


class TestSRRule:
    def test_pure_column_displacement_is_horizontal(self):
        assert G.sr_rule([(10, 10), (10, 40)]) == G.SRLabel.HORIZONTAL

    def test_pure_row_displacement_is_vertical(self):
        assert G.sr_rule([(10, 10), (40, 10)]) == G.SRLabel.VERTICAL

    def test_mean_exactly_45_is_vertical(self):
        # pair angles {0, 45, 90} average to the boundary
        assert G.sr_rule([(0, 0), (0, 10), (10, 10)]) == G.SRLabel.VERTICAL

    def test_diagonal_pair_is_vertical(self):
        assert G.sr_rule([(0, 0), (7, 7)]) == G.SRLabel.VERTICAL

    def test_needs_two_centers(self):
        with pytest.raises(ValueError):
            G.sr_rule([(1.0, 1.0)])


class TestSDRule:
    def test_identical_pair(self):
        p = G.sample_item(fresh_rng(0), 3)
        assert G.sd_rule([p, p.copy()]) == G.SDLabel.SAME

    def test_distinct(self):
        a, b = G.sample_distinct_items(fresh_rng(1), 3, 2)
        assert G.sd_rule([a, b]) == G.SDLabel.DIFFERENT

    def test_duplicate_among_four(self):
        a, b, c = G.sample_distinct_items(fresh_rng(2), 3, 3)
        assert G.sd_rule([a, b, a.copy(), c]) == G.SDLabel.SAME

    def test_mixed_sizes_error(self):
        with pytest.raises(ValueError):
            G.sd_rule([np.ones((2, 2), np.uint8), np.ones((3, 3), np.uint8)])


class TestPlaceItems:
    def test_in_bounds_and_disjoint(self):
        p = G.ImageParams(m=4, n=60, k=2)
        rng = fresh_rng(5)
        for _ in range(200):
            a, b = G.place_items(rng, p)
            assert 0 <= a.row <= 56 and 0 <= a.col <= 56
            assert abs(a.row - b.row) >= 4 or abs(a.col - b.col) >= 4

    def test_exact_tiling_returns_the_four_corners(self):
        p = G.ImageParams(m=4, n=8, k=4)
        placements = G.place_items(fresh_rng(11), p, redraw_cap=1_000_000)
        got = {(q.row, q.col) for q in placements}
        assert got == {(0, 0), (0, 4), (4, 0), (4, 4)}

    def test_timeout_on_unreachable_target(self):
        # the 2x2 tiling always averages to the 45-degree boundary: Vertical
        p = G.ImageParams(m=4, n=8, k=4)
        with pytest.raises(G.PlacementTimeoutError):
            G.place_items(fresh_rng(0), p, target_sr=G.SRLabel.HORIZONTAL, redraw_cap=50_000)

    def test_sr_conditioning(self):
        p = G.ImageParams(m=4, n=60, k=3)
        rng = fresh_rng(6)
        for target in (G.SRLabel.HORIZONTAL, G.SRLabel.VERTICAL):
            for _ in range(50):
                placements = G.place_items(rng, p, target_sr=target)
                centers = [q.center(p.m) for q in placements]
                assert G.sr_rule(centers) == target


class TestRender:
    def test_full_item_covers_image(self):
        img = G.render([np.ones((4, 4), np.uint8)], [G.Placement(0, 0)], 4)
        assert img.all()

    def test_crop_recovers_items(self):
        p = G.ImageParams(m=4, n=30, k=3)
        rng = fresh_rng(7)
        for _ in range(100):
            items = [G.sample_item(rng, 4) for _ in range(3)]
            placements = G.place_items(rng, p)
            img = G.render(items, placements, 30)
            for item, q in zip(items, placements):
                assert np.array_equal(img[q.row : q.row + 4, q.col : q.col + 4], item)

    def test_pixel_sum_equals_item_ink(self):
        rng = fresh_rng(8)
        p = G.ImageParams(m=3, n=20, k=2)
        for _ in range(1000):
            items = [G.sample_item(rng, 3) for _ in range(2)]
            placements = G.place_items(rng, p)
            img = G.render(items, placements, 20)
            assert img.sum() == sum(int(it.sum()) for it in items)

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            G.render([np.ones((4, 4), np.uint8)], [G.Placement(58, 0)], 60)


class TestGenerateSample:
    def test_sd_same_pair_identical(self):
        p = G.ImageParams(m=4, n=60, k=2)
        s = G.generate_sample(fresh_rng(9), p, "sd", G.SDLabel.SAME)
        assert np.array_equal(s.items[0], s.items[1])
        assert s.sd_label == G.SDLabel.SAME

    def test_sd_same_with_extra_items(self):
        p = G.ImageParams(m=3, n=40, k=4)
        s = G.generate_sample(fresh_rng(10), p, "sd", G.SDLabel.SAME)
        keys = [it.tobytes() for it in s.items]
        # exactly one duplicated pair, the rest distinct
        assert len(keys) - len(set(keys)) == 1
        assert s.sd_label == G.SDLabel.SAME

    def test_sr_target_met(self):
        p = G.ImageParams(m=4, n=60, k=2)
        s = G.generate_sample(fresh_rng(11), p, "sr", G.SRLabel.HORIZONTAL)
        assert s.sr_label == G.SRLabel.HORIZONTAL

    def test_labels_recompute_from_parts(self):
        rng = fresh_rng(12)
        p = G.ImageParams(m=4, n=60, k=2)
        for i in range(2000):
            s = G.generate_sample(rng, p, "sd", i % 2)
            assert G.sd_rule(s.items) == s.sd_label
            assert G.sr_rule([q.center(p.m) for q in s.placements]) == s.sr_label
            assert np.array_equal(G.render(s.items, s.placements, p.n), s.image)


class TestGenerateBatch:
    def test_exact_balance(self):
        p = G.ImageParams(m=4, n=60, k=2)
        batch = G.generate_batch(fresh_rng(13), p, "sd", 50)
        assert sum(s.sd_label == G.SDLabel.SAME for s in batch) == 25
        batch = G.generate_batch(fresh_rng(13), p, "sr", 50)
        assert sum(s.sr_label == G.SRLabel.VERTICAL for s in batch) == 25

    def test_size_two(self):
        p = G.ImageParams(m=4, n=60, k=2)
        batch = G.generate_batch(fresh_rng(14), p, "sd", 2)
        assert {s.sd_label for s in batch} == {G.SDLabel.SAME, G.SDLabel.DIFFERENT}

    def test_odd_size_rejected(self):
        p = G.ImageParams(m=4, n=60, k=2)
        with pytest.raises(ValueError):
            G.generate_batch(fresh_rng(0), p, "sd", 3)

    def test_bit_identical_across_runs(self):
        p = G.ImageParams(m=4, n=60, k=2, seed=42)
        a = G.generate_batch(G.derive_rng(42, G.NS_TRAIN, 0, 5), p, "sd", 20)
        b = G.generate_batch(G.derive_rng(42, G.NS_TRAIN, 0, 5), p, "sd", 20)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.image, sb.image)
            assert sa.sd_label == sb.sd_label and sa.sr_label == sb.sr_label


class TestBatchStream:
    def test_batches_differ_across_indices(self):
        p = G.ImageParams(m=4, n=60, k=2, seed=1)
        stream = G.batch_stream(p, "sd", 10)
        b0, b1 = next(stream), next(stream)
        assert not np.array_equal(b0[0].image, b1[0].image)

    def test_stream_is_resumable(self):
        p = G.ImageParams(m=4, n=60, k=2, seed=1)
        first = [next(G.batch_stream(p, "sd", 10)) for _ in range(1)][0]
        again = next(G.batch_stream(p, "sd", 10))
        assert all(np.array_equal(a.image, b.image) for a, b in zip(first, again))


class TestDistributionIdentity:
    def test_sd_and_sr_image_sets_match(self):
        """Pixel density and center-distance histograms must be
        indistinguishable between the tasks (two-sample KS at alpha=0.01)."""
        from scipy import stats

        p = G.ImageParams(m=4, n=60, k=2, seed=77)
        count = 10_000
        feats = {}
        for task in ("sd", "sr"):
            rng = G.derive_rng(77, 0, 0, 0)
            samples = [G.generate_sample(rng, p, task, i % 2) for i in range(count)]
            density = np.array([s.image.mean() for s in samples])
            dist = np.array(
                [
                    np.hypot(
                        s.placements[0].row - s.placements[1].row,
                        s.placements[0].col - s.placements[1].col,
                    )
                    for s in samples
                ]
            )
            feats[task] = (density, dist)
        for i, name in enumerate(("pixel density", "center distance")):
            stat = stats.ks_2samp(feats["sd"][i], feats["sr"][i])
            assert stat.pvalue > 0.01, f"{name} distributions differ: {stat}"
