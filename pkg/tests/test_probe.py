import itertools

import numpy as np
import pytest

from psvrtlab import generator as G
from psvrtlab import probe


def make_samples(m, n, k, count, seed, task="sd"):
    params = G.ImageParams(m=m, n=n, k=k, seed=seed)
    rng = G.derive_rng(seed, 0, 0, 0)
    return [G.generate_sample(rng, params, task, i % 2) for i in range(count)]


class TestProbeClassify:
    def test_blank_image_is_different(self):
        assert probe.probe_classify(np.zeros((20, 20), np.uint8), 4) == G.SDLabel.DIFFERENT

    def test_same_samples_always_detected(self):
        for s in make_samples(4, 60, 2, 400, seed=21):
            if s.sd_label == G.SDLabel.SAME:
                assert probe.probe_classify(s.image, 4) == G.SDLabel.SAME

    def test_adjacent_duplicates_detected(self):
        # duplicates touching each other still fire via the partner exemption
        item = G.sample_item(G.derive_rng(5, 0, 0, 0), 4)
        img = G.render([item, item], [G.Placement(10, 10), G.Placement(14, 10)], 30)
        assert probe.probe_classify(img, 4) == G.SDLabel.SAME

    def test_single_pixel_fragments_do_not_fire(self):
        # two distinct multi-pixel items offer matching one-pixel windows;
        # isolation must reject them
        a = np.zeros((4, 4), np.uint8)
        a[0, 0] = 1
        a[1, 2] = 1
        b = np.zeros((4, 4), np.uint8)
        b[0, 0] = 1
        b[2, 1] = 1
        img = G.render([a, b], [G.Placement(10, 10), G.Placement(30, 30)], 60)
        assert probe.probe_classify(img, 4) == G.SDLabel.DIFFERENT

    def test_translated_identical_ink_fires(self):
        # distinct m x m arrays whose ink matches up to translation are the
        # probe's designed residual false-positive class
        a = np.zeros((4, 4), np.uint8)
        a[1:3, 1:3] = 1
        b = np.zeros((4, 4), np.uint8)
        b[0:2, 0:2] = 1
        assert G.sd_rule([a, b]) == G.SDLabel.DIFFERENT
        img = G.render([a, b], [G.Placement(5, 5), G.Placement(30, 30)], 60)
        assert probe.probe_classify(img, 4) == G.SDLabel.SAME

    def test_accuracy_on_generated_data(self):
        stats = probe.probe_report_rows(make_samples(4, 60, 2, 2000, seed=22), 4)
        assert stats["fn"] == 0
        assert stats["fp"] <= 1

    def test_scene_translation_invariance(self):
        rng = G.derive_rng(23, 0, 0, 0)
        params = G.ImageParams(m=3, n=30, k=2, seed=23)
        for i in range(100):
            s = G.generate_sample(rng, params, "sd", i % 2)
            base = probe.probe_classify(s.image, 3)
            min_r = min(p.row for p in s.placements)
            min_c = min(p.col for p in s.placements)
            shifted = [G.Placement(p.row - min_r, p.col - min_c) for p in s.placements]
            img = G.render(s.items, shifted, 30)
            assert probe.probe_classify(img, 3) == base

    def test_item_side_too_large(self):
        with pytest.raises(ValueError):
            probe.probe_classify(np.zeros((4, 4), np.uint8), 5)


def brute_force_count(n, m, k):
    side = n - m + 1
    pos = [(r, c) for r in range(side) for c in range(side)]
    count = 0
    for combo in itertools.combinations(pos, k):
        if all(
            abs(a[0] - b[0]) >= m or abs(a[1] - b[1]) >= m
            for a, b in itertools.combinations(combo, 2)
        ):
            count += 1
    return count


class TestCountArrangements:
    def test_cannot_fit_counts_zero(self):
        assert probe.count_arrangements(4, 4, 2) == 0

    def test_pair_count_small_grid(self):
        assert probe.count_arrangements(5, 2, 2) == brute_force_count(5, 2, 2)

    def test_exact_tiling(self):
        assert probe.count_arrangements(8, 4, 4) == 1
        assert probe.count_arrangements(8, 4, 2) == brute_force_count(8, 4, 2)

    def test_matches_brute_force_on_a_grid(self):
        for n in (4, 6, 9):
            for m in (1, 2, 3):
                for k in (2, 3):
                    assert probe.count_arrangements(n, m, k) == brute_force_count(n, m, k), (
                        n, m, k,
                    )

    def test_monotone_in_image_side(self):
        for n in range(4, 12):
            assert probe.count_arrangements(n + 1, 2, 2) > probe.count_arrangements(n, 2, 2)

    def test_nonsense_rejected(self):
        with pytest.raises(ValueError):
            probe.count_arrangements(4, 5, 2)
        with pytest.raises(ValueError):
            probe.count_arrangements(4, 0, 2)


def test_estimator_tracks_exact_value():
    exact = probe.count_arrangements(30, 4, 2)
    est = probe.estimate_arrangements(30, 4, 2, samples=200_000, rng=np.random.default_rng(1))
    assert abs(est - exact) / exact < 0.01


def test_arrangements_for_report_switches_method():
    value, method = probe.arrangements_for_report(60, 4, 2)
    assert method == "exact" and value == probe.count_arrangements(60, 4, 2)
    value, method = probe.arrangements_for_report(60, 4, 5)
    assert method == "estimate" and value > 0


class TestStrainingReport:
    def summary(self, arch_name, task, n, m, k, mean):
        return {
            "arch": arch_name,
            "task": task,
            "params": {"n": n, "m": m, "k": k, "seed": 0},
            "mean_alc": mean,
            "min_alc": mean,
            "max_alc": mean,
            "non_learned": 0,
        }

    def test_empty_input_gives_empty_table(self):
        rows, missing = probe.straining_report([], "n")
        assert rows == []
        assert len(missing) == len(trainer_combos()) * 6

    def test_m_sweep_includes_pattern_counts(self):
        docs = [self.summary("psvrt-baseline", "sd", 60, m, 2, 0.9) for m in (3, 4)]
        rows, _ = probe.straining_report(docs, "m")
        assert [r["item_patterns"] for r in rows] == [512, 65536]

    def test_n_sweep_includes_arrangement_counts(self):
        docs = [self.summary("psvrt-baseline", "sd", n, 4, 2, 0.9) for n in (30, 60)]
        rows, _ = probe.straining_report(docs, "n")
        assert rows[0]["arrangements"] == probe.count_arrangements(30, 4, 2)
        assert rows[1]["arrangements"] == probe.count_arrangements(60, 4, 2)
        assert rows[0]["arrangements"] < rows[1]["arrangements"]

    def test_off_sweep_summaries_excluded(self):
        docs = [self.summary("psvrt-baseline", "sd", 60, 5, 2, 0.9)]
        rows, _ = probe.straining_report(docs, "n")  # m=5 not in the n sweep
        assert rows == []


def trainer_combos():
    from psvrtlab.trainer import GRID_COMBOS

    return GRID_COMBOS
