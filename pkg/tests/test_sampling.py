import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_fps, brute_knn
from ptt_track.attention import SeedSet
from ptt_track.geometry import PointCloud
from ptt_track.sampling import (SampleSpec, ball_query, knn, sample, sample_feat_fps, sample_fps,
                                sample_random)


def _min_pairwise(x):
    d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
    return d[np.triu_indices(len(x), 1)].min()


class TestSpec:
    def test_rejects_zero_count(self):
        with pytest.raises(ValueError):
            SampleSpec("fps", 0)

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError):
            SampleSpec("grid", 4)


class TestRandom:
    def test_full_count_is_permutation(self, rng):
        cloud = PointCloud(rng.normal(size=(50, 3)))
        idx = sample_random(cloud, SampleSpec("random", 50, seed=3))
        assert sorted(idx) == list(range(50))

    def test_deterministic(self, rng):
        cloud = PointCloud(rng.normal(size=(80, 3)))
        spec = SampleSpec("random", 20, seed=9)
        assert np.array_equal(sample_random(cloud, spec), sample_random(cloud, spec))

    def test_oversampling_repeats(self, rng):
        idx = sample_random(PointCloud(rng.normal(size=(5, 3))), SampleSpec("random", 12, seed=1))
        assert len(idx) == 12 and set(idx) <= set(range(5))

    def test_octants_within_four_sigma(self):
        pts = np.random.default_rng(0).uniform(-1, 1, (1000, 3))
        idx = sample_random(PointCloud(pts), SampleSpec("random", 100, seed=4))
        octant = ((pts[idx] > 0) * np.array([1, 2, 4])).sum(1)
        counts = np.bincount(octant, minlength=8)
        # binomial with n=100, p=1/8
        sigma = np.sqrt(100 * 0.125 * 0.875)
        assert np.all(np.abs(counts - 12.5) <= 4 * sigma)

    def test_empty_cloud(self):
        with pytest.raises(ValueError):
            sample_random(PointCloud(np.zeros((0, 3))), SampleSpec("random", 1))


class TestFPS:
    def test_full_count_each_once(self, rng):
        idx = sample_fps(PointCloud(rng.normal(size=(30, 3))), SampleSpec("fps", 30))
        assert sorted(idx) == list(range(30))

    def test_collinear_example(self):
        pts = np.array([[0.0, 0, 0], [1, 0, 0], [9, 0, 0], [10, 0, 0]])
        assert list(sample_fps(PointCloud(pts), SampleSpec("fps", 2, start=0))) == [0, 3]

    def test_cycles_when_oversampling(self, rng):
        idx = sample_fps(PointCloud(rng.normal(size=(4, 3))), SampleSpec("fps", 10))
        assert len(idx) == 10 and np.array_equal(idx[4:8], idx[:4])

    def test_seeded_random_start(self, rng):
        cloud = PointCloud(rng.normal(size=(40, 3)))
        a = sample_fps(cloud, SampleSpec("fps", 5, seed=2, start="random"))
        b = sample_fps(cloud, SampleSpec("fps", 5, seed=2, start="random"))
        assert np.array_equal(a, b)
        assert a[0] == np.random.default_rng(2).integers(40)

    def test_start_out_of_range(self, rng):
        with pytest.raises(ValueError):
            sample_fps(PointCloud(rng.normal(size=(4, 3))), SampleSpec("fps", 2, start=7))

    def test_empty_cloud(self):
        with pytest.raises(ValueError):
            sample_fps(PointCloud(np.zeros((0, 3))), SampleSpec("fps", 1))

    @pytest.mark.parametrize("case", range(60))
    def test_matches_brute_force(self, case):
        r = np.random.default_rng(1000 + case)
        n = int(r.integers(1, 65))
        pts = r.uniform(-5, 5, (n, 3))
        count = int(r.integers(1, n + 3))
        start = int(r.integers(n))
        got = sample_fps(PointCloud(pts), SampleSpec("fps", count, start=start))
        assert np.array_equal(got, brute_fps(pts, count, start))

    def test_deterministic(self, rng):
        cloud = PointCloud(rng.normal(size=(200, 3)))
        spec = SampleSpec("fps", 32)
        assert sample_fps(cloud, spec).tobytes() == sample_fps(cloud, spec).tobytes()

    @given(st.integers(0, 2**31 - 1))
    def test_permutation_covariant(self, seed):
        r = np.random.default_rng(seed)
        pts = r.uniform(-3, 3, (40, 3))
        perm = r.permutation(40)
        a = sample_fps(PointCloud(pts), SampleSpec("fps", 10, start=int(perm[0])))
        b = sample_fps(PointCloud(pts[perm]), SampleSpec("fps", 10, start=0))
        assert np.array_equal(pts[a], pts[perm][b])

    def test_spread_beats_random(self):
        worse = 0
        for case in range(100):
            r = np.random.default_rng(case)
            pts = r.uniform(-1, 1, (256, 3))
            fps = _min_pairwise(pts[sample_fps(PointCloud(pts), SampleSpec("fps", 16))])
            rnd = _min_pairwise(pts[sample_random(PointCloud(pts), SampleSpec("random", 16, seed=case))])
            worse += fps < rnd
        assert worse == 0


class TestFeatFPS:
    def test_identical_descriptors_take_lowest_indices(self, rng):
        seeds = SeedSet(rng.normal(size=(10, 3)), np.ones((10, 4)))
        assert list(sample_feat_fps(seeds, SampleSpec("feat-fps", 4))) == [0, 1, 2, 3]

    def test_two_clusters(self, rng):
        feats = np.vstack([rng.normal(0, 0.1, (6, 5)), rng.normal(10, 0.1, (6, 5))])
        seeds = SeedSet(rng.normal(size=(12, 3)), feats)
        idx = sample_feat_fps(seeds, SampleSpec("feat-fps", 2, start=2))
        assert idx[0] == 2 and idx[1] >= 6

    def test_missing_features(self, rng):
        with pytest.raises(ValueError):
            sample_feat_fps(PointCloud(rng.normal(size=(5, 3))), SampleSpec("feat-fps", 2))

    def test_ignores_coordinates(self, rng):
        feats = rng.normal(size=(20, 6))
        a = sample_feat_fps(SeedSet(rng.normal(size=(20, 3)), feats), SampleSpec("feat-fps", 8))
        b = sample_feat_fps(SeedSet(rng.normal(size=(20, 3)), feats), SampleSpec("feat-fps", 8))
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("case", range(40))
    def test_matches_brute_force(self, case):
        r = np.random.default_rng(5000 + case)
        n = int(r.integers(1, 65))
        feats = r.normal(size=(n, int(r.integers(1, 9))))
        count = int(r.integers(1, n + 1))
        got = sample_feat_fps(SeedSet(r.normal(size=(n, 3)), feats), SampleSpec("feat-fps", count))
        assert np.array_equal(got, brute_fps(feats, count, 0))

    def test_dispatch_falls_back_to_coordinates(self, rng):
        pts = rng.normal(size=(30, 3))
        spec = SampleSpec("feat-fps", 6)
        assert np.array_equal(sample(PointCloud(pts), spec), sample_fps(PointCloud(pts), spec))


@pytest.mark.parametrize("method", ["random", "fps", "feat-fps"])
@pytest.mark.parametrize("count", [1, 7, 50])
def test_output_length(method, count, rng):
    pts = rng.normal(size=(20, 3))
    idx = sample(PointCloud(pts), SampleSpec(method, count), feats=rng.normal(size=(20, 4)))
    assert len(idx) == count


class TestKNN:
    def test_self_is_nearest(self, rng):
        pts = rng.normal(size=(25, 3))
        assert np.array_equal(knn(pts, pts, 1)[:, 0], np.arange(25))

    def test_line_of_five(self):
        pts = np.array([[0.0, 0, 0], [1, 0, 0], [3, 0, 0], [6, 0, 0], [10, 0, 0]])
        want = np.array([[0, 1], [1, 0], [2, 1], [3, 2], [4, 3]])
        assert np.array_equal(knn(pts, pts, 2), want)

    def test_tie_goes_to_lower_index(self):
        base = np.array([[1.0, 0, 0], [-1.0, 0, 0]])
        assert list(knn(np.zeros((1, 3)), base, 2)[0]) == [0, 1]

    def test_pads_with_nearest(self):
        base = np.array([[0.0, 0, 0], [5.0, 0, 0]])
        assert list(knn(np.array([[4.0, 0, 0]]), base, 4)[0]) == [1, 0, 1, 1]

    def test_empty_base(self):
        with pytest.raises(ValueError):
            knn(np.zeros((1, 3)), np.zeros((0, 3)), 2)

    @pytest.mark.parametrize("case", range(10))
    def test_matches_full_sort(self, case):
        r = np.random.default_rng(case)
        q, b = r.normal(size=(32, 3)), r.normal(size=(64, 3))
        assert np.array_equal(knn(q, b, 16), brute_knn(q, b, 16))

    def test_rows_ascending(self, rng):
        q, b = rng.normal(size=(20, 3)), rng.normal(size=(50, 3))
        idx = knn(q, b, 10)
        d = ((q[:, None] - b[idx]) ** 2).sum(-1)
        assert np.all(np.diff(d, axis=1) >= 0)


class TestBallQuery:
    def test_index_order_and_padding(self):
        pts = np.array([[0.0, 0, 0], [5, 0, 0], [0.5, 0, 0], [0.2, 0, 0]])
        assert list(ball_query(np.zeros((1, 3)), pts, 1.0, 5)[0]) == [0, 2, 3, 0, 0]

    def test_no_hit_gets_nearest(self):
        pts = np.array([[3.0, 0, 0], [2.0, 0, 0]])
        assert list(ball_query(np.zeros((1, 3)), pts, 1.0, 3)[0]) == [1, 1, 1]

    def test_truncates_to_nsample(self, rng):
        pts = rng.uniform(-0.1, 0.1, (20, 3))
        assert list(ball_query(np.zeros((1, 3)), pts, 1.0, 4)[0]) == [0, 1, 2, 3]
