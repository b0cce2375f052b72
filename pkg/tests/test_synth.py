import hashlib
import math

import numpy as np
import pytest

from ptt_track.evaluation import KITTI_CAR_FRACTIONS, sparsity_histogram
from ptt_track.geometry import OrientedBox3, PointCloud, contains_mask
from ptt_track.synth import (FRAME_DT, SceneSpec, generate_corpus, generate_sequence, kitti_like_preset,
                             largest_remainder, load_corpus, pack_cloud, read_cloud, read_manifest,
                             read_sequence, trajectory_pose, unpack_cloud, write_cloud, write_sequence)


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestSequence:
    def test_static_box_constant(self):
        seq = generate_sequence(SceneSpec(n_frames=6, seed=1))
        assert all(f.box == seq.frames[0].box for f in seq.frames)

    def test_same_seed_bit_identical(self):
        spec = SceneSpec(n_frames=5, speed=3.0, turn_rate=0.2, dropout=0.1, seed=7)
        a, b = generate_sequence(spec), generate_sequence(spec)
        assert all(x.cloud.points.tobytes() == y.cloud.points.tobytes() for x, y in zip(a.frames, b.frames))

    @pytest.mark.parametrize("shape", ["l-shell", "box-shell"])
    def test_exact_on_target_count(self, shape):
        seq = generate_sequence(SceneSpec(shape=shape, points_range=(52, 52), n_frames=6, speed=5.0,
                                          turn_rate=0.3, seed=2))
        for f in seq.frames:
            assert int(contains_mask(f.box, f.cloud.points).sum()) == 52

    def test_zero_points_allowed(self):
        seq = generate_sequence(SceneSpec(points_range=(0, 0), n_frames=3, seed=0))
        assert all(int(contains_mask(f.box, f.cloud.points).sum()) == 0 for f in seq.frames)

    def test_dropout_only_removes(self):
        seq = generate_sequence(SceneSpec(points_range=(200, 200), n_frames=4, dropout=0.5, seed=3))
        for f in seq.frames:
            assert 0 < int(contains_mask(f.box, f.cloud.points).sum()) < 200

    def test_poses_follow_closed_form(self):
        spec = SceneSpec(n_frames=12, speed=6.0, turn_rate=-0.4, heading0=1.0, seed=4)
        seq = generate_sequence(spec)
        for t, f in enumerate(seq.frames):
            tt = t * FRAME_DT
            x = spec.start[0] + spec.speed / spec.turn_rate * (math.sin(1.0 + spec.turn_rate * tt) - math.sin(1.0))
            y = spec.start[1] - spec.speed / spec.turn_rate * (math.cos(1.0 + spec.turn_rate * tt) - math.cos(1.0))
            assert abs(f.box.center[0] - x) <= 1e-12 and abs(f.box.center[1] - y) <= 1e-12

    def test_straight_line_pose(self):
        spec = SceneSpec(speed=2.0, heading0=math.pi / 2)
        pos, heading = trajectory_pose(spec, 1.5)
        assert pos == pytest.approx([10.0, 3.0, 0.75], abs=1e-12) and heading == math.pi / 2

    def test_l_shell_faces_sensor(self):
        seq = generate_sequence(SceneSpec(points_range=(300, 300), n_frames=2, seed=5))
        f = seq.frames[0]
        inside = f.cloud.points[contains_mask(f.box, f.cloud.points)]
        # the sensor sits at the origin and the target at x = 10 with zero heading: the rear face
        # (local x = -l/2) faces the sensor, and the sensor is level with the side at y = +w/2
        local = inside - np.array(f.box.center)
        rear = np.isclose(local[:, 0], -0.99 * f.box.l / 2)
        side = np.isclose(local[:, 1], 0.99 * f.box.w / 2)
        assert np.all(rear | side) and rear.any() and side.any()

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SceneSpec(n_frames=1)
        with pytest.raises(ValueError):
            SceneSpec(shape="sphere")
        with pytest.raises(ValueError):
            SceneSpec(dropout=1.0)

    def test_spec_dict_round_trip(self):
        spec = SceneSpec(points_range=(5, 9), speed=1.5, seed=3)
        assert SceneSpec.from_dict(spec.to_dict()) == spec


class TestFormats:
    def test_cloud_round_trip(self, tmp_path, rng):
        cloud = PointCloud(rng.normal(size=(17, 3)), rng.normal(size=(17, 2)))
        write_cloud(tmp_path / "c.bin", cloud)
        back = read_cloud(tmp_path / "c.bin")
        assert np.array_equal(back.points, cloud.points) and np.array_equal(back.features, cloud.features)

    def test_cloud_header(self):
        buf = pack_cloud(PointCloud(np.zeros((2, 3))))
        assert buf[:6] == b"PTTPC\x00" and len(buf) == 6 + 9 + 2 * 3 * 8

    def test_bad_magic(self):
        with pytest.raises(ValueError):
            unpack_cloud(b"NOPE" + bytes(20))

    def test_sequence_round_trip(self, tmp_path):
        seq = generate_sequence(SceneSpec(n_frames=3, speed=2.0, seed=8), "abc")
        write_sequence(tmp_path / "s.pttseq", seq)
        back = read_sequence(tmp_path / "s.pttseq")
        assert back.scene_id == "abc"
        for a, b in zip(seq.frames, back.frames):
            assert np.array_equal(a.cloud.points, b.cloud.points)
            assert np.allclose(a.box.to_vector(), b.box.to_vector(), atol=0)


class TestCorpus:
    def test_manifest_entries(self, tmp_path):
        entries = generate_corpus([SceneSpec(n_frames=2)], [3], tmp_path)
        assert len(entries) == len(read_manifest(tmp_path / "manifest.jsonl")) == 3
        assert len({e.seed for e in entries}) == 3
        assert len(load_corpus(tmp_path)) == 3

    def test_regeneration_identical_files(self, tmp_path):
        specs = [SceneSpec(n_frames=3), SceneSpec(n_frames=2, speed=4.0)]
        generate_corpus(specs, [2, 1], tmp_path / "a", seed=11)
        generate_corpus(specs, [2, 1], tmp_path / "b", seed=11)
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
        assert all(_digest(tmp_path / "a" / n) == _digest(tmp_path / "b" / n) for n in names)

    def test_rejects_empty(self, tmp_path):
        with pytest.raises(ValueError):
            generate_corpus([], [], tmp_path)

    def test_unwritable_directory_names_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError, match="file"):
            generate_corpus([SceneSpec(n_frames=2)], [1], blocker / "sub")


class TestPreset:
    def test_largest_remainder(self):
        assert largest_remainder(50, KITTI_CAR_FRACTIONS) == [13, 16, 12, 9]
        assert sum(largest_remainder(7, (1, 1, 1))) == 7

    def test_kitti_like_fractions_within_two_percent(self):
        specs, counts = kitti_like_preset(50, 20)
        seqs = [generate_sequence(s) for s in specs]
        assert sum(len(s) for s in seqs) == 1000
        got = [b.fraction for b in sparsity_histogram(seqs)]
        for g, want in zip(got, KITTI_CAR_FRACTIONS):
            assert abs(g - want) <= 0.02

    def test_preset_deterministic(self):
        assert kitti_like_preset(10, 4, seed=3) == kitti_like_preset(10, 4, seed=3)

    def test_boxes_valid(self):
        specs, _ = kitti_like_preset(8, 3)
        for s in specs:
            for f in generate_sequence(s).frames:
                assert isinstance(f.box, OrientedBox3) and min(f.box.size) > 0
