import dataclasses
import io
import json
import math

import numpy as np
import pytest

from ptt_track import autograd as ag
from ptt_track import checkpoint
from ptt_track.geometry import OrientedBox3, contains_mask
from ptt_track.network import NetOutput, ProposalOutput, TrackerNet, VoteOutput, small_config
from ptt_track.synth import SceneSpec, generate_sequence
from ptt_track.training import (Adam, AugmentRanges, LossConfig, TrainConfig, TrainingDiverged,
                                assign_proposal_labels, assign_vote_labels, augment_offsets, compute_loss,
                                make_samples, train, training_state)

CFG = small_config()
GT = OrientedBox3((0.0, 0.0, 0.0), (1.8, 1.5, 4.2), 0.0)


def _output(seed_coords, centers, vlogits, cc, offsets, scores, d=4):
    n = len(seed_coords)
    votes = VoteOutput(seed_coords, ag.Tensor(centers), ag.Tensor(np.zeros((n, d))), ag.Tensor(vlogits))
    props = ProposalOutput(ag.Tensor(cc), ag.Tensor(offsets), ag.Tensor(scores))
    return NetOutput(None, votes, props)


def _samples(n_frames=5, seed=0):
    seq = generate_sequence(SceneSpec(points_range=(150, 250), n_frames=n_frames, speed=3.0, seed=seed))
    return make_samples([seq], seed, CFG.template_budget, CFG.search_budget)


class TestLabels:
    def test_no_seed_inside(self):
        pos, tgt = assign_vote_labels(np.full((4, 3), 20.0), GT)
        assert not pos.any() and np.array_equal(tgt, np.zeros((4, 3)))

    def test_seed_at_center(self):
        pos, tgt = assign_vote_labels(np.zeros((1, 3)), GT)
        assert pos[0] and np.array_equal(tgt[0], [0.0, 0.0, 0.0])

    def test_positive_count_matches_containment(self):
        f = generate_sequence(SceneSpec(points_range=(60, 60), seed=1)).frames[0]
        pos, tgt = assign_vote_labels(f.cloud.points, f.box)
        assert pos.sum() == contains_mask(f.box, f.cloud.points).sum() == 60
        assert np.allclose(f.cloud.points[pos] + tgt[pos], f.box.center)

    def test_proposal_threshold(self):
        cc = np.array([[0.1, 0, 0], [0.5, 0, 0]])
        assert list(assign_proposal_labels(cc, GT, 0.3)) == [True, False]


class TestLoss:
    def test_zero_logits_balanced_labels_give_ln2(self):
        seeds = np.array([[0.0, 0, 0], [0.2, 0, 0], [30.0, 0, 0], [40.0, 0, 0]])
        out = _output(seeds, seeds, np.zeros(4), np.zeros((1, 3)), np.zeros((1, 4)), np.zeros(1))
        assert abs(compute_loss(out, GT).L_cv.item() - math.log(2)) <= 1e-9

    def test_perfect_regression(self):
        seeds = np.array([[0.3, 0.1, 0.0], [-0.4, 0.2, 0.1]])
        centers = np.zeros((2, 3))
        cc = np.array([[0.1, 0.0, 0.0]])
        offsets = np.array([[-0.1, 0.0, 0.0, 0.0]])
        out = _output(seeds, centers, np.ones(2), cc, offsets, np.ones(1))
        loss = compute_loss(out, GT)
        assert loss.L_rv.item() == 0.0 and loss.L_rb.item() == 0.0

    def test_no_positives_give_zero_regression(self):
        seeds = np.full((3, 3), 25.0)
        out = _output(seeds, seeds, np.zeros(3), np.full((2, 3), 25.0), np.ones((2, 4)), np.zeros(2))
        loss = compute_loss(out, GT)
        assert loss.L_rv.item() == 0.0 and loss.L_rb.item() == 0.0

    def _random_loss(self, cfg, seed=0):
        r = np.random.default_rng(seed)
        seeds = r.uniform(-2, 2, (12, 3))
        out = _output(seeds, seeds + r.normal(0, 0.3, (12, 3)), r.normal(size=12), r.uniform(-0.2, 0.2, (4, 3)),
                      r.normal(0, 0.2, (4, 4)), r.normal(size=4))
        return compute_loss(out, GT, cfg)

    def test_combination_and_nonnegative(self):
        cfg = LossConfig(lambda_cb=0.5, lambda_rv=2.0, lambda_rb=3.0, proposal_radius=1.0)
        v = self._random_loss(cfg).values()
        want = v["L_cv"] + 0.5 * v["L_cb"] + 2.0 * v["L_rv"] + 3.0 * v["L_rb"]
        assert abs(v["L_all"] - want) <= 1e-12
        assert all(x >= 0 for x in v.values())

    def test_lambda_linearity(self):
        a = self._random_loss(LossConfig(lambda_cb=1.0, proposal_radius=1.0)).values()
        b = self._random_loss(LossConfig(lambda_cb=2.0, proposal_radius=1.0)).values()
        assert b["L_all"] - a["L_all"] == pytest.approx(a["L_cb"], abs=1e-12)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            LossConfig(lambda_rv=-1.0)


class TestAugment:
    def test_zero_ranges(self, rng):
        box = OrientedBox3((1, 2, 3), (1.8, 1.5, 4.2), 0.4)
        assert augment_offsets(box, rng, AugmentRanges((0, 0, 0), 0.0)) == box

    def test_heading_stays_normalized(self, rng):
        box = OrientedBox3((0, 0, 0), (1, 1, 1), math.pi)
        for _ in range(200):
            h = augment_offsets(box, rng).heading
            assert -math.pi < h <= math.pi

    def test_offset_statistics(self):
        r = np.random.default_rng(0)
        box = OrientedBox3((0, 0, 0), (1, 1, 1), 0.0)
        boxes = [augment_offsets(box, r) for _ in range(10_000)]
        d = np.array([[*b.center, b.heading] for b in boxes])
        half = np.array([0.3, 0.3, 0.3, math.radians(5)])
        # uniform on [-a, a]: sd a / sqrt(3); mean of n draws has sd a / sqrt(3n)
        sigma = half / np.sqrt(3 * len(d))
        assert np.all(np.abs(d.mean(axis=0)) <= 3 * sigma)
        assert np.all(np.abs(d).max(axis=0) <= half)


class TestSchedule:
    def test_step_decay(self):
        cfg = TrainConfig()
        assert cfg.lr_at(0) == cfg.lr_at(11) == 1e-3
        assert cfg.lr_at(12) == pytest.approx(2e-4)
        assert cfg.lr_at(24) == pytest.approx(4e-5)

    def test_no_decay(self):
        assert TrainConfig(decay_every=None).lr_at(500) == 1e-3


class TestAdam:
    def test_first_step_moves_by_lr(self):
        p = ag.Parameter("p", np.array([1.0, -2.0]))
        opt = Adam([p], lr=0.1)
        p.grad = np.array([3.0, -0.5])
        opt.step()
        assert np.allclose(p.data, [0.9, -1.9], atol=1e-7)

    def test_minimizes_quadratic(self):
        p = ag.Parameter("p", np.array([5.0, -3.0]))
        opt = Adam([p], lr=0.1)
        for _ in range(500):
            opt.zero_grad()
            ag.tsum(p * p).backward()
            opt.step()
        assert np.all(np.abs(p.data) < 1e-2)


class TestTrain:
    def test_lr_zero_leaves_params(self):
        net = TrackerNet(CFG)
        before = ag.checksum(net.params)
        res = train(net, _samples(3), TrainConfig(lr=0.0, batch_size=2, epochs=2))
        assert res.checksum == before

    def test_lr_zero_flat_on_fixed_batch(self):
        s = _samples(3)
        res = train(TrackerNet(CFG), s, TrainConfig(lr=0.0, batch_size=len(s), epochs=4))
        assert len({r["L_all"] for r in res.curve}) == 1

    def test_same_seed_same_checksum(self):
        s = _samples(3)
        cfg = TrainConfig(batch_size=2, epochs=2, seed=4)
        assert train(TrackerNet(CFG), s, cfg).checksum == train(TrackerNet(CFG), s, cfg).checksum

    def test_curve_records(self):
        s = _samples(3)
        buf = io.StringIO()
        res = train(TrackerNet(CFG), s, TrainConfig(batch_size=2, epochs=1), curve_fh=buf)
        lines = [json.loads(x) for x in buf.getvalue().splitlines()]
        assert lines == res.curve
        assert list(lines[0]) == ["step", "L_cv", "L_cb", "L_rv", "L_rb", "L_all"]
        assert [r["step"] for r in lines] == list(range(res.steps))

    def test_resume_matches_uninterrupted(self, tmp_path):
        s = _samples(4)
        cfg = TrainConfig(batch_size=2, epochs=3, seed=2)
        full = train(TrackerNet(CFG), s, cfg)
        ck = tmp_path / "ck.pttckpt"
        part = train(TrackerNet(CFG), s, dataclasses.replace(cfg, epochs=1), checkpoint_path=ck)
        resumed = train(TrackerNet(CFG, seed=99), s, cfg, resume=checkpoint.load(ck))
        assert resumed.checksum == full.checksum
        assert part.curve + resumed.curve == full.curve

    def test_divergence_reports_step(self):
        net = TrackerNet(CFG)
        s = _samples(3)
        net.params["vote.fc2.W"].data[...] = np.nan
        with pytest.raises(TrainingDiverged) as err:
            train(net, s, TrainConfig(batch_size=2, epochs=1))
        assert err.value.step == 0

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            train(TrackerNet(CFG), [], TrainConfig())

    def test_vote_fit_on_one_frame(self):
        s = _samples(2)[:1]
        net = TrackerNet(CFG)

        def vote_error():
            out = net.forward(s[0].template, s[0].search)
            return float(np.mean(np.linalg.norm(out.votes.centers.data - np.array(s[0].gt.center), axis=1)))
        before = vote_error()
        train(net, s, TrainConfig(batch_size=1, epochs=50, decay_every=None))
        assert vote_error() < before

    def test_training_state_keys(self):
        net = TrackerNet(CFG)
        st = training_state(net, Adam(net.parameters()), 7)
        assert st["train.step"][0] == 7.0
        assert all(k in st for k in net.params)
