"""Label assignment, the four-term tracking loss, Adam and the training loop."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import autograd as ag
from . import checkpoint
from .autograd import Parameter, Tensor
from .geometry import OrientedBox3, PointCloud, canonical_box, contains_mask
from .network import NetOutput, TrackerNet
from .tracking import (SearchAreaPolicy, TemplateHistory, TemplatePolicy, TrackSequence,
                       build_search_area, build_template)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossConfig:
    lambda_cb: float = 1.0
    lambda_rv: float = 1.0
    lambda_rb: float = 1.0
    proposal_radius: float = 0.3  # cluster center within this of the target center -> positive
    smooth_l1_beta: float = 1.0

    def __post_init__(self):
        ws = (self.lambda_cb, self.lambda_rv, self.lambda_rb)
        if not all(math.isfinite(w) and w >= 0 for w in ws):
            raise ValueError("loss weights must be finite and non-negative")


@dataclass
class LossBreakdown:
    L_cv: Tensor
    L_cb: Tensor
    L_rv: Tensor
    L_rb: Tensor
    L_all: Tensor

    def values(self) -> Dict[str, float]:
        return {k: float(getattr(self, k).data) for k in ("L_cv", "L_cb", "L_rv", "L_rb", "L_all")}


def assign_vote_labels(seed_coords: np.ndarray, gt: OrientedBox3) -> Tuple[np.ndarray, np.ndarray]:
    """(positive mask, offset-to-center targets); targets are zero for background seeds."""
    pos = contains_mask(gt, seed_coords)
    targets = np.where(pos[:, None], np.array(gt.center) - seed_coords, 0.0)
    return pos, targets


def assign_proposal_labels(cluster_centers: np.ndarray, gt: OrientedBox3, radius: float) -> np.ndarray:
    d = np.linalg.norm(cluster_centers - np.array(gt.center), axis=1)
    return d < radius


def _masked_mean(rows: Tensor, mask: np.ndarray) -> Tensor:
    n = int(mask.sum())
    if n == 0:
        return ag.Tensor(0.0)
    return ag.tsum(rows[np.flatnonzero(mask)]) / float(n)


def compute_loss(out: NetOutput, gt: OrientedBox3, config: LossConfig = LossConfig()) -> LossBreakdown:
    """Weighted sum of vote/proposal classification and regression terms.

    Classification terms are mean binary cross-entropy on logits; regression
    terms are smooth-L1 summed over coordinates and averaged over positives.
    """
    seeds = out.votes.seed_coords
    vpos, _ = assign_vote_labels(seeds, gt)
    center = np.array(gt.center)
    L_cv = ag.mean(ag.bce_with_logits(out.votes.logits, vpos.astype(np.float64)))
    vote_err = ag.smooth_l1(out.votes.centers - center, config.smooth_l1_beta)
    L_rv = _masked_mean(ag.tsum(vote_err, axis=1), vpos)

    props = out.proposals
    ppos = assign_proposal_labels(props.cluster_centers.data, gt, config.proposal_radius)
    L_cb = ag.mean(ag.bce_with_logits(props.scores, ppos.astype(np.float64)))
    target = np.array([*gt.center, gt.heading])
    pred = ag.concat([props.centers, props.offsets[:, 3:4]], axis=1)
    box_err = ag.smooth_l1(pred - target, config.smooth_l1_beta)
    L_rb = _masked_mean(ag.tsum(box_err, axis=1), ppos)

    L_all = L_cv + config.lambda_cb * L_cb + config.lambda_rv * L_rv + config.lambda_rb * L_rb
    return LossBreakdown(L_cv, L_cb, L_rv, L_rb, L_all)


# --- optimizer ------------------------------------------------------------------------------

class Adam:
    def __init__(self, params: Sequence[Parameter], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v = {p.name: np.zeros_like(p.data) for p in self.params}

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p in self.params:
            if p.grad is None:
                continue
            m = self.m[p.name]
            v = self.v[p.name]
            m *= self.b1
            m += (1.0 - self.b1) * p.grad
            v *= self.b2
            v += (1.0 - self.b2) * p.grad * p.grad
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> Dict[str, np.ndarray]:
        out = {f"optim.m.{k}": v for k, v in self.m.items()}
        out.update({f"optim.v.{k}": v for k, v in self.v.items()})
        out["optim.t"] = np.array([float(self.t)])
        return out

    def load_state(self, arrays: Mapping[str, np.ndarray]):
        for k in self.m:
            self.m[k][...] = arrays[f"optim.m.{k}"]
            self.v[k][...] = arrays[f"optim.v.{k}"]
        self.t = int(arrays["optim.t"][0])


# --- data ------------------------------------------------------------------------------------

@dataclass(frozen=True)
class AugmentRanges:
    xyz: Tuple[float, float, float] = (0.3, 0.3, 0.3)
    heading: float = math.radians(5.0)


def augment_offsets(box: OrientedBox3, rng: np.random.Generator,
                    ranges: AugmentRanges = AugmentRanges()) -> OrientedBox3:
    """Uniformly jitter the box center and heading (world frame)."""
    d = rng.uniform(-1.0, 1.0, 4) * np.array([*ranges.xyz, ranges.heading])
    c = np.array(box.center) + d[:3]
    return OrientedBox3(tuple(c), box.size, box.heading + d[3])


@dataclass
class TrainSample:
    template: PointCloud
    search: PointCloud
    gt: OrientedBox3  # target box in the search frame
    scene_id: str = ""
    frame: int = 0


def make_sample(seq: TrackSequence, t: int, rng: np.random.Generator, template_budget: int,
                search_budget: int, search_policy: SearchAreaPolicy = SearchAreaPolicy(),
                ranges: AugmentRanges = AugmentRanges()) -> Optional[TrainSample]:
    """Template from the first and previous ground truth, search around a jittered current box."""
    first = seq.frames[0]
    hist = TemplateHistory(first=(first.cloud, first.box),
                           previous=[(seq.frames[t - 1].cloud, seq.frames[t - 1].box)])
    template, _ = build_template(hist, TemplatePolicy("first-and-previous"), template_budget)
    gt = seq.frames[t].box
    ref = augment_offsets(gt, rng, ranges)
    search = build_search_area(seq.frames[t].cloud, ref, search_policy, search_budget)
    if search is None:
        return None
    return TrainSample(template, search, canonical_box(gt, ref), seq.scene_id, t)


def make_samples(sequences: Sequence[TrackSequence], seed: int, template_budget: int,
                 search_budget: int, ranges: AugmentRanges = AugmentRanges()) -> List[TrainSample]:
    rng = np.random.default_rng(seed)
    out = []
    for seq in sequences:
        for t in range(1, len(seq)):
            s = make_sample(seq, t, rng, template_budget, search_budget, ranges=ranges)
            if s is not None:
                out.append(s)
    return out


# --- loop ------------------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    decay_every: Optional[int] = 12  # epochs between x decay_factor steps; None disables
    decay_factor: float = 0.2
    batch_size: int = 8
    epochs: int = 60
    seed: int = 0
    resample_every_epoch: bool = False  # redraw search jitter each epoch from the sequences

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("learning rate must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch size must be >= 1 and epochs >= 0")

    def lr_at(self, epoch: int) -> float:
        if self.decay_every is None:
            return self.lr
        return self.lr * self.decay_factor ** (epoch // self.decay_every)


class TrainingDiverged(FloatingPointError):
    def __init__(self, step: int, detail: str):
        super().__init__(f"non-finite loss at step {step}: {detail}")
        self.step = step


@dataclass
class TrainResult:
    curve: List[dict]
    checksum: str
    steps: int


def batch_loss(net: TrackerNet, batch: Sequence[TrainSample], loss_cfg: LossConfig) -> LossBreakdown:
    parts = [compute_loss(net.forward(s.template, s.search), s.gt, loss_cfg) for s in batch]
    n = float(len(parts))
    acc = {k: ag.tsum(ag.concat([ag.reshape(getattr(p, k), (1,)) for p in parts], 0)) / n
           for k in ("L_cv", "L_cb", "L_rv", "L_rb", "L_all")}
    return LossBreakdown(**acc)


def curve_line(rec: dict) -> str:
    return json.dumps(rec) + "\n"


def train(net: TrackerNet, samples: Sequence[TrainSample], config: TrainConfig,
          loss_cfg: LossConfig = LossConfig(), curve_fh=None,
          resume: Optional[Mapping[str, np.ndarray]] = None,
          sample_fn: Optional[Callable[[int], Sequence[TrainSample]]] = None,
          checkpoint_path=None, checkpoint_every: int = 0) -> TrainResult:
    """Adam over mini-batches; deterministic given ``config.seed``.

    Each curve record holds the batch loss evaluated before that step's update.
    ``resume`` takes arrays written by :func:`training_state` and continues at
    the stored step. ``sample_fn(epoch)`` optionally regenerates the data per epoch.
    """
    if not samples and sample_fn is None:
        raise ValueError("training needs at least one sample")
    opt = Adam(net.parameters(), lr=config.lr)
    start = 0
    if resume is not None:
        checkpoint.assign(net.params, resume)
        opt.load_state(resume)
        start = int(resume["train.step"][0])
    curve = []
    step = 0
    for epoch in range(config.epochs):
        data = sample_fn(epoch) if sample_fn is not None else samples
        order = np.random.default_rng([config.seed, epoch]).permutation(len(data))
        opt.lr = config.lr_at(epoch)
        for b0 in range(0, len(order), config.batch_size):
            if step < start:
                step += 1
                continue
            batch = [data[i] for i in order[b0:b0 + config.batch_size]]
            opt.zero_grad()
            try:
                losses = batch_loss(net, batch, loss_cfg)
            except FloatingPointError as exc:
                raise TrainingDiverged(step, str(exc)) from exc
            vals = losses.values()
            if not all(math.isfinite(v) for v in vals.values()):
                raise TrainingDiverged(step, json.dumps(vals))
            losses.L_all.backward()
            opt.step()
            rec = {"step": step, **vals}
            curve.append(rec)
            if curve_fh is not None:
                curve_fh.write(curve_line(rec))
            step += 1
            if checkpoint_path is not None and checkpoint_every and step % checkpoint_every == 0:
                checkpoint.save(checkpoint_path, training_state(net, opt, step))
    if checkpoint_path is not None:
        checkpoint.save(checkpoint_path, training_state(net, opt, step))
    return TrainResult(curve, ag.checksum(net.params), step)


def training_state(net: TrackerNet, opt: Adam, step: int) -> Dict[str, np.ndarray]:
    arrays = {k: p.data for k, p in net.params.items()}
    arrays.update(opt.state())
    arrays["train.step"] = np.array([float(step)])
    return arrays


def train_toy(net: TrackerNet, samples: Sequence[TrainSample], config: TrainConfig,
              loss_cfg: LossConfig = LossConfig(), curve_fh=None, checkpoint_path=None) -> TrainResult:
    """Fixed-batch training used for descent and regression checks."""
    return train(net, samples, config, loss_cfg, curve_fh=curve_fh, checkpoint_path=checkpoint_path)
