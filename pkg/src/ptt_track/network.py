"""Tracker network: set-abstraction backbone, similarity fusion, voting and proposals.

All learnable blocks are expressed with :mod:`ptt_track.autograd` so the whole
forward pass is differentiable end to end. Index selections (sampling, ball
query, argmax) are data-dependent constants of each forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import autograd as ag
from .attention import PTTConfig, SeedSet, init_ptt_params, ptt_forward
from .autograd import Parameter, Tensor
from .geometry import OrientedBox3, PointCloud
from .sampling import SampleSpec, ball_query, farthest_point_indices, sample

PTT_PLACEMENTS = ("none", "vote", "prop", "all")


@dataclass(frozen=True)
class SALevel:
    count: int
    radius: float
    nsample: int
    widths: Tuple[int, ...]


@dataclass(frozen=True)
class BackboneConfig:
    levels: Tuple[SALevel, ...] = (
        SALevel(512, 0.3, 32, (32, 32, 64)),
        SALevel(128, 0.5, 32, (64, 64, 64)),
    )

    def __post_init__(self):
        counts = [lv.count for lv in self.levels]
        if not counts or any(b >= a for a, b in zip(counts, counts[1:])):
            raise ValueError(f"set-abstraction sample counts must strictly decrease: {counts}")
        if any(lv.radius <= 0 or lv.nsample < 1 or not lv.widths for lv in self.levels):
            raise ValueError("each level needs radius > 0, nsample >= 1 and at least one width")

    @property
    def num_seeds(self) -> int:
        return self.levels[-1].count

    @property
    def width(self) -> int:
        return self.levels[-1].widths[-1]


@dataclass(frozen=True)
class TrackerConfig:
    backbone: BackboneConfig = BackboneConfig()
    ptt: PTTConfig = PTTConfig()
    ptt_placement: str = "all"
    sampler: str = "fps"
    num_clusters: int = 16
    cluster_radius: float = 0.3
    cluster_nsample: int = 16
    template_budget: int = 512
    search_budget: int = 1024

    def __post_init__(self):
        if self.ptt_placement not in PTT_PLACEMENTS:
            raise ValueError(f"ptt placement must be one of {PTT_PLACEMENTS}")

    @property
    def ptt_vote(self) -> bool:
        return self.ptt_placement in ("vote", "all")

    @property
    def ptt_prop(self) -> bool:
        return self.ptt_placement in ("prop", "all")


def small_config(**overrides) -> TrackerConfig:
    """A reduced configuration for tests, gradient checks and quick training runs."""
    base = dict(
        backbone=BackboneConfig((SALevel(64, 0.4, 8, (16, 16)), SALevel(32, 0.8, 8, (16, 16)))),
        ptt=PTTConfig(k=8),
        num_clusters=8,
        cluster_radius=0.5,
        cluster_nsample=8,
        template_budget=64,
        search_budget=128,
    )
    base.update(overrides)
    return TrackerConfig(**base)


def _lin(rng, name, fan_in, fan_out) -> Dict[str, Parameter]:
    bound = 1.0 / np.sqrt(fan_in)
    return {
        f"{name}.W": Parameter(f"{name}.W", rng.uniform(-bound, bound, (fan_in, fan_out))),
        f"{name}.b": Parameter(f"{name}.b", rng.uniform(-bound, bound, fan_out)),
    }


def _lp(params, name):
    return params[f"{name}.W"], params[f"{name}.b"]


def init_params(config: TrackerConfig, seed: int = 0) -> Dict[str, Parameter]:
    rng = np.random.default_rng(seed)
    params: Dict[str, Parameter] = {}
    c_in = 0
    for li, lv in enumerate(config.backbone.levels):
        fan = 3 + c_in
        for wi, w in enumerate(lv.widths):
            params.update(_lin(rng, f"backbone.sa{li}.mlp{wi}", fan, w))
            fan = w
        c_in = lv.widths[-1]
    d = config.backbone.width
    nt = config.backbone.num_seeds
    params.update(_lin(rng, "augment.fc1", nt + 2 * d + 6, d))
    params.update(_lin(rng, "augment.fc2", d, d))
    params.update(_lin(rng, "vote.fc1", d, d))
    params.update(_lin(rng, "vote.fc2", d, 3 + d + 1))
    params.update(_lin(rng, "cluster.fc1", 3 + d + 1, d))
    params.update(_lin(rng, "cluster.fc2", d, d))
    params.update(_lin(rng, "proposal.fc1", d, d))
    params.update(_lin(rng, "proposal.fc2", d, 5))
    if config.ptt_vote:
        params.update(init_ptt_params(config.ptt, d, rng, "ptt_vote"))
    if config.ptt_prop:
        params.update(init_ptt_params(config.ptt, d, rng, "ptt_prop"))
    return params


# --- backbone ------------------------------------------------------------------------

def backbone_forward(cloud: PointCloud, config: BackboneConfig, params: Mapping[str, Tensor],
                     sampler: str = "fps", seed: int = 0) -> SeedSet:
    """Hierarchical set abstraction: sample centers, group by radius, MLP, max-pool."""
    coords = cloud.points
    if len(coords) == 0:
        raise ValueError("backbone needs at least one point")
    feats: Optional[Tensor] = None
    for li, lv in enumerate(config.levels):
        spec = SampleSpec(method=sampler, count=lv.count, seed=seed + li)
        f_for_sampling = None if feats is None else feats.data
        centers_idx = sample(coords, spec, feats=f_for_sampling)
        ag.note_discrete(centers_idx)
        centers = coords[centers_idx]
        group = ball_query(centers, coords, lv.radius, lv.nsample)
        rel = (coords[group] - centers[:, None, :]) / lv.radius
        x = Tensor(rel) if feats is None else ag.concat([Tensor(rel), ag.gather(feats, group)], -1)
        for wi in range(len(lv.widths)):
            x = ag.relu(ag.linear(x, *_lp(params, f"backbone.sa{li}.mlp{wi}")))
        feats = ag.tmax(x, axis=1)
        coords = centers
    return SeedSet(coords, feats)


# --- similarity fusion -----------------------------------------------------------------

def similarity_matrix(template_feats, search_feats) -> Tensor:
    """Cosine similarity ``[Ns, Nt]`` between search and template descriptors."""
    t = ag.l2_normalize(template_feats)
    s = ag.l2_normalize(search_feats)
    return ag.matmul(s, ag.transpose(t))


def augment_similarity(template: SeedSet, search: SeedSet, params: Mapping[str, Tensor]) -> SeedSet:
    tf, sf = ag.as_tensor(template.feats), ag.as_tensor(search.feats)
    if tf.shape[1] != sf.shape[1]:
        raise ValueError(f"descriptor width mismatch: template {tf.shape[1]}, search {sf.shape[1]}")
    sim = similarity_matrix(tf, sf)
    best = np.argmax(sim.data, axis=1)
    ag.note_discrete(best)
    # the matched template seed's canonical position hints at the target center
    anchor = Tensor(np.asarray(template.coords, dtype=np.float64)[best])
    here = Tensor(np.asarray(search.coords, dtype=np.float64))
    fused = ag.concat([sim, ag.gather(tf, best), anchor, here, sf], axis=-1)
    out = ag.mlp2_relu(fused, *_lp(params, "augment.fc1"), *_lp(params, "augment.fc2"))
    return SeedSet(search.coords, out)


# --- voting ------------------------------------------------------------------------------

@dataclass
class Vote:
    center: np.ndarray
    feat: np.ndarray
    objectness_logit: float


@dataclass
class VoteOutput:
    seed_coords: np.ndarray
    centers: Tensor  # [N, 3]
    feats: Tensor  # [N, D]
    logits: Tensor  # [N]

    def as_list(self) -> List[Vote]:
        return [Vote(self.centers.data[i], self.feats.data[i], float(self.logits.data[i]))
                for i in range(len(self.seed_coords))]


def vote(seeds: SeedSet, params: Mapping[str, Tensor], ptt: Optional[PTTConfig] = None,
         ptt_prefix: str = "ptt_vote") -> VoteOutput:
    feats = ag.as_tensor(seeds.feats)
    if ptt is not None:
        feats = ptt_forward(SeedSet(seeds.coords, feats), ptt, params, ptt_prefix)
    d = feats.shape[1]
    out = ag.mlp2_relu(feats, *_lp(params, "vote.fc1"), *_lp(params, "vote.fc2"))
    offsets = out[:, 0:3]
    centers = ag.add(Tensor(seeds.coords), offsets)
    vfeats = feats + out[:, 3:3 + d]
    logits = out[:, 3 + d]
    return VoteOutput(seeds.coords, centers, vfeats, logits)


# --- proposals ---------------------------------------------------------------------------

@dataclass
class Proposal:
    box: OrientedBox3
    score_logit: float
    cluster_id: int


@dataclass
class ProposalOutput:
    cluster_centers: Tensor  # [K, 3]
    offsets: Tensor  # [K, 4]: dx, dy, dz, dtheta
    scores: Tensor  # [K]

    @property
    def centers(self) -> Tensor:
        return self.cluster_centers + self.offsets[:, 0:3]

    def as_list(self, size) -> List[Proposal]:
        c = self.centers.data
        h = self.offsets.data[:, 3]
        return [Proposal(OrientedBox3(tuple(c[i]), size, float(h[i])), float(self.scores.data[i]), i)
                for i in range(c.shape[0])]


def generate_proposals(votes: VoteOutput, params: Mapping[str, Tensor], num_clusters: int,
                       cluster_radius: float, nsample: int = 16,
                       ptt: Optional[PTTConfig] = None, ptt_prefix: str = "ptt_prop") -> ProposalOutput:
    """Cluster votes around farthest-point centers and regress one box per cluster."""
    vc = votes.centers.data
    n = vc.shape[0]
    if n == 0:
        raise ValueError("no votes to cluster")
    k = min(num_clusters, n)
    sel = farthest_point_indices(vc, k)
    ag.note_discrete(sel)
    members = ball_query(vc[sel], vc, cluster_radius, nsample)
    ag.note_discrete(members)
    centers = ag.gather(votes.centers, sel)
    rel = (ag.gather(votes.centers, members) - ag.reshape(centers, (k, 1, 3))) / cluster_radius
    obj = ag.sigmoid(ag.gather(ag.reshape(votes.logits, (n, 1)), members))
    x = ag.concat([rel, ag.gather(votes.feats, members), obj], axis=-1)
    x = ag.relu(ag.linear(x, *_lp(params, "cluster.fc1")))
    x = ag.relu(ag.linear(x, *_lp(params, "cluster.fc2")))
    pooled = ag.tmax(x, axis=1)
    if ptt is not None:
        pooled = ptt_forward(SeedSet(centers, pooled), ptt, params, ptt_prefix)
    out = ag.mlp2_relu(pooled, *_lp(params, "proposal.fc1"), *_lp(params, "proposal.fc2"))
    return ProposalOutput(centers, out[:, 0:4], out[:, 4])


def select_box(proposals: Sequence[Proposal]) -> OrientedBox3:
    """Highest score wins; ties go to the lowest cluster id."""
    if not proposals:
        raise ValueError("select_box needs at least one proposal")
    best = min(proposals, key=lambda p: (-p.score_logit, p.cluster_id))
    return best.box


# --- assembly ----------------------------------------------------------------------------

@dataclass
class NetOutput:
    search_seeds: SeedSet
    votes: VoteOutput
    proposals: ProposalOutput

    def best(self) -> Tuple[int, np.ndarray, float]:
        """(cluster index, [dx, dy, dz, dtheta] box in the search frame, score)."""
        s = self.proposals.scores.data
        i = int(np.argmax(s))
        c = self.proposals.centers.data[i]
        return i, np.array([*c, self.proposals.offsets.data[i, 3]]), float(s[i])


class TrackerNet:
    """Parameters plus forward pass of the full tracker network."""

    def __init__(self, config: TrackerConfig, params: Optional[Dict[str, Parameter]] = None,
                 seed: int = 0):
        self.config = config
        self.params = params if params is not None else init_params(config, seed)

    def parameters(self) -> List[Parameter]:
        return [self.params[k] for k in sorted(self.params)]

    def encode(self, cloud: PointCloud) -> SeedSet:
        return backbone_forward(cloud, self.config.backbone, self.params, self.config.sampler)

    def forward(self, template: PointCloud, search: PointCloud) -> NetOutput:
        cfg = self.config
        t = self.encode(template)
        s = self.encode(search)
        fused = augment_similarity(t, s, self.params)
        votes = vote(fused, self.params, cfg.ptt if cfg.ptt_vote else None)
        props = generate_proposals(votes, self.params, cfg.num_clusters, cfg.cluster_radius,
                                   cfg.cluster_nsample, cfg.ptt if cfg.ptt_prop else None)
        return NetOutput(s, votes, props)
