"""Finite-difference gradient checks over the learnable blocks of the tracker."""

from __future__ import annotations

import contextlib
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import autograd as ag
from .attention import PTTConfig, SeedSet, feature_embed, position_encode, ptt_forward
from .autograd import Parameter, Tensor
from .geometry import OrientedBox3, PointCloud
from .network import (BackboneConfig, SALevel, TrackerConfig, TrackerNet, VoteOutput, generate_proposals,
                      init_params, vote)
from .sampling import knn
from .training import LossConfig, compute_loss

SELECTORS = ("embed", "position", "attention", "ptt", "vote", "proposal", "loss")

# instance sizes stay small: N <= 16 seeds, k <= 8 neighbors
N_SEEDS = 12
WIDTH = 6
K = 6


def _config(heads: int = 1, layers: int = 1) -> TrackerConfig:
    return TrackerConfig(
        backbone=BackboneConfig((SALevel(24, 0.5, 4, (WIDTH,)), SALevel(N_SEEDS, 1.0, 4, (WIDTH,)))),
        ptt=PTTConfig(k=K, heads=heads, layers=layers),
        ptt_placement="all", num_clusters=4, cluster_radius=2.0, cluster_nsample=4,
        template_budget=32, search_budget=48)


def _pick(params: Dict[str, Parameter], prefixes: Sequence[str], parts: Sequence[str] = ()) -> List[Parameter]:
    out = []
    for name in sorted(params):
        if any(name.startswith(p) for p in prefixes) and (not parts or any(f".{s}." in name for s in parts)):
            out.append(params[name])
    return out


def _projection(rng, shape) -> np.ndarray:
    # unit-scale readout keeps the scalar loss O(1)
    return rng.standard_normal(shape) / np.sqrt(np.prod(shape))


def build_case(selector: str, seed: int = 0, heads: int = 1, layers: int = 1
               ) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    """Scalar loss closure plus the leaves whose gradients are checked."""
    if selector not in SELECTORS:
        raise ValueError(f"unknown gradcheck selector {selector!r}; expected one of {SELECTORS + ('all',)}")
    rng = np.random.default_rng(seed)
    cfg = _config(heads, layers)
    params = init_params(cfg, seed)
    coords = rng.uniform(-1.5, 1.5, (N_SEEDS, 3))
    feats = rng.standard_normal((N_SEEDS, WIDTH))
    seeds = SeedSet(coords, feats)

    if selector == "embed":
        R = _projection(rng, (N_SEEDS, WIDTH))
        return (lambda: ag.tsum(feature_embed(feats, params, "ptt_vote.l0") * R),
                _pick(params, ["ptt_vote.l0.embed"]))
    if selector == "position":
        idx = knn(coords, coords, K)
        R = _projection(rng, (N_SEEDS, K, WIDTH))
        return (lambda: ag.tsum(position_encode(coords, idx, params, "ptt_vote.l0") * R),
                _pick(params, ["ptt_vote.l0.pos"]))
    if selector in ("attention", "ptt"):
        R = _projection(rng, (N_SEEDS, WIDTH))
        x = Parameter("input", feats)

        def fn():
            return ag.tsum(ptt_forward(SeedSet(coords, x), cfg.ptt, params, "ptt_vote") * R)
        if selector == "attention":
            return fn, _pick(params, ["ptt_vote."], ("q", "k", "v", "attn1", "attn2"))
        return fn, _pick(params, ["ptt_vote."]) + [x]
    if selector == "vote":
        Rc = _projection(rng, (N_SEEDS, 3))
        Rf = _projection(rng, (N_SEEDS, WIDTH))
        Rl = _projection(rng, (N_SEEDS,))

        def fn():
            v = vote(seeds, params, None)
            return ag.tsum(v.centers * Rc) + ag.tsum(v.feats * Rf) + ag.tsum(v.logits * Rl)
        return fn, _pick(params, ["vote."])
    if selector == "proposal":
        centers = Parameter("vote_centers", coords)
        vfeats = Parameter("vote_feats", feats)
        logits = Parameter("vote_logits", rng.standard_normal(N_SEEDS))
        Ro = _projection(rng, (cfg.num_clusters, 4))
        Rs = _projection(rng, (cfg.num_clusters,))

        def fn():
            p = generate_proposals(VoteOutput(coords, centers, vfeats, logits), params, cfg.num_clusters,
                                   cfg.cluster_radius, cfg.cluster_nsample, cfg.ptt)
            return ag.tsum(p.offsets * Ro) + ag.tsum(p.scores * Rs)
        leaves = _pick(params, ["cluster.", "proposal.", "ptt_prop."]) + [centers, vfeats, logits]
        return fn, leaves
    # loss: the full tiny network end to end, every trainable parameter
    template = PointCloud(rng.uniform(-1.0, 1.0, (cfg.template_budget, 3)) * np.array([2.0, 0.9, 0.7]))
    search = PointCloud(rng.uniform(-1.0, 1.0, (cfg.search_budget, 3)) * np.array([3.0, 2.0, 0.7]))
    gt = OrientedBox3((0.2, -0.1, 0.0), (1.8, 1.5, 4.2), 0.1)
    net = TrackerNet(cfg, params)
    loss_cfg = LossConfig(proposal_radius=1.0)

    def fn():
        return compute_loss(net.forward(template, search), gt, loss_cfg).L_all
    return fn, net.parameters()


def run_gradcheck(selector: str = "all", seed: int = 0, tolerance: float = 1e-4,
                  corrupt: Optional[Sequence[str]] = None, heads: int = 1, layers: int = 1
                  ) -> Dict[str, ag.GradCheckReport]:
    """One report per selected block; ``corrupt`` names ops whose backward is sabotaged."""
    names = SELECTORS if selector == "all" else (selector,)
    ctx = ag.corrupt_backward(*corrupt) if corrupt else contextlib.nullcontext()
    reports = {}
    with ctx:
        for name in names:
            fn, leaves = build_case(name, seed, heads, layers)
            reports[name] = ag.grad_check(fn, leaves, tolerance=tolerance)
    return reports
