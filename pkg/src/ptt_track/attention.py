"""Point-track transformer block: vector self-attention over kNN neighborhoods.

For seeds ``(c_i, f_i)`` one layer computes::

    g      = embed(f)                          # D -> M
    Q      = q(g);  K, V = k(g)[idx], v(g)[idx] # idx = knn(c, c, k)
    P      = eta(c_i - c_idx[i, j])             # 3 -> M -> M, ReLU between
    w      = softmax_j(gamma(Q_i - K_ij + P_ij))  # per channel, over neighbors
    A_i    = sum_j w_ij * (V_ij + P_ij)
    f_out  = f + out(A)                         # M -> D

Heads split the M channels evenly; each head has its own q/k/v maps and
gamma MLP on its channel slice. Layers repeat the block with fresh weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional

import numpy as np

from . import autograd as ag
from .autograd import Parameter, Tensor
from .sampling import knn


@dataclass(frozen=True)
class PTTConfig:
    embed_dim: Optional[int] = None  # M; None means M = D
    k: int = 16
    heads: int = 1
    layers: int = 1
    relation: str = "vector"  # or "scalar": dot-product relation broadcast over channels
    position_in_value: bool = True  # add P to V as well as to the relation term

    def __post_init__(self):
        if self.k < 1 or self.heads < 1 or self.layers < 1:
            raise ValueError("k, heads and layers must be positive")
        if self.relation not in ("vector", "scalar"):
            raise ValueError(f"unknown relation {self.relation!r}")
        if self.embed_dim is not None and self.embed_dim % self.heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")

    def width(self, d: int) -> int:
        m = self.embed_dim or d
        if m % self.heads:
            raise ValueError(f"embedding width {m} not divisible by heads {self.heads}")
        return m


@dataclass
class SeedSet:
    """``coords [N, 3]`` plus descriptors ``feats [N, D]``.

    Either may be a Tensor; tensor coordinates carry gradients through the
    relative position encoding.
    """

    coords: object
    feats: object

    def __post_init__(self):
        if not isinstance(self.coords, Tensor):
            self.coords = np.asarray(self.coords, dtype=np.float64)
        f = self.feats if isinstance(self.feats, Tensor) else np.asarray(self.feats, dtype=np.float64)
        fs, cs = f.shape, self.coords.shape
        if len(cs) != 2 or cs[1] != 3 or len(fs) != 2 or fs[0] != cs[0] or fs[1] < 1 or fs[0] < 1:
            raise ValueError(f"seed set shapes mismatch: coords {cs}, feats {fs}")
        self.feats = f

    def __len__(self):
        return self.coords.shape[0]

    @property
    def coords_array(self) -> np.ndarray:
        return self.coords.data if isinstance(self.coords, Tensor) else self.coords

    @property
    def feats_array(self) -> np.ndarray:
        return self.feats.data if isinstance(self.feats, Tensor) else self.feats


def _lin(rng, name, fan_in, fan_out) -> Dict[str, Parameter]:
    bound = 1.0 / np.sqrt(fan_in)
    return {
        f"{name}.W": Parameter(f"{name}.W", rng.uniform(-bound, bound, (fan_in, fan_out))),
        f"{name}.b": Parameter(f"{name}.b", rng.uniform(-bound, bound, fan_out)),
    }


def init_ptt_params(config: PTTConfig, d: int, rng: np.random.Generator,
                    prefix: str = "ptt") -> Dict[str, Parameter]:
    m = config.width(d)
    mh = m // config.heads
    params: Dict[str, Parameter] = {}
    for layer in range(config.layers):
        p = f"{prefix}.l{layer}"
        params.update(_lin(rng, f"{p}.embed", d, m))
        params.update(_lin(rng, f"{p}.pos1", 3, m))
        params.update(_lin(rng, f"{p}.pos2", m, m))
        for h in range(config.heads):
            ph = f"{p}.h{h}"
            for part in ("q", "k", "v"):
                params.update(_lin(rng, f"{ph}.{part}", m, mh))
            params.update(_lin(rng, f"{ph}.attn1", mh, mh))
            params.update(_lin(rng, f"{ph}.attn2", mh, mh))
        params.update(_lin(rng, f"{p}.out", m, d))
    return params


def zero_params(params: Mapping[str, Parameter]) -> None:
    for p in params.values():
        p.data[...] = 0.0


def _lp(params, name):
    return params[f"{name}.W"], params[f"{name}.b"]


def feature_embed(feats, params: Mapping[str, Tensor], prefix: str = "ptt.l0") -> Tensor:
    W, b = _lp(params, f"{prefix}.embed")
    return ag.linear(feats, W, b)


def position_encode(coords, neighbor_idx, params: Mapping[str, Tensor],
                    prefix: str = "ptt.l0") -> Tensor:
    """MLP of relative offsets ``c_i - c_idx[i, j]`` -> ``[N, k, M]``."""
    idx = np.asarray(neighbor_idx)
    n = coords.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"neighbor index out of range [0, {n})")
    if isinstance(coords, Tensor):
        rel = ag.reshape(coords, (n, 1, 3)) - ag.gather_neighbors(coords, idx)
    else:
        coords = np.asarray(coords, dtype=np.float64)
        rel = coords[:, None, :] - coords[idx]
    W1, b1 = _lp(params, f"{prefix}.pos1")
    W2, b2 = _lp(params, f"{prefix}.pos2")
    return ag.mlp2_relu(rel, W1, b1, W2, b2)


def _layer(coords, feats, idx, config: PTTConfig, params, prefix):
    g = feature_embed(feats, params, prefix)
    pos = position_encode(coords, idx, params, prefix)
    m = g.shape[-1]
    mh = m // config.heads
    outs, weights = [], []
    for h in range(config.heads):
        ph = f"{prefix}.h{h}"
        q = ag.linear(g, *_lp(params, f"{ph}.q"))
        k_ = ag.gather_neighbors(ag.linear(g, *_lp(params, f"{ph}.k")), idx)
        v = ag.gather_neighbors(ag.linear(g, *_lp(params, f"{ph}.v")), idx)
        p = pos if config.heads == 1 else pos[..., h * mh:(h + 1) * mh]
        n, kk = idx.shape
        if config.relation == "vector":
            rel = ag.reshape(q, (n, 1, mh)) - k_
        else:
            dots = ag.tsum(ag.reshape(q, (n, 1, mh)) * k_, axis=-1, keepdims=True)
            rel = ag.broadcast_to(dots, (n, kk, mh))
        logits = ag.mlp2_relu(rel + p, *_lp(params, f"{ph}.attn1"), *_lp(params, f"{ph}.attn2"))
        w = ag.softmax(logits, axis=1)
        value = v + p if config.position_in_value else v
        outs.append(ag.tsum(w * value, axis=1))
        weights.append(w)
    a = outs[0] if config.heads == 1 else ag.concat(outs, axis=-1)
    wts = weights[0] if config.heads == 1 else ag.concat(weights, axis=-1)
    return feats + ag.linear(a, *_lp(params, f"{prefix}.out")), wts


def _run(seeds: SeedSet, config: PTTConfig, params, prefix):
    coords = seeds.coords
    idx = knn(seeds.coords_array, seeds.coords_array, config.k)
    feats = ag.as_tensor(seeds.feats)
    all_w = []
    for layer in range(config.layers):
        feats, w = _layer(coords, feats, idx, config, params, f"{prefix}.l{layer}")
        all_w.append(w)
    return feats, all_w, idx


def ptt_forward(seeds: SeedSet, config: PTTConfig, params: Mapping[str, Tensor],
                prefix: str = "ptt") -> Tensor:
    """Refined descriptors ``[N, D]``, same width as the input."""
    try:
        out, _, _ = _run(seeds, config, params, prefix)
    except FloatingPointError as exc:
        raise FloatingPointError(f"{prefix}: {exc}") from exc
    return out


def attention_weights(seeds: SeedSet, config: PTTConfig, params: Mapping[str, Tensor],
                      prefix: str = "ptt", layer: int = 0, return_index: bool = False):
    """Post-softmax weights ``[N, k, M]`` of one layer (optionally with the kNN table)."""
    _, ws, idx = _run(seeds, config, params, prefix)
    w = ws[layer].data
    return (w, idx) if return_index else w


class PointTrackTransformer:
    """Convenience holder binding a config to its named parameters."""

    def __init__(self, config: PTTConfig, d: int, rng: Optional[np.random.Generator] = None,
                 prefix: str = "ptt", params: Optional[Mapping[str, Parameter]] = None):
        self.config = config
        self.prefix = prefix
        self.d = d
        if params is None:
            params = init_ptt_params(config, d, rng or np.random.default_rng(0), prefix)
        self.params = dict(params)

    def __call__(self, seeds: SeedSet) -> Tensor:
        return ptt_forward(seeds, self.config, self.params, self.prefix)

    def attention_weights(self, seeds: SeedSet, layer: int = 0):
        return attention_weights(seeds, self.config, self.params, self.prefix, layer)

    def parameters(self) -> List[Parameter]:
        return list(self.params.values())
