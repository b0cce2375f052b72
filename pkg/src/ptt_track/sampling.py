"""Seed sampling (random, farthest-point, feature-space farthest-point), kNN and ball query."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .geometry import PointCloud

log = logging.getLogger(__name__)

METHODS = ("random", "fps", "feat-fps")


@dataclass(frozen=True)
class SampleSpec:
    """How to pick ``count`` seeds.

    ``start`` is either a fixed start index for the farthest-point methods or
    the string ``"random"``, in which case the start is drawn from ``seed``.
    """

    method: str = "fps"
    count: int = 1
    seed: int = 0
    start: Union[int, str] = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown sampling method {self.method!r}; expected one of {METHODS}")
        if self.count < 1:
            raise ValueError("sample count must be >= 1")


def _coords(cloud) -> np.ndarray:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    return pts


def _start_index(spec: SampleSpec, n: int) -> int:
    if spec.start == "random":
        return int(np.random.default_rng(spec.seed).integers(n))
    start = int(spec.start)
    if not 0 <= start < n:
        raise ValueError(f"start index {start} out of range for {n} points")
    return start


def farthest_point_indices(x: np.ndarray, count: int, start: int = 0) -> np.ndarray:
    """Farthest-point iteration over the rows of ``x`` (any dimension).

    Ties go to the lowest index. When ``count`` exceeds the number of rows the
    selected order is cycled to pad the output.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot sample from an empty set")
    m = min(count, n)
    sel = np.empty(m, dtype=np.int64)
    sel[0] = start
    cols = np.ascontiguousarray(x.T)
    d = np.zeros(n)
    for c in cols:
        d += (c - c[start]) ** 2
    d[start] = -1.0  # never re-pick, even among duplicates
    step = np.empty(n)
    for i in range(1, m):
        nxt = int(np.argmax(d))
        sel[i] = nxt
        step.fill(0.0)
        for c in cols:
            step += (c - c[nxt]) ** 2
        np.minimum(d, step, out=d)
        d[nxt] = -1.0
    if count > n:
        log.debug("farthest-point sampling %d of %d rows: padding by repetition", count, n)
        sel = sel[np.arange(count) % n]
    return sel


def sample_random(cloud, spec: SampleSpec) -> np.ndarray:
    n = len(_coords(cloud))
    if n == 0:
        raise ValueError("cannot sample from an empty cloud")
    rng = np.random.default_rng(spec.seed)
    if spec.count > n:
        return rng.integers(0, n, size=spec.count)
    return rng.permutation(n)[: spec.count]


def sample_fps(cloud, spec: SampleSpec) -> np.ndarray:
    pts = _coords(cloud)
    if len(pts) == 0:
        raise ValueError("cannot sample from an empty cloud")
    return farthest_point_indices(pts, spec.count, _start_index(spec, len(pts)))


def sample_feat_fps(seeds, spec: SampleSpec) -> np.ndarray:
    """Farthest-point sampling with distances between descriptor rows."""
    feats = getattr(seeds, "feats", None)
    if feats is None:
        feats = getattr(seeds, "features", None)
    if feats is None:
        raise ValueError("feature-space sampling needs per-point descriptors")
    feats = np.asarray(getattr(feats, "data", feats), dtype=np.float64)
    if len(feats) == 0:
        raise ValueError("cannot sample from an empty set")
    return farthest_point_indices(feats, spec.count, _start_index(spec, len(feats)))


def sample(cloud, spec: SampleSpec, feats: Optional[np.ndarray] = None) -> np.ndarray:
    """Dispatch on ``spec.method``. Feat-FPS falls back to coordinates when ``feats`` is None."""
    if spec.method == "random":
        return sample_random(cloud, spec)
    if spec.method == "fps" or feats is None:
        return sample_fps(cloud, spec)
    return farthest_point_indices(np.asarray(feats, dtype=np.float64), spec.count,
                                  _start_index(spec, len(feats)))


def pairwise_sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0], b.shape[0]))
    for j in range(a.shape[1]):
        out += (a[:, j, None] - b[None, :, j]) ** 2
    return out


def knn(query, base, k: int) -> np.ndarray:
    """Indices ``[N, k]`` of the nearest base points per query, nearest first.

    Ties go to the lower index. With fewer than ``k`` base points each row is
    padded by repeating its nearest neighbor.
    """
    q = np.asarray(query, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(base, dtype=np.float64).reshape(-1, 3)
    if len(b) == 0:
        raise ValueError("knn needs a non-empty base set")
    if k < 1:
        raise ValueError("k must be >= 1")
    d = pairwise_sq_dist(q, b)
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    if order.shape[1] < k:
        pad = np.repeat(order[:, :1], k - order.shape[1], axis=1)
        order = np.concatenate([order, pad], axis=1)
    return order


def ball_query(centers, points, radius: float, nsample: int) -> np.ndarray:
    """Up to ``nsample`` point indices within ``radius`` of each center, in index order.

    Short rows are padded with their first hit; a center with no hit gets its
    nearest point.
    """
    c = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    d = pairwise_sq_dist(c, p)
    within = d <= radius * radius
    rank = np.cumsum(within, axis=1)
    keep = within & (rank <= nsample)
    rows, cols = np.nonzero(keep)
    counts = np.minimum(rank[:, -1], nsample)
    out = np.empty((len(c), nsample), dtype=np.int64)
    out[:] = np.argmin(d, axis=1)[:, None]
    out[rows, rank[rows, cols] - 1] = cols
    has = counts > 0
    # pad short rows with their first hit
    pad = np.arange(nsample)[None, :] >= counts[:, None]
    out = np.where(pad & has[:, None], out[:, :1], out)
    return out
