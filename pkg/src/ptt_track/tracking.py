"""Frame-to-frame single-object tracking loop.

Each frame builds a template (target points in the target's own canonical
frame) and a search area (frame points around a reference box, expressed in
that box's canonical frame), asks a predictor for the target box in the search
frame, then maps the result back to world coordinates.

Trace records (one JSON object per line) carry, in this order: ``frame``,
``box`` ([x, y, z, w, h, l, heading]), ``score``, ``iou``, ``center_error``,
``empty_search``, ``template_fallback``.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import (OrientedBox3, PointCloud, canonical_box, center_distance, crop_to_box,
                       decanonical_box, iou_3d, to_canonical_frame)
from .network import TrackerNet
from .sampling import farthest_point_indices

log = logging.getLogger(__name__)

TEMPLATE_MODES = ("first-gt", "previous-result", "first-and-previous", "all-previous")
SEARCH_MODES = ("previous-result", "previous-gt", "current-gt")


@dataclass(frozen=True)
class TemplatePolicy:
    mode: str = "first-and-previous"

    def __post_init__(self):
        if self.mode not in TEMPLATE_MODES:
            raise ValueError(f"template mode must be one of {TEMPLATE_MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class SearchAreaPolicy:
    mode: str = "previous-result"
    margins: Tuple[float, float, float] = (2.0, 2.0, 1.0)  # along heading, lateral, vertical

    def __post_init__(self):
        if self.mode not in SEARCH_MODES:
            raise ValueError(f"search mode must be one of {SEARCH_MODES}, got {self.mode!r}")
        if len(self.margins) != 3 or min(self.margins) <= 0:
            raise ValueError("search margins must be three positive values")


@dataclass
class Frame:
    cloud: PointCloud
    box: Optional[OrientedBox3]


@dataclass
class TrackSequence:
    frames: List[Frame]
    scene_id: str = ""

    def __len__(self):
        return len(self.frames)

    @property
    def gt_boxes(self) -> List[Optional[OrientedBox3]]:
        return [f.box for f in self.frames]


@dataclass
class TemplateHistory:
    """Per-sequence template sources: first-frame crop and previous predictions."""

    first: Tuple[PointCloud, OrientedBox3]
    previous: List[Tuple[PointCloud, OrientedBox3]] = field(default_factory=list)
    last_template: Optional[PointCloud] = None


def resample(cloud: PointCloud, budget: Optional[int]) -> PointCloud:
    if budget is None or len(cloud) == 0:
        return cloud
    return cloud.select(farthest_point_indices(cloud.points, budget))


def canonical_crop(cloud: PointCloud, box: OrientedBox3) -> PointCloud:
    return to_canonical_frame(crop_to_box(cloud, box), box)


def build_template(history: TemplateHistory, policy: TemplatePolicy,
                   budget: Optional[int] = None) -> Tuple[PointCloud, bool]:
    """Fuse canonicalized crops per ``policy``; returns (template, used_fallback).

    An empty fusion falls back to the last non-empty template. With no
    fallback available the template is the single canonical box center.
    """
    mode = policy.mode
    if mode != "first-gt" and not history.previous:
        sources = [history.first]
    elif mode == "first-gt":
        sources = [history.first]
    elif mode == "previous-result":
        sources = [history.previous[-1]]
    elif mode == "first-and-previous":
        sources = [history.first, history.previous[-1]]
    else:
        sources = [history.first] + list(history.previous)
    fused = PointCloud.concat([canonical_crop(c, b) for c, b in sources])
    if len(fused) == 0:
        if history.last_template is not None:
            return history.last_template, True
        return PointCloud(np.zeros((1, 3))), True
    template = resample(fused, budget)
    history.last_template = template
    return template, False


def build_search_area(frame_cloud: PointCloud, reference: OrientedBox3, policy: SearchAreaPolicy,
                      budget: Optional[int] = None) -> Optional[PointCloud]:
    """Canonical crop of the margin-enlarged reference box, or None when empty."""
    area = crop_to_box(frame_cloud, reference.enlarged(policy.margins))
    if len(area) == 0:
        return None
    return resample(to_canonical_frame(area, reference), budget)


@dataclass
class FrameContext:
    index: int
    reference: OrientedBox3
    size: Tuple[float, float, float]
    gt: Optional[OrientedBox3] = None


# (template, search, context) -> ([x, y, z, heading] in the search frame, score)
Predictor = Callable[[PointCloud, PointCloud, FrameContext], Tuple[np.ndarray, float]]


class NetworkPredictor:
    def __init__(self, net: TrackerNet):
        self.net = net

    def __call__(self, template, search, ctx):
        _, box, score = self.net.forward(template, search).best()
        return box, score


def oracle_predictor(template, search, ctx: FrameContext):
    """Returns the ground-truth box in the search frame (pipeline plumbing checks)."""
    gt = canonical_box(ctx.gt, ctx.reference)
    return np.array([*gt.center, gt.heading]), 1.0


def zero_predictor(template, search, ctx):
    return np.zeros(4), 0.0


def bias_predictor(dx: float = 0.2):
    def predict(template, search, ctx):
        return np.array([dx, 0.0, 0.0, 0.0]), 0.0
    return predict


@dataclass
class FrameTiming:
    prepare: float = 0.0
    forward: float = 0.0
    post: float = 0.0
    total: float = 0.0


@dataclass
class TrackResult:
    scene_id: str
    boxes: List[OrientedBox3]
    records: List[dict]
    timings: List[FrameTiming]

    def write_trace(self, fh) -> None:
        for rec in self.records:
            fh.write(json.dumps(rec) + "\n")


def track_sequence(seq: TrackSequence, predictor: Predictor,
                   template_policy: TemplatePolicy = TemplatePolicy(),
                   search_policy: SearchAreaPolicy = SearchAreaPolicy(),
                   template_budget: Optional[int] = 512, search_budget: Optional[int] = 1024
                   ) -> TrackResult:
    if len(seq) < 2:
        raise ValueError("a tracking sequence needs at least two frames")
    first = seq.frames[0]
    if first.box is None:
        raise ValueError("the first frame needs a ground-truth box")
    size = first.box.size
    history = TemplateHistory(first=(first.cloud, first.box))
    boxes = [first.box]
    records = [_record(0, first.box, 1.0, first.box, False, False)]
    timings = [FrameTiming()]
    for t in range(1, len(seq)):
        frame = seq.frames[t]
        t0 = time.perf_counter()
        prev_box = boxes[-1]
        if search_policy.mode == "previous-result":
            reference = prev_box
        elif search_policy.mode == "previous-gt":
            reference = seq.frames[t - 1].box
        else:
            reference = frame.box
        if reference is None:
            raise ValueError(f"frame {t}: search policy {search_policy.mode} needs ground truth")
        # keep the size fixed to the first-frame box
        reference = OrientedBox3(reference.center, size, reference.heading)
        template, fallback = build_template(history, template_policy, template_budget)
        search = build_search_area(frame.cloud, reference, search_policy, search_budget)
        t1 = time.perf_counter()
        if search is None:
            log.info("%s frame %d: empty search area, coasting", seq.scene_id, t)
            box, score, empty = prev_box, float("nan"), True
            t2 = t1
        else:
            ctx = FrameContext(t, reference, size, frame.box)
            pred, score = predictor(template, search, ctx)
            t2 = time.perf_counter()
            local = OrientedBox3(tuple(pred[:3]), size, float(pred[3]))
            box = decanonical_box(local, reference)
            empty = False
        boxes.append(box)
        history.previous.append((frame.cloud, box))
        records.append(_record(t, box, score, frame.box, empty, fallback))
        t3 = time.perf_counter()
        timings.append(FrameTiming(t1 - t0, t2 - t1, t3 - t2, t3 - t0))
    return TrackResult(seq.scene_id, boxes, records, timings)


def _record(t, box, score, gt, empty, fallback) -> dict:
    return {
        "frame": t,
        "box": box.to_vector(),
        "score": None if score is None or not np.isfinite(score) else float(score),
        "iou": None if gt is None else iou_3d(box, gt),
        "center_error": None if gt is None else center_distance(box, gt),
        "empty_search": bool(empty),
        "template_fallback": bool(fallback),
    }
