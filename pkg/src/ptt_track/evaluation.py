"""One-pass evaluation, sparsity statistics, KITTI label conversion and timing."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import OrientedBox3, center_distance, contains_mask, iou_3d

# Committed grids: 21 uniform points; i / 20 keeps 0.4, 0.6, ... exactly representable.
OVERLAP_GRID = np.arange(21) / 20.0
ERROR_GRID = np.arange(21) / 10.0  # metres, [0, 2]

SPARSITY_INTERVALS = ((0, 20), (20, 100), (100, 500), (500, None))
SPARSITY_LABELS = ("<20", "20-100", "100-500", ">500")
# point-count bucket shares reported for KITTI Car
KITTI_CAR_FRACTIONS = (0.2610, 0.3169, 0.2495, 0.1725)


@dataclass(frozen=True)
class OPEConfig:
    overlap_thresholds: Tuple[float, ...] = tuple(OVERLAP_GRID)
    error_thresholds: Tuple[float, ...] = tuple(ERROR_GRID)
    bev_center_error: bool = False
    skip_first: bool = True

    def __post_init__(self):
        for g in (self.overlap_thresholds, self.error_thresholds):
            if len(g) < 2 or np.any(np.diff(g) <= 0):
                raise ValueError("threshold grids must be strictly increasing with >= 2 points")


@dataclass
class OPEResult:
    success: float
    precision: float
    overlaps: np.ndarray
    errors: np.ndarray

    @property
    def frames(self) -> int:
        return len(self.overlaps)


def _auc(curve: np.ndarray, grid: np.ndarray) -> float:
    grid = np.asarray(grid, dtype=np.float64)
    area = float(np.sum((curve[1:] + curve[:-1]) * np.diff(grid)) / 2.0)
    return 100.0 * area / float(grid[-1] - grid[0])


def success_curve(overlaps, grid=OVERLAP_GRID) -> np.ndarray:
    o = np.asarray(overlaps, dtype=np.float64)
    return np.array([np.mean(o > t) for t in grid])


def precision_curve(errors, grid=ERROR_GRID) -> np.ndarray:
    e = np.asarray(errors, dtype=np.float64)
    return np.array([np.mean(e < t) for t in grid])


def success_auc(overlaps, grid=OVERLAP_GRID) -> float:
    """Trapezoid AUC (percent of the grid range) of the fraction with overlap > t."""
    return _auc(success_curve(overlaps, grid), np.asarray(grid))


def precision_auc(errors, grid=ERROR_GRID) -> float:
    """Trapezoid AUC (percent of the grid range) of the fraction with center error < t."""
    return _auc(precision_curve(errors, grid), np.asarray(grid))


def frame_metrics(pred: Sequence[OrientedBox3], gt: Sequence[OrientedBox3], config: OPEConfig = OPEConfig()):
    if len(pred) != len(gt):
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(gt)} ground-truth boxes")
    start = 1 if config.skip_first else 0
    pairs = list(zip(pred, gt))[start:]
    overlaps = np.array([iou_3d(p, g) for p, g in pairs])
    errors = np.array([center_distance(p, g, bev=config.bev_center_error) for p, g in pairs])
    return overlaps, errors


def ope_from_values(overlaps, errors, config: OPEConfig = OPEConfig()) -> OPEResult:
    overlaps = np.asarray(overlaps, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if overlaps.size == 0:
        raise ValueError("no frames to evaluate")
    return OPEResult(success_auc(overlaps, config.overlap_thresholds),
                     precision_auc(errors, config.error_thresholds), overlaps, errors)


def ope_metrics(pred: Sequence[OrientedBox3], gt: Sequence[OrientedBox3],
                config: OPEConfig = OPEConfig()) -> OPEResult:
    """Success / Precision of one sequence; the initialization frame is skipped by default."""
    return ope_from_values(*frame_metrics(pred, gt, config), config)


def ope_over_sequences(results: Iterable[Tuple[Sequence[OrientedBox3], Sequence[OrientedBox3]]],
                       config: OPEConfig = OPEConfig()) -> OPEResult:
    """Pool frames of several sequences into one OPE result."""
    ovs, errs = [], []
    for pred, gt in results:
        o, e = frame_metrics(pred, gt, config)
        ovs.append(o)
        errs.append(e)
    return ope_from_values(np.concatenate(ovs), np.concatenate(errs), config)


# --- sparsity ------------------------------------------------------------------------------

@dataclass
class SparsityBucket:
    label: str
    interval: Tuple[int, Optional[int]]
    frames: int
    fraction: float


def bucket_index(count: int, intervals=SPARSITY_INTERVALS) -> int:
    for i, (lo, hi) in enumerate(intervals):
        if count >= lo and (hi is None or count < hi):
            return i
    raise ValueError(f"count {count} outside all intervals")


def inside_counts(sequences) -> List[int]:
    """Number of points inside the ground-truth box, per frame, over all sequences."""
    out = []
    for seq in sequences:
        for fr in seq.frames:
            out.append(int(contains_mask(fr.box, fr.cloud.points).sum()))
    return out


def histogram_from_counts(counts: Sequence[int], intervals=SPARSITY_INTERVALS,
                          labels=SPARSITY_LABELS) -> List[SparsityBucket]:
    tally = [0] * len(intervals)
    for c in counts:
        tally[bucket_index(c, intervals)] += 1
    total = sum(tally)
    return [SparsityBucket(lab, iv, n, n / total if total else 0.0)
            for lab, iv, n in zip(labels, intervals, tally)]


def sparsity_histogram(sequences) -> List[SparsityBucket]:
    return histogram_from_counts(inside_counts(sequences))


@dataclass
class IntervalRow:
    label: str
    sequences: int
    result: Optional[OPEResult]  # None when no sequence falls in the interval


@dataclass
class IntervalTable:
    rows: List[IntervalRow]
    overall_success: float
    overall_precision: float


def per_interval_ope(tagged: Sequence[Tuple[int, OPEResult]], intervals=SPARSITY_INTERVALS,
                     labels=SPARSITY_LABELS) -> IntervalTable:
    """Group per-sequence results by first-frame point count.

    ``tagged`` holds (first-frame inside-point count, per-sequence OPEResult).
    The overall row is the frame-weighted mean of the per-interval values.
    """
    groups: List[List[OPEResult]] = [[] for _ in intervals]
    for count, res in tagged:
        groups[bucket_index(count, intervals)].append(res)
    rows = []
    w_s = w_p = w = 0.0
    for lab, grp in zip(labels, groups):
        if not grp:
            rows.append(IntervalRow(lab, 0, None))
            continue
        pooled = OPEResult(0.0, 0.0, np.concatenate([g.overlaps for g in grp]),
                           np.concatenate([g.errors for g in grp]))
        # pooled AUC equals the frame-weighted mean of member AUCs (AUC is linear in the curve)
        n = np.array([g.frames for g in grp], dtype=np.float64)
        pooled.success = float(np.dot(n, [g.success for g in grp]) / n.sum())
        pooled.precision = float(np.dot(n, [g.precision for g in grp]) / n.sum())
        rows.append(IntervalRow(lab, len(grp), pooled))
        w_s += pooled.success * n.sum()
        w_p += pooled.precision * n.sum()
        w += n.sum()
    if w == 0:
        raise ValueError("no sequences to tabulate")
    return IntervalTable(rows, w_s / w, w_p / w)


# --- KITTI tracking labels ----------------------------------------------------------------

class LabelFormatError(ValueError):
    pass


KITTI_FIELDS = ("frame", "track_id", "type", "truncated", "occluded", "alpha",
                "bbox_left", "bbox_top", "bbox_right", "bbox_bottom",
                "height", "width", "length", "x", "y", "z", "rotation_y")


@dataclass
class KittiObject:
    frame: int
    track_id: int
    type: str
    tokens: Tuple[str, ...]  # the raw whitespace-split row
    line: int

    @property
    def dims_hwl(self) -> Tuple[float, float, float]:
        return tuple(float(v) for v in self.tokens[10:13])

    @property
    def location(self) -> Tuple[float, float, float]:
        return tuple(float(v) for v in self.tokens[13:16])

    @property
    def rotation_y(self) -> float:
        return float(self.tokens[16])

    def box(self) -> OrientedBox3:
        return kitti_to_box(self.dims_hwl, self.location, self.rotation_y)


def kitti_to_box(dims_hwl, location, rotation_y) -> OrientedBox3:
    """Camera-frame KITTI box -> z-up box.

    Camera axes are x right, y down, z forward, and ``location`` is the bottom
    face center. The z-up frame takes X = z_cam, Y = -x_cam, Z = -y_cam; the
    center is lifted by h/2 and the yaw becomes ``-rotation_y - pi/2``.
    """
    h, w, l = dims_hwl
    x, y, z = location
    return OrientedBox3((z, -x, -y + h / 2.0), (w, h, l), -rotation_y - math.pi / 2.0)


def box_to_kitti(box: OrientedBox3):
    """Inverse of :func:`kitti_to_box`: (dims_hwl, location, rotation_y)."""
    X, Y, Z = box.center
    h = box.h
    ry = -box.heading - math.pi / 2.0
    ry = math.atan2(math.sin(ry), math.cos(ry))
    return (h, box.w, box.l), (-Y, -(Z - h / 2.0), X), ry


def parse_kitti_labels(lines: Iterable[str], source: str = "<labels>") -> List[KittiObject]:
    out = []
    for n, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        tok = tuple(line.split())
        if len(tok) not in (17, 18):
            raise LabelFormatError(f"{source}: line {n}: expected 17 or 18 fields, got {len(tok)}")
        try:
            frame, tid = int(tok[0]), int(tok[1])
            [float(v) for v in tok[3:]]
        except ValueError as exc:
            raise LabelFormatError(f"{source}: line {n}: {exc}") from exc
        out.append(KittiObject(frame, tid, tok[2], tok, n))
    return out


@dataclass
class Tracklet:
    scene: str
    track_id: int
    type: str
    objects: List[KittiObject]

    @property
    def frames(self) -> List[int]:
        return [o.frame for o in self.objects]

    @property
    def boxes(self) -> List[OrientedBox3]:
        return [o.box() for o in self.objects]

    def kitti_rows(self) -> List[str]:
        """Re-serialize the source rows (their 3D fields round-trip unchanged)."""
        return [" ".join(o.tokens) for o in self.objects]


def convert_kitti_labels(lines: Iterable[str], scene: str = "0000",
                         types: Optional[Sequence[str]] = None) -> List[Tracklet]:
    """Split a multi-object label stream into one tracklet per track id, frame ordered."""
    objs = parse_kitti_labels(lines, source=scene)
    by_id: Dict[int, List[KittiObject]] = {}
    for o in objs:
        if o.track_id < 0 or o.type == "DontCare":
            continue
        if types is not None and o.type not in types:
            continue
        seq = by_id.setdefault(o.track_id, [])
        if seq and o.frame <= seq[-1].frame:
            raise LabelFormatError(
                f"{scene}: line {o.line}: track {o.track_id} frame {o.frame} does not follow "
                f"frame {seq[-1].frame}")
        seq.append(o)
    return [Tracklet(scene, tid, seq[0].type, seq) for tid, seq in sorted(by_id.items())]


def convert_kitti_dir(label_dir, types: Optional[Sequence[str]] = None) -> List[Tracklet]:
    out = []
    for path in sorted(Path(label_dir).glob("*.txt")):
        with open(path) as fh:
            out.extend(convert_kitti_labels(fh, scene=path.stem, types=types))
    return out


# --- timing ---------------------------------------------------------------------------

@dataclass
class TimingReport:
    frames: int
    prepare_ms: float
    forward_ms: float
    post_ms: float
    total_ms: float

    @property
    def fps(self) -> float:
        return 1000.0 / self.total_ms if self.total_ms > 0 else float("inf")

    def lines(self) -> List[str]:
        return [
            f"frames           {self.frames}",
            f"prepare_ms       {self.prepare_ms:.3f}",
            f"forward_ms       {self.forward_ms:.3f}",
            f"post_ms          {self.post_ms:.3f}",
            f"total_ms         {self.total_ms:.3f}",
            f"fps              {self.fps:.2f}",
        ]


def timing_breakdown(track_results) -> TimingReport:
    """Mean per-stage wall time over every tracked (non-initial) frame."""
    rows = [t for r in track_results for t in r.timings[1:]]
    if not rows:
        raise ValueError("no timed frames")
    ms = lambda attr: 1000.0 * float(np.mean([getattr(t, attr) for t in rows]))  # noqa: E731
    return TimingReport(len(rows), ms("prepare"), ms("forward"), ms("post"), ms("total"))


# --- reports ---------------------------------------------------------------------------

def format_report(overall: OPEResult, table: Optional[IntervalTable] = None,
                  config: OPEConfig = OPEConfig()) -> str:
    """Plain-text summary block."""
    lines = [
        "# OPE summary",
        f"grid_overlap     {len(config.overlap_thresholds)} points on "
        f"[{config.overlap_thresholds[0]:g}, {config.overlap_thresholds[-1]:g}]",
        f"grid_error_m     {len(config.error_thresholds)} points on "
        f"[{config.error_thresholds[0]:g}, {config.error_thresholds[-1]:g}]",
        f"frames           {overall.frames}",
        f"success          {overall.success:.4f}",
        f"precision        {overall.precision:.4f}",
    ]
    if table is not None:
        lines.append("# per first-frame point interval")
        lines.append("interval  sequences  frames  success  precision")
        for row in table.rows:
            if row.result is None:
                lines.append(f"{row.label:<9s} {0:>9d}  absent")
            else:
                lines.append(f"{row.label:<9s} {row.sequences:>9d} {row.result.frames:>7d} "
                             f"{row.result.success:8.4f} {row.result.precision:10.4f}")
        lines.append(f"overall   success {table.overall_success:.4f} "
                     f"precision {table.overall_precision:.4f}")
    return "\n".join(lines) + "\n"


def curves_csv(overall: OPEResult, config: OPEConfig = OPEConfig()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve", "threshold", "fraction"])
    for t, v in zip(config.overlap_thresholds, success_curve(overall.overlaps, config.overlap_thresholds)):
        w.writerow(["success", repr(float(t)), repr(float(v))])
    for t, v in zip(config.error_thresholds, precision_curve(overall.errors, config.error_thresholds)):
        w.writerow(["precision", repr(float(t)), repr(float(v))])
    return buf.getvalue()
