"""Geometric primitives: point clouds, yaw-oriented 3D boxes, canonical frames and 3D IoU.

Conventions: z is the vertical axis. A box's ``size`` is ``(w, h, l)``; in the box
frame ``l`` runs along local x (the heading direction), ``w`` along local y and
``h`` along z. Heading is a counter-clockwise yaw about z, kept in (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


def normalize_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    theta = float(theta)
    if -math.pi < theta <= math.pi:
        return theta
    return math.pi - math.fmod(math.fmod(math.pi - theta, 2 * math.pi) + 2 * math.pi, 2 * math.pi)


def yaw_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass
class PointCloud:
    """Ordered points ``[N, 3]`` with optional per-point feature rows ``[N, D]``."""

    points: np.ndarray
    features: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape [N, 3], got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        self.points = pts
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if feats.ndim != 2 or feats.shape[0] != pts.shape[0] or feats.shape[1] < 1:
                raise ValueError(
                    f"features must have shape [{pts.shape[0]}, D>=1], got {feats.shape}")
            self.features = feats

    def __len__(self) -> int:
        return self.points.shape[0]

    def select(self, idx) -> "PointCloud":
        idx = np.asarray(idx, dtype=np.int64)
        feats = None if self.features is None else self.features[idx]
        return PointCloud(self.points[idx], feats)

    @staticmethod
    def concat(clouds: Sequence["PointCloud"]) -> "PointCloud":
        if not clouds:
            return PointCloud(np.zeros((0, 3)))
        pts = np.concatenate([c.points for c in clouds], axis=0)
        if all(c.features is not None for c in clouds):
            return PointCloud(pts, np.concatenate([c.features for c in clouds], axis=0))
        return PointCloud(pts)

    def translated(self, offset) -> "PointCloud":
        return PointCloud(self.points + np.asarray(offset, dtype=np.float64), self.features)


@dataclass(frozen=True)
class OrientedBox3:
    center: tuple
    size: tuple  # (w, h, l)
    heading: float = 0.0

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        s = tuple(float(v) for v in self.size)
        if len(c) != 3 or len(s) != 3:
            raise ValueError("center and size need three components")
        if not all(math.isfinite(v) for v in c + s + (float(self.heading),)):
            raise ValueError("box parameters must be finite")
        if min(s) <= 0:
            raise ValueError(f"box extents must be positive, got {s}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", s)
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def w(self) -> float:
        return self.size[0]

    @property
    def h(self) -> float:
        return self.size[1]

    @property
    def l(self) -> float:  # noqa: E743
        return self.size[2]

    @property
    def center_array(self) -> np.ndarray:
        return np.array(self.center)

    @property
    def half_extents(self) -> np.ndarray:
        """Half extents along the box's local (x, y, z) axes."""
        return np.array([self.l, self.w, self.h]) / 2.0

    @property
    def volume(self) -> float:
        return self.w * self.h * self.l

    def to_vector(self) -> list:
        """``[x, y, z, w, h, l, heading]``."""
        return [*self.center, *self.size, self.heading]

    @classmethod
    def from_vector(cls, v) -> "OrientedBox3":
        v = [float(x) for x in v]
        return cls(tuple(v[0:3]), tuple(v[3:6]), v[6])

    def enlarged(self, margins) -> "OrientedBox3":
        """Grow each half extent by ``margins`` = (along-heading, lateral, vertical)."""
        mx, my, mz = (float(m) for m in margins)
        w, h, l = self.size
        return OrientedBox3(self.center, (w + 2 * my, h + 2 * mz, l + 2 * mx), self.heading)

    def corners_bev(self) -> np.ndarray:
        """Ground-plane corners ``[4, 2]`` in counter-clockwise order."""
        hx, hy = self.l / 2.0, self.w / 2.0
        local = np.array([[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]])
        c, s = math.cos(self.heading), math.sin(self.heading)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array(self.center[:2])


@dataclass(frozen=True)
class RigidTransform2DYaw:
    """``p -> R(yaw) p + translation`` with R a rotation about z."""

    translation: tuple = (0.0, 0.0, 0.0)
    yaw: float = 0.0

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ yaw_matrix(self.yaw).T + np.asarray(self.translation, dtype=np.float64)

    def inverse(self) -> "RigidTransform2DYaw":
        t = -yaw_matrix(-self.yaw) @ np.asarray(self.translation, dtype=np.float64)
        return RigidTransform2DYaw(tuple(t), -self.yaw)

    def compose(self, other: "RigidTransform2DYaw") -> "RigidTransform2DYaw":
        """``self.compose(other)`` applies ``other`` first, then ``self``."""
        t = yaw_matrix(self.yaw) @ np.asarray(other.translation) + np.asarray(self.translation)
        return RigidTransform2DYaw(tuple(t), self.yaw + other.yaw)

    def apply_box(self, box: OrientedBox3) -> OrientedBox3:
        c = self.apply(np.array(box.center)[None])[0]
        return OrientedBox3(tuple(c), box.size, box.heading + self.yaw)

    @classmethod
    def box_to_world(cls, box: OrientedBox3) -> "RigidTransform2DYaw":
        """Maps the box's canonical frame back to the world frame."""
        return cls(box.center, box.heading)


def _to_box_frame(box: OrientedBox3, points: np.ndarray) -> np.ndarray:
    return (points - np.array(box.center)) @ yaw_matrix(-box.heading).T


def contains_mask(box: OrientedBox3, points) -> np.ndarray:
    """Boolean membership of each row of ``points`` (boundary inclusive)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    local = _to_box_frame(box, pts)
    return np.all(np.abs(local) <= box.half_extents, axis=1)


def box_contains(box: OrientedBox3, p) -> bool:
    return bool(contains_mask(box, np.asarray(p, dtype=np.float64)[None])[0])


def crop_to_box(cloud: PointCloud, box: OrientedBox3) -> PointCloud:
    return cloud.select(np.flatnonzero(contains_mask(box, cloud.points)))


def to_canonical_frame(cloud: PointCloud, box: OrientedBox3) -> PointCloud:
    """Express ``cloud`` in the frame where ``box`` is origin-centred with zero heading."""
    return PointCloud(_to_box_frame(box, cloud.points), cloud.features)


def from_canonical_frame(cloud: PointCloud, box: OrientedBox3) -> PointCloud:
    return PointCloud(RigidTransform2DYaw.box_to_world(box).apply(cloud.points), cloud.features)


def canonical_box(box: OrientedBox3, reference: OrientedBox3) -> OrientedBox3:
    """``box`` expressed in the canonical frame of ``reference``."""
    return RigidTransform2DYaw.box_to_world(reference).inverse().apply_box(box)


def decanonical_box(box: OrientedBox3, reference: OrientedBox3) -> OrientedBox3:
    return RigidTransform2DYaw.box_to_world(reference).apply_box(box)


# --- 3D IoU -----------------------------------------------------------------

def _clip(subject: list, a: np.ndarray, b: np.ndarray) -> list:
    # keep the part of `subject` left of the directed edge a->b
    def side(p):
        return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])

    out = []
    n = len(subject)
    for i in range(n):
        cur, prev = subject[i], subject[i - 1]
        s_cur, s_prev = side(cur), side(prev)
        if s_cur >= 0:
            if s_prev < 0:
                t = s_prev / (s_prev - s_cur)
                out.append(prev + t * (cur - prev))
            out.append(cur)
        elif s_prev >= 0:
            t = s_prev / (s_prev - s_cur)
            out.append(prev + t * (cur - prev))
    return out


def polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    p = np.asarray(poly)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def convex_intersection(subject: np.ndarray, clip: np.ndarray) -> list:
    """Sutherland-Hodgman clipping of two counter-clockwise convex polygons."""
    out = [np.asarray(p, dtype=np.float64) for p in subject]
    m = len(clip)
    for i in range(m):
        if not out:
            break
        out = _clip(out, clip[i], clip[(i + 1) % m])
    return out


def bev_intersection_area(a: OrientedBox3, b: OrientedBox3) -> float:
    return polygon_area(convex_intersection(a.corners_bev(), b.corners_bev()))


def iou_3d(a: OrientedBox3, b: OrientedBox3) -> float:
    """Volumetric IoU of two yaw-rotated boxes.

    Exact up to floating point: ground-plane overlap by polygon clipping times
    the overlap of the vertical extents. The pair is put in a fixed order first
    so that ``iou_3d(a, b) == iou_3d(b, a)`` holds bitwise.
    """
    if a == b:
        return 1.0
    if tuple(a.to_vector()) > tuple(b.to_vector()):
        a, b = b, a
    za0, za1 = a.center[2] - a.h / 2, a.center[2] + a.h / 2
    zb0, zb1 = b.center[2] - b.h / 2, b.center[2] + b.h / 2
    dz = min(za1, zb1) - max(za0, zb0)
    if dz <= 0:
        return 0.0
    # cheap reject on circumscribed circles
    ra = math.hypot(a.l, a.w) / 2
    rb = math.hypot(b.l, b.w) / 2
    if math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) > ra + rb:
        return 0.0
    inter = bev_intersection_area(a, b) * dz
    union = a.volume + b.volume - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def center_distance(a: OrientedBox3, b: OrientedBox3, bev: bool = False) -> float:
    d = np.array(a.center) - np.array(b.center)
    if bev:
        d = d[:2]
    return float(np.linalg.norm(d))
