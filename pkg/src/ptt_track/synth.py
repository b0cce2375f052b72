"""Deterministic synthetic LiDAR-like tracking sequences.

File formats (little-endian throughout):

* point cloud: ``b"PTTPC\\x00" | version:u8 | count:u32 | width:u32`` then
  ``count`` rows of ``3 + width`` float64 (xyz then features);
* sequence: ``b"PTTSEQ" | version:u8 | frames:u32 | id_len:u16 | id:utf-8`` then
  per frame 7 float64 box values ``[x, y, z, w, h, l, heading]`` and one
  embedded point-cloud record;
* manifest: JSON lines ``{"scene_id", "path", "seed", "spec_digest", "spec"}``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .evaluation import KITTI_CAR_FRACTIONS, SPARSITY_INTERVALS
from .geometry import OrientedBox3, PointCloud, contains_mask, yaw_matrix
from .tracking import Frame, TrackSequence

PC_MAGIC = b"PTTPC\x00"
SEQ_MAGIC = b"PTTSEQ"
FORMAT_VERSION = 1
FRAME_DT = 0.1  # 10 Hz sweeps
SURFACE_INSET = 0.99  # keep surface samples strictly inside the box


@dataclass(frozen=True)
class SceneSpec:
    shape: str = "l-shell"  # or "box-shell"
    points_range: Tuple[int, int] = (100, 200)
    n_frames: int = 10
    speed: float = 0.0  # m/s
    turn_rate: float = 0.0  # rad/s
    start: Tuple[float, float, float] = (10.0, 0.0, 0.75)
    heading0: float = 0.0
    size: Tuple[float, float, float] = (1.8, 1.5, 4.2)  # (w, h, l)
    clutter: int = 300
    clutter_spread: float = 6.0  # half width of the clutter square around the target
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.shape not in ("l-shell", "box-shell"):
            raise ValueError(f"unknown target shape {self.shape!r}")
        lo, hi = self.points_range
        if lo < 0 or hi < lo:
            raise ValueError(f"bad points_range {self.points_range}")
        if self.n_frames < 2:
            raise ValueError("a sequence needs at least two frames")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        for key in ("points_range", "start", "size"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def trajectory_pose(spec: SceneSpec, t: float) -> Tuple[np.ndarray, float]:
    """Closed-form constant-speed, constant-turn-rate pose at time ``t``."""
    x0, y0, z0 = spec.start
    th0 = spec.heading0
    v, w = spec.speed, spec.turn_rate
    if w == 0.0:
        x = x0 + v * t * math.cos(th0)
        y = y0 + v * t * math.sin(th0)
    else:
        x = x0 + v / w * (math.sin(th0 + w * t) - math.sin(th0))
        y = y0 - v / w * (math.cos(th0 + w * t) - math.cos(th0))
    return np.array([x, y, z0]), th0 + w * t


def _faces(box: OrientedBox3, shape: str) -> List[Tuple[int, float]]:
    """(local axis, sign) pairs of the faces to sample."""
    if shape == "box-shell":
        return [(a, s) for a in range(3) for s in (-1.0, 1.0)]
    # two sensor-facing vertical faces; the sensor sits at the origin
    to_sensor = yaw_matrix(-box.heading) @ (-np.array(box.center))
    return [(0, float(np.sign(to_sensor[0]) or 1.0)), (1, float(np.sign(to_sensor[1]) or 1.0))]


def sample_surface(box: OrientedBox3, n: int, shape: str, rng: np.random.Generator) -> np.ndarray:
    """``n`` points on the chosen faces, area-weighted, in world coordinates."""
    if n == 0:
        return np.zeros((0, 3))
    half = box.half_extents * SURFACE_INSET
    faces = _faces(box, shape)
    areas = []
    for axis, _ in faces:
        others = [i for i in range(3) if i != axis]
        areas.append(4 * half[others[0]] * half[others[1]])
    areas = np.array(areas) / np.sum(areas)
    which = rng.choice(len(faces), size=n, p=areas)
    local = rng.uniform(-1.0, 1.0, size=(n, 3)) * half
    for fi, (axis, sign) in enumerate(faces):
        sel = which == fi
        local[sel, axis] = sign * half[axis]
    return local @ yaw_matrix(box.heading).T + np.array(box.center)


def sample_clutter(box: OrientedBox3, n: int, spread: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` background points around the box, none of them inside it."""
    out = np.zeros((0, 3))
    cx, cy, _ = box.center
    while len(out) < n:
        m = 2 * (n - len(out)) + 8
        pts = np.column_stack([
            rng.uniform(cx - spread, cx + spread, m),
            rng.uniform(cy - spread, cy + spread, m),
            rng.uniform(0.0, 2.5, m),
        ])
        pts = pts[~contains_mask(box, pts)]
        out = np.concatenate([out, pts])
    return out[:n]


def generate_sequence(spec: SceneSpec, scene_id: str = "") -> TrackSequence:
    rng = np.random.default_rng(spec.seed)
    frames = []
    lo, hi = spec.points_range
    for t in range(spec.n_frames):
        pos, heading = trajectory_pose(spec, t * FRAME_DT)
        box = OrientedBox3(tuple(pos), spec.size, heading)
        n_target = int(rng.integers(lo, hi + 1))
        target = sample_surface(box, n_target, spec.shape, rng)
        if spec.dropout > 0:
            target = target[rng.random(len(target)) >= spec.dropout]
        clutter = sample_clutter(box, spec.clutter, spec.clutter_spread, rng)
        pts = np.concatenate([target, clutter])
        pts = pts[rng.permutation(len(pts))]
        frames.append(Frame(PointCloud(pts), box))
    return TrackSequence(frames, scene_id or f"synth-{spec.seed}")


# --- binary formats ------------------------------------------------------------------------

def pack_cloud(cloud: PointCloud) -> bytes:
    width = 0 if cloud.features is None else cloud.features.shape[1]
    rows = cloud.points if width == 0 else np.concatenate([cloud.points, cloud.features], axis=1)
    return (PC_MAGIC + struct.pack("<BII", FORMAT_VERSION, len(cloud), width)
            + np.ascontiguousarray(rows, dtype="<f8").tobytes())


def unpack_cloud(buf: bytes, offset: int = 0) -> Tuple[PointCloud, int]:
    if buf[offset:offset + len(PC_MAGIC)] != PC_MAGIC:
        raise ValueError("bad point-cloud magic")
    offset += len(PC_MAGIC)
    version, count, width = struct.unpack_from("<BII", buf, offset)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported point-cloud version {version}")
    offset += 9
    n = count * (3 + width)
    rows = np.frombuffer(buf, dtype="<f8", count=n, offset=offset).reshape(count, 3 + width)
    offset += 8 * n
    feats = rows[:, 3:].astype(np.float64) if width else None
    return PointCloud(rows[:, :3].astype(np.float64), feats), offset


def write_cloud(path, cloud: PointCloud) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_cloud(cloud))


def read_cloud(path) -> PointCloud:
    with open(path, "rb") as fh:
        return unpack_cloud(fh.read())[0]


def pack_sequence(seq: TrackSequence) -> bytes:
    sid = seq.scene_id.encode("utf-8")
    parts = [SEQ_MAGIC, struct.pack("<BIH", FORMAT_VERSION, len(seq), len(sid)), sid]
    for fr in seq.frames:
        vec = fr.box.to_vector() if fr.box is not None else [float("nan")] * 7
        parts.append(struct.pack("<7d", *vec))
        parts.append(pack_cloud(fr.cloud))
    return b"".join(parts)


def unpack_sequence(buf: bytes) -> TrackSequence:
    if not buf.startswith(SEQ_MAGIC):
        raise ValueError("bad sequence magic")
    off = len(SEQ_MAGIC)
    version, n, slen = struct.unpack_from("<BIH", buf, off)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported sequence version {version}")
    off += 7
    sid = buf[off:off + slen].decode("utf-8")
    off += slen
    frames = []
    for _ in range(n):
        vec = struct.unpack_from("<7d", buf, off)
        off += 56
        cloud, off = unpack_cloud(buf, off)
        box = None if any(math.isnan(v) for v in vec) else OrientedBox3.from_vector(vec)
        frames.append(Frame(cloud, box))
    return TrackSequence(frames, sid)


def write_sequence(path, seq: TrackSequence) -> None:
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(pack_sequence(seq))
    except OSError as exc:
        raise OSError(f"cannot write sequence file {path}: {exc.strerror}") from exc


def read_sequence(path) -> TrackSequence:
    with open(path, "rb") as fh:
        return unpack_sequence(fh.read())


# --- corpora ----------------------------------------------------------------------------------

@dataclass
class ManifestEntry:
    scene_id: str
    path: str
    seed: int
    spec_digest: str
    spec: dict

    def to_json(self) -> str:
        return json.dumps({"scene_id": self.scene_id, "path": self.path, "seed": self.seed,
                           "spec_digest": self.spec_digest, "spec": self.spec}, sort_keys=False)


def derive_seed(root: int, *keys: int) -> int:
    return int(np.random.SeedSequence([root, *keys]).generate_state(1)[0])


def generate_corpus(specs: Sequence[SceneSpec], counts: Sequence[int], out_dir, seed: int = 0
                    ) -> List[ManifestEntry]:
    """Write ``counts[i]`` sequences of ``specs[i]`` plus ``manifest.jsonl`` under ``out_dir``."""
    if not specs:
        raise ValueError("need at least one scene spec")
    if len(specs) != len(counts):
        raise ValueError("specs and counts differ in length")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create corpus directory {out}: {exc.strerror}") from exc
    entries = []
    n = 0
    for si, (spec, count) in enumerate(zip(specs, counts)):
        for r in range(count):
            s = dataclasses.replace(spec, seed=derive_seed(seed, si, r))
            scene_id = f"seq{n:04d}"
            fname = f"{scene_id}.pttseq"
            write_sequence(out / fname, generate_sequence(s, scene_id))
            entries.append(ManifestEntry(scene_id, fname, s.seed, s.digest(), s.to_dict()))
            n += 1
    write_manifest(out / "manifest.jsonl", entries)
    return entries


def write_manifest(path, entries: Iterable[ManifestEntry]) -> None:
    try:
        with open(path, "w") as fh:
            for e in entries:
                fh.write(e.to_json() + "\n")
    except OSError as exc:
        raise OSError(f"cannot write manifest {path}: {exc.strerror}") from exc


def read_manifest(path) -> List[ManifestEntry]:
    entries = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                entries.append(ManifestEntry(d["scene_id"], d["path"], d["seed"], d["spec_digest"],
                                             d.get("spec", {})))
    return entries


def load_corpus(corpus_dir) -> List[TrackSequence]:
    root = Path(corpus_dir)
    return [read_sequence(root / e.path) for e in read_manifest(root / "manifest.jsonl")]


# --- presets ----------------------------------------------------------------------------------

def largest_remainder(total: int, fractions: Sequence[float]) -> List[int]:
    raw = np.asarray(fractions, dtype=np.float64) * total / np.sum(fractions)
    base = np.floor(raw).astype(int)
    order = np.argsort(-(raw - base), kind="stable")
    for i in order[: total - base.sum()]:
        base[i] += 1
    return base.tolist()


# on-target point ranges used for each sparsity interval
BUCKET_RANGES = ((5, 19), (20, 99), (100, 499), (500, 900))


def kitti_like_preset(n_sequences: int = 50, n_frames: int = 20, base: Optional[SceneSpec] = None,
                      fractions: Sequence[float] = KITTI_CAR_FRACTIONS, seed: int = 0
                      ) -> Tuple[List[SceneSpec], List[int]]:
    """Specs and counts whose per-frame on-target counts follow the KITTI Car bucket shares.

    Sequences are allotted to sparsity intervals by largest remainder; every
    frame of a sequence stays within its interval. Motion and shape vary per
    sequence, so each spec is returned with a count of one.
    """
    base = base or SceneSpec(n_frames=n_frames)
    rng = np.random.default_rng(seed)
    alloc = largest_remainder(n_sequences, fractions)
    specs = []
    for (lo, hi), (ilo, ihi), c in zip(BUCKET_RANGES, SPARSITY_INTERVALS, alloc):
        assert lo >= ilo and (ihi is None or hi < ihi)
        for _ in range(c):
            s = dataclasses.replace(base, points_range=(lo, hi), n_frames=n_frames, dropout=0.0)
            specs.append(motion_variants(s, rng))
    return specs, [1] * len(specs)


def motion_variants(spec: SceneSpec, rng: np.random.Generator) -> SceneSpec:
    """Randomize speed, turn rate, start pose and shape around ``spec``."""
    r = rng.uniform(6.0, 20.0)
    phi = rng.uniform(-math.pi, math.pi)
    return dataclasses.replace(
        spec,
        speed=float(rng.uniform(0.0, 8.0)),
        turn_rate=float(rng.uniform(-0.3, 0.3)),
        start=(r * math.cos(phi), r * math.sin(phi), spec.size[1] / 2.0),
        heading0=float(rng.uniform(-math.pi, math.pi)),
        shape=str(rng.choice(["l-shell", "box-shell"])),
    )
