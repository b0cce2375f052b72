"""Command-line entry point: ``ptt-track <command>`` or ``python -m ptt_track``.

Every command resolves its configuration (defaults, then ``--config`` JSON,
then ``--set key=value`` overrides, then explicit flags) and writes it to
``<out>/config.json`` before doing any work.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import checkpoint
from .attention import PTTConfig, SeedSet, attention_weights
from .evaluation import (LabelFormatError, OPEConfig, curves_csv, format_report, inside_counts,
                         ope_from_values, ope_metrics, per_interval_ope, sparsity_histogram, timing_breakdown)
from .evaluation import convert_kitti_dir
from .experiments import run_ablation
from .network import TrackerConfig, TrackerNet, augment_similarity, small_config
from .synth import SceneSpec, generate_corpus, kitti_like_preset, load_corpus, read_sequence
from .tracking import (NetworkPredictor, SearchAreaPolicy, TemplateHistory, TemplatePolicy, TrackSequence,
                       build_search_area, build_template, oracle_predictor, track_sequence)
from .training import LossConfig, TrainConfig, TrainingDiverged, make_samples, train
from .verify import SELECTORS, run_gradcheck

log = logging.getLogger("ptt_track")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

SAMPLER_FLAGS = {"rs": "random", "fps": "fps", "feat-fps": "feat-fps"}
TEMPLATE_FLAGS = {"first-gt": "first-gt", "prev": "previous-result",
                  "first+prev": "first-and-previous", "all-prev": "all-previous"}
SEARCH_FLAGS = {"prev-result": "previous-result", "prev-gt": "previous-gt", "cur-gt": "current-gt"}
PTT_FLAGS = ("none", "vote", "prop", "all")

DEFAULTS: Dict = {
    "seed": 0,
    "jobs": 1,
    "model": {
        "preset": "default",  # or "small"
        "sampler": "fps",
        "ptt": "all",
        "heads": 1,
        "layers": 1,
        "k": None,  # None keeps the preset's neighborhood size
        "relation": "vector",
        "position_in_value": True,
    },
    "train": {
        "lr": 1e-3,
        "decay_every": 12,
        "decay_factor": 0.2,
        "batch_size": 8,
        "epochs": 60,
        "checkpoint_every": 0,
        "resample_every_epoch": False,
    },
    "loss": {"lambda_cb": 1.0, "lambda_rv": 1.0, "lambda_rb": 1.0, "proposal_radius": 0.3},
    "track": {"template": "first+prev", "search": "prev-result", "bev_error": False},
    "bench": {"max_sequences": 5},
    "ablate": {"steps": 40},
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- configuration ---------------------------------------------------------------------------

def _merge(base: Dict, extra: Dict, path: str = "") -> Dict:
    for key, val in extra.items():
        where = f"{path}{key}"
        if key not in base:
            raise UsageError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise UsageError(f"config key {where!r} expects an object")
            _merge(base[key], val, where + ".")
        else:
            base[key] = val
    return base


def parse_override(text: str) -> Dict:
    """``a.b=value`` -> ``{"a": {"b": value}}``; values parse as JSON, else stay strings."""
    if "=" not in text:
        raise UsageError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    out: Dict = {}
    cur = out
    parts = key.strip().split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = val
    return out


def resolve_config(args, base: Optional[Dict] = None) -> Dict:
    cfg = copy.deepcopy(DEFAULTS)
    if base:
        _merge(cfg, base)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise DataError(f"config file not found: {path}")
        try:
            _merge(cfg, json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from exc
    for item in getattr(args, "set", None) or []:
        _merge(cfg, parse_override(item))
    flags = {
        ("seed",): getattr(args, "seed", None),
        ("jobs",): getattr(args, "jobs", None),
        ("model", "sampler"): getattr(args, "sampler", None),
        ("model", "ptt"): getattr(args, "ptt", None),
        ("model", "heads"): getattr(args, "heads", None),
        ("model", "layers"): getattr(args, "layers", None),
        ("model", "preset"): getattr(args, "preset", None),
        ("track", "template"): getattr(args, "template", None),
        ("track", "search"): getattr(args, "search", None),
    }
    for keys, val in flags.items():
        if val is None:
            continue
        cur = cfg
        for k in keys[:-1]:
            cur = cur[k]
        cur[keys[-1]] = val
    _validate(cfg)
    return cfg


def _validate(cfg: Dict) -> None:
    m = cfg["model"]
    if m["sampler"] not in SAMPLER_FLAGS:
        raise UsageError(f"model.sampler must be one of {sorted(SAMPLER_FLAGS)}")
    if m["ptt"] not in PTT_FLAGS:
        raise UsageError(f"model.ptt must be one of {PTT_FLAGS}")
    if m["preset"] not in ("default", "small"):
        raise UsageError("model.preset must be 'default' or 'small'")
    if cfg["track"]["template"] not in TEMPLATE_FLAGS:
        raise UsageError(f"track.template must be one of {sorted(TEMPLATE_FLAGS)}")
    if cfg["track"]["search"] not in SEARCH_FLAGS:
        raise UsageError(f"track.search must be one of {sorted(SEARCH_FLAGS)}")
    if int(cfg["jobs"]) < 1:
        raise UsageError("jobs must be >= 1")


def tracker_config(model: Dict) -> TrackerConfig:
    base = small_config() if model["preset"] == "small" else TrackerConfig()
    k = base.ptt.k if model["k"] is None else int(model["k"])
    ptt = PTTConfig(k=k, heads=int(model["heads"]), layers=int(model["layers"]),
                    relation=model["relation"], position_in_value=bool(model["position_in_value"]))
    return TrackerConfig(backbone=base.backbone, ptt=ptt, ptt_placement=model["ptt"],
                         sampler=SAMPLER_FLAGS[model["sampler"]], num_clusters=base.num_clusters,
                         cluster_radius=base.cluster_radius, cluster_nsample=base.cluster_nsample,
                         template_budget=base.template_budget, search_budget=base.search_budget)


def write_config(out: Path, cfg: Dict, command: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w") as fh:
        json.dump({"command": command, **cfg}, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- inputs ----------------------------------------------------------------------------------

def load_sequences(path) -> List[TrackSequence]:
    p = Path(path)
    if p.is_file():
        return [read_sequence(p)]
    if not p.is_dir():
        raise DataError(f"corpus not found: {p}")
    if not (p / "manifest.jsonl").is_file():
        raise DataError(f"{p}: no manifest.jsonl (point-cloud sequences are required)")
    seqs = load_corpus(p)
    if not seqs:
        raise DataError(f"{p}: corpus holds no sequences")
    return seqs


def load_network(args, cfg: Dict) -> TrackerNet:
    net = TrackerNet(tracker_config(cfg["model"]), seed=int(cfg["seed"]))
    if args.checkpoint is None:
        return net
    path = Path(args.checkpoint)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}")
    arrays = {k: v for k, v in checkpoint.load(path).items() if not k.startswith(("optim.", "train."))}
    extra = sorted(set(arrays) - set(net.params))
    if extra:
        raise DataError(f"{path}: checkpoint has parameters the model lacks, e.g. {extra[0]!r}")
    try:
        checkpoint.assign(net.params, arrays)
    except checkpoint.CheckpointError as exc:
        raise DataError(f"{path}: checkpoint does not match the model configuration: {exc}") from exc
    return net


def checkpoint_model(args) -> Optional[Dict]:
    """Model section of the config stored next to ``--checkpoint``, if any."""
    if getattr(args, "checkpoint", None) is None:
        return None
    side = Path(args.checkpoint).parent / "config.json"
    if not side.is_file():
        return None
    stored = json.loads(side.read_text())
    return {"model": stored.get("model", {})}


# --- commands --------------------------------------------------------------------------------

def cmd_synth(args) -> int:
    path = Path(args.spec)
    if not path.is_file():
        raise DataError(f"scene spec file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    cfg = resolve_config(args)
    out = Path(args.out)
    write_config(out, {**cfg, "spec": doc}, "synth")
    seed = int(cfg["seed"])
    try:
        if "preset" in doc:
            if doc["preset"] != "kitti-like":
                raise DataError(f"{path}: unknown preset {doc['preset']!r}")
            base = SceneSpec.from_dict(doc["base"]) if "base" in doc else None
            specs, counts = kitti_like_preset(int(doc.get("n_sequences", 50)), int(doc.get("n_frames", 20)),
                                              base=base, seed=seed)
        else:
            scenes = doc.get("scenes")
            if not scenes:
                raise DataError(f"{path}: expected a 'scenes' list or a 'preset'")
            specs = [SceneSpec.from_dict({k: v for k, v in s.items() if k != "count"}) for s in scenes]
            counts = [int(s.get("count", 1)) for s in scenes]
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad scene spec: {exc}") from exc
    entries = generate_corpus(specs, counts, out, seed=seed)
    print(f"wrote {len(entries)} sequences and manifest.jsonl to {out}")
    if "preset" in doc:
        print("sparsity buckets (points inside the target box, per frame):")
        for b in sparsity_histogram(load_corpus(out)):
            print(f"  {b.label:<8s} frames {b.frames:6d}  fraction {100 * b.fraction:6.2f}%")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out)
    write_config(out, cfg, "train")
    seqs = load_sequences(args.corpus)
    net = TrackerNet(tracker_config(cfg["model"]), seed=int(cfg["seed"]))
    t = cfg["train"]
    tc = TrainConfig(lr=float(t["lr"]), decay_every=t["decay_every"], decay_factor=float(t["decay_factor"]),
                     batch_size=int(t["batch_size"]), epochs=int(t["epochs"]), seed=int(cfg["seed"]),
                     resample_every_epoch=bool(t["resample_every_epoch"]))
    lc = LossConfig(**{k: float(v) for k, v in cfg["loss"].items()})
    mc = net.config
    seed = int(cfg["seed"])
    samples = make_samples(seqs, seed, mc.template_budget, mc.search_budget)
    sample_fn = None
    if tc.resample_every_epoch:
        def sample_fn(epoch):
            return make_samples(seqs, seed * 1000003 + epoch, mc.template_budget, mc.search_budget)
    ckpt = out / "checkpoint.pttckpt"
    curve_path = out / "loss_curve.jsonl"
    resume = None
    if args.resume and ckpt.is_file():
        resume = checkpoint.load(ckpt)
        done = int(resume["train.step"][0])
        lines = curve_path.read_text().splitlines(keepends=True) if curve_path.is_file() else []
        if len(lines) < done:
            raise DataError(f"{curve_path}: holds {len(lines)} records, checkpoint is at step {done}")
        curve_path.write_text("".join(lines[:done]))
        print(f"resuming from step {done}")
    with open(curve_path, "a" if resume is not None else "w") as fh:
        res = train(net, samples, tc, lc, curve_fh=fh, resume=resume, sample_fn=sample_fn,
                    checkpoint_path=ckpt, checkpoint_every=int(t["checkpoint_every"]))
    if res.curve:
        first, last = res.curve[0], res.curve[-1]
        print(f"steps {res.steps}  L_all {first['L_all']:.6f} -> {last['L_all']:.6f}")
    else:
        print(f"steps {res.steps}  (nothing left to run)")
    print(f"checksum {res.checksum}")
    print(f"checkpoint {ckpt}")
    return EXIT_OK


def _track_one(job):
    seq, predictor, tpol, spol, tb, sb = job
    return track_sequence(seq, predictor, tpol, spol, tb, sb)


def _run_tracking(seqs, predictor, cfg, net_config: TrackerConfig):
    tpol = TemplatePolicy(TEMPLATE_FLAGS[cfg["track"]["template"]])
    spol = SearchAreaPolicy(SEARCH_FLAGS[cfg["track"]["search"]])
    jobs = [(s, predictor, tpol, spol, net_config.template_budget, net_config.search_budget) for s in seqs]
    n = int(cfg["jobs"])
    if n == 1:
        return [_track_one(j) for j in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_track_one, jobs))


def cmd_track(args) -> int:
    if args.checkpoint is None and not args.oracle_stub:
        raise UsageError("track needs --checkpoint or --oracle-stub")
    cfg = resolve_config(args, checkpoint_model(args))
    out = Path(args.out)
    write_config(out, cfg, "track")
    seqs = load_sequences(args.corpus)
    if args.oracle_stub:
        predictor, net_config = oracle_predictor, tracker_config(cfg["model"])
    else:
        net = load_network(args, cfg)
        predictor, net_config = NetworkPredictor(net), net.config
    results = _run_tracking(seqs, predictor, cfg, net_config)
    ope_cfg = OPEConfig(bev_center_error=bool(cfg["track"]["bev_error"]))
    trace_dir = out / "traces"
    trace_dir.mkdir(exist_ok=True)
    tagged, ovs, errs = [], [], []
    for seq, res in zip(seqs, results):
        with open(trace_dir / f"{seq.scene_id or 'sequence'}.jsonl", "w") as fh:
            res.write_trace(fh)
        r = ope_metrics(res.boxes, seq.gt_boxes, ope_cfg)
        tagged.append((inside_counts([TrackSequence(seq.frames[:1])])[0], r))
        ovs.append(r.overlaps)
        errs.append(r.errors)
    overall = ope_from_values(np.concatenate(ovs), np.concatenate(errs), ope_cfg)
    report = format_report(overall, per_interval_ope(tagged), ope_cfg)
    (out / "report.txt").write_text(report)
    (out / "curves.csv").write_text(curves_csv(overall, ope_cfg))
    print(report, end="")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out) if args.out else None
    if out is not None:
        write_config(out, {**cfg, "selector": args.selector, "corrupt": args.corrupt}, "gradcheck")
    m = cfg["model"]
    reports = run_gradcheck(args.selector, seed=int(cfg["seed"]), tolerance=args.tolerance,
                            corrupt=args.corrupt, heads=int(m["heads"]), layers=int(m["layers"]))
    lines = []
    ok = True
    for name, rep in reports.items():
        lines.append(f"[{name}] {'PASS' if rep.passed else 'FAIL'} max_rel_err={rep.max_rel_error:.3e}")
        lines.extend("  " + ln for ln in rep.lines())
        ok = ok and rep.passed
    lines.append("gradcheck " + ("PASS" if ok else "FAIL"))
    text = "\n".join(lines) + "\n"
    if out is not None:
        (out / "gradcheck.txt").write_text(text)
    print(text, end="")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_bench(args) -> int:
    cfg = resolve_config(args, checkpoint_model(args))
    out = Path(args.out)
    write_config(out, cfg, "bench")
    seqs = load_sequences(args.corpus)[: int(cfg["bench"]["max_sequences"])]
    net = load_network(args, cfg)
    results = _run_tracking(seqs, NetworkPredictor(net), {**cfg, "jobs": 1}, net.config)
    rep = timing_breakdown(results)
    text = "# timing per tracked frame (mean)\n" + "\n".join(rep.lines()) + "\n"
    (out / "bench.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_convert_labels(args) -> int:
    src = Path(args.label_dir)
    if not src.is_dir():
        raise DataError(f"label directory not found: {src}")
    cfg = resolve_config(args)
    out = Path(args.out)
    write_config(out, {**cfg, "types": args.types}, "convert-labels")
    tracklets = convert_kitti_dir(src, types=args.types)
    summary = []
    for tr in tracklets:
        name = f"{tr.scene}_{tr.track_id:04d}.txt"
        (out / name).write_text("".join(row + "\n" for row in tr.kitti_rows()))
        summary.append({"file": name, "scene": tr.scene, "track_id": tr.track_id, "type": tr.type,
                        "frames": len(tr.objects), "first_frame": tr.frames[0], "last_frame": tr.frames[-1]})
    with open(out / "summary.jsonl", "w") as fh:
        for rec in summary:
            fh.write(json.dumps(rec) + "\n")
    print(f"{len(tracklets)} tracklets from {src}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out)
    write_config(out, cfg, "ablate")
    seqs = load_sequences(args.corpus)
    if len(seqs) < 2:
        raise DataError("the ablation needs at least two sequences (train and held-out splits)")
    rep = run_ablation(seqs, steps=int(cfg["ablate"]["steps"]), seed=int(cfg["seed"]))
    text = rep.text()
    (out / "ablation.txt").write_text(text)
    print(text, end="")
    return EXIT_OK if rep.complete() else EXIT_NUMERIC


def attention_records(net: TrackerNet, seq: TrackSequence, cfg: Dict) -> List[dict]:
    """Vote-stage attention over the search seeds of each frame, tracked with the ground truth."""
    if not net.config.ptt_vote:
        raise UsageError("dump-attention needs a model with PTT in the vote stage (--ptt vote or all)")
    tpol = TemplatePolicy(TEMPLATE_FLAGS[cfg["track"]["template"]])
    spol = SearchAreaPolicy("current-gt")
    first = seq.frames[0]
    hist = TemplateHistory(first=(first.cloud, first.box))
    records = []
    for t in range(1, len(seq)):
        frame = seq.frames[t]
        template, _ = build_template(hist, tpol, net.config.template_budget)
        search = build_search_area(frame.cloud, frame.box, spol, net.config.search_budget)
        hist.previous.append((frame.cloud, frame.box))
        if search is None:
            continue
        fused = augment_similarity(net.encode(template), net.encode(search), net.params)
        w, idx = attention_weights(SeedSet(fused.coords, fused.feats), net.config.ptt, net.params,
                                   "ptt_vote", return_index=True)
        mean_w = w.mean(axis=2)
        received = np.zeros(len(idx))
        np.add.at(received, idx.reshape(-1), mean_w.reshape(-1))
        received /= len(idx)
        coords = fused.coords_array
        for i in range(len(idx)):
            records.append({"frame": t, "seed": i, "coords": coords[i].tolist(),
                            "neighbors": idx[i].tolist(), "weights": mean_w[i].tolist(),
                            "received": float(received[i])})
    return records


def cmd_dump_attention(args) -> int:
    cfg = resolve_config(args, checkpoint_model(args))
    out = Path(args.out)
    write_config(out, cfg, "dump-attention")
    seqs = load_sequences(args.sequence)
    net = load_network(args, cfg)
    n = 0
    with open(out / "attention.jsonl", "w") as fh:
        for seq in seqs:
            for rec in attention_records(net, seq, cfg):
                fh.write(json.dumps({"scene": seq.scene_id, **rec}) + "\n")
                n += 1
    print(f"{n} seed records written to {out / 'attention.jsonl'}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------------

def _common(p, out_required: bool = True):
    p.add_argument("--config", help="JSON config file merged over the defaults")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override, repeatable")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="parallel sequences (default 1)")
    p.add_argument("--out", required=out_required, help="output directory")


def _model_flags(p):
    p.add_argument("--preset", choices=("default", "small"))
    p.add_argument("--sampler", choices=tuple(SAMPLER_FLAGS))
    p.add_argument("--ptt", choices=PTT_FLAGS)
    p.add_argument("--heads", type=int)
    p.add_argument("--layers", type=int)


def _policy_flags(p):
    p.add_argument("--template", choices=tuple(TEMPLATE_FLAGS))
    p.add_argument("--search", choices=tuple(SEARCH_FLAGS))


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ptt-track", description="Point-cloud single-object tracking toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic corpus from a scene spec")
    p.add_argument("spec")
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train on a corpus")
    p.add_argument("corpus")
    p.add_argument("--resume", action="store_true", help="continue from <out>/checkpoint.pttckpt")
    _common(p)
    _model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="track every sequence of a corpus and report OPE metrics")
    p.add_argument("corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--oracle-stub", action="store_true", help="predict the ground truth (plumbing check)")
    _common(p)
    _model_flags(p)
    _policy_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("selector", nargs="?", default="all", choices=SELECTORS + ("all",))
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--corrupt", action="append", metavar="OP",
                   help="sabotage an op's backward rule (negative control), repeatable")
    _common(p, out_required=False)
    p.add_argument("--heads", type=int)
    p.add_argument("--layers", type=int)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="per-stage timing of the tracker")
    p.add_argument("corpus")
    p.add_argument("--checkpoint")
    _common(p)
    _model_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("convert-labels", help="split KITTI tracking labels into per-object tracklets")
    p.add_argument("label_dir")
    p.add_argument("--types", nargs="+", help="object types to keep (default all)")
    _common(p)
    p.set_defaults(func=cmd_convert_labels)

    p = sub.add_parser("ablate", help="sampler and PTT-placement ablation tables")
    p.add_argument("corpus")
    _common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("dump-attention", help="per-seed attention records for each frame")
    p.add_argument("sequence", help="a .pttseq file or corpus directory")
    p.add_argument("--checkpoint")
    _common(p)
    _model_flags(p)
    _policy_flags(p)
    p.set_defaults(func=cmd_dump_attention)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ptt-track: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"ptt-track: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, LabelFormatError, checkpoint.CheckpointError, OSError, ValueError) as exc:
        print(f"ptt-track: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
