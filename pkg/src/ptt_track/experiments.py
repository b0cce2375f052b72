"""Sampler and PTT-placement ablations on a synthetic corpus.

Each configuration trains the small network for a fixed step budget on the
training split, then tracks the held-out split with the default policies.
The report mirrors two tables: samplers side by side as columns, and PTT
placements as rows.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .evaluation import OPEResult, ope_from_values, ope_metrics
from .network import TrackerConfig, TrackerNet, small_config
from .tracking import NetworkPredictor, TrackSequence, track_sequence
from .training import TrainConfig, make_samples, train

SAMPLER_COLUMNS = (("random", "Random Sample"), ("feat-fps", "Feat-Fps"), ("fps", "Fps"))
PLACEMENT_ROWS = (("none", "baseline"), ("vote", "Only PTT in Vote"), ("prop", "Only PTT in Prop"),
                  ("all", "PTT in all"))


@dataclass
class AblationRun:
    sampler: str
    placement: str
    final_loss: float
    result: OPEResult

    @property
    def finite(self) -> bool:
        return (math.isfinite(self.final_loss) and math.isfinite(self.result.success)
                and math.isfinite(self.result.precision))


@dataclass
class AblationReport:
    runs: Dict[Tuple[str, str], AblationRun]

    def sampler_table(self) -> List[str]:
        cols = [self.runs[(s, "all")] for s, _ in SAMPLER_COLUMNS]
        head = f"{'':<14s}" + "".join(f"{label:>15s}" for _, label in SAMPLER_COLUMNS)
        return [
            head,
            f"{'3D Success':<14s}" + "".join(f"{r.result.success:15.2f}" for r in cols),
            f"{'3D Precision':<14s}" + "".join(f"{r.result.precision:15.2f}" for r in cols),
        ]

    def placement_table(self) -> List[str]:
        out = [f"{'Ablation':<20s}{'3D Success':>12s}{'3D Precision':>14s}"]
        for key, label in PLACEMENT_ROWS:
            r = self.runs[("fps", key)].result
            out.append(f"{label:<20s}{r.success:12.2f}{r.precision:14.2f}")
        return out

    def orderings(self) -> List[str]:
        s = {k: self.runs[(k, "all")].result.success for k, _ in SAMPLER_COLUMNS}
        p = {k: self.runs[("fps", k)].result.success for k, _ in PLACEMENT_ROWS}
        single = max(p["vote"], p["prop"])
        checks = [
            ("FPS >= Feat-FPS >= RS", s["fps"] >= s["feat-fps"] >= s["random"]),
            ("PTT in all >= single stage >= none", p["all"] >= single >= p["none"]),
        ]
        return [f"{name:<36s} {'holds' if ok else 'does not hold'}" for name, ok in checks]

    def complete(self) -> bool:
        needed = {(s, "all") for s, _ in SAMPLER_COLUMNS} | {("fps", p) for p, _ in PLACEMENT_ROWS}
        return needed <= set(self.runs) and all(self.runs[k].finite for k in needed)

    def text(self) -> str:
        lines = ["# samplers (PTT in all)"] + self.sampler_table()
        lines += ["", "# PTT placement (FPS)"] + self.placement_table()
        lines += ["", "# orderings"] + self.orderings()
        lines += ["", "# final training loss"]
        for (s, p), r in sorted(self.runs.items()):
            lines.append(f"{s:<9s} {p:<5s} L_all {r.final_loss:.4f}")
        return "\n".join(lines) + "\n"


def split(sequences: Sequence[TrackSequence], every: int = 5) -> Tuple[List[TrackSequence], List[TrackSequence]]:
    """Every ``every``-th sequence is held out for evaluation."""
    train_set = [s for i, s in enumerate(sequences) if i % every]
    test_set = [s for i, s in enumerate(sequences) if i % every == 0]
    return train_set, test_set


def run_config(train_seqs, test_seqs, sampler: str, placement: str, steps: int = 40, batch_size: int = 8,
               seed: int = 0, base: Optional[TrackerConfig] = None) -> AblationRun:
    cfg = dataclasses.replace(base or small_config(), sampler=sampler, ptt_placement=placement)
    net = TrackerNet(cfg, seed=seed)
    samples = make_samples(train_seqs, seed, cfg.template_budget, cfg.search_budget)
    rng = np.random.default_rng(seed)
    picked = [samples[i] for i in rng.choice(len(samples), min(len(samples), steps * batch_size), replace=False)]
    epochs = math.ceil(steps * batch_size / len(picked))
    res = train(net, picked, TrainConfig(lr=1e-3, decay_every=None, batch_size=batch_size,
                                         epochs=epochs, seed=seed))
    pred = NetworkPredictor(net)
    ovs, errs = [], []
    for seq in test_seqs:
        tr = track_sequence(seq, pred, template_budget=cfg.template_budget, search_budget=cfg.search_budget)
        r = ope_metrics(tr.boxes, seq.gt_boxes)
        ovs.append(r.overlaps)
        errs.append(r.errors)
    result = ope_from_values(np.concatenate(ovs), np.concatenate(errs))
    return AblationRun(sampler, placement, res.curve[-1]["L_all"], result)


def run_ablation(sequences: Sequence[TrackSequence], steps: int = 40, seed: int = 0) -> AblationReport:
    train_seqs, test_seqs = split(sequences)
    keys = [(s, "all") for s, _ in SAMPLER_COLUMNS] + [("fps", p) for p, _ in PLACEMENT_ROWS if p != "all"]
    runs = {k: run_config(train_seqs, test_seqs, k[0], k[1], steps=steps, seed=seed) for k in keys}
    return AblationReport(runs)
