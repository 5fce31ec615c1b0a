"""Outcome labeling and threshold-sweep evaluation.

Misclassified episodes split into

  DFCR  - dangerous false classification and reaction: the class-optimal
          reaction for the (wrong) prediction presses into the true contact
          AND the true contact force rises (peak after the reaction latch
          exceeds both the pre-reaction peak and the paired zero-g baseline
          peak by a margin),
  LDFCR - misclassified without such a force increase,

while episodes that executed the zero-g fallback (p <= p_th, or a
degenerate retraction direction) are the safe-fallback bucket and are never
DFCR/LDFCR.  Correctly classified episodes split into CorrectOptimal and
CorrectSFR the same way.

The sweep re-evaluates only the probability gate per p_th value; the
per-episode force outcomes are fixed by the paired simulations, so the
monotonicity of the SFR share in p_th is exact.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .control import ZeroG
from .errors import EmptyClassError, MissingBaseline
from .reaction import CLASS_CLAMPING, CLASS_COLLISION

CORRECT_OPTIMAL = "CorrectOptimal"
CORRECT_SFR = "CorrectSFR"
DFCR = "DFCR"
LDFCR = "LDFCR"
MISCLASS_SFR = "MisclassSFR"

FCA = "FCA"  # true clamping predicted collision
FCB = "FCB"  # true collision predicted clamping

DEFAULT_P_TH_GRID = tuple(np.round(np.arange(0.50, 0.951, 0.05), 2)) + (0.99,)


@dataclass
class EpisodeRecord:
    """Episode-level facts needed to label outcomes at any p_th."""

    episode_id: int
    config_id: int
    true_kind: str               # clamping | collision
    detected: bool
    pred_label: str = ""
    pred_p: float = 0.0
    presses_into: bool = False
    optimal_degenerate: bool = False
    peak_pre: float = 0.0        # translational wrench norm up to the latch
    peak_exec: float = 0.0       # after the latch, executed optimal reaction
    peak_zg: float = float("nan")  # after the latch, zero-g baseline


def translational_peak(wrench, start=0, stop=None):
    w = np.asarray(wrench, dtype=float)
    seg = w[start:stop, :2]
    if len(seg) == 0:
        return 0.0
    return float(np.max(np.linalg.norm(seg, axis=1)))


def build_record(main_ep, zg_ep=None):
    """Build an EpisodeRecord from the executed-reaction episode and the
    (optional) paired zero-g baseline episode."""
    sc = main_ep.scenario
    rec = EpisodeRecord(
        episode_id=sc.episode_id, config_id=sc.config_id, true_kind=sc.kind,
        detected=main_ep.detected_any and main_ep.gate_index >= 0)
    if not rec.detected:
        return rec
    g = main_ep.gate_index
    pred = main_ep.prediction
    if pred is not None:
        rec.pred_label = pred.label
        rec.pred_p = pred.p
    rec.presses_into = bool(main_ep.presses_into_contact)
    rec.optimal_degenerate = isinstance(main_ep.latched_mode, ZeroG)
    rec.peak_pre = translational_peak(main_ep.wrench, 0, g + 1)
    rec.peak_exec = translational_peak(main_ep.wrench, g + 1)
    if zg_ep is not None:
        if zg_ep.gate_index != g:
            raise MissingBaseline(
                f"baseline gate index {zg_ep.gate_index} != {g}")
        rec.peak_zg = translational_peak(zg_ep.wrench, g + 1)
    return rec


def misclass_kind(record):
    if record.pred_label and record.pred_label != record.true_kind:
        return FCA if record.true_kind == CLASS_CLAMPING else FCB
    return "none"


def label_outcome(record, p_th, margin=0.05):
    """Outcome label for one detected episode at a given gate threshold.

    Returns (label, misclass_kind).  Raises MissingBaseline for a
    misclassified episode that executes its optimal reaction without the
    paired zero-g simulation.
    """
    if not record.detected:
        raise ValueError("undetected episode has no outcome label")
    kind = misclass_kind(record)
    executes_optimal = (record.pred_label != "" and record.pred_p > p_th
                        and not record.optimal_degenerate)
    if not executes_optimal:
        return (CORRECT_SFR if kind == "none" else MISCLASS_SFR), kind
    if kind == "none":
        return CORRECT_OPTIMAL, kind
    if np.isnan(record.peak_zg):
        raise MissingBaseline(
            f"episode {record.episode_id}: zero-g baseline missing")
    reference = max(record.peak_pre, record.peak_zg)
    rises = record.peak_exec > (1.0 + margin) * reference
    return (DFCR if (record.presses_into and rises) else LDFCR), kind


def confusion_matrix(truths, preds):
    """Row-normalized 2x2 confusion matrix, rows (clamping, collision).

    Off-diagonals are the FCA (clamping row) and FCB (collision row) rates.
    """
    truths = np.asarray(truths)
    preds = np.asarray(preds)
    if len(truths) == 0:
        raise EmptyClassError("no episodes")
    order = [CLASS_CLAMPING, CLASS_COLLISION]
    counts = np.zeros((2, 2))
    for t, p in zip(truths, preds):
        counts[order.index(t), order.index(p)] += 1
    if np.any(counts.sum(axis=1) == 0):
        raise EmptyClassError("a truth class is absent")
    return counts / counts.sum(axis=1, keepdims=True)


@dataclass
class SweepResult:
    p_th: np.ndarray
    fca: dict                    # arrays: dfcr, ldfcr, sfr over p_th
    fcb: dict
    sfr_correct_clamping: np.ndarray
    sfr_correct_collision: np.ndarray
    counts: dict                 # episodes per family
    margin: float
    meta: dict = field(default_factory=dict)


def threshold_sweep(records, p_th_grid=DEFAULT_P_TH_GRID, margin=0.05):
    """Reaction-outcome ratios over the probability-threshold grid.

    Episode force outcomes are cached in the records; only the gate is
    re-evaluated per p_th.
    """
    recs = [r for r in records if r.detected]
    fam = {
        FCA: [r for r in recs if misclass_kind(r) == FCA],
        FCB: [r for r in recs if misclass_kind(r) == FCB],
        "correct_clamping": [r for r in recs if misclass_kind(r) == "none"
                             and r.true_kind == CLASS_CLAMPING],
        "correct_collision": [r for r in recs if misclass_kind(r) == "none"
                              and r.true_kind == CLASS_COLLISION],
    }
    grid = np.asarray(p_th_grid, dtype=float)
    out = {FCA: {k: np.zeros(len(grid)) for k in ("dfcr", "ldfcr", "sfr")},
           FCB: {k: np.zeros(len(grid)) for k in ("dfcr", "ldfcr", "sfr")}}
    sfr_cc = np.zeros(len(grid))
    sfr_co = np.zeros(len(grid))
    for i, p_th in enumerate(grid):
        for family in (FCA, FCB):
            rows = fam[family]
            if not rows:
                continue
            labels = [label_outcome(r, p_th, margin)[0] for r in rows]
            n = len(rows)
            out[family]["dfcr"][i] = labels.count(DFCR) / n
            out[family]["ldfcr"][i] = labels.count(LDFCR) / n
            out[family]["sfr"][i] = labels.count(MISCLASS_SFR) / n
        for key, arr in (("correct_clamping", sfr_cc), ("correct_collision", sfr_co)):
            rows = fam[key]
            if rows:
                labels = [label_outcome(r, p_th, margin)[0] for r in rows]
                arr[i] = labels.count(CORRECT_SFR) / len(rows)
    return SweepResult(
        p_th=grid, fca=out[FCA], fcb=out[FCB],
        sfr_correct_clamping=sfr_cc, sfr_correct_collision=sfr_co,
        counts={k: len(v) for k, v in fam.items()}, margin=margin,
        meta={"labeling": "per-episode", "gate": "majority-hold-latch"})


SWEEP_FAMILIES = (FCA, FCB, "correct_clamping", "correct_collision")


def sweep_rows(sweep):
    """Flat rows (p_th, family, dfcr, ldfcr, sfr, n_episodes) in fixed order."""
    rows = []
    for i, p_th in enumerate(sweep.p_th):
        for family in SWEEP_FAMILIES:
            if family in (FCA, FCB):
                d = sweep.fca if family == FCA else sweep.fcb
                rows.append({"p_th": float(p_th), "family": family,
                             "dfcr": float(d["dfcr"][i]),
                             "ldfcr": float(d["ldfcr"][i]),
                             "sfr": float(d["sfr"][i]),
                             "n_episodes": sweep.counts[family]})
            else:
                arr = (sweep.sfr_correct_clamping if family == "correct_clamping"
                       else sweep.sfr_correct_collision)
                rows.append({"p_th": float(p_th), "family": family,
                             "dfcr": "", "ldfcr": "", "sfr": float(arr[i]),
                             "n_episodes": sweep.counts[family]})
    return rows


def write_sweep_csv(sweep, path, header_comment=""):
    """Deterministic CSV of the sweep (the data behind the ratio figures)."""
    fields = ["p_th", "family", "dfcr", "ldfcr", "sfr", "n_episodes"]
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(f"# labeling={sweep.meta.get('labeling', '')}"
                 f" gate={sweep.meta.get('gate', '')}"
                 f" margin={sweep.margin!r}\n")
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in sweep_rows(sweep):
            writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})


def read_sweep_csv(path):
    rows = []
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for row in csv.DictReader(lines):
        for key in ("p_th", "dfcr", "ldfcr", "sfr"):
            row[key] = float(row[key]) if row[key] != "" else ""
        row["n_episodes"] = int(row["n_episodes"])
        rows.append(row)
    return rows


def summarize(sweep, cm=None):
    """Human-readable endpoint summary."""
    lines = []
    if cm is not None:
        lines.append("row-normalized confusion matrix (rows: clamping, collision):")
        for row in cm:
            lines.append("  " + "  ".join(f"{v:.3f}" for v in row))
    for family in (FCA, FCB):
        d = sweep.fca if family == FCA else sweep.fcb
        n = sweep.counts[family]
        lines.append(
            f"{family} (n={n}): DFCR {d['dfcr'][0]:.2f} -> {d['dfcr'][-1]:.2f}, "
            f"LDFCR {d['ldfcr'][0]:.2f} -> {d['ldfcr'][-1]:.2f}, "
            f"SFR {d['sfr'][0]:.2f} -> {d['sfr'][-1]:.2f} "
            f"over p_th {sweep.p_th[0]:.2f}..{sweep.p_th[-1]:.2f}")
    lines.append(
        f"correct clamping (n={sweep.counts['correct_clamping']}): SFR share "
        f"{sweep.sfr_correct_clamping[0]:.2f} -> {sweep.sfr_correct_clamping[-1]:.2f}")
    lines.append(
        f"correct collision (n={sweep.counts['correct_collision']}): SFR share "
        f"{sweep.sfr_correct_collision[0]:.2f} -> {sweep.sfr_correct_collision[-1]:.2f}")
    return "\n".join(lines)
