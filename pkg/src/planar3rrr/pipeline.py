"""End-to-end experiment pipeline behind the CLI.

generate_dataset  simulate all detectable scenario draws (no classifier:
                  detection triggers the safe fallback) and dump one CSV row
                  per 1 ms sample satisfying the detection condition.
train_model       grid-search + fit the contact classifier on rows from the
                  training configurations only (held-out rows rejected).
collect_records   per held-out episode: one run executing the
                  class-optimal reaction for its gate prediction, plus a
                  paired zero-g baseline run for misclassified episodes.
evaluate_model    confusion matrix + per-episode outcome labels at one p_th.
run_sweep         outcome ratios over the full p_th grid.
"""

import csv
import json

import numpy as np

from . import contact as ct
from . import evaluation as ev
from .classifier import MLPContactClassifier, check_split, grid_search
from .config import ExperimentConfig
from .control import ZeroG
from .dynamics import OperationalModel
from .errors import SplitViolation
from .reaction import CLASS_CLAMPING, CLASS_COLLISION
from .simulation import run_batch, run_episode

DATASET_FIELDS = ["episode_id", "t", "config_id", "fhat_x", "fhat_y", "mhat_z",
                  "label", "scenario_kind", "chain", "link"]


def build_plant(cfg):
    return OperationalModel(cfg.geometry_obj(), cfg.dynamics_params())


def sampled_scenarios(cfg, repeats, seed=None):
    geom = cfg.geometry_obj()
    return ct.sample_scenarios(
        geom, ranges=cfg.scenario_ranges(),
        seed=cfg.seed if seed is None else seed, repeats=repeats,
        config_poses=cfg.config_poses(),
        thresholds=np.asarray(cfg.observer.thresholds, dtype=float),
        impedance_stiffness=float(cfg.impedance.stiffness[0]),
        observer_gain=float(cfg.observer.gains[0]))


def _chain_str(sc):
    return "platform" if sc.chain < 0 else str(sc.chain + 1)


def _link_str(sc):
    return str(sc.link) if sc.kind == ct.COLLISION and sc.chain >= 0 else ""


def generate_dataset(cfg, out_path, workers=1):
    """Simulate scenario draws and write the labeled feature CSV.

    Returns (n_rows, n_episodes).  Rows carry the instantaneous observer
    estimate while the detection condition holds, labeled with the episode's
    ground-truth contact type.
    """
    scenarios = [s for s in sampled_scenarios(cfg, cfg.scenarios.repeats_dataset)
                 if s.detectable]
    plant = build_plant(cfg)
    episodes = run_batch(
        scenarios, plant, cfg.impedance_gains(), plant, cfg.observer_config(),
        cfg.policy(), classifier=None, settings=cfg.settings(),
        seed=cfg.seed, workers=workers,
        retraction_speed=cfg.reaction.retraction_speed,
        opening_rate=cfg.reaction.opening_rate,
        friction_comp=cfg.reaction.friction_comp)
    n_rows = 0
    with open(out_path, "w", newline="") as fh:
        fh.write(f"# config_sha256={cfg.hash()}\n")
        writer = csv.DictWriter(fh, fieldnames=DATASET_FIELDS)
        writer.writeheader()
        for ep in episodes:
            if ep.aborted:
                continue
            sc = ep.scenario
            for k in ep.feature_rows():
                writer.writerow({
                    "episode_id": sc.episode_id,
                    "t": repr(float(ep.t[k])),
                    "config_id": sc.config_id,
                    "fhat_x": repr(float(ep.F_hat[k, 0])),
                    "fhat_y": repr(float(ep.F_hat[k, 1])),
                    "mhat_z": repr(float(ep.F_hat[k, 2])),
                    "label": sc.kind,
                    "scenario_kind": sc.kind,
                    "chain": _chain_str(sc),
                    "link": _link_str(sc),
                })
                n_rows += 1
    return n_rows, len(episodes)


def load_dataset(path):
    """Read a dataset CSV into arrays (features, labels, config ids, episode ids)."""
    feats, labels, configs, episodes = [], [], [], []
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for row in csv.DictReader(lines):
        feats.append([float(row["fhat_x"]), float(row["fhat_y"]),
                      float(row["mhat_z"])])
        labels.append(row["label"])
        configs.append(int(row["config_id"]))
        episodes.append(int(row["episode_id"]))
    return (np.asarray(feats, dtype=float), np.asarray(labels),
            np.asarray(configs, dtype=int), np.asarray(episodes, dtype=int))


def train_model(cfg, dataset_path, model_path, report_path=None,
                held_out=None, use_grid=True):
    """Fit the classifier on rows outside the held-out configuration.

    With use_grid, run the configured grid search (validation accuracy,
    ties to fewer parameters then lower l2 index); otherwise fit a single
    mid-grid configuration.  Returns (model, grid_table).
    """
    held_out = cfg.held_out_config if held_out is None else int(held_out)
    X, y, configs, _ = load_dataset(dataset_path)
    mask = configs != held_out
    X, y = X[mask], y[mask]
    check_split(configs[mask], held_out)
    if len(np.unique(y)) < 2:
        raise SplitViolation("training rows do not cover both classes")
    c = cfg.classifier
    base = dict(learning_rate=c.learning_rate, beta1=c.beta1, beta2=c.beta2,
                adam_eps=c.adam_eps, batch_size=c.batch_size,
                max_epochs=c.max_epochs, patience=c.patience,
                val_fraction=c.val_fraction)
    if use_grid:
        grid = {"hidden_layers": c.hidden_layers, "widths": c.widths, "l2": c.l2}
        model, best_cell, table = grid_search(X, y, grid, validation=0.2,
                                              seed=cfg.seed, base_params=base)
    else:
        model = MLPContactClassifier(
            hidden_layer_sizes=(c.widths[len(c.widths) // 2],),
            l2=c.l2[len(c.l2) // 2], seed=cfg.seed, **base).fit(X, y)
        best_cell, table = model.get_params(), []
    meta = {"config_sha256": cfg.hash(), "held_out_config": held_out,
            "train_configs": sorted(int(v) for v in np.unique(configs[mask])),
            "n_rows": int(len(X))}
    model.save(model_path, meta=meta)
    if report_path:
        with open(report_path, "w") as fh:
            json.dump({"best": best_cell, "cells": table, "meta": meta},
                      fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
    return model, table


def collect_records(cfg, model, held_out=None, repeats=None, workers=1):
    """Simulate held-out episodes and build labeling records.

    The gate runs with p_th = 0.5 so the executed branch is the
    class-optimal reaction of the gate prediction; for misclassified
    episodes a paired zero-g baseline is simulated from the same seed.
    """
    held_out = cfg.held_out_config if held_out is None else int(held_out)
    if model is not None and getattr(model, "meta_", None):
        trained = model.meta_.get("train_configs", [])
        if held_out in trained:
            raise SplitViolation(
                f"configuration {held_out} was part of training {trained}")
    repeats = cfg.scenarios.repeats_eval if repeats is None else repeats
    scenarios = [s for s in sampled_scenarios(cfg, repeats, seed=cfg.seed + 1)
                 if s.detectable and s.config_id == held_out]
    plant = build_plant(cfg)
    gains = cfg.impedance_gains()
    ocfg = cfg.observer_config()
    policy = cfg.policy(p_th=0.5)
    settings = cfg.settings()
    kwargs = dict(retraction_speed=cfg.reaction.retraction_speed,
                  opening_rate=cfg.reaction.opening_rate,
                  friction_comp=cfg.reaction.friction_comp)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(max(len(scenarios), 1))
    records = []
    for i, sc in enumerate(scenarios):
        main = run_episode(sc, plant, gains, plant, ocfg, policy,
                           classifier=model, settings=settings,
                           seed=int(seeds[i]), **kwargs)
        if main.aborted or main.gate_index < 0:
            continue
        zg = None
        if (main.prediction is not None
                and main.prediction.label != sc.kind
                and not isinstance(main.latched_mode, ZeroG)):
            zg = run_episode(sc, plant, gains, plant, ocfg, policy,
                             classifier=model, settings=settings,
                             seed=int(seeds[i]), forced_mode=ZeroG(), **kwargs)
        records.append(ev.build_record(main, zg))
    return records


def evaluate_model(cfg, model, held_out=None, p_th=None, out_path=None,
                   records=None):
    """Confusion matrix and per-episode outcome labels at one threshold."""
    if records is None:
        records = collect_records(cfg, model, held_out=held_out)
    p_th = cfg.reaction.p_th if p_th is None else float(p_th)
    detected = [r for r in records if r.detected]
    cm = ev.confusion_matrix([r.true_kind for r in detected],
                             [r.pred_label for r in detected])
    rows = []
    for r in detected:
        label, kind = ev.label_outcome(r, p_th, cfg.simulation.dfcr_margin)
        rows.append({"episode_id": r.episode_id, "config_id": r.config_id,
                     "true_kind": r.true_kind, "pred_label": r.pred_label,
                     "pred_p": repr(float(r.pred_p)), "outcome": label,
                     "misclass": kind})
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(f"# config_sha256={cfg.hash()} p_th={p_th!r}\n")
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    return cm, rows, records


def run_sweep(cfg, model, held_out=None, out_path=None, records=None):
    """Threshold sweep over the default p_th grid; optionally write the CSV."""
    if records is None:
        records = collect_records(cfg, model, held_out=held_out)
    sweep = ev.threshold_sweep(records, margin=cfg.simulation.dfcr_margin)
    if out_path:
        ev.write_sweep_csv(sweep, out_path,
                           header_comment=f"config_sha256={cfg.hash()}")
    return sweep, records
