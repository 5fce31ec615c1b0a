"""Command-line interface.

Subcommands: simulate, generate-dataset, train, evaluate, sweep.  Every
command is reproducible from (config, seed); outputs embed the config hash.
On failure a single machine-readable JSON line goes to stderr and the exit
code is nonzero.
"""

import argparse
import csv
import json
import sys

import numpy as np

from . import config as cfgmod
from . import evaluation as ev
from . import pipeline
from .classifier import MLPContactClassifier
from .control import mode_id  # noqa: F401  (re-export for log readers)
from .simulation import run_episode


def _load_cfg(args):
    cfg = cfgmod.load(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def cmd_simulate(args):
    cfg = _load_cfg(args)
    scenarios = pipeline.sampled_scenarios(cfg, repeats=1)
    by_id = {s.episode_id: s for s in scenarios}
    if args.scenario_id not in by_id:
        raise KeyError(f"scenario id {args.scenario_id} not in 0..{len(scenarios) - 1}")
    sc = by_id[args.scenario_id]
    model = MLPContactClassifier.load(args.model) if args.model else None
    plant = pipeline.build_plant(cfg)
    ep = run_episode(sc, plant, cfg.impedance_gains(), plant,
                     cfg.observer_config(), cfg.policy(p_th=args.p_th),
                     classifier=model, settings=cfg.settings(), seed=cfg.seed,
                     retraction_speed=cfg.reaction.retraction_speed,
                     opening_rate=cfg.reaction.opening_rate,
                     friction_comp=cfg.reaction.friction_comp)
    with open(args.out, "w", newline="") as fh:
        fh.write(f"# config_sha256={cfg.hash()} scenario={sc.episode_id}"
                 f" kind={sc.kind} detectable={sc.detectable}"
                 f" aborted={ep.aborted!r}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "phi", "xd", "yd", "phid",
                         "fm_x", "fm_y", "fm_mz", "fhat_x", "fhat_y", "mhat_z",
                         "wrench_x", "wrench_y", "wrench_mz", "normal_force",
                         "mode", "detected"])
        for k in range(len(ep.t)):
            writer.writerow([repr(float(v)) for v in (
                ep.t[k], *ep.x[k], *ep.xd[k], *ep.F_m[k], *ep.F_hat[k],
                *ep.wrench[k], ep.normal_force[k])]
                + [int(ep.mode[k]), int(ep.detected[k])])
    print(f"wrote {args.out} ({len(ep.t)} steps, detected at "
          f"{ep.detect_index}, latched {type(ep.latched_mode).__name__})")
    return 0


def cmd_generate_dataset(args):
    cfg = _load_cfg(args)
    n_rows, n_eps = pipeline.generate_dataset(cfg, args.out, workers=args.workers)
    print(f"wrote {args.out}: {n_rows} rows from {n_eps} episodes")
    return 0


def cmd_train(args):
    cfg = _load_cfg(args)
    held_out = cfg.held_out_config if args.held_out_config is None \
        else args.held_out_config
    model, table = pipeline.train_model(
        cfg, args.dataset, args.out, report_path=args.report,
        held_out=held_out, use_grid=not args.no_grid)
    acc = max((c["val_accuracy"] for c in table), default=float("nan"))
    print(f"wrote {args.out} (grid cells: {len(table)}, best val acc: {acc})")
    return 0


def cmd_evaluate(args):
    cfg = _load_cfg(args)
    model = MLPContactClassifier.load(args.model)
    cm, rows, _ = pipeline.evaluate_model(
        cfg, model, held_out=args.held_out_config, p_th=args.p_th,
        out_path=args.out)
    print("row-normalized confusion matrix (rows: clamping, collision):")
    for row in cm:
        print("  " + "  ".join(f"{v:.3f}" for v in row))
    counts = {}
    for r in rows:
        counts[r["outcome"]] = counts.get(r["outcome"], 0) + 1
    print(f"outcomes over {len(rows)} episodes: "
          + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_sweep(args):
    cfg = _load_cfg(args)
    model = MLPContactClassifier.load(args.model)
    sweep, records = pipeline.run_sweep(
        cfg, model, held_out=args.held_out_config, out_path=args.out)
    detected = [r for r in records if r.detected]
    cm = ev.confusion_matrix([r.true_kind for r in detected],
                             [r.pred_label for r in detected])
    print(ev.summarize(sweep, cm))
    print(f"wrote {args.out}")
    return 0


def cmd_init_config(args):
    cfgmod.dump_default(args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="planar3rrr",
        description="Planar 3-RRR contact classification and reaction-safety "
                    "simulation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", default=None,
                        help="YAML experiment config (defaults used if omitted)")
        if seed:
            sp.add_argument("--seed", type=int, default=None,
                            help="override the config seed")

    sp = sub.add_parser("simulate", help="run one scenario and dump the episode log")
    common(sp)
    sp.add_argument("--scenario-id", type=int, required=True)
    sp.add_argument("--model", default=None, help="optional trained model file")
    sp.add_argument("--p-th", type=float, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("generate-dataset",
                        help="simulate scenario draws and write the feature CSV")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_generate_dataset)

    sp = sub.add_parser("train", help="grid-search and train the classifier")
    common(sp)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True, help="model file to write")
    sp.add_argument("--report", default=None, help="grid-search report JSON")
    sp.add_argument("--held-out-config", type=int, default=None)
    sp.add_argument("--no-grid", action="store_true",
                    help="skip the grid search (single mid-grid fit)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate",
                        help="confusion matrix + outcome labels on the held-out configuration")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--held-out-config", type=int, default=None)
    sp.add_argument("--p-th", type=float, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="p_th sweep of the reaction-outcome ratios")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--held-out-config", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("init-config", help="write the default config YAML")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_init_config)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # single machine-readable error line
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
