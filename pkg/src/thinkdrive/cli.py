"""Command-line interface: gen-data, train, eval, infer, gradcheck, plot.

Every command is deterministic given (config, seeds, checkpoint); the
default config can be pointed at a file via the THINKDRIVE_CONFIG
environment variable and overridden per-key with ``--set key=value``.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import (ConfigError, RunConfig, apply_overrides, config_digest,
                     load_config, serialize_config)
from .evaluation import (PdmsReport, benchmark, benchmark_specs, report_csv,
                         report_text)
from .optim import AdamState
from .planner.checkpoint import (CheckpointError, load_planner,
                                 save_checkpoint)
from .planner.inference import infer
from .planner.model import Planner
from .planner.training import TrainingDiverged, fit
from .planner.verification import end_to_end_grad_check
from .plotting import write_plot
from .simworld.dataset import (generate_dataset, load_dataset, manifest_text,
                               save_dataset)
from .simworld.expert import run_expert_episode
from .simworld.raster import render_observation
from .simworld.scenarios import generate_scenario


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file (key = value per line)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override one config key")


def _resolve_config(args) -> RunConfig:
    return load_config(args.config, args.overrides)


def cmd_gen_data(args) -> int:
    cfg = _resolve_config(args)
    dataset = generate_dataset(cfg)
    save_dataset(args.out, dataset, cfg)
    manifest_path = args.out + ".manifest.txt"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(manifest_text(dataset, cfg))
    print(f"wrote {len(dataset)} keyframes to {args.out}")
    print(f"manifest: {manifest_path}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    dataset, data_cfg = load_dataset(args.data)
    if config_digest(data_cfg) != config_digest(cfg):
        print("error: dataset was generated under a different config digest",
              file=sys.stderr)
        print(f"  dataset: {config_digest(data_cfg)}", file=sys.stderr)
        print(f"  current: {config_digest(cfg)}", file=sys.stderr)
        return 2

    if args.resume:
        planner, adam, _ = load_planner(args.resume, config_digest(cfg))
        print(f"resumed from {args.resume} at step {adam.step}")
    else:
        planner = Planner(cfg, seed=cfg.train_seed)
        adam = AdamState(lr=cfg.learning_rate)

    def checkpoint_fn(pl, ad):
        save_checkpoint(args.out, pl, ad)

    metrics_path = args.out + ".metrics.csv"
    try:
        rows = fit(planner, dataset, adam, metrics_path=metrics_path,
                   checkpoint_fn=checkpoint_fn)
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        print(f"last good checkpoint kept at {args.out}", file=sys.stderr)
        return 3
    save_checkpoint(args.out, planner, adam)
    if rows:
        print(f"trained to step {rows[-1].step}; final loss "
              f"{rows[-1].loss:.4f}; checkpoint: {args.out}")
    else:
        print(f"nothing to train (already at target epochs); "
              f"checkpoint: {args.out}")
    print(f"metrics log: {metrics_path}")
    return 0


def cmd_eval(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    sweep_rows = []
    expect = None
    if args.config:
        expect = config_digest(load_config(args.config))
    for ckpt_path in args.checkpoint:
        try:
            planner, _, ckpt = load_planner(ckpt_path, expect)
        except CheckpointError as exc:
            print(f"error: refusing to evaluate {ckpt_path}: {exc}",
                  file=sys.stderr)
            return 2
        cfg = ckpt.cfg
        if args.overrides:
            cfg = apply_overrides(cfg, args.overrides)
            if config_digest(cfg) != ckpt.digest:
                print("error: --set may only change evaluation-only keys "
                      "(the digest must stay equal to the checkpoint's)",
                      file=sys.stderr)
                return 2
            planner.cfg = cfg
        stem = os.path.splitext(os.path.basename(ckpt_path))[0]
        trace_dir = os.path.join(args.out, f"{stem}_traces")
        sink = None
        if args.traces:
            os.makedirs(trace_dir, exist_ok=True)

            def sink(trace, _dir=trace_dir):
                trace.save(os.path.join(_dir, f"trace_{trace.seed}.json"))

        report = benchmark(planner, benchmark_specs(cfg), args.mode, cfg,
                           trace_sink=sink)
        txt = os.path.join(args.out, f"{stem}_report.txt")
        csv_path = os.path.join(args.out, f"{stem}_report.csv")
        with open(txt, "w", encoding="utf-8") as fh:
            fh.write(report_text(report))
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(report_csv(report))
        print(f"{stem}: mode={args.mode} mean PDMS {report.mean_pdms:.4f} "
              f"think-rate {report.think_rate:.3f}")
        sweep_rows.append((stem, cfg.cot_steps, cfg.segment_length, report))
    if len(sweep_rows) > 1:
        sweep_path = os.path.join(args.out, "sweep.txt")
        with open(sweep_path, "w", encoding="utf-8") as fh:
            fh.write("checkpoint\tsteps_K\tsegment_N\tmean_pdms\tthink_rate\n")
            for stem, k, n, report in sweep_rows:
                fh.write(f"{stem}\t{k}\t{n}\t{report.mean_pdms:.6f}"
                         f"\t{report.think_rate:.6f}\n")
        print(f"sweep table: {sweep_path}")
    return 0


def cmd_infer(args) -> int:
    planner, _, ckpt = load_planner(args.checkpoint)
    cfg = ckpt.cfg
    scenario = generate_scenario(args.seed, args.difficulty)
    log = run_expert_episode(scenario, max(args.tick, 1) + 1,
                             v_max=cfg.v_max, dt=cfg.dt)
    obs = render_observation(scenario, log[args.tick], cfg.grid_size,
                             cfg.window_m, cfg.v_max)
    result = infer(planner, obs, mode=args.mode, tau=cfg.tau)
    d = result.decision
    print(f"scenario seed={args.seed} difficulty={args.difficulty} "
          f"template={scenario.template} tick={args.tick}")
    print(f"mode={d.mode} score={d.score:.4f}")
    print("waypoint   x[m]      y[m]      theta[rad]")
    for i, (x, y, th) in enumerate(result.trajectory):
        print(f"  {i + 1:2d}   {x:9.3f} {y:9.3f} {th:10.4f}")
    for stage, seconds in result.timing.items():
        print(f"timing.{stage} = {seconds * 1000:.3f} ms")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = _resolve_config(args)
    report = end_to_end_grad_check(cfg, h=args.h, tol=args.tol, seed=args.seed)
    print(f"end-to-end gradient check on the miniature configuration")
    print(f"tolerance {args.tol:g}, step {args.h:g}, "
          f"{len(report.max_rel_err)} parameter groups")
    for name, err in sorted(report.max_rel_err.items(), key=lambda kv: -kv[1]):
        status = "ok  " if err <= args.tol else "FAIL"
        print(f"  {status} {name:32s} max rel err {err:.3e}")
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def cmd_plot(args) -> int:
    write_plot(args.trace, args.out, args.tick)
    print(f"wrote {args.out} and its CSV twin")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thinkdrive",
        description="latent-rollout driving planner: data, training, "
                    "evaluation, inspection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the keyframe dataset")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output dataset path (.fxds)")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train a planner on a dataset")
    _add_config_args(p)
    p.add_argument("--data", required=True, help="dataset file from gen-data")
    p.add_argument("--out", required=True, help="checkpoint path (.fxck)")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="closed-loop benchmark of checkpoints")
    p.add_argument("--checkpoint", required=True, action="append",
                   help="checkpoint to evaluate (repeat for a sweep table)")
    p.add_argument("--mode", choices=("auto", "all", "none"), default="auto")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="optional config to cross-check digests")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE",
                   help="override evaluation-only config keys")
    p.add_argument("--traces", action="store_true",
                   help="also write per-scenario trace files")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("infer", help="plan one frame of one scenario")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--difficulty", choices=("easy", "hard"), default="hard")
    p.add_argument("--tick", type=int, default=0)
    p.add_argument("--mode", choices=("auto", "all", "none"), default="auto")
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of the whole objective")
    _add_config_args(p)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("plot", help="render a trace file to SVG + CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True, help="output .svg path")
    p.add_argument("--tick", type=int, default=0,
                   help="tick whose plans are drawn")
    p.set_defaults(fn=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
