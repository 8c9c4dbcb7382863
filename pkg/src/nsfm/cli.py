"""Command-line driver for dataset generation, training, and benchmarks.

Subcommands: gen-data | train | estimate | bench-snr | bench-density |
bench-budget | measure-latency.  Every command writes its outputs plus a
run manifest under the output directory.  Exit codes: 0 success, 1 usage
or config error, 2 runtime/numeric error.
"""

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from .bench import (
    LatencyProfile,
    measure_latency,
    read_latency_profile,
    run_sweep_budget,
    run_sweep_density,
    run_sweep_snr,
    write_latency_profile,
    write_manifest,
    write_sweep_csv,
)
from .channels import (
    channel_to_real,
    dataset_hash,
    generate_dataset,
    load_dataset,
    normalize_dataset,
    save_dataset,
    split_dataset,
)
from .config import ExperimentConfig, load_config
from .errors import ConfigError, FormatError, NsfmError
from .estimator import EstimatorConfig, ScheduleConfig, estimate, nmse_db
from .flow import CheckpointMeta, init_velocity_net, load_checkpoint, save_checkpoint, train
from .linalg import dft_matrix
from .measurement import make_measurement_model, observe
from .rng import derive_rng


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_cfg(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return ExperimentConfig()


def _out_dir(args, cfg) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_split_dataset(args, cfg):
    if not getattr(args, "data", None):
        raise _UsageError("--data is required")
    ds = load_dataset(args.data)
    return split_dataset(ds, cfg.train_fraction, cfg.seed)


def _load_net(args, n_dim):
    if not getattr(args, "checkpoint", None):
        raise _UsageError("--checkpoint is required")
    net, meta = load_checkpoint(args.checkpoint)
    if net.input_dim != n_dim:
        raise ConfigError(
            f"checkpoint dimension {net.input_dim} does not match dataset dimension {n_dim}"
        )
    return net, meta


def cmd_gen_data(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    t0 = time.perf_counter()
    ds = normalize_dataset(generate_dataset(cfg.channel, cfg.samples))
    path = out / "dataset.nsfm"
    save_dataset(ds, path)
    wall = time.perf_counter() - t0
    write_manifest(
        out / "gen-data.manifest",
        "gen-data",
        cfg,
        wall,
        extra={"outputs": {"dataset": path, "dataset_hash": dataset_hash(ds)}},
    )
    print(f"[gen-data] wrote {cfg.samples} samples ({cfg.channel.nr}x{cfg.channel.nt}) to {path}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    t0 = time.perf_counter()
    ds = _load_split_dataset(args, cfg)
    nr, nt = ds.samples.shape[1:]
    net = init_velocity_net(
        2 * nr * nt,
        hidden_dims=cfg.hidden_dims,
        time_embed_dim=cfg.time_embed_dim,
        seed=cfg.train.seed,
    )
    print(f"[train] {ds.train_count} train / {ds.test_count} test, {net.num_params()} parameters")
    net, curve = train(net, ds, cfg.train, verbose=True)
    ckpt_path = out / "velocity.nsck"
    save_checkpoint(net, CheckpointMeta(dataset_hash=dataset_hash(ds), seed=cfg.train.seed), ckpt_path)
    curve_path = out / "loss_curve.csv"
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        writer.writerows(enumerate(curve))
    fig_path = None
    if not args.no_figures:
        from .plotting import plot_loss_curve

        fig_path = out / "loss_curve.png"
        plot_loss_curve(curve, fig_path)
    wall = time.perf_counter() - t0
    write_manifest(
        out / "train.manifest",
        "train",
        cfg,
        wall,
        extra={
            "training": {
                "epochs": cfg.train.epochs,
                "final_loss": curve[-1],
                "dataset_hash": dataset_hash(ds),
            },
            "outputs": {"checkpoint": ckpt_path, "loss_curve": curve_path, "figure": fig_path},
        },
    )
    print(f"[train] final loss {curve[-1]:.5f}, checkpoint at {ckpt_path}")
    return 0


def cmd_estimate(args) -> int:
    cfg = _load_cfg(args)
    if not getattr(args, "data", None):
        raise _UsageError("--data is required")
    ds = load_dataset(args.data)
    if not 0 <= args.index < len(ds):
        raise ConfigError(f"--index must lie in [0, {len(ds) - 1}]")
    nr, nt = ds.samples.shape[1:]
    net, _ = _load_net(args, 2 * nr * nt)
    model = make_measurement_model(nr, nt, args.np_pilots, args.snr)
    h = channel_to_real(ds.samples[args.index], dft_matrix(nt), dft_matrix(nr))
    y = observe(model, h, derive_rng(args.seed, 0))
    est_cfg = EstimatorConfig(
        schedule=ScheduleConfig(steps=args.k, rho=args.rho),
        correction=args.mode,
        final_hard_projection=args.final_hard_projection,
        seed=args.seed,
    )
    h_hat = estimate(net, model, y, est_cfg, rng=derive_rng(args.seed, 1))
    print(f"{nmse_db(h_hat, h):.4f}")
    return 0


def _run_bench(args, kind) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    t0 = time.perf_counter()
    ds = _load_split_dataset(args, cfg)
    nr, nt = ds.samples.shape[1:]
    net, _ = _load_net(args, 2 * nr * nt)
    extra = {}
    if kind == "snr":
        result = run_sweep_snr(cfg, net, ds, verbose=True)
    elif kind == "density":
        result = run_sweep_density(cfg, net, ds, verbose=True)
    else:
        if getattr(args, "profile", None):
            profile = read_latency_profile(args.profile)
        else:
            print("[bench-budget] no --profile given, measuring latency in-process")
            model = make_measurement_model(nr, nt, cfg.np_pilots, cfg.snr_db)
            profile = measure_latency(net, model)
        extra["latency_profile"] = {
            "method": profile.method,
            "preprocess_ms": profile.preprocess_ms,
            "per_step_ms": profile.per_step_ms,
            "note": profile.note,
        }
        result = run_sweep_budget(cfg, profile, net, ds, verbose=True)
    csv_path = out / f"{kind}_sweep.csv"
    write_sweep_csv(result, csv_path)
    outputs = {"csv": csv_path}
    if not args.no_figures:
        from .plotting import plot_sweep

        fig_path = out / f"{kind}_sweep.png"
        plot_sweep(result, fig_path)
        outputs["figure"] = fig_path
    wall = time.perf_counter() - t0
    extra["outputs"] = outputs
    write_manifest(out / f"bench-{kind}.manifest", f"bench-{kind}", cfg, wall, extra=extra)
    print(f"[bench-{kind}] wrote {csv_path}")
    return 0


def cmd_measure_latency(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    t0 = time.perf_counter()
    ds = load_dataset(args.data) if getattr(args, "data", None) else None
    if ds is not None:
        nr, nt = ds.samples.shape[1:]
    else:
        nr, nt = cfg.channel.nr, cfg.channel.nt
    net, _ = _load_net(args, 2 * nr * nt)
    model = make_measurement_model(nr, nt, cfg.np_pilots, cfg.snr_db)
    profile = measure_latency(net, model, warmup=args.warmup, reps=args.reps)
    path = out / "latency.profile"
    write_latency_profile(profile, path)
    wall = time.perf_counter() - t0
    write_manifest(
        out / "measure-latency.manifest",
        "measure-latency",
        cfg,
        wall,
        extra={
            "latency_profile": {
                "method": profile.method,
                "preprocess_ms": profile.preprocess_ms,
                "per_step_ms": profile.per_step_ms,
                "note": profile.note,
            },
            "outputs": {"profile": path},
        },
    )
    print(
        f"[measure-latency] preprocess {profile.preprocess_ms:.3f} ms, "
        f"per step {profile.per_step_ms:.3f} ms -> {path}"
    )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="nsfm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p, data=False, checkpoint=False):
        p.add_argument("--config", help="experiment config file (key = value sections)")
        p.add_argument("--out", help="output directory (default: config out_dir)")
        if data:
            p.add_argument("--data", help="dataset file from gen-data")
        if checkpoint:
            p.add_argument("--checkpoint", help="velocity-net checkpoint from train")

    p = sub.add_parser("gen-data", help="generate and normalize a channel dataset")
    add_common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the flow-matching prior")
    add_common(p, data=True)
    p.add_argument("--no-figures", action="store_true", help="skip loss-curve figure")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="estimate one channel and print its NMSE in dB")
    add_common(p, data=True, checkpoint=True)
    p.add_argument("--snr", type=float, required=True, help="SNR in dB")
    p.add_argument("--np", dest="np_pilots", type=int, required=True, help="pilot count")
    p.add_argument("--k", type=int, required=True, help="refinement steps")
    p.add_argument("--rho", type=float, default=1.5, help="schedule exponent (>= 1)")
    p.add_argument("--mode", choices=("adaptive", "hard"), default="adaptive")
    p.add_argument("--final-hard-projection", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--index", type=int, default=0, help="sample index into the dataset")
    p.set_defaults(func=cmd_estimate)

    for kind in ("snr", "density", "budget"):
        p = sub.add_parser(f"bench-{kind}", help=f"run the {kind} sweep")
        add_common(p, data=True, checkpoint=True)
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
        if kind == "budget":
            p.add_argument("--profile", help="latency profile file from measure-latency")
        p.set_defaults(func=lambda args, kind=kind: _run_bench(args, kind))

    p = sub.add_parser("measure-latency", help="measure preprocess and per-step latency")
    add_common(p, data=True, checkpoint=True)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--reps", type=int, default=30)
    p.set_defaults(func=cmd_measure_latency)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, FormatError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NsfmError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
