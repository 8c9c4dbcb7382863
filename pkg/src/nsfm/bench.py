"""Benchmark harness: NMSE sweeps, latency measurement, budget conversion.

Sweeps reproduce the experiment protocol at desk scale: for every axis
value the flow estimator and both baselines (least squares, vanilla LMMSE)
are evaluated on identical noise draws, so method comparisons are paired.
Results go to a fixed-schema CSV plus a run manifest; every row is
reproducible from the seeds recorded there.
"""

import configparser
import csv
import math
import platform
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channels import ChannelDataset, channel_to_real
from .config import ExperimentConfig, config_text
from .errors import ConfigError, ShapeError
from .estimator import (
    EstimatorConfig,
    ScheduleConfig,
    correct,
    estimate,
    euler_predict,
    lmmse_fit,
    lmmse_gain,
    ls_estimate,
)
from .flow import VelocityNet
from .linalg import dft_matrix
from .measurement import MeasurementModel, make_measurement_model, observe
from .rng import derive_rng, make_rng

CSV_HEADER = (
    "axis_value",
    "method",
    "mean_nmse_db",
    "stderr_db",
    "trials",
    "k_steps",
    "sigma_n",
    "wall_ms",
)

METHODS = ("nsfm", "ls", "lmmse")


@dataclass(frozen=True)
class LatencyProfile:
    """Preprocess and per-iteration wall-clock costs of one method."""

    method: str
    preprocess_ms: float
    per_step_ms: float
    note: str = ""

    def __post_init__(self):
        if self.preprocess_ms < 0 or self.per_step_ms < 0:
            raise ConfigError("latencies must be non-negative")


@dataclass(frozen=True)
class SweepPoint:
    axis_value: float
    method: str
    mean_nmse_db: float | None  # None marks a "no estimate" sentinel row
    stderr_db: float | None
    trials: int
    k_steps: int
    sigma_n: float
    wall_ms: float


@dataclass
class SweepResult:
    axis: str
    points: list = field(default_factory=list)

    def rows_for(self, method: str):
        return [p for p in self.points if p.method == method]


def steps_from_budget(budget_ms: float, preprocess_ms: float, per_step_ms: float) -> int:
    """Iteration count K = max(0, floor((budget - preprocess) / per step))."""
    if per_step_ms <= 0:
        raise ConfigError("per_step_ms must be positive")
    return max(0, math.floor((budget_ms - preprocess_ms) / per_step_ms))


def measure_latency(
    net: VelocityNet, model: MeasurementModel, warmup: int = 5, reps: int = 30
) -> LatencyProfile:
    """Median preprocess and per-iteration wall-clock times on a monotonic clock.

    Preprocess covers measurement-model construction including the
    pseudo-inverse; one iteration is an Euler prediction plus correction.
    Absolute numbers are environment dependent and recorded as such.
    """
    if reps < 10:
        raise ConfigError("reps must be >= 10")
    pre = np.empty(reps)
    for i in range(reps):
        t0 = time.perf_counter()
        make_measurement_model(model.nr, model.nt, model.np_pilots, model.snr_db)
        pre[i] = time.perf_counter() - t0
    rng = make_rng(0)
    h = rng.standard_normal(model.n_dim)
    y = rng.standard_normal(model.m)
    for _ in range(warmup):
        correct(model, euler_predict(net, h, 0.5, 0.52), y, 1.0)
    step = np.empty(reps)
    for i in range(reps):
        t0 = time.perf_counter()
        correct(model, euler_predict(net, h, 0.5, 0.52), y, 1.0)
        step[i] = time.perf_counter() - t0
    note = f"{platform.python_implementation()} {platform.python_version()}, numpy {np.__version__}, {platform.machine()}"
    return LatencyProfile(
        method="nsfm",
        preprocess_ms=float(np.median(pre) * 1e3),
        per_step_ms=float(np.median(step) * 1e3),
        note=note,
    )


def eval_vectors(dataset: ChannelDataset) -> np.ndarray:
    """Realified angular ground-truth vectors for the test split."""
    if dataset.test_count == 0:
        raise ShapeError("dataset has no test split")
    nr, nt = dataset.samples.shape[1:]
    a_t, a_r = dft_matrix(nt), dft_matrix(nr)
    return np.stack([channel_to_real(h, a_t, a_r) for h in dataset.test])


def train_vectors(dataset: ChannelDataset) -> np.ndarray:
    """Realified angular vectors of the training split (for LMMSE statistics)."""
    if dataset.train_count == 0:
        raise ShapeError("dataset has no training split")
    nr, nt = dataset.samples.shape[1:]
    a_t, a_r = dft_matrix(nt), dft_matrix(nr)
    return np.stack([channel_to_real(h, a_t, a_r) for h in dataset.train])


def _mean_db(linear: np.ndarray):
    """dB of the linear-mean NMSE plus a delta-method standard error."""
    mean = float(linear.mean())
    stderr = float(linear.std(ddof=1) / np.sqrt(linear.size)) if linear.size > 1 else 0.0
    return 10.0 * np.log10(mean), 10.0 / np.log(10.0) * stderr / mean


def _sweep_point(cfg, net, model, truths, lmmse, axis_value, axis_index, k_steps):
    """NMSE of all methods at one axis value, on paired noise draws."""
    est_cfg = EstimatorConfig(
        schedule=ScheduleConfig(steps=k_steps, rho=cfg.rho),
        correction=cfg.correction,
        final_hard_projection=cfg.final_hard_projection,
        seed=cfg.seed,
    )
    gain = lmmse_gain(lmmse, model)
    linear = {m: np.empty(cfg.trials) for m in METHODS}
    t0 = time.perf_counter()
    for trial in range(cfg.trials):
        h = truths[trial % len(truths)]
        h_norm = np.sum(h**2)
        y = observe(model, h, derive_rng(cfg.seed, axis_index, trial, 0))
        estimates = {
            "nsfm": estimate(net, model, y, est_cfg, rng=derive_rng(cfg.seed, axis_index, trial, 1)),
            "ls": ls_estimate(model, y),
            "lmmse": lmmse.mean + gain @ (y - model.a @ lmmse.mean),
        }
        for method, h_hat in estimates.items():
            linear[method][trial] = np.sum((h_hat - h) ** 2) / h_norm
    wall_ms = (time.perf_counter() - t0) * 1e3
    points = []
    for method in METHODS:
        mean_db, stderr_db = _mean_db(linear[method])
        points.append(
            SweepPoint(
                axis_value=float(axis_value),
                method=method,
                mean_nmse_db=round(mean_db, 6),
                stderr_db=round(stderr_db, 6),
                trials=cfg.trials,
                k_steps=k_steps if method == "nsfm" else 0,
                sigma_n=model.sigma_n,
                wall_ms=round(wall_ms, 3),
            )
        )
    return points


def _log_point(verbose: bool, axis: str, points):
    if verbose:
        summary = "  ".join(
            f"{p.method}={p.mean_nmse_db:.2f}" for p in points if p.mean_nmse_db is not None
        )
        print(f"[sweep] {axis}={points[0].axis_value:g}  {summary or 'no estimate'} (dB)")


def run_sweep_snr(
    cfg: ExperimentConfig, net: VelocityNet, dataset: ChannelDataset, verbose: bool = False
) -> SweepResult:
    """NMSE versus SNR at the anchor pilot density."""
    truths = eval_vectors(dataset)
    stats = lmmse_fit(train_vectors(dataset))
    result = SweepResult(axis="snr_db")
    for idx, snr in enumerate(cfg.snr_db_list):
        model = make_measurement_model(cfg.channel.nr, cfg.channel.nt, cfg.np_pilots, snr)
        points = _sweep_point(cfg, net, model, truths, stats, snr, idx, cfg.k_steps)
        _log_point(verbose, "snr_db", points)
        result.points.extend(points)
    return result


def run_sweep_density(
    cfg: ExperimentConfig, net: VelocityNet, dataset: ChannelDataset, verbose: bool = False
) -> SweepResult:
    """NMSE versus pilot density alpha = np/nt at the anchor SNR."""
    truths = eval_vectors(dataset)
    stats = lmmse_fit(train_vectors(dataset))
    result = SweepResult(axis="pilot_density")
    for idx, np_pilots in enumerate(sorted(cfg.np_list)):
        model = make_measurement_model(cfg.channel.nr, cfg.channel.nt, np_pilots, cfg.snr_db)
        alpha = np_pilots / cfg.channel.nt
        points = _sweep_point(cfg, net, model, truths, stats, alpha, idx, cfg.k_steps)
        _log_point(verbose, "alpha", points)
        result.points.extend(points)
    return result


def run_sweep_budget(
    cfg: ExperimentConfig,
    profile: LatencyProfile,
    net: VelocityNet,
    dataset: ChannelDataset,
    verbose: bool = False,
) -> SweepResult:
    """NMSE versus coherence-time budget; K is derived from the latency profile.

    Budgets too small for a single iteration produce a sentinel row with an
    empty NMSE ("no estimate") rather than an extrapolated value.
    """
    truths = eval_vectors(dataset)
    stats = lmmse_fit(train_vectors(dataset))
    model = make_measurement_model(cfg.channel.nr, cfg.channel.nt, cfg.np_pilots, cfg.snr_db)
    result = SweepResult(axis="budget_ms")
    for idx, budget in enumerate(sorted(cfg.budget_ms_list)):
        k = steps_from_budget(budget, profile.preprocess_ms, profile.per_step_ms)
        if k == 0:
            sentinel = SweepPoint(
                axis_value=float(budget),
                method="nsfm",
                mean_nmse_db=None,
                stderr_db=None,
                trials=cfg.trials,
                k_steps=0,
                sigma_n=model.sigma_n,
                wall_ms=0.0,
            )
            _log_point(verbose, "budget_ms", [sentinel])
            result.points.append(sentinel)
            continue
        points = _sweep_point(cfg, net, model, truths, stats, budget, idx, k)
        _log_point(verbose, "budget_ms", points)
        result.points.extend(points)
    return result


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for p in result.points:
            writer.writerow(
                [
                    p.axis_value,
                    p.method,
                    "" if p.mean_nmse_db is None else p.mean_nmse_db,
                    "" if p.stderr_db is None else p.stderr_db,
                    p.trials,
                    p.k_steps,
                    p.sigma_n,
                    p.wall_ms,
                ]
            )


def read_sweep_csv(path) -> SweepResult:
    result = SweepResult(axis="")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ConfigError(f"unexpected CSV header in {path}")
        for row in reader:
            result.points.append(
                SweepPoint(
                    axis_value=float(row["axis_value"]),
                    method=row["method"],
                    mean_nmse_db=float(row["mean_nmse_db"]) if row["mean_nmse_db"] else None,
                    stderr_db=float(row["stderr_db"]) if row["stderr_db"] else None,
                    trials=int(row["trials"]),
                    k_steps=int(row["k_steps"]),
                    sigma_n=float(row["sigma_n"]),
                    wall_ms=float(row["wall_ms"]),
                )
            )
    return result


def version_string() -> str:
    """Package version, with a git describe suffix when run from a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"nsfm {__version__} ({out.stdout.strip()})"
    except OSError:
        pass
    return f"nsfm {__version__}"


def write_manifest(path, command: str, cfg: ExperimentConfig, wall_s: float, extra=None):
    """Run manifest: command, version, wall clock, config echo, extra sections."""
    lines = [
        "[manifest]",
        f"command = {command}",
        f"version = {version_string()}",
        f"created_utc = {time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime())}",
        f"wall_clock_s = {wall_s:.3f}",
        "",
    ]
    for section, entries in (extra or {}).items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in entries.items())
        lines.append("")
    body = "\n".join(lines)
    config_echo = "\n".join(
        f"[config.{line[1:]}" if line.startswith("[") else line
        for line in config_text(cfg).splitlines()
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(body + config_echo + "\n")


def write_latency_profile(profile: LatencyProfile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("[latency_profile]\n")
        fh.write(f"method = {profile.method}\n")
        fh.write(f"preprocess_ms = {profile.preprocess_ms}\n")
        fh.write(f"per_step_ms = {profile.per_step_ms}\n")
        fh.write(f"note = {profile.note}\n")


def read_latency_profile(path) -> LatencyProfile:
    parser = configparser.ConfigParser(interpolation=None)
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_string(fh.read())
    if not parser.has_section("latency_profile"):
        raise ConfigError(f"{path} has no [latency_profile] section")
    section = parser["latency_profile"]
    return LatencyProfile(
        method=section.get("method", "nsfm"),
        preprocess_ms=float(section["preprocess_ms"]),
        per_step_ms=float(section["per_step_ms"]),
        note=section.get("note", ""),
    )
