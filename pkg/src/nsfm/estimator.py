"""Channel estimation: flow-prior inference plus classical baselines.

The main estimator alternates an Euler step along the learned velocity field
with an observation correction that rewrites the range-space component of
the prediction from the pilot measurement.  The correction weight is either
hard (1, exact consistency after every step) or adaptive,
eta = min(1, (1 - t)/sigma_n), which backs off as observation noise starts
to dominate the shrinking prediction uncertainty.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, DomainError, NumericError, RankError, ShapeError
from .flow import VelocityNet, forward
from .measurement import MeasurementModel
from .rng import make_rng

DEFAULT_RHO = 1.5

_LMMSE_RIDGE = 1e-6


@dataclass(frozen=True)
class ScheduleConfig:
    """Time grid for the refinement loop: t_k = (k/K)^rho."""

    steps: int = 50
    rho: float = DEFAULT_RHO
    kind: str = "power-law"  # "uniform" behaves as rho = 1

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.kind not in ("uniform", "power-law"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "power-law" and self.rho < 1.0:
            raise ConfigError("rho must be >= 1 (denser steps early)")


@dataclass(frozen=True)
class EstimatorConfig:
    schedule: ScheduleConfig = ScheduleConfig()
    correction: str = "adaptive"  # "adaptive" | "hard"
    final_hard_projection: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.correction not in ("adaptive", "hard"):
            raise ConfigError(f"unknown correction mode {self.correction!r}")


@dataclass
class LmmseStats:
    """Offline first- and second-order statistics of the channel vectors."""

    mean: np.ndarray
    covariance: np.ndarray


def make_schedule(cfg: ScheduleConfig) -> np.ndarray:
    """Grid t_0 = 0 < ... < t_K = 1, power-law spaced."""
    k = np.arange(cfg.steps + 1, dtype=np.float64)
    if cfg.kind == "uniform" or cfg.rho == 1.0:
        return k / cfg.steps
    return (k / cfg.steps) ** cfg.rho


def euler_predict(net: VelocityNet, h_tk: np.ndarray, t_k: float, t_next: float) -> np.ndarray:
    """One Euler step h + v(h, t_k) * (t_next - t_k), state kept in float64."""
    if not t_k <= t_next:
        raise ConfigError("t_next must not precede t_k")
    v = forward(net, np.asarray(h_tk, dtype=np.float32), t_k)
    pred = np.asarray(h_tk, dtype=np.float64) + (t_next - t_k) * v.astype(np.float64)
    if not np.all(np.isfinite(pred)):
        raise NumericError("non-finite Euler prediction")
    return pred


def guidance_factor(t_next: float, sigma_n: float) -> float:
    """Noise-aware correction weight min(1, (1 - t)/sigma_n)."""
    if sigma_n <= 0:
        raise ConfigError("sigma_n must be positive")
    if not 0.0 <= t_next <= 1.0:
        raise DomainError("t_next must lie in [0, 1]")
    return min(1.0, (1.0 - t_next) / sigma_n)


def correct(model: MeasurementModel, h_pred: np.ndarray, y: np.ndarray, eta: float) -> np.ndarray:
    """Observation correction h - eta * A^dagger (A h - y).

    Scales the measurement residual by exactly (1 - eta) and leaves the
    null-space component of the prediction untouched.
    """
    h_pred = np.asarray(h_pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if h_pred.shape != (model.n_dim,) or y.shape != (model.m,):
        raise ShapeError("prediction/observation lengths do not match the model")
    return h_pred - eta * (model.a_pinv @ (model.a @ h_pred - y))


def estimate(
    net: VelocityNet,
    model: MeasurementModel,
    y: np.ndarray,
    cfg: EstimatorConfig,
    rng: np.random.Generator | None = None,
    return_trajectory: bool = False,
):
    """Flow-prior channel estimate from one pilot observation.

    Starts from a Gaussian draw and runs K predict-then-correct iterations
    over the configured schedule; hard mode corrects with eta = 1 at every
    step, adaptive mode uses the noise-aware factor (which vanishes at
    t = 1).  ``final_hard_projection`` appends one extra eta = 1 correction
    after the loop.
    """
    if rng is None:
        rng = make_rng(cfg.seed)
    grid = make_schedule(cfg.schedule)
    h = rng.standard_normal(model.n_dim)
    trajectory = []
    for k in range(cfg.schedule.steps):
        pred = euler_predict(net, h, grid[k], grid[k + 1])
        if cfg.correction == "hard":
            eta = 1.0
        else:
            eta = guidance_factor(grid[k + 1], model.sigma_n)
        h = correct(model, pred, y, eta)
        if not np.all(np.isfinite(h)):
            raise NumericError("non-finite state during estimation", index=k)
        if return_trajectory:
            trajectory.append(h.copy())
    if cfg.final_hard_projection:
        h = correct(model, h, y, 1.0)
        if return_trajectory:
            trajectory.append(h.copy())
    if return_trajectory:
        return h, trajectory
    return h


def ls_estimate(model: MeasurementModel, y: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution A^dagger y (range space only)."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (model.m,):
        raise ShapeError(f"observation must have length {model.m}, got {y.shape}")
    return model.a_pinv @ y


def lmmse_fit(train: np.ndarray) -> LmmseStats:
    """Sample mean and ridge-regularized sample covariance of training vectors."""
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 2:
        raise ShapeError("lmmse_fit needs at least two training vectors")
    mean = train.mean(axis=0)
    centered = train - mean
    cov = centered.T @ centered / (train.shape[0] - 1)
    cov += np.eye(cov.shape[0]) * (_LMMSE_RIDGE * np.trace(cov) / cov.shape[0])
    return LmmseStats(mean=mean, covariance=cov)


def lmmse_gain(stats: LmmseStats, model: MeasurementModel) -> np.ndarray:
    """Wiener gain C A^T (A C A^T + sigma^2 I)^-1 for repeated application."""
    if stats.mean.shape != (model.n_dim,):
        raise ShapeError("statistics dimension does not match the model")
    cat = stats.covariance @ model.a.T
    inner = model.a @ cat + model.sigma_n**2 * np.eye(model.m)
    try:
        factor = scipy.linalg.cho_factor(inner)
    except np.linalg.LinAlgError as exc:
        raise RankError("singular LMMSE inner matrix") from exc
    return scipy.linalg.cho_solve(factor, cat.T).T


def lmmse_estimate(stats: LmmseStats, model: MeasurementModel, y: np.ndarray) -> np.ndarray:
    """Linear MMSE estimate mean + G (y - A mean)."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (model.m,):
        raise ShapeError(f"observation must have length {model.m}, got {y.shape}")
    gain = lmmse_gain(stats, model)
    return stats.mean + gain @ (y - model.a @ stats.mean)


def nmse_db(h_hat: np.ndarray, h: np.ndarray) -> float:
    """10 log10(||h_hat - h||^2 / ||h||^2)."""
    h_hat = np.asarray(h_hat, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if h_hat.shape != h.shape:
        raise ShapeError("estimate and ground truth must have equal lengths")
    denom = float(np.sum(h**2))
    if denom == 0.0:
        raise DomainError("ground truth has zero norm")
    return float(10.0 * np.log10(np.sum((h_hat - h) ** 2) / denom))
