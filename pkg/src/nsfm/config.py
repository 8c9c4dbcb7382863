"""Experiment configuration and its flat ``key = value`` file format.

Config files are INI-style text with section headers; every key is typed
and known ahead of time, and unknown sections or keys are errors so typos
cannot silently fall back to defaults.  Lists are comma separated.
"""

import configparser
import io
from dataclasses import dataclass, field

from .channels import ClusterChannelConfig
from .errors import ConfigError
from .flow import TrainConfig


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a benchmark run needs, with desk-scale defaults."""

    channel: ClusterChannelConfig = ClusterChannelConfig(nr=16, nt=8, seed=101)
    samples: int = 5000
    train_fraction: float = 0.8
    np_pilots: int = 5  # anchor pilot count for the SNR and budget sweeps
    np_list: tuple = (2, 4, 6, 8)
    snr_db: float = 10.0  # anchor SNR for the density and budget sweeps
    snr_db_list: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    k_steps: int = 50
    rho: float = 1.5
    budget_ms_list: tuple = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
    correction: str = "adaptive"
    final_hard_projection: bool = False
    hidden_dims: tuple = (512, 512, 512)
    time_embed_dim: int = 64
    train: TrainConfig = field(default_factory=TrainConfig)
    trials: int = 200
    seed: int = 2024
    out_dir: str = "runs/default"

    def __post_init__(self):
        if not self.np_list or not self.snr_db_list or not self.budget_ms_list:
            raise ConfigError("sweep lists must be non-empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.samples < 2:
            raise ConfigError("samples must be >= 2")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if self.rho < 1.0:
            raise ConfigError("rho must be >= 1")
        if self.k_steps < 1:
            raise ConfigError("k_steps must be >= 1")
        if self.correction not in ("adaptive", "hard"):
            raise ConfigError(f"unknown correction mode {self.correction!r}")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(","))


def _parse_float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


# section -> key -> (target field path, parser)
_SCHEMA = {
    "dataset": {
        "nr": ("channel.nr", int),
        "nt": ("channel.nt", int),
        "num_clusters": ("channel.num_clusters", int),
        "rays_per_cluster": ("channel.rays_per_cluster", int),
        "angular_spread_deg": ("channel.angular_spread_deg", float),
        "seed": ("channel.seed", int),
        "samples": ("samples", int),
        "train_fraction": ("train_fraction", float),
    },
    "pilots": {
        "np_pilots": ("np_pilots", int),
        "np_list": ("np_list", _parse_int_list),
    },
    "noise": {
        "snr_db": ("snr_db", float),
        "snr_db_list": ("snr_db_list", _parse_float_list),
    },
    "schedule": {
        "k_steps": ("k_steps", int),
        "rho": ("rho", float),
        "budget_ms_list": ("budget_ms_list", _parse_float_list),
    },
    "estimator": {
        "correction": ("correction", str),
        "final_hard_projection": ("final_hard_projection", _parse_bool),
    },
    "train": {
        "learning_rate": ("train.learning_rate", float),
        "batch_size": ("train.batch_size", int),
        "epochs": ("train.epochs", int),
        "seed": ("train.seed", int),
        "hidden_dims": ("hidden_dims", _parse_int_list),
        "time_embed_dim": ("time_embed_dim", int),
    },
    "run": {
        "trials": ("trials", int),
        "seed": ("seed", int),
        "out_dir": ("out_dir", str),
    },
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text, applying defaults for anything unspecified."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            target, convert = _SCHEMA[section][key]
            try:
                values[target] = convert(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc

    channel_kwargs = {
        k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("channel.")
    }
    train_kwargs = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("train.")}
    top = {k: v for k, v in values.items() if "." not in k}
    defaults = ExperimentConfig()
    try:
        channel = ClusterChannelConfig(
            **{**_as_dict(defaults.channel), **channel_kwargs}
        )
        train = TrainConfig(**{**_as_dict(defaults.train), **train_kwargs})
        return ExperimentConfig(channel=channel, train=train, **top)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _as_dict(obj) -> dict:
    return {name: getattr(obj, name) for name in obj.__dataclass_fields__}


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_text(cfg: ExperimentConfig) -> str:
    """Serialize a config in the same format :func:`parse_config` reads."""

    def fmt(value):
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, tuple):
            return ", ".join(str(v) for v in value)
        return str(value)

    out = io.StringIO()
    for section, keys in _SCHEMA.items():
        out.write(f"[{section}]\n")
        for key, (target, _) in keys.items():
            obj = cfg
            for part in target.split("."):
                obj = getattr(obj, part)
            out.write(f"{key} = {fmt(obj)}\n")
        out.write("\n")
    return out.getvalue()
