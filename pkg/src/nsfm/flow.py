"""Flow-matching generative prior over realified angular channel vectors.

A small time-conditioned MLP approximates the velocity field that transports
standard Gaussian noise to the channel distribution along linear
interpolation paths.  The network, its reverse-mode gradients, and the
adaptive-moment optimizer are implemented directly on numpy float32 arrays;
double precision is used only for loss accumulation and at the boundary to
the (float64) estimation code.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .channels import ChannelDataset, channel_to_real, dataset_hash
from .errors import (
    ConfigError,
    DomainError,
    FormatError,
    NumericError,
    ShapeError,
    TrainingDivergedError,
)
from .linalg import dft_matrix
from .rng import make_rng

CHECKPOINT_MAGIC = b"NSCK"
CHECKPOINT_VERSION = 1

_DIVERGENCE_LIMIT = 1e6
_FREQ_MIN, _FREQ_MAX = 1.0, 1000.0


@dataclass
class VelocityNet:
    """MLP velocity field v(h, t); input is [h; time_embed(t)]."""

    input_dim: int
    hidden_dims: tuple
    time_embed_dim: int
    weights: list = field(default_factory=list)  # per layer, (out, in) float32
    biases: list = field(default_factory=list)  # per layer, (out,) float32

    def num_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 60
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")


@dataclass(frozen=True)
class CheckpointMeta:
    """Provenance stored alongside the parameters."""

    dataset_hash: int = 0
    seed: int = 0


def init_velocity_net(
    input_dim: int,
    hidden_dims=(512, 512, 512),
    time_embed_dim: int = 64,
    seed: int = 0,
) -> VelocityNet:
    """He-initialized network; first layer consumes the state plus time features."""
    if input_dim < 1:
        raise ShapeError("input_dim must be >= 1")
    if time_embed_dim < 2 or time_embed_dim % 2 != 0:
        raise ShapeError("time_embed_dim must be even and >= 2")
    rng = make_rng(seed)
    dims = [input_dim + time_embed_dim, *hidden_dims, input_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        weights.append(w.astype(np.float32))
        biases.append(np.zeros(fan_out, dtype=np.float32))
    return VelocityNet(input_dim, tuple(hidden_dims), time_embed_dim, weights, biases)


def time_embed(t: float, dim: int) -> np.ndarray:
    """Sinusoidal features [sin(w_j t), cos(w_j t)], w_j geometric in [1, 1000]."""
    return _time_embed_batch(np.asarray([t], dtype=np.float64), dim)[0]


def _time_embed_batch(ts: np.ndarray, dim: int) -> np.ndarray:
    if dim < 2 or dim % 2 != 0:
        raise ShapeError("time embedding dimension must be even and >= 2")
    if np.any(ts < 0.0) or np.any(ts > 1.0):
        raise DomainError("time values must lie in [0, 1]")
    freqs = np.geomspace(_FREQ_MIN, _FREQ_MAX, dim // 2)
    phases = ts[:, None] * freqs[None, :]
    return np.concatenate([np.sin(phases), np.cos(phases)], axis=1).astype(np.float32)


def _silu(z):
    return z * expit(z)


def _silu_grad(z):
    s = expit(z)
    return s * (1.0 + z * (1.0 - s))


def _forward_batch(net: VelocityNet, x: np.ndarray):
    """Run the MLP on pre-assembled inputs (B, N + embed); returns output and caches."""
    acts = [x]  # input to each linear layer
    pre = []  # pre-activations of hidden layers
    a = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        if i < len(net.weights) - 1:
            pre.append(z)
            a = _silu(z)
            acts.append(a)
        else:
            a = z
    return a, (acts, pre)


def _backward_batch(net: VelocityNet, cache, d_out: np.ndarray):
    """Gradients of all weights/biases given d(loss)/d(output)."""
    acts, pre = cache
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    delta = d_out
    for i in range(len(net.weights) - 1, -1, -1):
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i]) * _silu_grad(pre[i - 1])
    return grads_w, grads_b


def _assemble_input(net: VelocityNet, states: np.ndarray, ts: np.ndarray) -> np.ndarray:
    embed = _time_embed_batch(ts, net.time_embed_dim)
    return np.concatenate([states.astype(np.float32), embed], axis=1)


def forward(net: VelocityNet, h_t: np.ndarray, t: float) -> np.ndarray:
    """Evaluate the velocity field at one state; returns float32 of length N."""
    h_t = np.asarray(h_t)
    if h_t.shape != (net.input_dim,):
        raise ShapeError(f"state must have length {net.input_dim}, got {h_t.shape}")
    x = _assemble_input(net, h_t[None, :], np.asarray([t], dtype=np.float64))
    out, _ = _forward_batch(net, x)
    return out[0]


def interpolate(h0: np.ndarray, h1: np.ndarray, t: float) -> np.ndarray:
    """Linear path (1 - t) h0 + t h1."""
    h0 = np.asarray(h0)
    h1 = np.asarray(h1)
    if h0.shape != h1.shape:
        raise ShapeError("endpoints must have equal shapes")
    return (1.0 - t) * h0 + t * h1


def fm_loss_and_grad(net: VelocityNet, batch):
    """Mean squared velocity error over a batch of (h0, h1, t) triples.

    The regression target is h1 - h0, the time derivative of the linear
    interpolation path; gradients are exact reverse-mode derivatives.
    """
    if len(batch) == 0:
        raise ShapeError("batch must be non-empty")
    h0 = np.stack([np.asarray(b[0], dtype=np.float32) for b in batch])
    h1 = np.stack([np.asarray(b[1], dtype=np.float32) for b in batch])
    ts = np.asarray([b[2] for b in batch], dtype=np.float64)
    if h0.shape[1] != net.input_dim or h1.shape[1] != net.input_dim:
        raise ShapeError(f"batch vectors must have length {net.input_dim}")
    return _loss_and_grad_arrays(net, h0, h1, ts)


def _loss_and_grad_arrays(net: VelocityNet, h0, h1, ts):
    b = h0.shape[0]
    states = interpolate(h0, h1, ts[:, None].astype(np.float32))
    target = h1 - h0
    with np.errstate(over="ignore", invalid="ignore"):  # non-finites rejected below
        out, cache = _forward_batch(net, _assemble_input(net, states, ts))
        residual = out - target
        per_sample = np.sum(residual.astype(np.float64) ** 2, axis=1)
    loss = float(per_sample.mean())
    if not np.isfinite(loss):
        bad = int(np.flatnonzero(~np.isfinite(per_sample))[0])
        raise NumericError("non-finite flow-matching loss", index=bad)
    grads_w, grads_b = _backward_batch(net, cache, (2.0 / b) * residual)
    return loss, (grads_w, grads_b)


class _AdamState:
    """First/second moment accumulators for one parameter list."""

    def __init__(self, params):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step = 0

    def update(self, params, grads, cfg: TrainConfig):
        self.step += 1
        bc1 = 1.0 - cfg.beta1**self.step
        bc2 = 1.0 - cfg.beta2**self.step
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m += (1.0 - cfg.beta1) * (g - m)
            v += (1.0 - cfg.beta2) * (g * g - v)
            p -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)


def training_matrix(dataset: ChannelDataset) -> np.ndarray:
    """Realified angular-domain training vectors, one row per train sample."""
    if dataset.train_count == 0:
        raise ShapeError("dataset has an empty training split")
    nr, nt = dataset.samples.shape[1:]
    a_t, a_r = dft_matrix(nt), dft_matrix(nr)
    rows = [channel_to_real(h, a_t, a_r) for h in dataset.train]
    return np.stack(rows).astype(np.float32)


def train(net: VelocityNet, dataset: ChannelDataset, cfg: TrainConfig, verbose=False):
    """Fit the velocity field on the dataset's training split.

    Each step draws channel targets with replacement from the split,
    Gaussian sources, and per-sample uniform times, then applies one
    adaptive-moment update.  Returns the net and the epoch-mean loss curve.
    """
    vectors = training_matrix(dataset)
    n_train, dim = vectors.shape
    if dim != net.input_dim:
        raise ShapeError(f"network expects dimension {net.input_dim}, dataset has {dim}")
    rng = make_rng(cfg.seed)
    adam_w = _AdamState(net.weights)
    adam_b = _AdamState(net.biases)
    steps_per_epoch = max(1, -(-n_train // cfg.batch_size))
    curve = []
    for epoch in range(cfg.epochs):
        epoch_losses = np.empty(steps_per_epoch)
        for step in range(steps_per_epoch):
            idx = rng.integers(0, n_train, size=cfg.batch_size)
            h1 = vectors[idx]
            h0 = rng.standard_normal((cfg.batch_size, dim)).astype(np.float32)
            ts = rng.random(cfg.batch_size)
            loss, (gw, gb) = _loss_and_grad_arrays(net, h0, h1, ts)
            if not np.isfinite(loss) or loss > _DIVERGENCE_LIMIT:
                raise TrainingDivergedError(
                    f"loss {loss:.3e} at epoch {epoch}", index=epoch * steps_per_epoch + step
                )
            adam_w.update(net.weights, gw, cfg)
            adam_b.update(net.biases, gb, cfg)
            epoch_losses[step] = loss
        curve.append(float(epoch_losses.mean()))
        if verbose and (epoch % 10 == 0 or epoch == cfg.epochs - 1):
            print(f"epoch {epoch:4d}  loss {curve[-1]:.5f}")
    return net, curve


def sample(net: VelocityNet, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Unconditional draw: Euler-integrate the field from Gaussian noise.

    The state is kept in float64; the network sees float32 casts.
    """
    if steps < 1:
        raise ShapeError("steps must be >= 1")
    h = rng.standard_normal(net.input_dim)
    grid = np.arange(steps + 1) / steps
    for k in range(steps):
        v = forward(net, h.astype(np.float32), grid[k])
        h = h + (grid[k + 1] - grid[k]) * v.astype(np.float64)
        if not np.all(np.isfinite(h)):
            raise NumericError("non-finite state during sampling", index=k)
    return h


def save_checkpoint(net: VelocityNet, meta: CheckpointMeta, path) -> None:
    """Write the binary checkpoint format (little-endian, float32 parameters)."""
    layer_dims = [(w.shape[1], w.shape[0]) for w in net.weights]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(layer_dims)))
        for in_dim, out_dim in layer_dims:
            fh.write(struct.pack("<II", in_dim, out_dim))
        fh.write(struct.pack("<I", net.time_embed_dim))
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())
        fh.write(struct.pack("<QQ", meta.dataset_hash, meta.seed))


def load_checkpoint(path):
    """Read a checkpoint; returns (net, meta) with bit-exact parameters."""
    with open(path, "rb") as fh:
        blob = fh.read()
    offset = 0

    def take(fmt):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(blob):
            raise FormatError("truncated checkpoint", offset=offset)
        values = struct.unpack_from(fmt, blob, offset)
        offset += size
        return values

    magic, version, layer_count = take("<4sII")
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    if layer_count < 1:
        raise FormatError("checkpoint has no layers", offset=8)
    dims = [take("<II") for _ in range(layer_count)]
    (time_embed_dim,) = take("<I")
    input_dim = dims[-1][1]
    if dims[0][0] != input_dim + time_embed_dim:
        raise FormatError(
            f"first layer width {dims[0][0]} != state {input_dim} + embed {time_embed_dim}",
            offset=12,
        )
    for (_, out_prev), (in_next, _) in zip(dims[:-1], dims[1:]):
        if in_next != out_prev:
            raise FormatError("layer dimensions do not chain", offset=12)
    weights, biases = [], []
    for in_dim, out_dim in dims:
        n_w, n_b = in_dim * out_dim, out_dim
        if offset + 4 * (n_w + n_b) > len(blob):
            raise FormatError("truncated parameter payload", offset=offset)
        w = np.frombuffer(blob, dtype="<f4", count=n_w, offset=offset).reshape(out_dim, in_dim)
        offset += 4 * n_w
        b = np.frombuffer(blob, dtype="<f4", count=n_b, offset=offset)
        offset += 4 * n_b
        weights.append(w.copy())
        biases.append(b.copy())
    ds_hash, seed = take("<QQ")
    if offset != len(blob):
        raise FormatError("trailing bytes after checkpoint payload", offset=offset)
    hidden = tuple(out for _, out in dims[:-1])
    net = VelocityNet(input_dim, hidden, time_embed_dim, weights, biases)
    return net, CheckpointMeta(dataset_hash=ds_hash, seed=seed)
