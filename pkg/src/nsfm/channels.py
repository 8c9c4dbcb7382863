"""Synthetic clustered sparse MIMO channel datasets.

Channels are sums of plane-wave rays grouped into angular clusters over
half-wavelength uniform linear arrays at both ends, which makes them sparse
under DFT angular transforms.  Datasets are normalized globally so the mean
per-entry power over the whole dataset is one, then split and persisted in a
little-endian binary format (complex64 payload).
"""

import hashlib
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, FormatError, ShapeError
from .linalg import complex_to_real_vec, unvec, vec
from .rng import derive_rng, make_rng

DATASET_MAGIC = b"NSFM"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

# Cluster center angles are drawn uniformly from this sector (degrees).
_SECTOR_DEG = 60.0


@dataclass(frozen=True)
class ClusterChannelConfig:
    """Geometry and randomness of the clustered channel generator."""

    nr: int = 16
    nt: int = 8
    num_clusters: int = 3
    rays_per_cluster: int = 10
    angular_spread_deg: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.nr < 1 or self.nt < 1:
            raise ShapeError("antenna counts must be >= 1")
        if self.num_clusters < 1 or self.rays_per_cluster < 1:
            raise ShapeError("cluster and ray counts must be >= 1")
        if not 0.0 < self.angular_spread_deg <= 30.0:
            raise ShapeError("angular_spread_deg must lie in (0, 30]")


@dataclass
class ChannelDataset:
    """Stack of channel matrices with an optional train/test partition.

    ``samples`` has shape (count, nr, nt); the first ``train_count`` entries
    are the training split.  ``config`` is None for datasets loaded from
    disk, whose file format does not carry generator settings.
    """

    samples: np.ndarray
    train_count: int
    test_count: int
    config: ClusterChannelConfig | None = field(default=None)

    def __post_init__(self):
        if self.samples.ndim != 3:
            raise ShapeError("samples must have shape (count, nr, nt)")
        if self.train_count + self.test_count != len(self.samples):
            raise ShapeError("train_count + test_count must equal the sample count")

    def __len__(self):
        return len(self.samples)

    @property
    def train(self) -> np.ndarray:
        return self.samples[: self.train_count]

    @property
    def test(self) -> np.ndarray:
        return self.samples[self.train_count :]


def _steering(n: int, angles_rad: np.ndarray) -> np.ndarray:
    """ULA array response, half-wavelength spacing; shape (n, len(angles))."""
    return np.exp(1j * np.pi * np.outer(np.arange(n), np.sin(angles_rad)))


def generate_cluster_channel(config: ClusterChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw one channel matrix H of shape (nr, nt).

    H = sum over rays of g * a_r(theta) a_t(phi)^H with cluster centers
    uniform in +/-60 deg, Gaussian ray offsets of std angular_spread_deg,
    and ray gains CN(0, 1/num_rays).  No per-sample normalization.
    """
    c, r = config.num_clusters, config.rays_per_cluster
    centers_tx = rng.uniform(-_SECTOR_DEG, _SECTOR_DEG, size=c)
    centers_rx = rng.uniform(-_SECTOR_DEG, _SECTOR_DEG, size=c)
    offsets_tx = rng.normal(0.0, config.angular_spread_deg, size=(c, r))
    offsets_rx = rng.normal(0.0, config.angular_spread_deg, size=(c, r))
    phi = np.deg2rad(centers_tx[:, None] + offsets_tx).ravel()
    theta = np.deg2rad(centers_rx[:, None] + offsets_rx).ravel()
    n_rays = c * r
    gains = (rng.normal(size=n_rays) + 1j * rng.normal(size=n_rays)) / np.sqrt(2 * n_rays)
    a_r = _steering(config.nr, theta)
    a_t = _steering(config.nt, phi)
    return (a_r * gains) @ a_t.conj().T


def generate_dataset(config: ClusterChannelConfig, count: int) -> ChannelDataset:
    """Generate ``count`` independent samples, one derived stream per sample."""
    if count < 1:
        raise ShapeError("dataset needs at least one sample")
    samples = np.empty((count, config.nr, config.nt), dtype=np.complex128)
    for i in range(count):
        samples[i] = generate_cluster_channel(config, derive_rng(config.seed, i))
    return ChannelDataset(samples=samples, train_count=count, test_count=0, config=config)


def normalize_dataset(ds: ChannelDataset) -> ChannelDataset:
    """Scale all samples by one global constant so mean |H_ij|^2 = 1."""
    power = np.mean(np.abs(ds.samples) ** 2)
    if power == 0.0:
        raise DataError("cannot normalize an all-zero dataset")
    return replace(ds, samples=ds.samples / np.sqrt(power))


def to_angular(h: np.ndarray, a_t: np.ndarray, a_r: np.ndarray) -> np.ndarray:
    """Angular-domain vector vec(A_R^H H A_T) of a channel matrix."""
    h = np.asarray(h)
    if h.ndim != 2:
        raise ShapeError("channel must be a matrix")
    nr, nt = h.shape
    if a_r.shape != (nr, nr) or a_t.shape != (nt, nt):
        raise ShapeError("transform dimensions do not match the channel")
    return vec(a_r.conj().T @ h @ a_t)


def from_angular(h_ad: np.ndarray, a_t: np.ndarray, a_r: np.ndarray) -> np.ndarray:
    """Invert :func:`to_angular`: H = A_R unvec(h_ad) A_T^H."""
    nr, nt = a_r.shape[0], a_t.shape[0]
    return a_r @ unvec(h_ad, nr, nt) @ a_t.conj().T


def channel_to_real(h: np.ndarray, a_t: np.ndarray, a_r: np.ndarray) -> np.ndarray:
    """Realified angular-domain vector of length 2*nr*nt (the estimation space)."""
    return complex_to_real_vec(to_angular(h, a_t, a_r))


def real_to_channel(v: np.ndarray, a_t: np.ndarray, a_r: np.ndarray) -> np.ndarray:
    """Invert :func:`channel_to_real` back to an (nr, nt) channel matrix."""
    from .linalg import real_to_complex_vec

    return from_angular(real_to_complex_vec(v), a_t, a_r)


def split_dataset(ds: ChannelDataset, train_fraction: float, seed: int) -> ChannelDataset:
    """Deterministic shuffled split; train gets floor(fraction * total)."""
    if not 0.0 < train_fraction < 1.0:
        raise ShapeError("train_fraction must lie strictly between 0 and 1")
    total = len(ds)
    train = int(np.floor(train_fraction * total))
    test = total - train
    if train == 0 or test == 0:
        raise ShapeError(f"split of {total} samples at {train_fraction} leaves an empty side")
    perm = make_rng(seed).permutation(total)
    return replace(ds, samples=ds.samples[perm], train_count=train, test_count=test)


def save_dataset(ds: ChannelDataset, path) -> None:
    """Write the binary dataset format (complex64 payload, little-endian).

    Values outside float32 range are quantized on write; a dataset that has
    been through one save/load cycle round-trips exactly.
    """
    count, nr, nt = ds.samples.shape
    payload = np.ascontiguousarray(ds.samples.astype(np.complex64))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, count, nr, nt))
        fh.write(payload.tobytes())


def load_dataset(path) -> ChannelDataset:
    """Read a dataset written by :func:`save_dataset`.

    The partition is not stored on disk, so the result is all-train until
    :func:`split_dataset` is applied.
    """
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FormatError("truncated dataset header", offset=len(header))
        magic, version, count, nr, nt = _HEADER.unpack(header)
        if magic != DATASET_MAGIC:
            raise FormatError(f"bad magic {magic!r}", offset=0)
        if version != DATASET_VERSION:
            raise FormatError(f"unsupported dataset version {version}", offset=4)
        expected = count * nr * nt * 8
        payload = fh.read(expected + 1)
        if len(payload) != expected:
            raise FormatError(
                f"payload length {len(payload)} != expected {expected} bytes",
                offset=_HEADER.size + min(len(payload), expected),
            )
    samples = np.frombuffer(payload, dtype="<c8").reshape(count, nr, nt)
    return ChannelDataset(
        samples=samples.astype(np.complex128), train_count=count, test_count=0
    )


def dataset_hash(ds: ChannelDataset) -> int:
    """64-bit digest of the dataset's on-disk payload bytes."""
    data = np.ascontiguousarray(ds.samples.astype(np.complex64)).tobytes()
    digest = hashlib.blake2b(data, digest_size=8).digest()
    return int.from_bytes(digest, "little")
