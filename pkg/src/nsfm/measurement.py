"""Pilot design and the linear forward model y = A h + n.

The measurement matrix is assembled in the complex angular domain as
(P^T kron I_nr) ((A_T^T)^H kron A_R), realified once, and paired with the
cached wide pseudo-inverse used for range/null-space projections.  With
normalized Hadamard pilots and unitary DFT factors the rows of A are
orthonormal, so A^dagger equals A^T up to rounding.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .linalg import dft_matrix, hadamard, kron, pinv_wide, realify


@dataclass(frozen=True)
class PilotConfig:
    """Pilot budget: np_pilots columns of an nt x nt normalized Hadamard matrix."""

    nt: int
    np_pilots: int

    def __post_init__(self):
        if self.nt < 1 or (self.nt & (self.nt - 1)) != 0:
            raise ShapeError(f"nt must be a power of two, got {self.nt}")
        if not 1 <= self.np_pilots <= self.nt:
            raise ShapeError(f"np_pilots must lie in [1, {self.nt}], got {self.np_pilots}")

    @property
    def density(self) -> float:
        return self.np_pilots / self.nt


@dataclass(frozen=True)
class MeasurementModel:
    """Immutable forward model: A (M x N), its pseudo-inverse, and noise level."""

    a: np.ndarray
    a_pinv: np.ndarray
    sigma_n: float
    snr_db: float
    pilots: np.ndarray
    nr: int
    nt: int
    np_pilots: int

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n_dim(self) -> int:
        return self.a.shape[1]


def build_pilot_matrix(nt: int, np_pilots: int) -> np.ndarray:
    """First np_pilots columns of hadamard(nt), as a complex matrix."""
    cfg = PilotConfig(nt, np_pilots)
    return hadamard(cfg.nt)[:, : cfg.np_pilots].astype(np.complex128)


def sigma_from_snr(snr_db: float, nt: int) -> float:
    """Per-real-component noise std for an SNR defined as nt / (2 sigma^2)."""
    if nt < 1:
        raise ShapeError("nt must be >= 1")
    return float(np.sqrt(nt / (2.0 * 10.0 ** (snr_db / 10.0))))


def build_measurement_matrix(
    pilots: np.ndarray, a_t: np.ndarray, a_r: np.ndarray, snr_db: float
) -> MeasurementModel:
    """Assemble A = realify((P^T kron I)((A_T^T)^H kron A_R)) and cache A^dagger."""
    pilots = np.asarray(pilots, dtype=np.complex128)
    nt, np_pilots = pilots.shape
    nr = a_r.shape[0]
    if a_t.shape != (nt, nt) or a_r.shape != (nr, nr):
        raise ShapeError("transform dimensions do not match the pilot matrix")
    selection = kron(pilots.T, np.eye(nr))
    angular = kron(a_t.conj(), a_r)  # (A_T^T)^H == conj(A_T)
    a = realify(selection @ angular)
    return MeasurementModel(
        a=a,
        a_pinv=pinv_wide(a),
        sigma_n=sigma_from_snr(snr_db, nt),
        snr_db=float(snr_db),
        pilots=pilots,
        nr=nr,
        nt=nt,
        np_pilots=np_pilots,
    )


def make_measurement_model(nr: int, nt: int, np_pilots: int, snr_db: float) -> MeasurementModel:
    """Standard model with Hadamard pilots and DFT angular transforms."""
    return build_measurement_matrix(
        build_pilot_matrix(nt, np_pilots), dft_matrix(nt), dft_matrix(nr), snr_db
    )


def observe(model: MeasurementModel, h: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Noisy pilot observation y = A h + n, n ~ N(0, sigma_n^2 I)."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (model.n_dim,):
        raise ShapeError(f"channel vector must have length {model.n_dim}, got {h.shape}")
    return model.a @ h + model.sigma_n * rng.standard_normal(model.m)


def range_project(model: MeasurementModel, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection A^dagger A v onto the row space of A."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.n_dim,):
        raise ShapeError(f"vector must have length {model.n_dim}, got {v.shape}")
    return model.a_pinv @ (model.a @ v)


def null_project(model: MeasurementModel, v: np.ndarray) -> np.ndarray:
    """Complement projection (I - A^dagger A) v, invisible to the pilots."""
    return np.asarray(v, dtype=np.float64) - range_project(model, v)
