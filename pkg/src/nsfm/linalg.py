"""Dense real/complex linear-algebra primitives.

Everything here is a pure function on numpy arrays: complex matrices are
``complex128``, real matrices and vectors are ``float64``, all row-major.
Vectorisation (:func:`vec`) stacks columns, matching the identity
``vec(B X C) = (C^T kron B) vec(X)`` used to assemble measurement matrices.
"""

import numpy as np
import scipy.linalg

from .errors import RankError, ShapeError

# Refuse Kronecker results above this element count (2^26 complex doubles = 1 GiB).
KRON_MAX_ELEMENTS = 1 << 26

# One-shot diagonal jitter for pinv_wide, relative to trace(A A^T)/rows.
_PINV_JITTER = 1e-12


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.size == 0 or b.size == 0:
        raise ShapeError("kron expects two non-empty matrices")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows * cols > KRON_MAX_ELEMENTS:
        raise ShapeError(
            f"kron result {rows}x{cols} exceeds the {KRON_MAX_ELEMENTS}-element cap"
        )
    return np.kron(a, b)


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix, entry (j, k) = exp(-2*pi*i*j*k/n) / sqrt(n)."""
    if n < 1:
        raise ShapeError("dft_matrix requires n >= 1")
    j = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)


def hadamard(n: int) -> np.ndarray:
    """Normalized Hadamard matrix of Sylvester order (n a power of two).

    Columns are orthonormal: H^T H = I_n.
    """
    if n < 1 or (n & (n - 1)) != 0:
        raise ShapeError(f"hadamard order must be a power of two, got {n}")
    h = np.ones((1, 1))
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h / np.sqrt(n)


def pinv_wide(a: np.ndarray) -> np.ndarray:
    """Pseudo-inverse A^T (A A^T)^-1 of a full-row-rank wide matrix.

    Uses a Cholesky solve of the Gram matrix; if factorization fails, a
    single diagonal jitter of 1e-12 * trace(A A^T)/rows is added before
    retrying, after which failure raises :class:`RankError`.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError("pinv_wide expects a matrix")
    m, n = a.shape
    if m > n:
        raise ShapeError(f"pinv_wide expects rows <= cols, got {m}x{n}")
    gram = a @ a.T
    try:
        factor = scipy.linalg.cho_factor(gram)
    except np.linalg.LinAlgError:
        gram = gram + np.eye(m) * (_PINV_JITTER * np.trace(gram) / m)
        try:
            factor = scipy.linalg.cho_factor(gram)
        except np.linalg.LinAlgError as exc:
            raise RankError(f"{m}x{n} matrix is numerically row-rank deficient") from exc
    return scipy.linalg.cho_solve(factor, a).T


def realify(a: np.ndarray) -> np.ndarray:
    """Real 2r x 2c block form [[Re, -Im], [Im, Re]] of a complex matrix."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ShapeError("realify expects a matrix")
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def complex_to_real_vec(v: np.ndarray) -> np.ndarray:
    """Stack [Re(v); Im(v)] into a real vector of twice the length."""
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 1:
        raise ShapeError("complex_to_real_vec expects a vector")
    return np.concatenate([v.real, v.imag])


def real_to_complex_vec(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`complex_to_real_vec`; requires even length."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError("real_to_complex_vec expects a vector")
    if v.size % 2 != 0:
        raise ShapeError(f"real vector length {v.size} is odd")
    half = v.size // 2
    return v[:half] + 1j * v[half:]


def vec(x: np.ndarray) -> np.ndarray:
    """Column-major stacking of a matrix into a vector."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ShapeError("vec expects a matrix")
    return x.flatten(order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size != rows * cols:
        raise ShapeError(f"unvec expects a vector of length {rows * cols}")
    return v.reshape((rows, cols), order="F")
