"""
Base functions shared by the waveform calculators.

Unitary DFT helpers, chirp diagonals, the Gray-mapped QPSK mapper/slicer
and reference sequences.  The transform, channel, estimation and analyzer
modules import these helpers and do not redefine them, so the DFT
normalization lives in one place: 1/sqrt(L) in both directions.
"""

import numpy as np
import scipy.fft
import scipy.linalg


def dft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unitary forward DFT along ``axis``."""
    return scipy.fft.fft(x, axis=axis, norm="ortho")


def idft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unitary inverse DFT along ``axis``."""
    return scipy.fft.ifft(x, axis=axis, norm="ortho")


def dft_matrix(n: int) -> np.ndarray:
    """Explicit unitary n-point DFT matrix (oracle use only)."""
    return scipy.linalg.dft(n, scale="sqrtn")


def chirp(c: float, length: int) -> np.ndarray:
    """Chirp diagonal exp(-j*2*pi*c*n^2), n = 0..length-1."""
    n = np.arange(length, dtype=float)
    return np.exp(-2j * np.pi * c * n * n)


def affine_forward(x: np.ndarray, c1: float, c2: float, axis: int = -1) -> np.ndarray:
    """Apply A = diag(chirp c2) . F . diag(chirp c1) along ``axis``."""
    length = x.shape[axis]
    shape = [1] * x.ndim
    shape[axis] = length
    lam1 = chirp(c1, length).reshape(shape)
    lam2 = chirp(c2, length).reshape(shape)
    return lam2 * dft(lam1 * x, axis=axis)


def affine_inverse(s: np.ndarray, c1: float, c2: float, axis: int = -1) -> np.ndarray:
    """Apply A^H = diag(chirp c1)^H . F^H . diag(chirp c2)^H along ``axis``."""
    length = s.shape[axis]
    shape = [1] * s.ndim
    shape[axis] = length
    lam1 = chirp(c1, length).reshape(shape)
    lam2 = chirp(c2, length).reshape(shape)
    return np.conj(lam1) * idft(np.conj(lam2) * s, axis=axis)


def affine_matrix(length: int, c1: float, c2: float) -> np.ndarray:
    """Explicit A = Lambda_c2 F Lambda_c1 (oracle use only)."""
    return chirp(c2, length)[:, None] * dft_matrix(length) * chirp(c1, length)[None, :]


def zadoff_chu(length: int, root: int = 1) -> np.ndarray:
    """Unit-modulus Zadoff-Chu sequence of the given length."""
    n = np.arange(length, dtype=float)
    return np.exp(-1j * np.pi * root * n * (n + (length % 2)) / length)


def dirichlet(x: np.ndarray, n: int) -> np.ndarray:
    """Magnitude of the n-point periodic sinc |sin(pi x) / (n sin(pi x / n))|."""
    x = np.asarray(x, dtype=float)
    den = n * np.sin(np.pi * x / n)
    out = np.ones_like(x)
    nz = np.abs(den) > 1e-12
    out[nz] = np.abs(np.sin(np.pi * x[nz]) / den[nz])
    return out


# ============================================================================
# QPSK (Gray mapped, unit average energy)
# ============================================================================

BITS_PER_SYMBOL = {"QPSK": 2}


def random_bits(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.integers(0, 2, size=count, dtype=np.int8)


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """Map bit pairs (b0, b1) to ((1-2 b0) + j(1-2 b1)) / sqrt(2)."""
    pairs = np.asarray(bits, dtype=float).reshape(-1, 2)
    return ((1.0 - 2.0 * pairs[:, 0]) + 1j * (1.0 - 2.0 * pairs[:, 1])) / np.sqrt(2.0)


def qpsk_slice(symbols: np.ndarray) -> np.ndarray:
    """Hard QPSK decisions back to bits (inverse of ``qpsk_map``)."""
    symbols = np.asarray(symbols)
    bits = np.empty((symbols.size, 2), dtype=np.int8)
    bits[:, 0] = (symbols.real < 0).astype(np.int8)
    bits[:, 1] = (symbols.imag < 0).astype(np.int8)
    return bits.reshape(-1)


def db_to_linear(value_db: float) -> float:
    return float(10.0 ** (value_db / 10.0))
