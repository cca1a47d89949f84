"""
Equalization
============

One-tap, full MMSE and banded MMSE equalizers with flop accounting.

Flop model (version 1, complex arithmetic counted as real operations):

    full MMSE    8 n^3        dense Gaussian elimination
    banded MMSE  8 n b^2      banded LU, b clamped to [1, n]
    one-tap      8 n          one complex multiply-divide per bin

Reductions are reported in dB against full MMSE at the same n.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from wavelab import config
from wavelab.calculators.transforms import DomainSymbols
from wavelab.errors import LengthMismatch, PreconditionError, SingularSystem

logger = logging.getLogger(__name__)

FLOP_MODEL_VERSION = "1"
METHODS = ("mmse", "banded", "one_tap")

# Relative pivot size below which a noiseless system is treated as singular
SINGULAR_PIVOT = 1e-12


@dataclass(frozen=True)
class FlopReport:
    method: str
    n: int
    band: Optional[int]
    flops: float
    reference_flops: float

    @property
    def reduction_db(self) -> float:
        return float(10.0 * np.log10(self.reference_flops / self.flops))

    def to_record(self) -> Dict:
        return {
            "method": self.method,
            "n": self.n,
            "band": self.band,
            "flops": self.flops,
            "reference_flops": self.reference_flops,
            "reduction_db": self.reduction_db,
            "model_version": FLOP_MODEL_VERSION,
        }


@dataclass(frozen=True, eq=False)
class EqualizerOutput:
    symbols: np.ndarray
    flops: FlopReport
    warnings: Tuple[str, ...] = field(default_factory=tuple)
    truncated_mass: float = 0.0


def flop_report(method: str, n: int, b: Optional[int] = None) -> FlopReport:
    """Model flop count of one equalization of dimension ``n``."""
    if n < 1:
        raise PreconditionError(f"dimension must be >= 1, got {n}")
    reference = 8.0 * n ** 3
    if method == "mmse":
        flops, band = reference, None
    elif method == "banded":
        band = min(max(int(b or 0), 1), n)
        flops = 8.0 * n * band ** 2
    elif method == "one_tap":
        flops, band = 8.0 * n, None
    else:
        raise PreconditionError(f"unknown equalizer {method!r}; expected one of {METHODS}")
    return FlopReport(method=method, n=n, band=band, flops=flops, reference_flops=reference)


def _vector(y: Union[DomainSymbols, np.ndarray]) -> np.ndarray:
    if isinstance(y, DomainSymbols):
        return y.data
    return np.asarray(y, dtype=complex).reshape(-1)


# ============================================================================
# ONE-TAP
# ============================================================================

def equalize_one_tap(
    y: Union[DomainSymbols, np.ndarray], H: Sequence[complex], noise_var: float = 0.0
) -> EqualizerOutput:
    """Per-bin MMSE conj(H) y / (|H|^2 + noise_var).

    A response shorter than ``y`` is repeated across blocks.  Bins with a
    zero response and zero noise variance return 0.
    """
    y = _vector(y)
    H = np.asarray(H, dtype=complex).reshape(-1)
    if y.size % H.size:
        raise LengthMismatch(f"{H.size}-bin response does not tile {y.size} symbols")
    H = np.tile(H, y.size // H.size)
    den = np.abs(H) ** 2 + noise_var
    out = np.zeros(y.size, dtype=complex)
    nz = den > 0
    out[nz] = np.conj(H[nz]) * y[nz] / den[nz]
    return EqualizerOutput(symbols=out, flops=flop_report("one_tap", y.size))


# ============================================================================
# FULL MMSE
# ============================================================================

def _check_square(y: np.ndarray, H_d: np.ndarray) -> None:
    if H_d.ndim != 2 or H_d.shape[0] != H_d.shape[1]:
        raise LengthMismatch(f"effective channel must be square, got {H_d.shape}")
    if H_d.shape[0] != y.size:
        raise LengthMismatch(f"{H_d.shape[0]}x{H_d.shape[0]} channel does not match {y.size} symbols")


def equalize_mmse(
    y: Union[DomainSymbols, np.ndarray], H_d: np.ndarray, noise_var: float = 0.0
) -> EqualizerOutput:
    """(H^H H + noise_var I)^-1 H^H y by dense LU; zero noise solves H s = y."""
    y = _vector(y)
    H_d = np.asarray(H_d, dtype=complex)
    _check_square(y, H_d)
    report = flop_report("mmse", y.size)
    if noise_var == 0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(H_d)
        pivots = np.abs(np.diag(lu))
        if pivots.max() == 0 or pivots.min() <= SINGULAR_PIVOT * pivots.max():
            raise SingularSystem("noiseless MMSE with a rank-deficient effective channel")
        return EqualizerOutput(symbols=scipy.linalg.lu_solve((lu, piv), y), flops=report)

    gram = H_d.conj().T @ H_d + noise_var * np.eye(y.size)
    s = scipy.linalg.solve(gram, H_d.conj().T @ y, assume_a="pos")
    return EqualizerOutput(symbols=s, flops=report)


# ============================================================================
# BANDED MMSE
# ============================================================================

def circular_offsets(n: int) -> np.ndarray:
    """Circular distance |i - j| mod n for every matrix entry."""
    idx = np.arange(n)
    diff = (idx[:, None] - idx[None, :]) % n
    return np.minimum(diff, n - diff)


def measure_band(H_d: np.ndarray, rel_threshold: float = 1e-10) -> int:
    """Smallest circular band holding every entry above ``rel_threshold * max|H|``."""
    mag = np.abs(np.asarray(H_d))
    if mag.max() == 0:
        return 0
    significant = mag > rel_threshold * mag.max()
    return int(circular_offsets(mag.shape[0])[significant].max())


def equalize_mmse_banded(
    y: Union[DomainSymbols, np.ndarray], H_d: np.ndarray, noise_var: float, band: int
) -> EqualizerOutput:
    """MMSE on the circular band of ``H_d`` with a sparse LU solve.

    Entries further than ``band`` from the diagonal (circularly) are
    dropped; their Frobenius share is reported as ``truncated_mass``.
    """
    y = _vector(y)
    H_d = np.asarray(H_d, dtype=complex)
    _check_square(y, H_d)
    if band < 0:
        raise PreconditionError(f"band must be >= 0, got {band}")
    n = y.size
    inside = circular_offsets(n) <= band
    kept = np.where(inside, H_d, 0)
    total = np.linalg.norm(H_d)
    truncated = float(np.linalg.norm(H_d - kept) / total) if total > 0 else 0.0

    notes = []
    if truncated > config.BAND_TRUNCATION_LIMIT:
        notes.append("BandTooSmall")
        logger.warning("band %d drops %.2f%% of the channel's Frobenius norm", band, 100 * truncated)

    hs = sp.csc_matrix(kept)
    try:
        if noise_var == 0:
            s = scipy.sparse.linalg.splu(hs).solve(y)
        else:
            gram = (hs.conj().T @ hs + noise_var * sp.identity(n, format="csc")).tocsc()
            s = scipy.sparse.linalg.splu(gram).solve(hs.conj().T @ y)
    except RuntimeError as exc:
        raise SingularSystem(f"banded system is singular: {exc}") from exc
    if not np.all(np.isfinite(s)):
        raise SingularSystem("banded solve produced non-finite symbols")
    return EqualizerOutput(
        symbols=s, flops=flop_report("banded", n, band), warnings=tuple(notes), truncated_mass=truncated
    )
