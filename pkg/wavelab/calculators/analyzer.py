"""
Representation Analyzer
=======================

Measurements on effective channels and single-path responses:

* tap sparsity per row of H_d
* pulse profiles for fractional delay / Doppler (peak fit, -3 dB width,
  secondary-lobe spacing) and two shape tests: Dirichlet-kernel fit and
  energy on the c1 lattice
* phase trajectory fits (linear + quadratic)
* closed-form resolutions and overspread checks

A pulse profile is the received magnitude, in domain d, of a unit pilot
impulse at the centre of the grid through one unit-gain path.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path as FilePath
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.optimize
import scipy.signal

from wavelab.calculators.base import dirichlet
from wavelab.calculators.channel import LtvChannel, Path, single_path_response, spread_factor
from wavelab.errors import MultiPath, PreconditionError
from wavelab.frame import doppler_bin_width
from wavelab.schemas.frame_schemas import Domain, ValidatedConfig

logger = logging.getLogger(__name__)

SIGNIFICANT_LEVEL = 1e-6


# ============================================================================
# SPARSITY
# ============================================================================

def tap_sparsity(H_d: np.ndarray, rel_threshold: float = SIGNIFICANT_LEVEL) -> Tuple[List[int], float]:
    """Significant entries per row and sparsity index 1 - mean(count)/n."""
    mag = np.abs(np.asarray(H_d))
    peak = mag.max()
    if peak == 0:
        return [0] * mag.shape[0], 1.0
    counts = (mag > rel_threshold * peak).sum(axis=1)
    return [int(c) for c in counts], float(1.0 - counts.mean() / mag.shape[1])


# ============================================================================
# PULSE PROFILES
# ============================================================================

@dataclass(frozen=True, eq=False)
class PulseProfile:
    domain: Domain
    magnitudes: np.ndarray
    shape: Tuple[int, ...]
    pilot_index: int
    peak_index: float
    mainlobe_width: int
    secondary_spacing: Optional[int]
    lattice_spacing: Optional[int] = None
    frac_delay: float = 0.0
    frac_doppler: float = 0.0

    def __post_init__(self):
        if np.any(self.magnitudes < 0):
            raise ValueError("magnitudes must be non-negative")

    @property
    def size(self) -> int:
        return int(self.magnitudes.size)


def _pilot_center(cfg: ValidatedConfig, d: Domain) -> int:
    if d == Domain.DELAY_DOPPLER:
        return (cfg.M // 2) * cfg.N + cfg.N // 2
    return (cfg.N // 2) * cfg.M + cfg.M // 2


def _signed_offset(index: np.ndarray, origin: float, size: int) -> np.ndarray:
    """Circular offset of ``index`` from ``origin`` mapped to (-size/2, size/2]."""
    return (np.asarray(index, dtype=float) - origin + size / 2.0) % size - size / 2.0


def _parabolic_peak(mag: np.ndarray, k: int) -> float:
    """Quadratic interpolation around bin k (sub-bin precision)."""
    n = mag.size
    a, b, c = mag[(k - 1) % n], mag[k], mag[(k + 1) % n]
    den = a - 2.0 * b + c
    if den == 0:
        return float(k)
    return float(k + 0.5 * (a - c) / den)


def _mainlobe_width(mag: np.ndarray, k: int) -> int:
    level = mag[k] / np.sqrt(2.0)
    n, width = mag.size, 1
    for step in (1, -1):
        j = k + step
        while mag[j % n] >= level and width < n:
            width += 1
            j += step
    return width


def _secondary_spacing(mag: np.ndarray, k: int) -> Optional[int]:
    # tile so that peaks at the array ends are found
    n = mag.size
    tiled = np.concatenate([mag, mag, mag])
    peaks, _ = scipy.signal.find_peaks(tiled, plateau_size=1)
    peaks = np.unique(peaks[(peaks >= n) & (peaks < 2 * n)] - n)
    candidates = [p for p in peaks if p != k and mag[p] > SIGNIFICANT_LEVEL * mag[k]]
    if not candidates:
        return None
    best = max(candidates, key=lambda p: mag[p])
    return int(abs(_signed_offset(best, k, n)))


def pulse_response(
    cfg: ValidatedConfig,
    d: Domain,
    frac_delay: float,
    frac_doppler: float,
    delay_int: int = 0,
    doppler_int: int = 0,
) -> PulseProfile:
    """Received magnitude profile of a centred pilot through one path."""
    if abs(frac_delay) >= 1 or abs(frac_doppler) >= 1:
        raise PreconditionError("fractional parts must lie in (-1, 1)")
    delay = delay_int + frac_delay
    if delay < 0:
        raise PreconditionError(f"total delay must be non-negative, got {delay}")
    center = _pilot_center(cfg, d)
    r = single_path_response(Path(1.0 + 0j, float(delay), float(doppler_int + frac_doppler)), cfg, d, center)
    mag = np.abs(r)
    k = int(np.argmax(mag))
    lattice = None
    if d in (Domain.AFFINE, Domain.FRESNEL) and cfg.c1 is not None:
        c1 = cfg.c1 if d == Domain.AFFINE else 1.0 / (2 * cfg.chirp_len)
        lattice = max(int(round(2 * cfg.chirp_len * c1)), 1)
    shape = (cfg.M, cfg.N) if d == Domain.DELAY_DOPPLER else (cfg.N, cfg.M)
    return PulseProfile(
        domain=d,
        magnitudes=mag,
        shape=shape,
        pilot_index=center,
        peak_index=_parabolic_peak(mag, k),
        mainlobe_width=_mainlobe_width(mag, k),
        secondary_spacing=_secondary_spacing(mag, k),
        lattice_spacing=lattice,
        frac_delay=frac_delay,
        frac_doppler=frac_doppler,
    )


def kernel_shape_deviation(profile: PulseProfile, kernel_len: Optional[int] = None) -> float:
    """Max |profile - Dirichlet kernel| at the best sub-bin shift.

    A pure fractional shift of an on-grid pulse gives ~0; any other
    spreading mechanism leaves a visible residual.
    """
    mag = profile.magnitudes
    n = kernel_len or mag.size
    k = int(np.argmax(mag))
    bins = np.arange(mag.size)

    def residual(shift: float) -> np.ndarray:
        return mag - dirichlet(_signed_offset(bins, k + shift, mag.size), n)

    fit = scipy.optimize.minimize_scalar(
        lambda s: float(np.sum(residual(s) ** 2)), bounds=(-1.0, 1.0), method="bounded", options={"xatol": 1e-12}
    )
    return float(np.max(np.abs(residual(fit.x))))


def lattice_energy_fraction(profile: PulseProfile, spacing: Optional[int] = None) -> float:
    """Share of energy on bins k_peak + j*spacing (circular offsets within half the grid)."""
    spacing = spacing or profile.lattice_spacing
    if not spacing:
        raise PreconditionError("lattice spacing undefined for this profile")
    energy = profile.magnitudes ** 2
    k = int(np.argmax(profile.magnitudes))
    offsets = np.rint(_signed_offset(np.arange(energy.size), k, energy.size)).astype(int)
    on_lattice = offsets % spacing == 0
    return float(energy[on_lattice].sum() / energy.sum())


# ============================================================================
# PHASE
# ============================================================================

@dataclass(frozen=True)
class PhaseStats:
    linear: float
    quadratic: float
    residual: float
    linear_residual: float
    samples: int


def _fit(x: np.ndarray, phase: np.ndarray) -> PhaseStats:
    if x.size < 3:
        raise PreconditionError("phase fit needs at least three samples")
    quad = np.polyfit(x, phase, 2)
    lin = np.polyfit(x, phase, 1)
    res_q = float(np.sqrt(np.mean((np.polyval(quad, x) - phase) ** 2)))
    res_l = float(np.sqrt(np.mean((np.polyval(lin, x) - phase) ** 2)))
    return PhaseStats(linear=float(quad[1]), quadratic=float(quad[0]), residual=res_q, linear_residual=res_l, samples=x.size)


def phase_variation(H_d: np.ndarray, d: Domain, cfg: ValidatedConfig) -> PhaseStats:
    """Fit the phase of the dominant tap trajectory to a + b*x + c*x^2.

    Delay-Doppler matrices are read along the delay axis at Doppler row 0
    (rows whose input does not wrap around the delay axis); other domains
    along the row index.
    """
    H_d = np.asarray(H_d)
    mag = np.abs(H_d)
    peak = mag.max()
    if peak == 0:
        raise PreconditionError("phase of an all-zero channel is undefined")
    significant = mag > SIGNIFICANT_LEVEL * peak
    if np.any(significant.sum(axis=1) > 1):
        raise MultiPath("phase trajectory is defined for single-path channels only")
    rows = np.flatnonzero(significant.any(axis=1))
    cols = np.argmax(mag[rows], axis=1)

    if d == Domain.DELAY_DOPPLER:
        N = cfg.N
        keep = (rows % N == 0) & (cols // N <= rows // N)
        rows, cols = rows[keep], cols[keep]
        x = (rows // N).astype(float)
    else:
        x = rows.astype(float)
    phase = np.unwrap(np.angle(H_d[rows, cols]))
    return _fit(x, phase)


# ============================================================================
# RESOLUTION AND OVERSPREAD
# ============================================================================

def resolution_report(cfg: ValidatedConfig) -> Dict:
    """Closed-form delay and Doppler resolution per domain."""
    dd = doppler_bin_width(cfg, Domain.DELAY_DOPPLER)
    freq = doppler_bin_width(cfg, Domain.FREQUENCY)
    doppler = {Domain.FREQUENCY.value: float(freq), Domain.DELAY_DOPPLER.value: float(dd)}
    if cfg.affine_defined:
        doppler[Domain.AFFINE.value] = float(doppler_bin_width(cfg, Domain.AFFINE))
    ratio = Fraction(freq) / Fraction(dd)
    return {
        "delay_res_s": 1.0 / (cfg.M * cfg.delta_f),
        "doppler_res_hz": doppler,
        "ratio": int(ratio),
    }


def overspread_report(ch: LtvChannel, cfg: ValidatedConfig) -> Dict:
    """Spread factor plus delay-axis wrap checks for the DD and affine grids."""
    paths = ch.all_paths
    l_max = int(math.ceil(max(p.delay for p in paths)))
    alpha = int(math.ceil(max(abs(p.doppler) for p in paths) / cfg.N))
    factor = spread_factor(ch, cfg)
    report = {
        "spread_factor": factor,
        "overspread": factor > 1.0,
        "dd_delay_wrap": l_max >= cfg.M,
        "affine_wrap": (2 * alpha + 1) * (l_max + 1) > cfg.chirp_len,
        "delay_max_bins": l_max,
        "alpha_max_bins": alpha,
    }
    if report["dd_delay_wrap"] or report["affine_wrap"]:
        logger.warning("channel wraps the delay axis (DD wrap=%s, affine wrap=%s)",
                       report["dd_delay_wrap"], report["affine_wrap"])
    return report


# ============================================================================
# EXPORT
# ============================================================================

def profile_frame(profile: PulseProfile) -> pd.DataFrame:
    mag = profile.magnitudes
    with np.errstate(divide="ignore"):
        mag_db = 20.0 * np.log10(mag / mag.max())
    return pd.DataFrame(
        {
            "bin": np.arange(mag.size),
            "offset": _signed_offset(np.arange(mag.size), profile.pilot_index, mag.size).astype(int),
            "magnitude": mag,
            "magnitude_db": mag_db,
        }
    )


def export_profile_csv(profile: PulseProfile, path: FilePath) -> FilePath:
    path = FilePath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    profile_frame(profile).to_csv(path, index=False)
    return path
