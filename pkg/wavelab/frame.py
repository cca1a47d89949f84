"""
Frame Numerology
================

Validation and canonical numerology shared by every waveform:

* ``validate_config(cfg)`` – cross-field checks, derived quantities.
* ``default_c1(alpha_max, num_chirps)`` – smallest AFDM chirp tilt keeping
  integer delay/Doppler paths apart in the affine domain.
* ``doppler_bin_width(cfg, domain)`` – Doppler resolution per domain, as an
  exact ``Fraction`` so the DD/frequency ratio is the integer N.

Doppler is carried in delay-Doppler bins throughout the package:
physical Doppler ``f_d = kappa * delta_f / N``.
"""

import logging
import math
from fractions import Fraction

from wavelab.errors import (
    BadChirpParams,
    DomainMismatch,
    InvalidDimensions,
    PrefixTooLong,
    TooMuchDoppler,
    UnsupportedCombo,
)
from wavelab.schemas.frame_schemas import (
    CHIRP_WAVEFORMS,
    Domain,
    FrameConfig,
    Permutation,
    PrefixKind,
    ValidatedConfig,
    Waveform,
)

logger = logging.getLogger(__name__)


def default_c1(alpha_max: int, num_chirps: int) -> float:
    """Return c1 = (2*alpha_max + 1) / (2*num_chirps).

    Raises:
        TooMuchDoppler: if num_chirps < 2*alpha_max + 1.
    """
    if alpha_max < 0:
        raise TooMuchDoppler(f"alpha_max must be non-negative, got {alpha_max}")
    if num_chirps < 2 * alpha_max + 1:
        raise TooMuchDoppler(
            f"{num_chirps} chirps cannot separate Doppler up to {alpha_max} bins "
            f"(need at least {2 * alpha_max + 1})"
        )
    return (2 * alpha_max + 1) / (2 * num_chirps)


def fresnel_slope(num_chirps: int) -> float:
    """Fixed OCDM (discrete Fresnel) chirp slope c1 = c2 = 1/(2*N_c)."""
    return 1.0 / (2 * num_chirps)


def validate_config(cfg: FrameConfig) -> ValidatedConfig:
    """Check a raw frame configuration and return the immutable validated form."""
    if cfg.M < 1 or cfg.N < 1:
        raise InvalidDimensions(f"M and N must be >= 1 (got M={cfg.M}, N={cfg.N})")
    if not math.isfinite(cfg.delta_f) or cfg.delta_f <= 0:
        raise InvalidDimensions(f"delta_f must be a positive frequency, got {cfg.delta_f}")
    if cfg.prefix.length < 0:
        raise InvalidDimensions(f"prefix length must be non-negative, got {cfg.prefix.length}")
    if cfg.prefix.length >= cfg.M:
        raise PrefixTooLong(f"prefix length {cfg.prefix.length} must be shorter than M={cfg.M}")
    if (cfg.c1 is not None and cfg.c1 < 0) or (cfg.c1 is not None and not math.isfinite(cfg.c1)):
        raise BadChirpParams(f"c1 must be a non-negative real, got {cfg.c1}")
    if cfg.c2 is not None and not math.isfinite(cfg.c2):
        raise BadChirpParams(f"c2 must be finite, got {cfg.c2}")

    chirp = cfg.waveform in CHIRP_WAVEFORMS
    if cfg.prefix.kind == PrefixKind.CHIRP_PERIODIC and not chirp:
        raise UnsupportedCombo(f"ChirpPeriodic prefix requires AFDM or OCDM, not {cfg.waveform.value}")

    permutation = cfg.permutation
    if cfg.waveform == Waveform.OTFS:
        permutation = Permutation.ROW_COLUMN
    elif permutation == Permutation.ROW_COLUMN:
        raise UnsupportedCombo("RowColumn permutation is only defined for OTFS")

    subband = 1
    if cfg.waveform == Waveform.DFT_S_OFDM:
        subband = cfg.dft_s_subband if cfg.dft_s_subband is not None else cfg.M
        if subband < 1 or subband > cfg.M or cfg.M % subband != 0:
            raise UnsupportedCombo(f"DFT-s-OFDM sub-band a={subband} must divide M={cfg.M}")

    c1, c2 = cfg.c1, cfg.c2
    if cfg.waveform == Waveform.OCDM:
        c1 = c2 = fresnel_slope(cfg.M)
    elif cfg.waveform == Waveform.AFDM:
        if c1 is None:
            c1 = default_c1(cfg.alpha_max, cfg.M)
        if c2 is None:
            c2 = 0.0
    elif c1 is None or c2 is None:
        c1 = c2 = None

    validated = ValidatedConfig(
        waveform=cfg.waveform,
        M=cfg.M,
        N=cfg.N,
        delta_f=float(cfg.delta_f),
        prefix=cfg.prefix,
        c1=c1,
        c2=c2,
        alpha_max=cfg.alpha_max,
        dft_s_subband=subband,
        permutation=permutation,
    )
    logger.debug(
        "validated %s M=%d N=%d frame_len=%d", validated.waveform.value, validated.M, validated.N, validated.frame_len
    )
    return validated


def doppler_bin_width(cfg: ValidatedConfig, d: Domain) -> Fraction:
    """Doppler resolution in Hz for the given domain (exact rational)."""
    delta_f = Fraction(cfg.delta_f)
    if d in (Domain.FREQUENCY, Domain.AFFINE, Domain.FRESNEL):
        return delta_f
    if d == Domain.DELAY_DOPPLER:
        return delta_f / cfg.N
    raise DomainMismatch(f"Doppler resolution is not defined for the {d.value} domain")
