"""
Linear Time-Variant Channel
===========================

Multipath channel with per-path complex gain, fractional delay (samples)
and fractional Doppler (delay-Doppler bins):

    y[n] = sum_i h_i exp(j 2 pi kappa_i n / (M N)) x_frac(n - l_i) + w[n]

``n`` runs over the transmitted frame including prefixes.  Fractional
delays use a 63-tap Blackman-windowed sinc centred on the delay; frame
edges follow the prefix semantics (circular for cyclic/chirp prefixes,
zero for zero padding).  A channel may be split into time segments with
different path sets (birth-death).

Three equivalent realizations are provided: the direct filter
(``apply_channel``), the impulse-column dense oracle (``channel_matrix``)
and a sparse operator used for NMSE beyond oracle scale.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from wavelab import config
from wavelab.calculators.transforms import (
    DomainSymbols,
    add_prefix,
    from_domain,
    remove_prefix,
    to_domain,
)
from wavelab.errors import LengthMismatch, PreconditionError, TooLarge, UnknownProfile
from wavelab.schemas.frame_schemas import Domain, PrefixKind, ValidatedConfig

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, None]

PROFILE_NAMES = ("TdlUrban", "EVA", "Custom", "Identity")


# ============================================================================
# DATA TYPES
# ============================================================================

@dataclass(frozen=True)
class Path:
    """One multipath component: gain h, delay l (samples), Doppler kappa (DD bins)."""

    gain: complex
    delay: float
    doppler: float = 0.0

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError(f"path delay must be non-negative, got {self.delay}")
        if not np.isfinite(abs(self.gain)):
            raise ValueError("path gain must be finite")


@dataclass(frozen=True)
class Segment:
    start: int
    end: int
    paths: Tuple[Path, ...]


@dataclass(frozen=True)
class LtvChannel:
    """Segmented multipath channel bound to one frame geometry."""

    segments: Tuple[Segment, ...]
    frame_len: int
    doppler_norm: int
    boundary: str = "circular"
    seed: Optional[int] = None
    profile: str = "Custom"
    doppler_max_hz: Optional[float] = None
    tap_powers: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("channel needs at least one segment")
        cursor = 0
        for seg in self.segments:
            if seg.start != cursor or seg.end <= seg.start:
                raise ValueError("segments must partition the frame without overlap")
            for p in seg.paths:
                if p.delay >= self.frame_len:
                    raise ValueError(f"path delay {p.delay} exceeds frame length {self.frame_len}")
            cursor = seg.end
        if cursor != self.frame_len:
            raise ValueError("segments must cover the whole frame")

    @property
    def paths(self) -> Tuple[Path, ...]:
        return self.segments[0].paths

    @property
    def all_paths(self) -> Tuple[Path, ...]:
        return tuple(p for seg in self.segments for p in seg.paths)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def is_static(self) -> bool:
        return all(p.doppler == 0 for p in self.all_paths)


def channel_from_paths(
    paths: Iterable[Path],
    cfg: ValidatedConfig,
    *,
    profile: str = "Custom",
    seed: Optional[int] = None,
    doppler_max_hz: Optional[float] = None,
    tap_powers: Sequence[float] = (),
) -> LtvChannel:
    """Single-segment channel spanning the configured frame."""
    paths = tuple(paths)
    if not tap_powers:
        tap_powers = tuple(abs(p.gain) ** 2 for p in paths)
    return LtvChannel(
        segments=(Segment(0, cfg.frame_len, paths),),
        frame_len=cfg.frame_len,
        doppler_norm=cfg.payload_len,
        boundary=cfg.boundary,
        seed=seed,
        profile=profile,
        doppler_max_hz=doppler_max_hz,
        tap_powers=tuple(float(p) for p in tap_powers),
    )


def identity_channel(cfg: ValidatedConfig) -> LtvChannel:
    return channel_from_paths([Path(1.0 + 0j, 0.0, 0.0)], cfg, profile="Identity", doppler_max_hz=0.0)


def _seed_int(seed: SeedLike) -> Optional[int]:
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1)[0])
    return seed


# ============================================================================
# PROFILES
# ============================================================================

@lru_cache(maxsize=8)
def load_profile_table(name: str) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """Return (delays_ns, linear powers normalized to 1) from the shipped table."""
    path = config.PROFILE_TABLES.get(name)
    if path is None:
        raise UnknownProfile(f"no tap table for profile {name!r}")
    df = pd.read_csv(path)
    delays = df["delay_ns"].to_numpy(dtype=float)
    powers = 10.0 ** (df["power_db"].to_numpy(dtype=float) / 10.0)
    powers = powers / powers.sum()
    return tuple(delays), tuple(powers)


def make_profile(
    name: str,
    cfg: ValidatedConfig,
    doppler_max: float = 0.0,
    seed: SeedLike = None,
    *,
    fractional: bool = True,
    doppler_spectrum: str = "uniform",
    paths: Optional[Sequence[Path]] = None,
) -> LtvChannel:
    """Instantiate a named power-delay profile with Rayleigh gains.

    Delays are converted to samples at ``M * delta_f``; Doppler per tap is
    drawn uniformly in [-doppler_max, doppler_max] Hz (or Jakes-shaped) and
    stored in delay-Doppler bins.
    """
    if doppler_max < 0:
        raise PreconditionError(f"doppler_max must be >= 0, got {doppler_max}")
    seed_value = _seed_int(seed)
    if name == "Identity":
        return identity_channel(cfg)
    if name == "Custom":
        if not paths:
            raise UnknownProfile("Custom profile needs an explicit path list")
        # Doppler of an explicit path list comes from the paths unless a bound is declared
        declared = doppler_max if doppler_max > 0 else None
        return channel_from_paths(paths, cfg, profile="Custom", seed=seed_value, doppler_max_hz=declared)
    if name not in config.PROFILE_TABLES:
        raise UnknownProfile(f"unknown profile {name!r}; expected one of {PROFILE_NAMES}")

    delays_ns, powers = load_profile_table(name)
    powers = np.asarray(powers)
    rng = np.random.default_rng(seed_value)
    n_taps = powers.size
    gains = np.sqrt(powers / 2.0) * (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps))
    delays = np.asarray(delays_ns) * 1e-9 * cfg.sample_rate

    kappa_max = doppler_max * cfg.N / cfg.delta_f
    if doppler_max == 0:
        dopplers = np.zeros(n_taps)
    elif doppler_spectrum == "jakes":
        dopplers = kappa_max * np.cos(rng.uniform(0.0, 2.0 * np.pi, n_taps))
    elif doppler_spectrum == "uniform":
        dopplers = rng.uniform(-kappa_max, kappa_max, n_taps)
    else:
        raise UnknownProfile(f"unknown Doppler spectrum {doppler_spectrum!r}")

    if not fractional:
        delays = np.round(delays)
        dopplers = np.round(dopplers)

    tap_paths = [Path(complex(g), float(d), float(k)) for g, d, k in zip(gains, delays, dopplers)]
    logger.debug("profile %s: %d taps, max delay %.2f samples", name, n_taps, delays.max())
    return channel_from_paths(
        tap_paths, cfg, profile=name, seed=seed_value, doppler_max_hz=doppler_max, tap_powers=tuple(powers)
    )


# ============================================================================
# FRACTIONAL DELAY FILTER
# ============================================================================

HALF_TAPS = config.FRACTIONAL_DELAY_TAPS // 2


def windowed_sinc_taps(frac: float) -> Tuple[np.ndarray, np.ndarray]:
    """Offsets m and weights g[m] with x(n - d - frac) ~ sum_m g[m] x[n - d - m].

    The filter is centred (offsets -31..31), so group delay is removed by
    construction; an integer delay returns the exact unit tap.
    """
    if frac == 0:
        return np.zeros(1, dtype=int), np.ones(1)
    m = np.arange(-HALF_TAPS, HALF_TAPS + 1)
    t = m - frac
    half_width = HALF_TAPS + 1
    window = 0.42 + 0.5 * np.cos(np.pi * t / half_width) + 0.08 * np.cos(2 * np.pi * t / half_width)
    return m, np.sinc(t) * window


def _path_terms(path: Path):
    whole = int(np.floor(path.delay))
    offsets, weights = windowed_sinc_taps(path.delay - whole)
    return whole + offsets, weights


def _apply_paths(
    x: np.ndarray, paths: Sequence[Path], rows: np.ndarray, boundary: str, doppler_norm: int
) -> np.ndarray:
    """Noiseless path model evaluated at output indices ``rows`` (x along axis 0)."""
    length = x.shape[0]
    out = np.zeros((rows.size,) + x.shape[1:], dtype=complex)
    extra = (1,) * (x.ndim - 1)
    for path in paths:
        ramp = path.gain * np.exp(2j * np.pi * path.doppler * rows / doppler_norm)
        shifts, weights = _path_terms(path)
        for shift, weight in zip(shifts, weights):
            src = rows - shift
            if boundary == "circular":
                contrib = x[src % length]
                out += (weight * ramp).reshape((-1,) + extra) * contrib
            else:
                valid = (src >= 0) & (src < length)
                if not np.any(valid):
                    continue
                out[valid] += (weight * ramp[valid]).reshape((-1,) + extra) * x[src[valid]]
    return out


def _noiseless(x: np.ndarray, ch: LtvChannel) -> np.ndarray:
    out = np.zeros(x.shape, dtype=complex)
    for seg in ch.segments:
        rows = np.arange(seg.start, seg.end)
        out[seg.start:seg.end] = _apply_paths(x, seg.paths, rows, ch.boundary, ch.doppler_norm)
    return out


# ============================================================================
# CHANNEL APPLICATION
# ============================================================================

def noise_variance(x: np.ndarray, snr_db: float) -> float:
    """Complex noise variance giving ``snr_db`` relative to mean |x|^2."""
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    power = float(np.mean(np.abs(x) ** 2))
    return power * 10.0 ** (-snr_db / 10.0)


def apply_channel(
    t, ch: LtvChannel, snr_db: float = float("inf"), seed: SeedLike = None, noise_var: Optional[float] = None
):
    """Pass time samples through the channel and add calibrated AWGN.

    Accepts a raw array or Time ``DomainSymbols`` and returns the same kind.
    ``noise_var`` overrides the calibration against the mean sample power.
    """
    samples = t.data if isinstance(t, DomainSymbols) else np.asarray(t, dtype=complex)
    if samples.shape[0] != ch.frame_len:
        raise LengthMismatch(f"channel expects {ch.frame_len} samples, got {samples.shape[0]}")
    y = _noiseless(samples, ch)
    nv = noise_variance(samples, snr_db) if noise_var is None else noise_var
    if nv > 0:
        rng = np.random.default_rng(_seed_int(seed))
        y = y + np.sqrt(nv / 2.0) * (
            rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        )
    if isinstance(t, DomainSymbols):
        return DomainSymbols(y, Domain.TIME, t.cfg)
    return y


def channel_matrix(ch: LtvChannel, cfg: Optional[ValidatedConfig] = None) -> np.ndarray:
    """Dense time-domain LTV matrix, one unit impulse per column."""
    if ch.frame_len > config.ORACLE_MAX_FRAME:
        raise TooLarge(f"frame of {ch.frame_len} samples exceeds oracle limit {config.ORACLE_MAX_FRAME}")
    return _noiseless(np.eye(ch.frame_len, dtype=complex), ch)


def sparse_channel_matrix(ch: LtvChannel) -> sp.csr_matrix:
    """Same operator as ``channel_matrix`` in CSR form (any frame length)."""
    rows_all, cols_all, vals_all = [], [], []
    length = ch.frame_len
    for seg in ch.segments:
        rows = np.arange(seg.start, seg.end)
        for path in seg.paths:
            ramp = path.gain * np.exp(2j * np.pi * path.doppler * rows / ch.doppler_norm)
            shifts, weights = _path_terms(path)
            for shift, weight in zip(shifts, weights):
                src = rows - shift
                if ch.boundary == "circular":
                    keep = np.ones(rows.size, dtype=bool)
                    src = src % length
                else:
                    keep = (src >= 0) & (src < length)
                rows_all.append(rows[keep])
                cols_all.append(src[keep])
                vals_all.append(weight * ramp[keep])
    if not rows_all:
        return sp.csr_matrix((length, length), dtype=complex)
    return sp.coo_matrix(
        (np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(length, length),
    ).tocsr()


def prefix_operators(cfg: ValidatedConfig) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse prefix insertion C (frame x payload) and removal R (payload x frame)."""
    M, N, cp = cfg.M, cfg.N, cfg.prefix.length
    L, F = cfg.payload_len, cfg.frame_len
    kind = cfg.prefix.kind
    payload = np.arange(L)
    c_rows, c_cols, c_vals = [], [], []
    r_rows, r_cols, r_vals = [], [], []

    if kind == PrefixKind.REDUCED_CP:
        body = payload + cp
        c_rows += [body, np.arange(cp)]
        c_cols += [payload, np.arange(L - cp, L)]
        c_vals += [np.ones(L), np.ones(cp)]
        r_rows.append(payload)
        r_cols.append(body)
        r_vals.append(np.ones(L))
    else:
        block, j = np.divmod(payload, M)
        stride = M + cp
        if kind == PrefixKind.ZERO_PAD:
            body = block * stride + j
            tail_payload = payload[j < cp]
            tail_block, tail_j = np.divmod(tail_payload, M)
            c_rows.append(body)
            c_cols.append(payload)
            c_vals.append(np.ones(L))
            r_rows += [payload, tail_payload]
            r_cols += [body, tail_block * stride + M + tail_j]
            r_vals += [np.ones(L), np.ones(tail_payload.size)]
        else:
            body = block * stride + cp + j
            b = np.repeat(np.arange(N), cp)
            i = np.tile(np.arange(cp), N)
            if kind == PrefixKind.CHIRP_PERIODIC:
                phase = np.exp(-2j * np.pi * cfg.c1 * (M * M + 2 * M * (i - cp)))
            else:
                phase = np.ones(i.size, dtype=complex)
            c_rows += [body, b * stride + i]
            c_cols += [payload, b * M + M - cp + i]
            c_vals += [np.ones(L), phase]
            r_rows.append(payload)
            r_cols.append(body)
            r_vals.append(np.ones(L))

    C = sp.coo_matrix(
        (np.concatenate(c_vals).astype(complex), (np.concatenate(c_rows), np.concatenate(c_cols))), shape=(F, L)
    ).tocsr()
    R = sp.coo_matrix(
        (np.concatenate(r_vals).astype(complex), (np.concatenate(r_rows), np.concatenate(r_cols))), shape=(L, F)
    ).tocsr()
    return C, R


def effective_time_matrix(ch: LtvChannel, cfg: ValidatedConfig) -> sp.csr_matrix:
    """Post-prefix-removal time-domain channel R . H . C (sparse)."""
    C, R = prefix_operators(cfg)
    return (R @ sparse_channel_matrix(ch) @ C).tocsr()


def effective_channel(ch: LtvChannel, cfg: ValidatedConfig, d: Domain) -> np.ndarray:
    """Dense H_d = T_d . (R H C) . T_d^H consumed by the equalizers."""
    if ch.frame_len > config.ORACLE_MAX_FRAME:
        raise TooLarge(f"frame of {ch.frame_len} samples exceeds oracle limit {config.ORACLE_MAX_FRAME}")
    h_time = effective_time_matrix(ch, cfg).toarray()
    return domain_conjugate(h_time, d, cfg)


def domain_conjugate(h_time: np.ndarray, d: Domain, cfg: ValidatedConfig) -> np.ndarray:
    """T_d . H . T_d^H computed with fast transforms on columns."""
    left = to_domain(h_time, d, cfg)
    return to_domain(left.conj().T, d, cfg).conj().T


def single_path_response(path: Path, cfg: ValidatedConfig, d: Domain, index: int) -> np.ndarray:
    """Noiseless domain-``d`` response of one path to a unit impulse at ``index``."""
    e = np.zeros(cfg.payload_len, dtype=complex)
    e[index] = 1.0
    framed = add_prefix(from_domain(e, d, cfg), cfg.prefix, cfg)
    rows = np.arange(cfg.frame_len)
    received = _apply_paths(framed, [path], rows, cfg.boundary, cfg.payload_len)
    return to_domain(remove_prefix(received, cfg.prefix, cfg), d, cfg)


# ============================================================================
# BIRTH-DEATH AND SPREAD
# ============================================================================

def make_birth_death(base: LtvChannel, n_segments: int, churn: float, seed: SeedLike = None) -> LtvChannel:
    """Split the frame into equal spans; each span replaces ``churn`` of the previous paths."""
    if n_segments < 1 or not 0.0 <= churn <= 1.0:
        raise PreconditionError(f"need n_segments >= 1 and 0 <= churn <= 1 (got {n_segments}, {churn})")
    if churn == 0 or n_segments == 1:
        return base

    rng = np.random.default_rng(_seed_int(seed))
    current = list(base.paths)
    n_paths = len(current)
    slot_power = list(base.tap_powers) if len(base.tap_powers) == n_paths else [abs(p.gain) ** 2 for p in current]
    max_delay = max(p.delay for p in current)
    integer_grid = all(float(p.delay).is_integer() and float(p.doppler).is_integer() for p in current)
    kappa_max = max(abs(p.doppler) for p in current)
    n_replace = int(round(churn * n_paths))

    bounds = np.linspace(0, base.frame_len, n_segments + 1).round().astype(int)
    segments = [Segment(int(bounds[0]), int(bounds[1]), tuple(current))]
    for s in range(1, n_segments):
        replaced = rng.choice(n_paths, size=n_replace, replace=False)
        for slot in sorted(replaced):
            delay = rng.uniform(0.0, max_delay)
            doppler = rng.uniform(-kappa_max, kappa_max) if kappa_max > 0 else 0.0
            if integer_grid:
                delay, doppler = float(np.round(delay)), float(np.round(doppler))
            gain = np.sqrt(slot_power[slot] / 2.0) * (rng.standard_normal() + 1j * rng.standard_normal())
            current[slot] = Path(complex(gain), float(delay), float(doppler))
        segments.append(Segment(int(bounds[s]), int(bounds[s + 1]), tuple(current)))
    logger.debug("birth-death: %d segments, %d paths replaced per segment", n_segments, n_replace)
    return replace(base, segments=tuple(segments), seed=_seed_int(seed))


def spread_factor(ch: LtvChannel, cfg: ValidatedConfig) -> float:
    """Delay spread (s) times two-sided Doppler spread (Hz); > 1 means overspread.

    The Doppler spread is the wider of the declared bound and the spread of
    the actual paths.
    """
    paths = ch.all_paths
    delays = np.array([p.delay for p in paths]) * cfg.sample_period
    delay_spread = float(delays.max() - delays.min())
    freqs = np.array([p.doppler for p in paths]) * cfg.delta_f / cfg.N
    doppler_spread = float(freqs.max() - freqs.min())
    if ch.doppler_max_hz is not None:
        doppler_spread = max(doppler_spread, 2.0 * ch.doppler_max_hz)
    return delay_spread * doppler_spread
