"""
Channel Estimation
==================

Pilot frame construction and estimators for three pilot structures:

* BlockFrequency  - all-pilot first symbol (Zadoff-Chu), least squares per
                    subcarrier with interpolation across unpiloted bins;
                    the estimate is reused for the whole frame.
* EmbeddedDD      - boosted delay-Doppler impulse inside a zero guard,
                    threshold detection of on-grid paths.
* EmbeddedAffine  - boosted affine-domain impulse with a 1D guard; every
                    detected bin is mapped back to an integer (delay, Doppler)
                    pair and its chirp phase is compensated.

Embedded estimators share one hypothesis table: the noiseless response of
every on-grid (delay, Doppler) path to the pilot impulse, computed
numerically with ``single_path_response``.  A detection at the peak bin of
hypothesis (l, kappa) yields gain y / (pilot * response).
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from wavelab import config
from wavelab.calculators.base import db_to_linear, idft, zadoff_chu
from wavelab.calculators.channel import (
    LtvChannel,
    Path,
    channel_from_paths,
    domain_conjugate,
    effective_time_matrix,
    single_path_response,
)
from wavelab.calculators.transforms import DomainSymbols, multiplexing_analysis
from wavelab.errors import (
    AmbiguousTap,
    DataOverflow,
    DomainMismatch,
    NoPilotMeta,
    PreconditionError,
    TooLarge,
    UnsupportedCombo,
    ZeroPilot,
)
from wavelab.schemas.frame_schemas import Domain, ValidatedConfig, Waveform
from wavelab.schemas.pilot_schemas import PilotKind, PilotScheme

logger = logging.getLogger(__name__)

ZERO_PILOT_LEVEL = 1e-12


# ============================================================================
# DATA TYPES
# ============================================================================

@dataclass(frozen=True, eq=False)
class PilotMeta:
    """Receiver-side description of where the pilot and guards sit."""

    kind: PilotKind
    domain: Domain
    cfg: ValidatedConfig
    pilot_value: complex
    guard_indices: np.ndarray
    data_indices: np.ndarray
    pilot_index: Optional[int] = None
    known: Optional[np.ndarray] = None
    pilot_bins: Optional[np.ndarray] = None
    delay_max: int = 0
    doppler_max: int = 0


@dataclass(frozen=True, eq=False)
class PathEstimate:
    """Channel estimate as a per-bin response or a discrete path list."""

    domain: Domain
    paths: Tuple[Path, ...] = ()
    response: Optional[np.ndarray] = None
    threshold: float = 0.0
    unmatched: int = 0
    channel: Optional[LtvChannel] = None

    @property
    def is_per_bin(self) -> bool:
        return self.response is not None

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    def to_channel(self, cfg: ValidatedConfig) -> LtvChannel:
        """Path-list channel; a per-bin response becomes integer circular taps."""
        if self.channel is not None:
            return self.channel
        if not self.is_per_bin:
            return channel_from_paths(self.paths, cfg)
        taps = scipy.fft.ifft(self.response)
        keep = np.flatnonzero(np.abs(taps) > 1e-15 * max(np.abs(taps).max(), 1e-300))
        return channel_from_paths([Path(complex(taps[i]), float(i), 0.0) for i in keep], cfg)

    def frequency_response(self, cfg: ValidatedConfig) -> np.ndarray:
        """Static M-bin frequency response (Doppler ignored for path lists)."""
        if self.is_per_bin:
            return self.response.copy()
        paths = self.channel.paths if self.channel is not None else self.paths
        k = np.arange(cfg.M)
        out = np.zeros(cfg.M, dtype=complex)
        for p in paths:
            out += p.gain * np.exp(-2j * np.pi * k * p.delay / cfg.M)
        return out

    def to_record(self) -> Dict:
        """Structured record for cross-run comparison."""
        record = {"domain": self.domain.value, "threshold": self.threshold, "unmatched": self.unmatched}
        if self.is_per_bin:
            record["bins"] = [[float(v.real), float(v.imag)] for v in self.response]
        else:
            paths = self.channel.paths if self.channel is not None else self.paths
            record["paths"] = [
                {"gain": [float(p.gain.real), float(p.gain.imag)], "delay": p.delay, "doppler": p.doppler}
                for p in paths
            ]
        return record


def genie_estimate(ch: LtvChannel, d: Domain) -> PathEstimate:
    """Perfect knowledge of the true channel (reference curves)."""
    return PathEstimate(domain=d, paths=ch.paths, channel=ch)


# ============================================================================
# PILOT FRAMES
# ============================================================================

def _block_frequency_layout(scheme: PilotScheme, cfg: ValidatedConfig):
    if cfg.waveform == Waveform.OTFS:
        raise UnsupportedCombo("BlockFrequency pilots need a block waveform, not OTFS")
    bins = np.arange(0, cfg.M, scheme.pilot_spacing)
    known = np.zeros(cfg.M, dtype=complex)
    known[bins] = zadoff_chu(cfg.M, scheme.zc_root)[bins]
    x = np.zeros(cfg.payload_len, dtype=complex)
    x[:cfg.M] = idft(known)
    frame = multiplexing_analysis(x, cfg)
    meta = PilotMeta(
        kind=scheme.kind,
        domain=cfg.multiplexing_domain,
        cfg=cfg,
        pilot_value=1.0 + 0j,
        guard_indices=np.zeros(0, dtype=int),
        data_indices=np.arange(cfg.M, cfg.payload_len),
        known=known,
        pilot_bins=bins,
    )
    return frame, meta


def _embedded_dd_layout(scheme: PilotScheme, cfg: ValidatedConfig, amplitude: float):
    M, N = cfg.M, cfg.N
    l_max, kappa = scheme.guard_delay, scheme.guard_doppler
    l_p = scheme.pilot_index if scheme.pilot_index is not None else l_max
    k_p = scheme.pilot_doppler if scheme.pilot_doppler is not None else N // 2
    if l_p - l_max < 0 or l_p + l_max > M - 1 or not 0 <= k_p < N:
        raise PreconditionError(f"DD pilot ({l_p}, {k_p}) with delay guard {l_max} does not fit a {M}x{N} grid")
    delays = np.arange(l_p - l_max, l_p + l_max + 1)
    if 4 * kappa + 1 >= N:
        dopplers = np.arange(N)
    else:
        dopplers = (k_p + np.arange(-2 * kappa, 2 * kappa + 1)) % N
    pilot = l_p * N + k_p
    region = (delays[:, None] * N + dopplers[None, :]).reshape(-1)
    guard = np.setdiff1d(region, [pilot])
    data = np.setdiff1d(np.arange(cfg.payload_len), region)
    frame = np.zeros(cfg.payload_len, dtype=complex)
    frame[pilot] = amplitude
    meta = PilotMeta(
        kind=scheme.kind,
        domain=Domain.DELAY_DOPPLER,
        cfg=cfg,
        pilot_value=complex(amplitude),
        guard_indices=guard,
        data_indices=data,
        pilot_index=int(pilot),
        delay_max=l_max,
        doppler_max=kappa,
    )
    return frame, meta


def affine_guard_width(delay_max: int, alpha_max: int) -> int:
    """Zero bins needed on each side of an affine pilot."""
    return (delay_max + 1) * (2 * alpha_max + 1) - 1


def _embedded_affine_layout(scheme: PilotScheme, cfg: ValidatedConfig, amplitude: float):
    if not cfg.affine_defined:
        raise DomainMismatch(f"affine pilots need chirp parameters, undefined for {cfg.waveform.value}")
    M = cfg.M
    q = affine_guard_width(scheme.guard_delay, scheme.guard_doppler)
    if 2 * q + 1 > M:
        raise PreconditionError(f"affine guard of {2 * q + 1} bins exceeds the {M}-bin chirp block")
    m_p = scheme.pilot_index if scheme.pilot_index is not None else q
    if not 0 <= m_p < M:
        raise PreconditionError(f"affine pilot bin {m_p} outside [0, {M})")
    region = (m_p + np.arange(-q, q + 1)) % M
    guard = np.setdiff1d(region, [m_p])
    data = np.setdiff1d(np.arange(cfg.payload_len), region)
    frame = np.zeros(cfg.payload_len, dtype=complex)
    frame[m_p] = amplitude
    meta = PilotMeta(
        kind=scheme.kind,
        domain=Domain.AFFINE,
        cfg=cfg,
        pilot_value=complex(amplitude),
        guard_indices=guard,
        data_indices=data,
        pilot_index=int(m_p),
        delay_max=scheme.guard_delay,
        doppler_max=scheme.guard_doppler,
    )
    return frame, meta


def build_pilot_frame(
    scheme: PilotScheme, data: Sequence[complex], cfg: ValidatedConfig
) -> Tuple[DomainSymbols, PilotMeta]:
    """Place the pilot structure and fill the remaining indices with ``data``.

    BlockFrequency frames are returned in the multiplexing domain; embedded
    frames in the pilot's own domain (DelayDoppler or Affine).  Fewer data
    symbols than free indices are zero-filled.
    """
    amplitude = float(np.sqrt(db_to_linear(scheme.boost_db)))
    if scheme.kind == PilotKind.BLOCK_FREQUENCY:
        frame, meta = _block_frequency_layout(scheme, cfg)
    elif scheme.kind == PilotKind.EMBEDDED_DD:
        frame, meta = _embedded_dd_layout(scheme, cfg, amplitude)
    else:
        frame, meta = _embedded_affine_layout(scheme, cfg, amplitude)

    data = np.asarray(data, dtype=complex).reshape(-1)
    if data.size > meta.data_indices.size:
        raise DataOverflow(f"{data.size} data symbols do not fit {meta.data_indices.size} free indices")
    frame[meta.data_indices[:data.size]] = data
    return DomainSymbols(frame, meta.domain, cfg), meta


def extract_pilot(rx: DomainSymbols, meta: PilotMeta) -> np.ndarray:
    """Received values at the pilot position(s)."""
    if meta.kind == PilotKind.BLOCK_FREQUENCY:
        return _frequency_block(rx, meta.cfg)[meta.pilot_bins]
    return rx.data[[meta.pilot_index]]


# ============================================================================
# FREQUENCY-DOMAIN LEAST SQUARES
# ============================================================================

def _frequency_block(rx: Union[DomainSymbols, np.ndarray], cfg: Optional[ValidatedConfig]) -> np.ndarray:
    if isinstance(rx, DomainSymbols):
        if rx.domain != Domain.FREQUENCY:
            raise DomainMismatch(f"frequency estimation needs Frequency symbols, got {rx.domain.value}")
        return rx.data[:rx.cfg.M]
    return np.asarray(rx, dtype=complex).reshape(-1)


def estimate_frequency_ls(
    rx: Union[DomainSymbols, np.ndarray],
    known: Sequence[complex],
    pilot_bins: Optional[Sequence[int]] = None,
    interpolation: str = "linear",
) -> PathEstimate:
    """Per-subcarrier LS estimate from the pilot symbol.

    ``interpolation="linear"`` interpolates real and imaginary parts
    circularly between pilot bins; ``"dft"`` transforms the pilot estimate
    to the delay axis, zero-pads and transforms back (exact for channels
    shorter than M / spacing).
    """
    known = np.asarray(known, dtype=complex).reshape(-1)
    y = _frequency_block(rx, None)[:known.size]
    M = known.size
    bins = np.arange(M) if pilot_bins is None else np.asarray(pilot_bins, dtype=int)
    if np.any(np.abs(known[bins]) < ZERO_PILOT_LEVEL):
        raise ZeroPilot("pilot sequence has (near-)zero entries on pilot bins")
    h_pilot = y[bins] / known[bins]
    if bins.size == M:
        return PathEstimate(domain=Domain.FREQUENCY, response=h_pilot)

    if interpolation == "linear":
        k = np.arange(M)
        response = np.interp(k, bins, h_pilot.real, period=M) + 1j * np.interp(k, bins, h_pilot.imag, period=M)
    elif interpolation == "dft":
        spacing = M // bins.size
        if M % bins.size or not np.array_equal(bins, np.arange(0, M, spacing)):
            raise PreconditionError("DFT interpolation needs uniformly spaced pilots starting at bin 0")
        taps = scipy.fft.ifft(h_pilot)
        response = scipy.fft.fft(np.concatenate([taps, np.zeros(M - taps.size)]))
    else:
        raise PreconditionError(f"unknown interpolation mode {interpolation!r}")
    return PathEstimate(domain=Domain.FREQUENCY, response=response)


# ============================================================================
# EMBEDDED PILOT DETECTION
# ============================================================================

@lru_cache(maxsize=4096)
def _peak_response(
    cfg: ValidatedConfig, domain: Domain, pilot_index: int, delay: int, doppler: float
) -> Tuple[int, complex]:
    """Peak bin of a unit on-grid path's pilot response and the response there."""
    r = single_path_response(Path(1.0 + 0j, float(delay), float(doppler)), cfg, domain, pilot_index)
    peak = int(np.argmax(np.abs(r)))
    return peak, complex(r[peak])


@lru_cache(maxsize=32)
def _hypothesis_table(
    cfg: ValidatedConfig, domain: Domain, pilot_index: int, delays: Tuple[int, ...], dopplers: Tuple[float, ...]
) -> Tuple[Tuple[int, int, float, complex], ...]:
    """(peak bin, delay, doppler, response at peak) for every on-grid path."""
    table = []
    for delay in delays:
        for doppler in dopplers:
            peak, r = _peak_response(cfg, domain, pilot_index, delay, doppler)
            table.append((peak, delay, doppler, r))
    return tuple(table)


def _detect_paths(
    y: np.ndarray,
    meta: PilotMeta,
    dopplers: Tuple[float, ...],
    threshold_sigmas: float,
    noise_var: float,
    compensate_phase: bool,
) -> PathEstimate:
    table = _hypothesis_table(meta.cfg, meta.domain, meta.pilot_index, tuple(range(meta.delay_max + 1)), dopplers)
    by_bin: Dict[int, List[Tuple[int, float, complex]]] = defaultdict(list)
    for peak, delay, doppler, r in table:
        by_bin[peak].append((delay, doppler, r))

    pilot = meta.pilot_value
    threshold = max(threshold_sigmas * np.sqrt(max(noise_var, 0.0)), config.DETECTION_FLOOR * abs(pilot))
    window = np.union1d(meta.guard_indices, [meta.pilot_index])
    detected = window[np.abs(y[window]) > threshold]

    paths, unmatched = [], 0
    for b in detected:
        hypotheses = by_bin.get(int(b))
        if not hypotheses:
            unmatched += 1
            continue
        if len(hypotheses) > 1:
            pairs = ", ".join(f"(l={d}, kappa={k:g})" for d, k, _ in hypotheses)
            raise AmbiguousTap(f"bin {int(b)} is reachable from {pairs}")
        delay, doppler, r = hypotheses[0]
        gain = y[b] / (pilot * r) if compensate_phase else y[b] / pilot
        paths.append(Path(complex(gain), float(delay), float(doppler)))
    if unmatched:
        logger.debug("%d detections outside the on-grid hypothesis set", unmatched)
    return PathEstimate(domain=meta.domain, paths=tuple(paths), threshold=float(threshold), unmatched=unmatched)


def _checked_rx(rx, meta: Optional[PilotMeta], kind: PilotKind) -> np.ndarray:
    if meta is None or meta.kind != kind or meta.pilot_index is None:
        raise NoPilotMeta(f"{kind.value} estimation needs the pilot metadata of the transmitted frame")
    if isinstance(rx, DomainSymbols):
        if rx.domain != meta.domain:
            raise DomainMismatch(f"expected {meta.domain.value} symbols, got {rx.domain.value}")
        return rx.data
    return np.asarray(rx, dtype=complex).reshape(-1)


def estimate_dd_embedded(
    rx: Union[DomainSymbols, np.ndarray],
    meta: Optional[PilotMeta],
    threshold_sigmas: float = config.DEFAULT_THRESHOLD_SIGMAS,
    noise_var: float = 0.0,
    compensate_phase: bool = True,
) -> PathEstimate:
    """Threshold detection around an embedded delay-Doppler pilot.

    When the guard spans the whole Doppler axis (4 kappa + 1 >= N) every
    Doppler bin is a hypothesis, so fractional-Doppler leakage beyond
    +-kappa is kept instead of being counted as unmatched.
    """
    y = _checked_rx(rx, meta, PilotKind.EMBEDDED_DD)
    kappa, N = meta.doppler_max, meta.cfg.N
    wraps = 4 * kappa + 1 >= N
    if wraps:
        dopplers = tuple(float(k) for k in range(-(N // 2), N - N // 2))
    else:
        dopplers = tuple(float(k) for k in range(-kappa, kappa + 1))
    est = _detect_paths(y, meta, dopplers, threshold_sigmas, noise_var, compensate_phase)
    if wraps and N % 2 == 0 and N // 2 > kappa:
        est = _resolve_edge_alias(est, meta, compensate_phase)
    return est


def _resolve_edge_alias(est: PathEstimate, meta: PilotMeta, compensate_phase: bool) -> PathEstimate:
    """Move leakage in the -N/2 Doppler bin to +N/2 when a tap leans positive.

    Both aliases land on the same bin; the one on the side of the tap's
    stronger +-1 neighbour is kept.
    """
    edge = float(meta.cfg.N // 2)
    by_tap = {(p.delay, p.doppler): p for p in est.paths}
    paths = []
    for p in est.paths:
        if p.doppler == -edge:
            up, down = by_tap.get((p.delay, 1.0)), by_tap.get((p.delay, -1.0))
            if abs(up.gain if up else 0.0) > abs(down.gain if down else 0.0):
                gain = p.gain
                if compensate_phase:
                    _, r_low = _peak_response(meta.cfg, meta.domain, meta.pilot_index, int(p.delay), -edge)
                    _, r_high = _peak_response(meta.cfg, meta.domain, meta.pilot_index, int(p.delay), edge)
                    gain = p.gain * r_low / r_high
                p = Path(complex(gain), p.delay, edge)
        paths.append(p)
    return replace(est, paths=tuple(paths))


def estimate_affine(
    rx: Union[DomainSymbols, np.ndarray],
    meta: Optional[PilotMeta],
    threshold_sigmas: float = config.DEFAULT_THRESHOLD_SIGMAS,
    noise_var: float = 0.0,
    compensate_phase: bool = True,
) -> PathEstimate:
    """Threshold detection along the 1D affine guard.

    Doppler hypotheses are integer subcarrier shifts alpha, i.e. kappa = alpha * N
    delay-Doppler bins.
    """
    y = _checked_rx(rx, meta, PilotKind.EMBEDDED_AFFINE)
    alpha = meta.doppler_max
    dopplers = tuple(float(a * meta.cfg.N) for a in range(-alpha, alpha + 1))
    return _detect_paths(y, meta, dopplers, threshold_sigmas, noise_var, compensate_phase)


# ============================================================================
# SYNTHESIS AND NMSE
# ============================================================================

def estimated_time_operator(est: PathEstimate, cfg: ValidatedConfig) -> sp.csr_matrix:
    """Sparse post-prefix time-domain matrix implied by an estimate."""
    if est.channel is not None:
        return effective_time_matrix(est.channel, cfg)
    if est.is_per_bin:
        block = sp.csr_matrix(scipy.linalg.circulant(scipy.fft.ifft(est.response)))
        return sp.block_diag([block] * cfg.N, format="csr")
    return effective_time_matrix(channel_from_paths(est.paths, cfg), cfg)


def synthesize_effective(
    est: PathEstimate, cfg: ValidatedConfig, d: Domain, block: bool = False
) -> np.ndarray:
    """Dense effective channel in domain ``d``; ``block=True`` returns the first M x M block."""
    h_time = estimated_time_operator(est, cfg)
    if block:
        if d == Domain.DELAY_DOPPLER:
            raise DomainMismatch("per-block synthesis is undefined in the delay-Doppler domain")
        block_cfg = cfg.model_copy(update={"N": 1})
        return domain_conjugate(h_time[:cfg.M, :cfg.M].toarray(), d, block_cfg)
    if cfg.payload_len > config.ORACLE_MAX_FRAME:
        raise TooLarge(f"{cfg.payload_len} symbols exceed the dense limit {config.ORACLE_MAX_FRAME}")
    return domain_conjugate(h_time.toarray(), d, cfg)


def nmse(est: PathEstimate, truth: LtvChannel, cfg: ValidatedConfig, d: Domain) -> float:
    """Normalized estimation error in dB, floored at ``NMSE_FLOOR_DB``.

    All domain transforms are unitary, so the Frobenius ratio is computed
    once on the time-domain operators and holds for every domain ``d``.
    """
    if d == Domain.AFFINE and not cfg.affine_defined:
        raise DomainMismatch(f"affine domain undefined for {cfg.waveform.value}")
    reference = effective_time_matrix(truth, cfg)
    err = scipy.sparse.linalg.norm(reference - estimated_time_operator(est, cfg), "fro") ** 2
    ref = scipy.sparse.linalg.norm(reference, "fro") ** 2
    if ref == 0 or err == 0:
        return config.NMSE_FLOOR_DB
    return max(10.0 * np.log10(err / ref), config.NMSE_FLOOR_DB)
