"""
Unified Waveform Kernel
=======================

Every waveform is generated by the same staged kernel: pre-spread,
permutation, block IDFT core and a diagonal post stage.

    OFDM        identity | -         | block IDFT | identity
    DFT-s-OFDM  a-point DFT bank | -  | block IDFT | identity
    OTFS        ISFFT (N-pt IDFT across Doppler, M-pt DFT across delay)
                | row-column | block IDFT | identity
    AFDM/OCDM   chirp(c2)^H | -      | block IDFT | chirp(c1)^H

All stages are unitary; modulation applies the plan, demodulation its
adjoint.  Vectors are laid out symbol-major (``n*M + k``) for the time,
frequency and affine domains and delay-major (``l*N + k``) for the
delay-Doppler grid.  Array operations act on axis 0 so that identity
matrices can be pushed through the same code to build oracle matrices.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from wavelab.calculators.base import (
    affine_forward,
    affine_inverse,
    affine_matrix,
    chirp,
    dft,
    dft_matrix,
    idft,
)
from wavelab.errors import DomainMismatch, LengthMismatch, SchemeMismatch
from wavelab.frame import fresnel_slope
from wavelab.schemas.frame_schemas import (
    CHIRP_WAVEFORMS,
    Domain,
    PrefixKind,
    PrefixScheme,
    ValidatedConfig,
    Waveform,
)

logger = logging.getLogger(__name__)


# ============================================================================
# DOMAIN-TAGGED SYMBOLS
# ============================================================================

@dataclass(frozen=True)
class DomainSymbols:
    """A symbol vector tagged with the domain it lives in."""

    data: np.ndarray
    domain: Domain
    cfg: ValidatedConfig

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex).reshape(-1)
        object.__setattr__(self, "data", data)
        allowed = {self.cfg.payload_len}
        if self.domain == Domain.TIME:
            allowed.add(self.cfg.frame_len)
        if data.size not in allowed:
            raise LengthMismatch(
                f"{self.domain.value} symbols need {sorted(allowed)} samples, got {data.size}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("symbol energy must be finite")

    def grid(self) -> np.ndarray:
        """Natural 2D layout: (M, N) for delay-Doppler, (N, M) otherwise."""
        if self.domain == Domain.DELAY_DOPPLER:
            return self.data.reshape(self.cfg.M, self.cfg.N)
        return self.data.reshape(self.cfg.N, -1)

    def energy(self) -> float:
        return float(np.vdot(self.data, self.data).real)


# ============================================================================
# KERNEL PLAN
# ============================================================================

@dataclass(frozen=True)
class KernelStage:
    name: str
    kind: str
    params: Tuple[float, ...] = ()

    def describe(self) -> str:
        if self.params:
            return f"{self.name} [{self.kind} {', '.join(f'{p:g}' for p in self.params)}]"
        return f"{self.name} [{self.kind}]"


IDENTITY = KernelStage("identity", "identity")


@dataclass(frozen=True)
class KernelPlan:
    """Stage composition realizing one waveform (modulation direction)."""

    waveform: Waveform
    M: int
    N: int
    pre_spread: Tuple[KernelStage, ...] = ()
    permutation: Optional[KernelStage] = None
    core: KernelStage = field(default_factory=lambda: KernelStage("core", "block_idft"))
    post: KernelStage = IDENTITY

    @property
    def stages(self) -> Tuple[KernelStage, ...]:
        chain = list(self.pre_spread)
        if self.permutation is not None:
            chain.append(self.permutation)
        chain.append(self.core)
        chain.append(self.post)
        return tuple(s for s in chain if s.kind != "identity")

    def apply(self, s: np.ndarray) -> np.ndarray:
        """Symbols -> payload time samples."""
        out = np.asarray(s, dtype=complex)
        for stage in self.stages:
            out = _apply_stage(stage, out, self.M, self.N, inverse=False)
        return out

    def adjoint(self, x: np.ndarray) -> np.ndarray:
        """Payload time samples -> symbols (exact inverse, all stages unitary)."""
        out = np.asarray(x, dtype=complex)
        for stage in reversed(self.stages):
            out = _apply_stage(stage, out, self.M, self.N, inverse=True)
        return out


def _blocks(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return v.reshape((rows, cols) + v.shape[1:])


def _flat(v: np.ndarray) -> np.ndarray:
    return v.reshape((v.shape[0] * v.shape[1],) + v.shape[2:])


def _chirp_diag(c: float, M: int, ndim: int) -> np.ndarray:
    return chirp(c, M).reshape((1, M) + (1,) * (ndim - 2))


def _apply_stage(stage: KernelStage, v: np.ndarray, M: int, N: int, inverse: bool) -> np.ndarray:
    kind = stage.kind
    if kind == "identity":
        return v
    if kind == "block_idft":
        g = _blocks(v, N, M)
        return _flat(dft(g, axis=1) if inverse else idft(g, axis=1))
    if kind == "subband_dft":
        a = int(stage.params[0])
        g = v.reshape((N * M // a, a) + v.shape[1:])
        g = idft(g, axis=1) if inverse else dft(g, axis=1)
        return _flat(g)
    if kind == "doppler_idft":
        g = _blocks(v, M, N)
        return _flat(dft(g, axis=1) if inverse else idft(g, axis=1))
    if kind == "delay_dft":
        g = _blocks(v, M, N)
        return _flat(idft(g, axis=0) if inverse else dft(g, axis=0))
    if kind == "row_column":
        if inverse:
            return _flat(np.swapaxes(_blocks(v, N, M), 0, 1))
        return _flat(np.swapaxes(_blocks(v, M, N), 0, 1))
    if kind == "chirp_diag":
        g = _blocks(v, N, M)
        lam = _chirp_diag(stage.params[0], M, g.ndim)
        return _flat(g * lam if inverse else g * np.conj(lam))
    raise ValueError(f"unknown kernel stage {kind!r}")


@lru_cache(maxsize=64)
def build_kernel(cfg: ValidatedConfig) -> KernelPlan:
    """Return the stage composition realizing ``cfg.waveform``."""
    M, N = cfg.M, cfg.N
    if cfg.waveform == Waveform.OFDM:
        return KernelPlan(cfg.waveform, M, N)
    if cfg.waveform == Waveform.DFT_S_OFDM:
        spread = KernelStage("pre_spread", "subband_dft", (float(cfg.dft_s_subband),))
        return KernelPlan(cfg.waveform, M, N, pre_spread=(spread,))
    if cfg.waveform == Waveform.OTFS:
        return KernelPlan(
            cfg.waveform,
            M,
            N,
            pre_spread=(
                KernelStage("pre_spread", "doppler_idft", (float(N),)),
                KernelStage("pre_spread", "delay_dft", (float(M),)),
            ),
            permutation=KernelStage("permutation", "row_column"),
        )
    # AFDM / OCDM: x = Lambda_c1^H F^H Lambda_c2^H s
    return KernelPlan(
        cfg.waveform,
        M,
        N,
        pre_spread=(KernelStage("pre_spread", "chirp_diag", (cfg.c2,)),),
        post=KernelStage("post", "chirp_diag", (cfg.c1,)),
    )


def describe_plan(plan: KernelPlan) -> str:
    """Human-readable stage list."""
    lines = [f"{plan.waveform.value} kernel (M={plan.M}, N={plan.N})"]
    pre = plan.pre_spread or (IDENTITY,)
    for stage in pre:
        lines.append(f"  pre:  {stage.describe()}")
    lines.append(f"  perm: {plan.permutation.describe() if plan.permutation else 'none'}")
    lines.append(f"  core: {plan.core.describe()} x{plan.N}")
    lines.append(f"  post: {plan.post.describe()}")
    return "\n".join(lines)


def kernel_matrix(plan: KernelPlan) -> np.ndarray:
    """Total modulation matrix of a plan (identity pushed through every stage)."""
    size = plan.M * plan.N
    return plan.apply(np.eye(size, dtype=complex))


def reference_matrix(cfg: ValidatedConfig) -> np.ndarray:
    """Independent explicit modulation matrix per waveform (test oracle)."""
    M, N = cfg.M, cfg.N
    if cfg.waveform == Waveform.OFDM:
        return scipy.linalg.block_diag(*([dft_matrix(M).conj().T] * N))
    if cfg.waveform == Waveform.DFT_S_OFDM:
        a = cfg.dft_s_subband
        spread = scipy.linalg.block_diag(*([dft_matrix(a)] * (M // a)))
        block = dft_matrix(M).conj().T @ spread
        return scipy.linalg.block_diag(*([block] * N))
    if cfg.waveform == Waveform.OTFS:
        # ISFFT followed by the Heisenberg transform with a rectangular pulse
        m = np.arange(M)
        n = np.arange(N)
        e_isfft_delay = np.exp(-2j * np.pi * np.outer(m, m) / M)    # [m, l]
        e_isfft_doppler = np.exp(2j * np.pi * np.outer(n, n) / N)   # [n, k]
        e_heisenberg = np.exp(2j * np.pi * np.outer(m, m) / M)      # [t, m]
        w = np.einsum("tm,ml,nk->ntlk", e_heisenberg, e_isfft_delay, e_isfft_doppler)
        return w.reshape(N * M, M * N) / (M * np.sqrt(N))
    block = affine_matrix(M, cfg.c1, cfg.c2).conj().T
    return scipy.linalg.block_diag(*([block] * N))


# ============================================================================
# PREFIXES
# ============================================================================

def _check_scheme(scheme: PrefixScheme, cfg: ValidatedConfig) -> None:
    if scheme.kind == PrefixKind.CHIRP_PERIODIC and cfg.waveform not in CHIRP_WAVEFORMS:
        raise SchemeMismatch(f"ChirpPeriodic prefix is not valid for {cfg.waveform.value}")
    if scheme.length < 0 or scheme.length >= cfg.M:
        raise SchemeMismatch(f"prefix length {scheme.length} outside [0, {cfg.M})")


def framed_length(scheme: PrefixScheme, cfg: ValidatedConfig) -> int:
    if scheme.per_block:
        return cfg.N * (cfg.M + scheme.length)
    return cfg.payload_len + scheme.length


def add_prefix(t: np.ndarray, scheme: PrefixScheme, cfg: ValidatedConfig) -> np.ndarray:
    """Insert prefixes (or zero suffixes) into payload samples (axis 0)."""
    _check_scheme(scheme, cfg)
    t = np.asarray(t, dtype=complex)
    if t.shape[0] != cfg.payload_len:
        raise LengthMismatch(f"payload needs {cfg.payload_len} samples, got {t.shape[0]}")
    M, N, cp = cfg.M, cfg.N, scheme.length
    if scheme.kind == PrefixKind.REDUCED_CP:
        return np.concatenate([t[t.shape[0] - cp:], t], axis=0)

    blocks = _blocks(t, N, M)
    if scheme.kind == PrefixKind.ZERO_PAD:
        pad = np.zeros((N, cp) + t.shape[1:], dtype=complex)
        return _flat(np.concatenate([blocks, pad], axis=1))
    head = blocks[:, M - cp:]
    if scheme.kind == PrefixKind.CHIRP_PERIODIC:
        n = np.arange(cp, dtype=float)
        phase = np.exp(-2j * np.pi * cfg.c1 * (M * M + 2 * M * (n - cp)))
        head = head * phase.reshape((1, cp) + (1,) * (t.ndim - 1))
    return _flat(np.concatenate([head, blocks], axis=1))


def remove_prefix(t: np.ndarray, scheme: PrefixScheme, cfg: ValidatedConfig) -> np.ndarray:
    """Strip prefixes; ZeroPad overlap-adds the tail onto the block head."""
    _check_scheme(scheme, cfg)
    t = np.asarray(t, dtype=complex)
    expected = framed_length(scheme, cfg)
    if t.shape[0] != expected:
        raise LengthMismatch(f"framed signal needs {expected} samples, got {t.shape[0]}")
    M, N, cp = cfg.M, cfg.N, scheme.length
    if scheme.kind == PrefixKind.REDUCED_CP:
        return t[cp:].copy()

    blocks = _blocks(t, N, M + cp)
    if scheme.kind == PrefixKind.ZERO_PAD:
        body = blocks[:, :M].copy()
        body[:, :cp] += blocks[:, M:]
        return _flat(body)
    return _flat(blocks[:, cp:].copy())


# ============================================================================
# DOMAIN TRANSFORMS
# ============================================================================

def _chirp_params(d: Domain, cfg: ValidatedConfig) -> Tuple[float, float]:
    if d == Domain.FRESNEL:
        slope = fresnel_slope(cfg.chirp_len)
        return slope, slope
    if not cfg.affine_defined:
        raise DomainMismatch(f"affine domain needs c1/c2, undefined for {cfg.waveform.value}")
    return cfg.c1, cfg.c2


def to_domain(x: np.ndarray, d: Domain, cfg: ValidatedConfig) -> np.ndarray:
    """Unitary analysis transform T_d applied to payload time samples (axis 0)."""
    x = np.asarray(x, dtype=complex)
    M, N = cfg.M, cfg.N
    if x.shape[0] != cfg.payload_len:
        raise LengthMismatch(f"domain transforms need {cfg.payload_len} payload samples, got {x.shape[0]}")
    if d == Domain.TIME:
        return x.copy()
    if d == Domain.FREQUENCY:
        return _flat(dft(_blocks(x, N, M), axis=1))
    if d == Domain.DELAY_DOPPLER:
        g = dft(_blocks(x, N, M), axis=0)
        return _flat(np.swapaxes(g, 0, 1))
    c1, c2 = _chirp_params(d, cfg)
    return _flat(affine_forward(_blocks(x, N, M), c1, c2, axis=1))


def from_domain(s: np.ndarray, d: Domain, cfg: ValidatedConfig) -> np.ndarray:
    """Adjoint T_d^H: domain symbols back to payload time samples (axis 0)."""
    s = np.asarray(s, dtype=complex)
    M, N = cfg.M, cfg.N
    if s.shape[0] != cfg.payload_len:
        raise LengthMismatch(f"domain transforms need {cfg.payload_len} symbols, got {s.shape[0]}")
    if d == Domain.TIME:
        return s.copy()
    if d == Domain.FREQUENCY:
        return _flat(idft(_blocks(s, N, M), axis=1))
    if d == Domain.DELAY_DOPPLER:
        g = np.swapaxes(_blocks(s, M, N), 0, 1)
        return _flat(idft(g, axis=0))
    c1, c2 = _chirp_params(d, cfg)
    return _flat(affine_inverse(_blocks(s, N, M), c1, c2, axis=1))


def domain_matrix(d: Domain, cfg: ValidatedConfig) -> np.ndarray:
    """Dense T_d (oracle scale)."""
    return to_domain(np.eye(cfg.payload_len, dtype=complex), d, cfg)


def _accepts(cfg: ValidatedConfig, d: Domain) -> bool:
    if d == cfg.multiplexing_domain:
        return True
    # The Fresnel domain is the affine domain at the fixed OCDM slope
    return cfg.waveform == Waveform.OCDM and d == Domain.AFFINE


# ============================================================================
# MODULATION
# ============================================================================

def modulate(sym: DomainSymbols, cfg: ValidatedConfig) -> DomainSymbols:
    """Multiplexing-domain symbols -> time samples with prefixes."""
    if not _accepts(cfg, sym.domain):
        raise DomainMismatch(
            f"{cfg.waveform.value} multiplexes in the {cfg.multiplexing_domain.value} domain, "
            f"got {sym.domain.value} symbols"
        )
    if sym.data.size != cfg.payload_len:
        raise LengthMismatch(f"expected {cfg.payload_len} symbols, got {sym.data.size}")
    x = build_kernel(cfg).apply(sym.data)
    return DomainSymbols(add_prefix(x, cfg.prefix, cfg), Domain.TIME, cfg)


def demodulate(t: DomainSymbols, cfg: ValidatedConfig) -> DomainSymbols:
    """Time samples with prefixes -> multiplexing-domain symbols."""
    if t.domain != Domain.TIME:
        raise DomainMismatch(f"demodulate expects Time samples, got {t.domain.value}")
    if t.data.size != cfg.frame_len:
        raise LengthMismatch(f"frame needs {cfg.frame_len} samples, got {t.data.size}")
    x = remove_prefix(t.data, cfg.prefix, cfg)
    return DomainSymbols(build_kernel(cfg).adjoint(x), cfg.multiplexing_domain, cfg)


def convert_domain(sym: DomainSymbols, target: Domain, cfg: ValidatedConfig) -> DomainSymbols:
    """Apply T_target . T_source^H; converting to the same domain is a no-op."""
    if target == sym.domain:
        return sym
    if sym.data.size != cfg.payload_len:
        raise LengthMismatch("convert_domain needs prefix-free payload samples")
    x = from_domain(sym.data, sym.domain, cfg)
    return DomainSymbols(to_domain(x, target, cfg), target, cfg)


def multiplexing_analysis(x: np.ndarray, cfg: ValidatedConfig) -> np.ndarray:
    """Payload time samples -> multiplexing-domain symbols (kernel adjoint)."""
    return build_kernel(cfg).adjoint(x)
