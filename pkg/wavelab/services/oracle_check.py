"""
Brute-force equivalence suite (small scale).

Compares every fast path against an explicit dense construction:
staged kernel vs reference matrices, modulation round trips, kernel
unitarity, direct channel filtering vs the impulse-column matrix, sparse
prefix operators vs the array implementation, and fast effective-channel
synthesis vs T_d (R H C) T_d^H.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from wavelab.calculators.channel import (
    Path,
    apply_channel,
    channel_from_paths,
    channel_matrix,
    effective_channel,
    effective_time_matrix,
    prefix_operators,
    sparse_channel_matrix,
)
from wavelab.calculators.transforms import (
    DomainSymbols,
    add_prefix,
    build_kernel,
    demodulate,
    domain_matrix,
    kernel_matrix,
    modulate,
    reference_matrix,
    remove_prefix,
)
from wavelab.frame import validate_config
from wavelab.schemas.frame_schemas import Domain, FrameConfig, PrefixKind, PrefixScheme, ValidatedConfig, Waveform

logger = logging.getLogger(__name__)

GRID_SIZES = ((8, 4), (16, 2), (64, 1))
KERNEL_TOL = 1e-9
ROUND_TRIP_TOL = 1e-10
CHANNEL_TOL = 1e-9

PREFIX_FOR = {
    Waveform.OFDM: PrefixKind.FULL_CP,
    Waveform.DFT_S_OFDM: PrefixKind.ZERO_PAD,
    Waveform.OTFS: PrefixKind.REDUCED_CP,
    Waveform.AFDM: PrefixKind.CHIRP_PERIODIC,
    Waveform.OCDM: PrefixKind.CHIRP_PERIODIC,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)


def oracle_configs(sizes: Iterable = GRID_SIZES) -> List[ValidatedConfig]:
    configs = []
    for M, N in sizes:
        for waveform in Waveform:
            prefix = PrefixScheme(kind=PREFIX_FOR[waveform], length=min(3, M - 1))
            configs.append(
                validate_config(
                    FrameConfig(
                        waveform=waveform,
                        M=M,
                        N=N,
                        delta_f=15e3,
                        prefix=prefix,
                        alpha_max=1,
                        dft_s_subband=M // 2 if waveform == Waveform.DFT_S_OFDM else None,
                    )
                )
            )
    return configs


def _random_channel(cfg: ValidatedConfig, rng: np.random.Generator):
    paths = [
        Path(
            complex(rng.standard_normal(), rng.standard_normal()),
            float(rng.uniform(0, min(cfg.prefix.length, cfg.M - 1))),
            float(rng.uniform(-1.5, 1.5)),
        )
        for _ in range(3)
    ]
    return channel_from_paths(paths, cfg)


def check_config(cfg: ValidatedConfig, rng: np.random.Generator) -> List[CheckResult]:
    label = f"{cfg.waveform.value} M={cfg.M} N={cfg.N}"
    size = cfg.payload_len
    results = []

    W = kernel_matrix(build_kernel(cfg))
    results.append(CheckResult(f"kernel vs reference [{label}]", float(np.max(np.abs(W - reference_matrix(cfg)))), KERNEL_TOL))
    results.append(
        CheckResult(f"kernel unitarity [{label}]", float(np.max(np.abs(W.conj().T @ W - np.eye(size)))), ROUND_TRIP_TOL)
    )

    s = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    sym = DomainSymbols(s, cfg.multiplexing_domain, cfg)
    back = demodulate(modulate(sym, cfg), cfg)
    results.append(CheckResult(f"round trip [{label}]", float(np.max(np.abs(back.data - s))), ROUND_TRIP_TOL))

    C, R = prefix_operators(cfg)
    x = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    framed = add_prefix(x, cfg.prefix, cfg)
    err = max(np.max(np.abs(C @ x - framed)), np.max(np.abs(R @ framed - remove_prefix(framed, cfg.prefix, cfg))))
    results.append(CheckResult(f"prefix operators [{label}]", float(err), ROUND_TRIP_TOL))

    ch = _random_channel(cfg, rng)
    t = rng.standard_normal(cfg.frame_len) + 1j * rng.standard_normal(cfg.frame_len)
    direct = apply_channel(t, ch)
    results.append(
        CheckResult(f"channel filter vs matrix [{label}]", float(np.max(np.abs(direct - channel_matrix(ch) @ t))), CHANNEL_TOL)
    )
    sparse_err = np.max(np.abs(sparse_channel_matrix(ch).toarray() - channel_matrix(ch)))
    results.append(CheckResult(f"sparse vs dense channel [{label}]", float(sparse_err), CHANNEL_TOL))

    d = cfg.multiplexing_domain if cfg.waveform != Waveform.DFT_S_OFDM else Domain.FREQUENCY
    T = domain_matrix(d, cfg)
    dense = T @ effective_time_matrix(ch, cfg).toarray() @ T.conj().T
    results.append(
        CheckResult(f"effective channel [{label}]", float(np.max(np.abs(effective_channel(ch, cfg, d) - dense))), CHANNEL_TOL)
    )
    return results


def run_oracle_check(seed: int = 0, sizes: Iterable = GRID_SIZES) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for cfg in oracle_configs(sizes):
        results.extend(check_config(cfg, rng))
    failed = [r for r in results if not r.passed]
    if failed:
        logger.warning("%d of %d oracle checks failed", len(failed), len(results))
    return results
