"""
Experiment Runner
=================

Monte-Carlo sweeps over SNR for one scenario:

    data -> pilot frame -> modulate -> channel + AWGN -> remove prefix
         -> estimate (CE domain) -> synthesize H_d (equalization domain)
         -> equalize -> map back to the symbol domain -> slice -> count

Seeding (numpy SeedSequence spawn keys under the scenario seed):

    (0, trial)             data bits
    (1, trial, 0)          channel realization
    (1, trial, 1)          birth-death churn
    (2, snr_index, trial)  noise

Data and channel are shared by every SNR point of a trial so curves are
paired.  Trials run on a thread pool and are reduced in trial order, so
results do not depend on the worker count.

SNR is Es/N0 per data symbol (unit-energy QPSK): noise variance
10^(-snr/10) in every unitary domain.  Eb/N0 scenarios add 10*log10(2).
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import List, Optional, Tuple

import numpy as np

from wavelab import __version__, config
from wavelab.calculators.base import BITS_PER_SYMBOL, qpsk_map, qpsk_slice, random_bits
from wavelab.calculators.channel import LtvChannel, Path, apply_channel, make_birth_death, make_profile
from wavelab.calculators.equalization import (
    EqualizerOutput,
    FlopReport,
    equalize_mmse,
    equalize_mmse_banded,
    equalize_one_tap,
    flop_report,
)
from wavelab.calculators.estimation import (
    PathEstimate,
    PilotMeta,
    build_pilot_frame,
    estimate_affine,
    estimate_dd_embedded,
    estimate_frequency_ls,
    genie_estimate,
    nmse,
    synthesize_effective,
)
from wavelab.calculators.transforms import (
    DomainSymbols,
    demodulate,
    from_domain,
    modulate,
    multiplexing_analysis,
    remove_prefix,
    to_domain,
)
from wavelab.errors import PreconditionError, ScenarioError
from wavelab.frame import validate_config
from wavelab.schemas.frame_schemas import Domain, ValidatedConfig, Waveform
from wavelab.schemas.pilot_schemas import PilotKind
from wavelab.schemas.scenario_schemas import (
    EqualizerMethod,
    EstimationDomain,
    ExperimentResult,
    ResultRow,
    Scenario,
    ScenarioKind,
    SnrReference,
)
from wavelab.services.result_store import scenario_hash

logger = logging.getLogger(__name__)

PILOT_FOR_ESTIMATOR = {
    EstimationDomain.FREQUENCY: PilotKind.BLOCK_FREQUENCY,
    EstimationDomain.DELAY_DOPPLER: PilotKind.EMBEDDED_DD,
    EstimationDomain.AFFINE: PilotKind.EMBEDDED_AFFINE,
}

FLOOR_LOW_SNR = 20.0
FLOOR_HIGH_SNR = 40.0
DIVERSITY_WINDOW_DB = 10.0


# ============================================================================
# PREPARATION
# ============================================================================

@dataclass(frozen=True)
class PreparedScenario:
    scenario: Scenario
    cfg: ValidatedConfig
    eq_domain: Domain
    symbol_domain: Domain
    n_data: int


@dataclass
class TrialOutcome:
    bit_errors: int = 0
    bits: int = 0
    nmse_ratio: Optional[float] = None
    flops: Optional[FlopReport] = None
    warnings: List[str] = field(default_factory=list)


def prepare(s: Scenario) -> PreparedScenario:
    """Validate the frame and the estimator/pilot/equalizer combination."""
    cfg = validate_config(s.frame)
    est_domain = s.estimation.domain
    if est_domain != EstimationDomain.GENIE:
        if s.pilot is None:
            raise ScenarioError(f"{est_domain.value} estimation needs a pilot scheme")
        if s.pilot.kind != PILOT_FOR_ESTIMATOR[est_domain]:
            raise ScenarioError(f"{est_domain.value} estimation cannot use a {s.pilot.kind.value} pilot")
    eq_domain = s.equalization.domain or cfg.multiplexing_domain
    if eq_domain == Domain.AFFINE and not cfg.affine_defined:
        raise ScenarioError(f"affine equalization needs chirp parameters for {cfg.waveform.value}")

    if s.pilot is not None:
        _, meta = build_pilot_frame(s.pilot, [], cfg)
        symbol_domain, n_data = meta.domain, int(meta.data_indices.size)
    else:
        symbol_domain, n_data = cfg.multiplexing_domain, cfg.payload_len
    if s.kind == ScenarioKind.BER and n_data == 0:
        raise ScenarioError(f"{s.name}: the pilot structure leaves no room for data")
    return PreparedScenario(s, cfg, eq_domain, symbol_domain, n_data)


def _seq(s: Scenario, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(s.seed, spawn_key=key)


def make_trial_channel(s: Scenario, cfg: ValidatedConfig, trial: int) -> LtvChannel:
    spec = s.channel
    paths = None
    if spec.paths:
        paths = [Path(complex(p.gain[0], p.gain[1]), p.delay, p.doppler) for p in spec.paths]
    ch = make_profile(
        spec.profile,
        cfg,
        spec.doppler_max_hz,
        seed=_seq(s, 1, trial, 0),
        fractional=spec.fractional,
        doppler_spectrum=spec.doppler_spectrum,
        paths=paths,
    )
    if spec.birth_death is not None:
        ch = make_birth_death(ch, spec.birth_death.segments, spec.birth_death.churn, seed=_seq(s, 1, trial, 1))
    return ch


def es_n0_db(s: Scenario, snr_db: float) -> float:
    if s.snr_reference == SnrReference.EB_N0:
        return snr_db + 10.0 * math.log10(BITS_PER_SYMBOL[s.modulation])
    return snr_db


# ============================================================================
# ONE TRIAL
# ============================================================================

def _native(cfg: ValidatedConfig, d: Domain) -> bool:
    """True when the kernel adjoint coincides with the domain transform T_d."""
    return d == cfg.multiplexing_domain and cfg.waveform != Waveform.DFT_S_OFDM


def _transmit_frame(prep: PreparedScenario, data: np.ndarray) -> Tuple[DomainSymbols, Optional[PilotMeta]]:
    s, cfg = prep.scenario, prep.cfg
    if s.pilot is None:
        return DomainSymbols(data, cfg.multiplexing_domain, cfg), None
    frame, meta = build_pilot_frame(s.pilot, data, cfg)
    if frame.domain == cfg.multiplexing_domain or (cfg.waveform == Waveform.OCDM and frame.domain == Domain.AFFINE):
        return frame, meta
    mux = multiplexing_analysis(from_domain(frame.data, frame.domain, cfg), cfg)
    return DomainSymbols(mux, cfg.multiplexing_domain, cfg), meta


def estimate_channel(
    prep: PreparedScenario, payload: np.ndarray, meta: Optional[PilotMeta], ch: LtvChannel, noise_var: float
) -> PathEstimate:
    """Run the scenario's estimator on prefix-free received samples."""
    s, cfg = prep.scenario, prep.cfg
    domain = s.estimation.domain
    if domain == EstimationDomain.GENIE:
        return genie_estimate(ch, prep.eq_domain)
    if domain == EstimationDomain.FREQUENCY:
        rx = to_domain(payload, Domain.FREQUENCY, cfg)[:cfg.M]
        return estimate_frequency_ls(rx, meta.known, meta.pilot_bins, s.estimation.interpolation)
    rx = DomainSymbols(to_domain(payload, meta.domain, cfg), meta.domain, cfg)
    estimator = estimate_dd_embedded if domain == EstimationDomain.DELAY_DOPPLER else estimate_affine
    return estimator(
        rx,
        meta,
        threshold_sigmas=s.estimation.threshold_sigmas,
        noise_var=noise_var,
        compensate_phase=s.estimation.compensate_phase,
    )


def _equalize(z: np.ndarray, H: np.ndarray, prep: PreparedScenario, noise_var: float) -> EqualizerOutput:
    method = prep.scenario.equalization.method
    if method == EqualizerMethod.ONE_TAP:
        return equalize_one_tap(z, np.diag(H), noise_var)
    if method == EqualizerMethod.BANDED:
        return equalize_mmse_banded(z, H, noise_var, prep.scenario.equalization.band)
    return equalize_mmse(z, H, noise_var)


def equalize_frame(
    prep: PreparedScenario, est: PathEstimate, y: DomainSymbols, payload: np.ndarray, noise_var: float
) -> Tuple[np.ndarray, EqualizerOutput]:
    """Equalize in the equalization domain and return symbol-domain estimates."""
    cfg, d_e, d_s = prep.cfg, prep.eq_domain, prep.symbol_domain
    same = d_e == d_s and (d_s != cfg.multiplexing_domain or _native(cfg, d_s))
    if same and d_s == cfg.multiplexing_domain:
        z = demodulate(y, cfg).data
    else:
        z = to_domain(payload, d_e, cfg)

    if est.is_per_bin and cfg.is_block_waveform and d_e != Domain.DELAY_DOPPLER:
        # static estimate: one M x M system shared by every block
        if prep.scenario.equalization.method == EqualizerMethod.ONE_TAP and d_e == Domain.FREQUENCY:
            out = equalize_one_tap(z, est.frequency_response(cfg), noise_var)
        else:
            H_b = synthesize_effective(est, cfg, d_e, block=True)
            blocks = [_equalize(z[i * cfg.M:(i + 1) * cfg.M], H_b, prep, noise_var) for i in range(cfg.N)]
            out = EqualizerOutput(
                symbols=np.concatenate([b.symbols for b in blocks]),
                flops=blocks[0].flops,
                warnings=tuple(sorted({w for b in blocks for w in b.warnings})),
                truncated_mass=max(b.truncated_mass for b in blocks),
            )
    else:
        out = _equalize(z, synthesize_effective(est, cfg, d_e), prep, noise_var)

    s_hat = out.symbols
    if same:
        return s_hat, out
    x_hat = from_domain(s_hat, d_e, cfg)
    if d_s == cfg.multiplexing_domain:
        return multiplexing_analysis(x_hat, cfg), out
    return to_domain(x_hat, d_s, cfg), out


def run_trial(prep: PreparedScenario, trial: int, equalize: bool = True) -> List[TrialOutcome]:
    """One data/channel realization evaluated at every SNR point."""
    s, cfg = prep.scenario, prep.cfg
    rng = np.random.default_rng(_seq(s, 0, trial))
    bits = random_bits(rng, prep.n_data * BITS_PER_SYMBOL[s.modulation])
    tx, meta = _transmit_frame(prep, qpsk_map(bits))
    x = modulate(tx, cfg)
    ch = make_trial_channel(s, cfg, trial)
    data_idx = meta.data_indices[:prep.n_data] if meta is not None else np.arange(prep.n_data)

    outcomes = []
    for i, snr in enumerate(s.snr_db):
        es_n0 = es_n0_db(s, snr)
        nv = 0.0 if math.isinf(es_n0) and es_n0 > 0 else 10.0 ** (-es_n0 / 10.0)
        y = apply_channel(x, ch, seed=_seq(s, 2, i, trial), noise_var=nv)
        payload = remove_prefix(y.data, cfg.prefix, cfg)
        est = estimate_channel(prep, payload, meta, ch, nv)

        outcome = TrialOutcome()
        if s.kind != ScenarioKind.BER:
            outcome.nmse_ratio = 10.0 ** (nmse(est, ch, cfg, prep.eq_domain) / 10.0)
        if equalize:
            s_hat, out = equalize_frame(prep, est, y, payload, nv)
            decided = qpsk_slice(s_hat[data_idx])
            outcome.bit_errors = int(np.count_nonzero(decided != bits))
            outcome.bits = int(bits.size)
            outcome.flops = out.flops
            outcome.warnings = list(out.warnings)
        outcomes.append(outcome)
    logger.debug("%s trial %d done", s.name, trial)
    return outcomes


def _run_trials(prep: PreparedScenario, equalize: bool, workers: Optional[int]) -> List[List[TrialOutcome]]:
    workers = workers or config.WORKERS
    trials = range(prep.scenario.trials)
    if workers == 1:
        return [run_trial(prep, t, equalize) for t in trials]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: run_trial(prep, t, equalize), trials))


# ============================================================================
# REDUCTION
# ============================================================================

def _nmse_db(ratios: List[float]) -> float:
    mean = float(np.mean(ratios))
    if mean <= 0:
        return config.NMSE_FLOOR_DB
    return max(10.0 * math.log10(mean), config.NMSE_FLOOR_DB)


def _reduce(prep: PreparedScenario, per_trial: List[List[TrialOutcome]], paired: Optional[FlopReport]) -> List[ResultRow]:
    s = prep.scenario
    rows = []
    for i, snr in enumerate(s.snr_db):
        point = [trial[i] for trial in per_trial]
        row = ResultRow(snr_db=snr, trials=len(point))
        bits = sum(o.bits for o in point)
        if bits:
            errors = sum(o.bit_errors for o in point)
            p = errors / bits
            row.bits, row.bit_errors, row.ber = bits, errors, p
            row.stderr = math.sqrt(p * (1.0 - p) / bits)
        ratios = [o.nmse_ratio for o in point if o.nmse_ratio is not None]
        if ratios:
            row.nmse_db = _nmse_db(ratios)
        report = paired or point[0].flops
        if report is not None:
            row.flops, row.reduction_db, row.flop_report = report.flops, report.reduction_db, report.to_record()
        row.warnings = sorted({w for o in point for w in o.warnings})
        logger.info(
            "%s snr=%g ber=%s nmse=%s", s.name, snr,
            f"{row.ber:.3e}" if row.ber is not None else "-",
            f"{row.nmse_db:.2f}" if row.nmse_db is not None else "-",
        )
        rows.append(row)
    return rows


def diversity_slope(rows: List[ResultRow], window_db: float = DIVERSITY_WINDOW_DB) -> Optional[float]:
    """Least-squares slope of -log10(BER) per 10 dB over the top ``window_db`` of the sweep."""
    pts = [(r.snr_db, r.ber) for r in rows if r.ber and r.ber > 0 and math.isfinite(r.snr_db)]
    if not pts:
        return None
    top = max(snr for snr, _ in pts)
    pts = [(snr, ber) for snr, ber in pts if snr >= top - window_db]
    if len(pts) < 2:
        return None
    snr, ber = np.array(pts).T
    return float(-np.polyfit(snr / 10.0, np.log10(ber), 1)[0])


def _result(prep: PreparedScenario, rows: List[ResultRow], summary: dict, started: float, workers: int) -> ExperimentResult:
    return ExperimentResult(
        tool_version=__version__,
        scenario_hash=scenario_hash(prep.scenario),
        scenario=prep.scenario.model_dump(mode="json"),
        rows=rows,
        summary=summary,
        run_info={
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_clock_s": round(time.perf_counter() - started, 3),
            "workers": workers,
        },
    )


# ============================================================================
# SWEEPS
# ============================================================================

def run_ber_sweep(s: Scenario, workers: Optional[int] = None) -> ExperimentResult:
    """Raw (uncoded) BER per SNR point."""
    started = time.perf_counter()
    prep = prepare(s)
    rows = _reduce(prep, _run_trials(prep, True, workers), None)
    summary = {
        "bits_per_frame": prep.n_data * BITS_PER_SYMBOL[s.modulation],
        "diversity_slope": diversity_slope(rows),
    }
    return _result(prep, rows, summary, started, workers or config.WORKERS)


def paired_flop_report(prep: PreparedScenario) -> FlopReport:
    eq = prep.scenario.equalization
    return flop_report(eq.method.value, prep.cfg.payload_len, eq.band)


def run_nmse_sweep(s: Scenario, workers: Optional[int] = None) -> ExperimentResult:
    """Estimation NMSE per SNR point with the paired equalizer's flop model."""
    started = time.perf_counter()
    prep = prepare(s)
    report = paired_flop_report(prep)
    rows = _reduce(prep, _run_trials(prep, False, workers), report)
    summary = {"reduction_db": report.reduction_db, "flops": report.flops}
    return _result(prep, rows, summary, started, workers or config.WORKERS)


def _improvement(rows: List[ResultRow], attr: str) -> float:
    by_snr = {r.snr_db: getattr(r, attr) for r in rows}
    return by_snr[FLOOR_LOW_SNR] - by_snr[FLOOR_HIGH_SNR]


def run_birth_death_study(s: Scenario, workers: Optional[int] = None) -> ExperimentResult:
    """NMSE under within-frame path churn, with a churn-free control.

    The summary stores NMSE(20 dB) - NMSE(40 dB) for both runs; an
    improvement of at most 3 dB marks an error floor.
    """
    bd = s.channel.birth_death
    if bd is None or bd.segments < 2 or bd.churn <= 0:
        raise PreconditionError("birth-death study needs >= 2 segments and churn > 0")
    if FLOOR_LOW_SNR not in s.snr_db or FLOOR_HIGH_SNR not in s.snr_db:
        raise PreconditionError("birth-death study needs 20 dB and 40 dB in the SNR grid")
    started = time.perf_counter()
    prep = prepare(s)
    rows = _reduce(prep, _run_trials(prep, False, workers), paired_flop_report(prep))

    control = s.model_copy(
        update={"channel": s.channel.model_copy(update={"birth_death": bd.model_copy(update={"churn": 0.0})})}
    )
    control_prep = prepare(control)
    control_rows = _reduce(control_prep, _run_trials(control_prep, False, workers), None)
    for row, ctrl in zip(rows, control_rows):
        row.nmse_control_db = ctrl.nmse_db

    study = _improvement(rows, "nmse_db")
    ctrl = _improvement(rows, "nmse_control_db")
    summary = {
        "improvement_20_40_db": study,
        "control_improvement_20_40_db": ctrl,
        "floor_delta_db": -study,
        "control_floor_delta_db": -ctrl,
        "floor_detected": study <= 3.0,
    }
    return _result(prep, rows, summary, started, workers or config.WORKERS)


def run_scenario(s: Scenario, workers: Optional[int] = None) -> ExperimentResult:
    runners = {
        ScenarioKind.BER: run_ber_sweep,
        ScenarioKind.NMSE: run_nmse_sweep,
        ScenarioKind.BIRTH_DEATH: run_birth_death_study,
    }
    logger.info("running %s (%s, %d trials x %d SNR points)", s.name, s.kind.value, s.trials, len(s.snr_db))
    return runners[s.kind](s, workers)
