"""
Command-line entry point.

    python -m wavelab run <scenario.scn> [--out DIR] [--workers N]
    python -m wavelab analyze <scenario.scn>
    python -m wavelab oracle-check
    python -m wavelab list-scenarios
    python -m wavelab export-plotdata <result.json> <out.csv>

Exit codes: 0 success, 1 runtime error, 2 usage error or missing file.
"""

import argparse
import logging
from pathlib import Path
from typing import List, Optional

from wavelab import __version__, config
from wavelab.calculators.analyzer import overspread_report, pulse_response, resolution_report, tap_sparsity
from wavelab.calculators.channel import effective_channel
from wavelab.errors import WaveLabError
from wavelab.schemas.frame_schemas import Domain
from wavelab.services.experiment_runner import make_trial_channel, prepare, run_scenario
from wavelab.services.oracle_check import run_oracle_check
from wavelab.services.result_store import (
    export_plotdata,
    load_scenarios,
    print_summary,
    read_result,
    write_result,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {path}")
    return p


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def cmd_run(args) -> int:
    for scenario in load_scenarios(_existing(args.scenario)):
        result = run_scenario(scenario, workers=args.workers)
        path = write_result(result, args.out)
        print_summary(result)
        print(f"   Result file: {path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    for scenario in load_scenarios(_existing(args.scenario)):
        prep = prepare(scenario)
        cfg = prep.cfg
        ch = make_trial_channel(scenario, cfg, 0)
        res = resolution_report(cfg)
        spread = overspread_report(ch, cfg)

        print(f"\n{'=' * 70}")
        print(f"ANALYSIS: {scenario.name}  ({cfg.waveform.value} M={cfg.M} N={cfg.N})")
        print(f"{'=' * 70}")
        print(f"   Delay resolution: {res['delay_res_s'] * 1e9:.2f} ns")
        for domain, hz in res["doppler_res_hz"].items():
            print(f"   Doppler resolution ({domain}): {hz:.2f} Hz")
        print(f"   DD / Frequency ratio: {res['ratio']}")
        print(f"   Spread factor: {spread['spread_factor']:.3e} (overspread: {spread['overspread']})")

        domains = [Domain.FREQUENCY, Domain.DELAY_DOPPLER] + ([Domain.AFFINE] if cfg.affine_defined else [])
        if cfg.frame_len <= config.ORACLE_MAX_FRAME:
            for d in domains:
                counts, sparsity = tap_sparsity(effective_channel(ch, cfg, d))
                print(f"   Taps per row ({d.value}): max {max(counts)}, sparsity {sparsity:.4f}")
        else:
            logger.warning("frame of %d samples exceeds the dense limit; tap sparsity skipped", cfg.frame_len)

        d = cfg.multiplexing_domain
        for frac_delay, frac_doppler in ((0.0, 0.0), (0.0, 0.5), (0.5, 0.0), (0.5, 0.5)):
            profile = pulse_response(cfg, d, frac_delay, frac_doppler)
            print(
                f"   Pulse ({d.value}, delay+{frac_delay}, Doppler+{frac_doppler}): "
                f"peak {profile.peak_index:.2f}, -3 dB width {profile.mainlobe_width}, "
                f"secondary spacing {profile.secondary_spacing}"
            )
        print(f"{'=' * 70}\n")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    results = run_oracle_check(seed=args.seed)
    failed = [r for r in results if not r.passed]
    print(f"\n{'=' * 70}")
    print("ORACLE CHECK")
    print(f"{'=' * 70}")
    for r in results:
        status = "ok  " if r.passed else "FAIL"
        if args.verbose or not r.passed:
            print(f"   {status} {r.name}: {r.max_error:.2e} (tol {r.tolerance:.0e})")
    print(f"   {len(results) - len(failed)}/{len(results)} checks passed")
    print(f"{'=' * 70}\n")
    return EXIT_OK if not failed else EXIT_RUNTIME


def cmd_list_scenarios(args) -> int:
    directory = Path(args.dir)
    for path in sorted(directory.glob("*.scn")):
        for scenario in load_scenarios(path):
            print(f"{path.name:24s} {scenario.name:28s} {scenario.kind.value:12s} {scenario.frame.waveform.value}")
    return EXIT_OK


def cmd_export_plotdata(args) -> int:
    out = export_plotdata(read_result(_existing(args.result)), args.out)
    print(f"   Plot data written to {out}")
    return EXIT_OK


# ============================================================================
# PARSER
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavelab", description="Waveform laboratory")
    parser.add_argument("--version", action="version", version=f"wavelab {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", help="INFO logging and configuration banner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every scenario in a .scn file")
    run.add_argument("scenario")
    run.add_argument("--out", default=str(config.RESULTS_DIR), help="result directory")
    run.add_argument("--workers", type=int, default=None, help="trial worker threads")
    run.set_defaults(func=cmd_run)

    analyze = sub.add_parser("analyze", help="representation reports for a scenario's frame and channel")
    analyze.add_argument("scenario")
    analyze.set_defaults(func=cmd_analyze)

    oracle = sub.add_parser("oracle-check", help="brute-force equivalence suite")
    oracle.add_argument("--seed", type=int, default=0)
    oracle.set_defaults(func=cmd_oracle_check)

    listing = sub.add_parser("list-scenarios", help="list shipped scenarios")
    listing.add_argument("--dir", default=str(config.SCENARIO_DIR))
    listing.set_defaults(func=cmd_list_scenarios)

    export = sub.add_parser("export-plotdata", help="flatten a result record to CSV")
    export.add_argument("result")
    export.add_argument("out")
    export.set_defaults(func=cmd_export_plotdata)
    return parser


def cli_main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    config.setup_logging(logging.INFO if args.verbose else logging.WARNING)
    if args.verbose:
        config.print_config_status()
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be >= 1")
        return EXIT_USAGE

    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}")
        return EXIT_USAGE
    except WaveLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}")
        return EXIT_RUNTIME
