# wavelab/config.py
"""
Configuration Settings
======================
Environment variables, numeric defaults and logging setup
"""
import logging
import os
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# ============================================================================
# WORKERS (the only environment-driven setting)
# ============================================================================

WORKERS = max(1, int(os.getenv("WAVELAB_WORKERS", "1")))

# ============================================================================
# PATHS
# ============================================================================

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = PROJECT_ROOT / "data"
SCENARIO_DIR = PROJECT_ROOT / "scenarios"
RESULTS_DIR = PROJECT_ROOT / "results"

PROFILE_TABLES = {
    "EVA": DATA_DIR / "eva.csv",
    "TdlUrban": DATA_DIR / "tdl_urban.csv",
}

# ============================================================================
# NUMERIC DEFAULTS
# ============================================================================

# Dense matrices (channel_matrix, effective_channel) are limited to this frame length
ORACLE_MAX_FRAME = 4096

NMSE_FLOOR_DB = -200.0

FRACTIONAL_DELAY_TAPS = 63

DEFAULT_PILOT_BOOST_DB = 10.0
DEFAULT_THRESHOLD_SIGMAS = 3.0

# Detections below this fraction of the pilot amplitude are numerical residue
DETECTION_FLOOR = 1e-8

# Band truncation above this Frobenius fraction is flagged
BAND_TRUNCATION_LIMIT = 0.01

# ============================================================================
# LOGGING
# ============================================================================

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: int = logging.WARNING) -> None:
    """Install a single stream handler on the package logger."""
    logger = logging.getLogger("wavelab")
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
    logger.setLevel(level)


# ============================================================================
# PRINT CONFIGURATION STATUS
# ============================================================================

def print_config_status():
    """Print configuration status (CLI --verbose)"""
    print(f"\n{'=' * 70}")
    print("CONFIGURATION STATUS")
    print(f"{'=' * 70}")
    print(f"   Workers: {WORKERS}")
    print(f"   Data Directory: {DATA_DIR}")
    print(f"   Scenario Directory: {SCENARIO_DIR}")
    print(f"   Results Directory: {RESULTS_DIR}")
    print(f"   Oracle Frame Limit: {ORACLE_MAX_FRAME} samples")
    print(f"   Fractional Delay Taps: {FRACTIONAL_DELAY_TAPS}")
    print(f"   Pilot Boost: {DEFAULT_PILOT_BOOST_DB} dB")
    print(f"   Detection Threshold: {DEFAULT_THRESHOLD_SIGMAS} sigma")
    print(f"{'=' * 70}\n")
