"""
Result records: hashing, JSON persistence and tabular export.

The reproducibility digest covers everything except ``run_info``
(timestamp, wall-clock, worker count), so two runs of the same scenario
and seed produce records whose digests match at any worker count.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, Union

import pandas as pd
import yaml
from pydantic import ValidationError

from wavelab.errors import ScenarioError
from wavelab.schemas.scenario_schemas import ExperimentResult, Scenario

logger = logging.getLogger(__name__)

EXPORT_COLUMNS = ["snr_db", "ber", "nmse_db", "flops", "reduction_db", "trials", "stderr"]


def canonical_json(payload: Dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def scenario_hash(scenario: Scenario) -> str:
    """sha256 of the canonical JSON form of the scenario."""
    return hashlib.sha256(canonical_json(scenario.model_dump(mode="json")).encode("utf-8")).hexdigest()


def record_digest(result: ExperimentResult) -> str:
    """Digest of a result record with ``run_info`` excluded."""
    payload = result.model_dump(mode="json", exclude={"run_info"})
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


# ============================================================================
# SCENARIO FILES
# ============================================================================

def load_scenarios(path: Union[str, Path]) -> list:
    """Parse every YAML document of a ``.scn`` file into a ``Scenario``."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            documents = [doc for doc in yaml.safe_load_all(f) if doc is not None]
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path.name}: invalid YAML ({exc})") from exc
    if not documents:
        raise ScenarioError(f"{path.name}: no scenario documents")
    scenarios = []
    for i, doc in enumerate(documents):
        try:
            scenarios.append(Scenario.model_validate(doc))
        except ValidationError as exc:
            raise ScenarioError(f"{path.name} document {i + 1}: {exc}") from exc
    return scenarios


# ============================================================================
# RESULT RECORDS
# ============================================================================

def write_result(result: ExperimentResult, out_dir: Union[str, Path]) -> Path:
    """Write ``<out_dir>/<scenario name>.json`` (indent 2, sorted keys)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = result.scenario.get("name", result.scenario_hash[:12])
    path = out_dir / f"{name}.json"
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(result.model_dump(mode="json"), indent=2, sort_keys=True))
        f.write("\n")
    logger.info("result written to %s", path)
    return path


def read_result(path: Union[str, Path]) -> ExperimentResult:
    with open(path, "r", encoding="utf-8") as f:
        try:
            return ExperimentResult.model_validate(json.load(f))
        except (json.JSONDecodeError, ValidationError) as exc:
            raise ScenarioError(f"{Path(path).name}: not a result record ({exc})") from exc


def result_frame(result: ExperimentResult) -> pd.DataFrame:
    rows = [row.model_dump() for row in result.rows]
    return pd.DataFrame(rows, columns=EXPORT_COLUMNS)


def export_plotdata(result: ExperimentResult, out: Union[str, Path]) -> Path:
    """Flat CSV with one row per SNR point."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result_frame(result).to_csv(out, index=False)
    return out


def print_summary(result: ExperimentResult) -> None:
    """Summary table on stdout."""
    name = result.scenario.get("name", "")
    print(f"\n{'=' * 70}")
    print(f"RESULT: {name}  ({result.scenario_hash[:12]})")
    print(f"{'=' * 70}")
    print(result_frame(result).to_string(index=False, float_format=lambda v: f"{v:.4g}"))
    for key, value in sorted(result.summary.items()):
        print(f"   {key}: {value}")
    print(f"{'=' * 70}\n")
