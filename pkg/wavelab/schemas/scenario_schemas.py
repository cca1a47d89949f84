"""
Pydantic schemas for scenario files and result records (Pydantic v2).

Scenario files (``.scn``) are YAML; a file may hold several documents,
one scenario each.  Result records are written as JSON.
"""

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from wavelab import config
from wavelab.schemas.frame_schemas import Domain, FrameConfig
from wavelab.schemas.pilot_schemas import PilotScheme

SCENARIO_SCHEMA_VERSION = 1
RESULT_SCHEMA_VERSION = 1


class ScenarioKind(str, Enum):
    BER = "ber"
    NMSE = "nmse"
    BIRTH_DEATH = "birth_death"


class EstimationDomain(str, Enum):
    FREQUENCY = "Frequency"
    DELAY_DOPPLER = "DelayDoppler"
    AFFINE = "Affine"
    GENIE = "Genie"


class EqualizerMethod(str, Enum):
    ONE_TAP = "one_tap"
    MMSE = "mmse"
    BANDED = "banded"


class SnrReference(str, Enum):
    ES_N0 = "EsN0"
    EB_N0 = "EbN0"


# ============================================================================
# SCENARIO
# ============================================================================

class PathSpec(BaseModel):
    """One explicit path of a Custom profile."""

    gain: List[float] = Field([1.0, 0.0], description="[real, imag]")
    delay: float = Field(0.0, ge=0, description="Delay in samples")
    doppler: float = Field(0.0, description="Doppler in delay-Doppler bins")

    model_config = ConfigDict(frozen=True)

    @field_validator("gain")
    @classmethod
    def _two_parts(cls, v):
        if len(v) != 2:
            raise ValueError("gain must be [real, imag]")
        return v


class BirthDeathSpec(BaseModel):
    segments: int = Field(1, ge=1)
    churn: float = Field(0.0, ge=0.0, le=1.0)

    model_config = ConfigDict(frozen=True)


class ChannelSpec(BaseModel):
    profile: str = Field("Identity", description="TdlUrban, EVA, Custom or Identity")
    doppler_max_hz: float = Field(0.0, ge=0.0)
    fractional: bool = Field(True, description="Keep off-grid delays and Dopplers")
    doppler_spectrum: str = Field("uniform", description="uniform or jakes")
    paths: Optional[List[PathSpec]] = None
    birth_death: Optional[BirthDeathSpec] = None

    model_config = ConfigDict(frozen=True)


class EstimationSpec(BaseModel):
    domain: EstimationDomain = EstimationDomain.GENIE
    threshold_sigmas: float = Field(config.DEFAULT_THRESHOLD_SIGMAS, gt=0)
    interpolation: str = Field("linear", description="linear or dft (BlockFrequency only)")
    compensate_phase: bool = True

    model_config = ConfigDict(frozen=True)


class EqualizationSpec(BaseModel):
    domain: Optional[Domain] = Field(None, description="Defaults to the multiplexing domain")
    method: EqualizerMethod = EqualizerMethod.MMSE
    band: Optional[int] = Field(None, ge=0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _band_for_banded(self):
        if self.method == EqualizerMethod.BANDED and self.band is None:
            raise ValueError("banded equalization needs a band")
        return self


class Scenario(BaseModel):
    """
    One Monte-Carlo experiment.
    """

    schema_version: int = Field(SCENARIO_SCHEMA_VERSION)
    name: str
    kind: ScenarioKind = ScenarioKind.BER
    frame: FrameConfig
    channel: ChannelSpec = Field(default_factory=ChannelSpec)
    pilot: Optional[PilotScheme] = None
    estimation: EstimationSpec = Field(default_factory=EstimationSpec)
    equalization: EqualizationSpec = Field(default_factory=EqualizationSpec)
    modulation: str = Field("QPSK")
    snr_db: List[float] = Field(..., min_length=1)
    snr_reference: SnrReference = SnrReference.ES_N0
    trials: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    @field_validator("schema_version")
    @classmethod
    def _known_version(cls, v):
        if v != SCENARIO_SCHEMA_VERSION:
            raise ValueError(f"unsupported scenario schema_version {v}")
        return v

    @field_validator("modulation")
    @classmethod
    def _qpsk_only(cls, v):
        if v != "QPSK":
            raise ValueError(f"unsupported modulation {v!r}")
        return v

    @field_validator("snr_db")
    @classmethod
    def _sorted(cls, v):
        return sorted(v)

    @model_validator(mode="after")
    def _pilot_matches_estimator(self):
        if self.estimation.domain != EstimationDomain.GENIE and self.pilot is None:
            raise ValueError(f"{self.estimation.domain.value} estimation needs a pilot scheme")
        return self


# ============================================================================
# RESULTS
# ============================================================================

class ResultRow(BaseModel):
    snr_db: float
    trials: int
    bits: int = 0
    bit_errors: int = 0
    ber: Optional[float] = None
    stderr: Optional[float] = None
    nmse_db: Optional[float] = None
    nmse_control_db: Optional[float] = None
    flops: Optional[float] = None
    reduction_db: Optional[float] = None
    flop_report: Optional[Dict[str, object]] = None
    warnings: List[str] = Field(default_factory=list)

    model_config = ConfigDict(ser_json_inf_nan="constants")


class ExperimentResult(BaseModel):
    """
    Self-describing record of one scenario run.
    """

    schema_version: int = RESULT_SCHEMA_VERSION
    tool_version: str
    scenario_hash: str
    scenario: Dict[str, object]
    rows: List[ResultRow]
    summary: Dict[str, object] = Field(default_factory=dict)

    # Informational only, excluded from the reproducibility digest
    run_info: Dict[str, object] = Field(default_factory=dict)

    model_config = ConfigDict(ser_json_inf_nan="constants")
