"""
Pydantic schemas for pilot placement (Pydantic v2).
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from wavelab import config


class PilotKind(str, Enum):
    BLOCK_FREQUENCY = "BlockFrequency"
    EMBEDDED_DD = "EmbeddedDD"
    EMBEDDED_AFFINE = "EmbeddedAffine"


class PilotScheme(BaseModel):
    """
    Pilot structure of one frame.

    ``guard_doppler`` is kappa_max in delay-Doppler bins for EmbeddedDD and
    alpha_max in subcarrier bins for EmbeddedAffine.
    """

    kind: PilotKind = Field(..., description="BlockFrequency, EmbeddedDD or EmbeddedAffine")
    boost_db: float = Field(config.DEFAULT_PILOT_BOOST_DB, description="Pilot power over unit data power")
    guard_delay: int = Field(0, ge=0, description="Maximum integer delay l_max covered by the guard")
    guard_doppler: int = Field(0, ge=0, description="Maximum integer Doppler covered by the guard")
    pilot_index: Optional[int] = Field(None, description="Pilot delay bin (DD) or affine bin")
    pilot_doppler: Optional[int] = Field(None, description="Pilot Doppler bin (DD only)")
    pilot_spacing: int = Field(1, ge=1, description="BlockFrequency: pilot on every k-th subcarrier")
    zc_root: int = Field(1, ge=1, description="Zadoff-Chu root of the block pilot")

    model_config = ConfigDict(frozen=True)
