"""
Pydantic schemas for frame numerology (Pydantic v2).

``FrameConfig`` is the raw, user-facing configuration as it appears in
scenario files.  It only checks field types; cross-field consistency is
the job of :func:`wavelab.frame.validate_config`, which returns the
immutable ``ValidatedConfig`` every other module consumes.
"""

from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class Waveform(str, Enum):
    OFDM = "OFDM"
    DFT_S_OFDM = "DFT_S_OFDM"
    OTFS = "OTFS"
    AFDM = "AFDM"
    OCDM = "OCDM"


class Domain(str, Enum):
    TIME = "Time"
    FREQUENCY = "Frequency"
    DELAY_DOPPLER = "DelayDoppler"
    AFFINE = "Affine"
    FRESNEL = "Fresnel"


class PrefixKind(str, Enum):
    FULL_CP = "FullCP"
    REDUCED_CP = "ReducedCP"
    ZERO_PAD = "ZeroPad"
    CHIRP_PERIODIC = "ChirpPeriodic"


class Permutation(str, Enum):
    NONE = "None"
    ROW_COLUMN = "RowColumn"


# Waveforms whose kernel acts on independent M-sample blocks
BLOCK_WAVEFORMS = frozenset({Waveform.OFDM, Waveform.DFT_S_OFDM, Waveform.AFDM, Waveform.OCDM})
CHIRP_WAVEFORMS = frozenset({Waveform.AFDM, Waveform.OCDM})

MULTIPLEXING_DOMAIN = {
    Waveform.OFDM: Domain.FREQUENCY,
    Waveform.DFT_S_OFDM: Domain.FREQUENCY,
    Waveform.OTFS: Domain.DELAY_DOPPLER,
    Waveform.AFDM: Domain.AFFINE,
    Waveform.OCDM: Domain.FRESNEL,
}


class PrefixScheme(BaseModel):
    """Prefix (or suffix) scheme; ``length`` is in samples."""

    kind: PrefixKind = Field(PrefixKind.FULL_CP, description="FullCP, ReducedCP, ZeroPad or ChirpPeriodic")
    length: int = Field(0, description="Prefix length in samples")

    model_config = ConfigDict(frozen=True)

    @property
    def per_block(self) -> bool:
        return self.kind != PrefixKind.REDUCED_CP


class FrameConfig(BaseModel):
    """
    Raw frame configuration as read from a scenario file.
    """

    waveform: Waveform = Field(..., description="Waveform family")
    M: int = Field(..., description="Subcarriers per symbol (delay bins for OTFS)")
    N: int = Field(1, description="Symbols per frame (Doppler bins for OTFS)")
    delta_f: float = Field(..., description="Subcarrier spacing in Hz")
    prefix: PrefixScheme = Field(default_factory=PrefixScheme)
    c1: Optional[float] = Field(None, description="Affine chirp tilt (AFDM)")
    c2: Optional[float] = Field(None, description="Affine residual chirp (AFDM)")
    alpha_max: int = Field(0, description="Maximum integer Doppler used to derive c1 when it is omitted")
    dft_s_subband: Optional[int] = Field(None, description="DFT-s-OFDM spread width a")
    permutation: Permutation = Field(Permutation.NONE, description="Grid vectorization interleaver")

    model_config = ConfigDict(frozen=True)


class ValidatedConfig(BaseModel):
    """
    Immutable, consistency-checked configuration with derived numerology.

    ``c1``/``c2`` are ``None`` when the affine domain is undefined for the
    configuration (non-chirp waveform without explicit chirp parameters).
    """

    waveform: Waveform
    M: int
    N: int
    delta_f: float
    prefix: PrefixScheme
    c1: Optional[float] = None
    c2: Optional[float] = None
    alpha_max: int = 0
    dft_s_subband: int = 1
    permutation: Permutation = Permutation.NONE

    model_config = ConfigDict(frozen=True)

    # ------------------------------------------------------------------
    # Derived quantities
    # ------------------------------------------------------------------

    @property
    def payload_len(self) -> int:
        return self.M * self.N

    @property
    def block_len(self) -> int:
        """Transmitted samples per M-block (payload + per-block prefix)."""
        if self.prefix.per_block:
            return self.M + self.prefix.length
        return self.M

    @property
    def frame_len(self) -> int:
        if self.prefix.per_block:
            return self.N * (self.M + self.prefix.length)
        return self.M * self.N + self.prefix.length

    @property
    def sample_rate(self) -> float:
        return self.M * self.delta_f

    @property
    def sample_period(self) -> float:
        return 1.0 / (self.M * self.delta_f)

    @property
    def chirp_len(self) -> int:
        return self.M

    @property
    def multiplexing_domain(self) -> Domain:
        return MULTIPLEXING_DOMAIN[self.waveform]

    @property
    def is_block_waveform(self) -> bool:
        return self.waveform in BLOCK_WAVEFORMS

    @property
    def affine_defined(self) -> bool:
        return self.c1 is not None and self.c2 is not None

    @property
    def boundary(self) -> str:
        """Frame-edge extension used by fractional delay filtering."""
        return "zero" if self.prefix.kind == PrefixKind.ZERO_PAD else "circular"

    @property
    def prefix_positions(self) -> Tuple[int, ...]:
        """Frame indices occupied by prefix (or zero-pad suffix) samples."""
        cp = self.prefix.length
        if not self.prefix.per_block:
            return tuple(range(cp))
        stride = self.M + cp
        offset = self.M if self.prefix.kind == PrefixKind.ZERO_PAD else 0
        return tuple(b * stride + offset + i for b in range(self.N) for i in range(cp))

    def with_chirp(self, c1: float, c2: float) -> "ValidatedConfig":
        return self.model_copy(update={"c1": c1, "c2": c2})
