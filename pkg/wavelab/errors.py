"""
Typed errors raised across the laboratory.

Every failure a caller can act on has its own class; the CLI maps
``WaveLabError`` to exit code 1.
"""


class WaveLabError(Exception):
    """Base class for all laboratory errors."""


# ---------------------------------------------------------------------------
# frame
# ---------------------------------------------------------------------------

class ConfigError(WaveLabError, ValueError):
    """Inconsistent frame configuration."""


class InvalidDimensions(ConfigError):
    pass


class PrefixTooLong(ConfigError):
    pass


class BadChirpParams(ConfigError):
    pass


class UnsupportedCombo(ConfigError):
    pass


class TooMuchDoppler(ConfigError):
    pass


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

class DomainMismatch(WaveLabError):
    pass


class LengthMismatch(WaveLabError):
    pass


class SchemeMismatch(WaveLabError):
    pass


# ---------------------------------------------------------------------------
# channel
# ---------------------------------------------------------------------------

class UnknownProfile(WaveLabError):
    pass


class TooLarge(WaveLabError):
    pass


# ---------------------------------------------------------------------------
# estimation
# ---------------------------------------------------------------------------

class DataOverflow(WaveLabError):
    pass


class ZeroPilot(WaveLabError):
    pass


class NoPilotMeta(WaveLabError):
    pass


class AmbiguousTap(WaveLabError):
    pass


# ---------------------------------------------------------------------------
# equalization / analyzer / experiments
# ---------------------------------------------------------------------------

class SingularSystem(WaveLabError):
    pass


class MultiPath(WaveLabError):
    pass


class PreconditionError(WaveLabError):
    pass


class ScenarioError(WaveLabError):
    """Scenario file missing, unreadable or failing schema validation."""
