"""Shared fixtures for the wavelab test suite."""

import numpy as np
import pytest

from wavelab.frame import validate_config
from wavelab.schemas.frame_schemas import FrameConfig, PrefixKind, PrefixScheme, Waveform


def make_cfg(waveform=Waveform.OFDM, M=8, N=4, prefix=PrefixKind.FULL_CP, cp=2, delta_f=15e3, **extra):
    """Validated configuration with compact defaults."""
    return validate_config(
        FrameConfig(
            waveform=waveform,
            M=M,
            N=N,
            delta_f=delta_f,
            prefix=PrefixScheme(kind=prefix, length=cp),
            **extra,
        )
    )


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def ofdm_cfg():
    return make_cfg(Waveform.OFDM, 8, 4, PrefixKind.FULL_CP, 3)


@pytest.fixture
def otfs_cfg():
    return make_cfg(Waveform.OTFS, 8, 4, PrefixKind.REDUCED_CP, 4)


@pytest.fixture
def afdm_cfg():
    return make_cfg(Waveform.AFDM, 64, 1, PrefixKind.CHIRP_PERIODIC, 8, alpha_max=1)
