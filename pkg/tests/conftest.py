import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from memk.grid import DiagonalState  # noqa: E402
from memk.spectral_model import (  # noqa: E402
    EthEnsembleConfig,
    ReferenceFunction,
    build_observable,
    sample_spectrum,
    two_level_benchmark,
)


@pytest.fixture(scope="session")
def two_level():
    spectrum, observable = two_level_benchmark()
    return spectrum, observable, DiagonalState.pure(1, 2)


@pytest.fixture(scope="session")
def small_ensemble():
    """N=120 oscillation ensemble, cheap enough for oracle runs."""
    config = EthEnsembleConfig(dimension=120, reference=ReferenceFunction("oscillation"), seed=3)
    spectrum = sample_spectrum(config)
    return config, spectrum, build_observable(spectrum, config)
