import numpy as np
import pytest

from alignlab import NoiseProfile, Spectrum, State


@pytest.fixture
def fixa():
    """The shared 2-d fixture: lambda=(2,1), k=1, kappa^2=(1,1), c=(1,1)."""
    spec = Spectrum(lambdas=np.array([2.0, 1.0]), k=1)
    noise = NoiseProfile(kappa2=np.array([1.0, 1.0]))
    state = State(c=np.array([1.0, 1.0]))
    return spec, noise, state
