import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import delaystab as ds

TAU_HEAT = 0.3
SIGMA = 0.5
SIGMA_STAR = 0.65
WINDOW = (0.3 * np.pi, 0.6 * np.pi)


@pytest.fixture(scope="session")
def scalar_model():
    return ds.build_custom_lti([[1.0]], [[1.0]], shift=5.0)


@pytest.fixture(scope="session")
def scalar_split(scalar_model):
    return ds.compute_split(scalar_model, SIGMA)


@pytest.fixture(scope="session")
def scalar_pole_design(scalar_split):
    # hand pole placement: a + g e^{-a tau} = -1 at tau = 0.5
    g = -2.0 * np.exp(0.5)
    return ds.design_from_gain(scalar_split, 0.5, [[g]], sigma_star=0.9)


@pytest.fixture(scope="session")
def heat_distributed():
    model = ds.build_convection_diffusion_1d(
        np.pi, 200, 1.0, 0.0, 2.0, "distributed", WINDOW, shift=3.5
    )
    split = ds.compute_split(model, SIGMA)
    return model, split


@pytest.fixture(scope="session")
def heat_boundary():
    model = ds.build_convection_diffusion_1d(
        np.pi, 200, 1.0, 0.0, 2.0, "boundary", shift=3.5
    )
    split = ds.compute_split(model, SIGMA)
    return model, split


@pytest.fixture(scope="session")
def jordan_split():
    model = ds.build_custom_lti([[0.0, 1.0], [0.0, 0.0]], np.eye(2), shift=1.0)
    return model, ds.compute_split(model, SIGMA)


@pytest.fixture(scope="session")
def scenario_dir():
    return Path(__file__).resolve().parents[1] / "scenarios"
