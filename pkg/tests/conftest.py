import sys
from pathlib import Path

import numpy as np
import pytest

# Modules live at the repository root, next to main.py
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from schemas import PhantomSpec  # noqa: E402
from services.phantom_service import corrupt, generate_phantom, phantom_geometry  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def speckled_64(rng):
    """64x64 one-look speckle over a two-level scene."""
    scene = np.full((64, 64), 30.0)
    scene[20:44, 20:44] = 120.0
    return scene * rng.gamma(shape=1.0, scale=1.0, size=scene.shape)


@pytest.fixture(scope="session")
def small_phantom():
    spec = PhantomSpec(side=64)
    truth, labels = generate_phantom(spec)
    return spec, truth, labels, phantom_geometry(spec)


@pytest.fixture(scope="session")
def default_phantom():
    spec = PhantomSpec()
    truth, labels = generate_phantom(spec)
    return spec, truth, labels, phantom_geometry(spec)


@pytest.fixture
def noisy_small_phantom(small_phantom):
    spec, truth, labels, geometry = small_phantom
    return corrupt(truth, 4.0, 7), truth, labels, geometry
