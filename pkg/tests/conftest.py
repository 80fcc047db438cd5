import math

import numpy as np
import pytest

from config import settings
from models.domain import Domain
from models.geometry import Box, HalfSpace
from models.potential import QuarticWell
from services.energy_service import EnergyService
from services.kernel_service import KernelService
from services.potential_service import PotentialService
from services.spectral_service import SpectralService


@pytest.fixture(autouse=True)
def fresh_state(monkeypatch):
    """Memoized tables and process-wide settings do not leak between tests"""
    KernelService.clear()
    EnergyService._faces.clear()
    SpectralService._grids.clear()
    monkeypatch.setattr(settings, "THREADS", 1)
    monkeypatch.setattr(settings, "CACHE_ENABLED", False)
    yield
    KernelService.clear()


@pytest.fixture
def interval():
    """Ω = (-1, 1) with 256 cells"""
    return Domain.box(-1.0, 1.0, 256)


@pytest.fixture
def unit_interval():
    return Domain.box(0.0, 1.0, 256)


@pytest.fixture
def unit_square():
    return Domain.box((0.0, 0.0), (1.0, 1.0), 32)


@pytest.fixture
def right_half_line():
    """E = {x > 0}"""
    return HalfSpace((-1.0,), 0.0)


@pytest.fixture
def left_half_square():
    """E = (0, 1/2) × (0, 1)"""
    return Box((0.0, 0.0), (0.5, 1.0))


@pytest.fixture
def well():
    return QuarticWell()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def interval_interaction(a, b, c, d, s):
    """Closed-form I_s((a, b), (c, d)) for b ≤ c"""
    p = 1 + 2 * s

    def F(t):
        return t ** (2 - p) / ((1 - p) * (2 - p)) if t > 0 else 0.0

    return F(d - a) - F(d - b) - F(c - a) + F(c - b)


SQRT2 = math.sqrt(2.0)
