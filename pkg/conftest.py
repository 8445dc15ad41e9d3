import logging

import pytest

import config
from services.moments import normal_moments, product_moments


@pytest.fixture(autouse=True)
def _quiet_serial(monkeypatch):
    """Keep tests single-threaded and deterministic unless they opt in."""
    monkeypatch.setattr(config, "MAX_WORKERS", 1)
    monkeypatch.setattr(config, "STEIN_SEED", 20190614)
    logging.getLogger().setLevel(logging.WARNING)


@pytest.fixture
def product_moments_n11_sq():
    """Moments of the product of two independent N(1, 1)."""
    return product_moments(normal_moments(1, 1), normal_moments(1, 1))


@pytest.fixture
def product_moments_n11_n21():
    """Moments of N(1, 1) x N(2, 1)."""
    return product_moments(normal_moments(1, 1), normal_moments(2, 1))
