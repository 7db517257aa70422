import pytest

from layeredpulse.config import OUTPUT_DIR_ENV
from layeredpulse.medium import MediumParams


@pytest.fixture
def half_params():
    """
    Long-range medium with gamma = 1/2.
    """
    return MediumParams(mu=1.0, beta=0.5, alpha=0.25, r_s=10.0)


@pytest.fixture
def critical_params():
    return MediumParams(mu=2.0, beta=0.25, alpha=0.25, r_s=10.0)


@pytest.fixture
def short_params():
    """
    Short-range medium with gamma = 3/2.
    """
    return MediumParams(mu=1.0, beta=1 / 6, alpha=0.25, r_s=10.0)


@pytest.fixture
def front_params():
    return MediumParams(mu=2.0, beta=0.5, alpha=0.25, r_s=10.0)


@pytest.fixture(autouse=True)
def _clean_output_env(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
