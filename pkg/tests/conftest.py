import numpy as np
import pytest

from rmhmc.models import (
    BananaModel,
    FunnelModel,
    LogisticModel,
    StudentTModel,
    standard_normal_model,
    synthetic_heart_dataset,
)
from rmhmc.rng import RandomStream


@pytest.fixture(scope="session")
def banana():
    return BananaModel()


@pytest.fixture(scope="session")
def funnel():
    return FunnelModel()


@pytest.fixture(scope="session")
def studentt():
    return StudentTModel()


@pytest.fixture(scope="session")
def logistic():
    X, y = synthetic_heart_dataset()
    return LogisticModel(X, y, alpha=1.0)


@pytest.fixture(scope="session")
def gaussian_5d():
    return standard_normal_model(5)


def stream(seed: int) -> RandomStream:
    return RandomStream(seed)


def phase_points(model, n, seed):
    """Stationary phase points: analytic positions with matched momenta."""
    from rmhmc.hamiltonian import sample_momentum
    from rmhmc.phase import PhasePoint

    rng = RandomStream(seed)
    qs = model.sample(n, rng)
    return [PhasePoint(q, sample_momentum(model, q, rng)) for q in qs]


def finite_median(values):
    values = np.asarray(values, dtype=float)
    return float(np.median(values[np.isfinite(values)])) if np.isfinite(values).any() else np.inf
