import numpy as np
import pytest

from teleposture.kinematics import KinematicModel


@pytest.fixture(scope="session")
def model() -> KinematicModel:
    return KinematicModel()


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def random_q(rng: np.random.Generator, limits, n: int | None = None) -> np.ndarray:
    size = (limits.lower.size,) if n is None else (n, limits.lower.size)
    return rng.uniform(limits.lower, limits.upper, size=size)
