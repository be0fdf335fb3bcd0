import numpy as np
import pytest

from qbfactory.field import FieldElement, RationalFn


def random_rational(rng, deg=1):
    num = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
    den = np.r_[rng.normal(size=deg) + 1j * rng.normal(size=deg), 1.0]
    return RationalFn(num, den)


def random_element(rng, deg=1):
    return FieldElement(random_rational(rng, deg), random_rational(rng, deg))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
