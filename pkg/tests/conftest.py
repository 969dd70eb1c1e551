import numpy as np
import pytest

from bmameta import Comparison, Study


def make_comparison(rng, k, delta=0.3, tau=0.2, se_range=(0.1, 0.5), cid=""):
    """One synthetic comparison drawn from the random-effects model."""
    se = rng.uniform(*se_range, k)
    theta = rng.normal(delta, tau, k)
    y = rng.normal(theta, se)
    return Comparison(
        tuple(Study(float(a), float(b)) for a, b in zip(y, se)), id=cid
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
