import numpy as np
import pytest

from netgame import GameParameters, Intervention, WelfareSpec
from netgame.experiments import rng_from, sample_contraction_instance


def random_instance(seed: int, n: int, *, allow_negative_s: bool = False):
    """Contraction-regime quadratic economy used across test modules."""
    return sample_contraction_instance(seed, n, allow_negative_s=allow_negative_s)


def random_intervention(seed: int, n: int, scale: float = 0.2) -> Intervention:
    rng = rng_from(seed)
    beta = rng.uniform(0.0, scale, n)
    sigma = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            sigma[i, j] = sigma[j, i] = rng.uniform(0.0, scale)
    return Intervention(beta, sigma, 1.0)


@pytest.fixture
def two_agent_economy():
    return GameParameters(
        n=2,
        b=[1.0, 1.0],
        c=[2.0, 2.0],
        s=[[0.0, 0.1], [0.1, 0.0]],
        f=[[2.0, 2.0], [2.0, 2.0]],
        rho=0.5,
    )


@pytest.fixture
def action_welfare():
    return WelfareSpec.action_sum(2)
