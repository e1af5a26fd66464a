import numpy as np
import pytest


def random_spd(rng, q, scale=1.0):
    """Well-conditioned random SPD matrix."""
    a = rng.standard_normal((q, q))
    return scale * (a @ a.T + 0.5 * q * np.eye(q))


def random_scatter_set(rng, G, q):
    """Scatters W_g = n_g * (sample-covariance-like SPD matrix)."""
    from emcwm import WeightedScatter

    n = rng.uniform(20.0, 80.0, size=G)
    scat = np.stack([ng * random_spd(rng, q) for ng in n])
    return WeightedScatter(scatters=scat, weights=n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
