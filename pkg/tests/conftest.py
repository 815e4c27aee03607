import numpy as np
import pytest
from hypothesis import settings

from subwalk import bernstein as bf
from subwalk.lattice import LatticeWalk
from subwalk.levy_embed import triplet_hat, triplet_tilde

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def stable05():
    return bf.from_id("stable:0.5")


@pytest.fixture(scope="session")
def log_example():
    return bf.from_id("log-example")


_TRIPLETS = {}


@pytest.fixture(scope="session")
def triplet_pair():
    """Cached (hat, tilde) triplets keyed by (catalog id, d)."""
    def get(pid, d):
        if (pid, d) not in _TRIPLETS:
            phi = bf.from_id(pid)
            walk = LatticeWalk.simple(d)
            radius = 30 if d == 1 else 12
            _TRIPLETS[pid, d] = (triplet_hat(phi, walk, 1.0, radius),
                                 triplet_tilde(phi, walk, 1.0, radius))
        return _TRIPLETS[pid, d]
    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
