import pytest

from bridgesim import ChainParams, Configuration, LatticeDims, ScentFunction
from bridgesim.chain import apply_proposal


@pytest.fixture
def dims64():
    return LatticeDims(6, 4)


@pytest.fixture
def linear_scent():
    return ScentFunction.power(4, k=1.0, phi=1.0)


def random_valid_config(dims, scent, rng, steps=400, beta=0.8, eta=1.5, cap=None):
    """Diverse member of the valid class, produced by running the chain."""
    cap = cap if cap is not None else dims.n_sites // 2
    params = ChainParams(beta=beta, eta=eta, cap_n=cap)
    cfg = Configuration(dims, cap=cap, scent=scent)
    for _ in range(steps):
        apply_proposal(cfg, params, int(rng.integers(0, dims.n_sites)), float(rng.random()))
    return cfg


def random_mask_config(dims, rng, fill=0.4):
    """Arbitrary occupancy (not necessarily valid); for pure observables."""
    cfg = Configuration(dims)
    for y in range(1, dims.h + 1):
        for x in range(dims.w):
            if rng.random() < fill:
                cfg.add((x, y))
    return cfg
