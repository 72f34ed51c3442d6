import math

import numpy as np
import pytest

from bridgesim import (
    ChainParams,
    Configuration,
    LatticeDims,
    ScentFunction,
    Site,
    boundary_census,
    degree_modified_distribution,
    derive_rng,
    enumerate_state_space,
    exact_distribution,
    path_to_empty,
    total_variation,
    transition_matrix,
    unoccupied_neighbor_count,
    verify_stationarity,
)
from bridgesim.chain import run_visit_counts
from bridgesim.oracle import CountingBoundViolation, product_form_weights, strongly_connected


@pytest.fixture(scope="module")
def tiny():
    dims = LatticeDims(3, 2)
    scent = ScentFunction.power(2, k=1.0, phi=1.0)
    return dims, scent


def test_enumeration_counts(tiny):
    dims, scent = tiny
    assert len(enumerate_state_space(dims, 0)) == 1
    assert len(enumerate_state_space(dims, 1)) == 4
    assert len(enumerate_state_space(dims, 2)) == 13


def test_enumeration_methods_agree(tiny):
    dims, _ = tiny
    for cap in (2, 4, 6):
        subset = enumerate_state_space(dims, cap, method="subset")
        bfs = enumerate_state_space(dims, cap, method="bfs")
        assert subset.masks == bfs.masks
    d43 = LatticeDims(4, 3)
    assert enumerate_state_space(d43, 4).masks == enumerate_state_space(d43, 4, method="bfs").masks


def test_enumeration_guard():
    with pytest.raises(ValueError):
        enumerate_state_space(LatticeDims(10, 10), 5)
    with pytest.raises(RuntimeError):
        enumerate_state_space(LatticeDims(4, 3), 6, max_states=10)


def test_exact_distribution_example(tiny):
    dims, scent = tiny
    space = enumerate_state_space(dims, 1, scent=scent)
    params = ChainParams(beta=1.0, eta=1.0, cap_n=1)
    pi, z = exact_distribution(space, params, scent)
    expected_empty = 1.0 / (1.0 + 3 * math.exp(-4.0))
    assert pi[space.index(0)] == pytest.approx(expected_empty, abs=1e-12)
    singles = [i for i, m in enumerate(space.masks) if m != 0]
    assert np.allclose(pi[singles], math.exp(-4.0) / (1.0 + 3 * math.exp(-4.0)))


def test_beta_zero_is_uniform(tiny):
    dims, scent = tiny
    space = enumerate_state_space(dims, 3, scent=scent)
    pi, _ = exact_distribution(space, ChainParams(beta=0.0, eta=1.0, cap_n=3), scent)
    assert np.allclose(pi, 1.0 / len(space))


def test_product_form_matches_hamiltonian(tiny):
    dims, scent = tiny
    space = enumerate_state_space(dims, 4, scent=scent)
    params = ChainParams(beta=0.8, eta=1.7, cap_n=4)
    weights = product_form_weights(space, params, scent)
    pi, z = exact_distribution(space, params, scent)
    assert np.allclose(weights / weights.sum(), pi, rtol=1e-12, atol=1e-15)


def test_transition_matrix_structure(tiny):
    dims, scent = tiny
    space = enumerate_state_space(dims, 2, scent=scent)
    params = ChainParams(beta=1.0, eta=1.0, cap_n=2)
    p = transition_matrix(space, params, scent)
    assert np.abs(p.sum(axis=1) - 1.0).max() <= 1e-12
    # off-diagonal transitions flip exactly one site
    for i in range(len(space)):
        for j in np.nonzero(p[i])[0]:
            if i != int(j):
                diff = space.masks[i] ^ space.masks[int(j)]
                assert diff.bit_count() == 1
    empty = space.index(0)
    single = space.index(1)
    assert p[empty, single] == pytest.approx(math.exp(-4.0) / 6.0)


def test_exact_mode_detailed_balance(tiny):
    dims, scent = tiny
    space = enumerate_state_space(dims, 4, scent=scent)
    params = ChainParams(beta=1.3, eta=0.6, cap_n=4)
    p = transition_matrix(space, params, scent)
    pi, _ = exact_distribution(space, params, scent)
    rep = verify_stationarity(space, p, pi, tol=1e-10)
    assert rep.passed
    assert rep.detailed_balance_residual <= 1e-12


def test_literal_mode_rebalances_with_degree_term(tiny):
    dims, scent = tiny
    space = enumerate_state_space(dims, 4, scent=scent)
    params = ChainParams(beta=1.0, eta=1.0, cap_n=4, mode="paper_literal")
    p = transition_matrix(space, params, scent)
    pi, _ = exact_distribution(space, params, scent)
    assert verify_stationarity(space, p, pi).stationarity_residual > 1e-3
    pi_alt, _ = degree_modified_distribution(space, params, scent)
    rep = verify_stationarity(space, p, pi_alt, tol=1e-10)
    assert rep.passed


def test_bar_convention_balances_its_own_energy(tiny):
    # Counting the virtual top row as unoccupied shifts the energy by twice
    # the top-layer occupancy; the chain under that convention is reversible
    # for the shifted energy.
    dims, scent = tiny
    space = enumerate_state_space(dims, 4, scent=scent)
    params = ChainParams(beta=0.9, eta=1.1, cap_n=4, convention="lambda_bar")
    p = transition_matrix(space, params, scent)
    weights = np.zeros(len(space))
    for i in range(len(space)):
        cfg = space.config(i)
        b_bar = cfg.boundary + 2 * int(cfg.layer_counts[dims.h])
        weights[i] = math.exp(-params.beta * (b_bar - params.eta * cfg.scent_total(scent)))
    rep = verify_stationarity(space, p, weights / weights.sum(), tol=1e-10)
    assert rep.passed


def test_boundary_census_values(tiny):
    dims, _ = tiny
    small = boundary_census(enumerate_state_space(dims, 2))
    assert small[0] == 1  # the empty configuration
    assert small[4] == 3  # bottom-row singletons
    hist = boundary_census(enumerate_state_space(dims, dims.n_sites))
    assert hist[0] == 2  # empty plus the completely full configuration
    assert all(count <= 2 ** (length + 2 * dims.w) for length, count in hist.items())


def test_boundary_census_violation_detector():
    class Fake:
        dims = LatticeDims(3, 2)

        def __len__(self):
            return 200

        def config(self, i):
            return Configuration(self.dims)  # boundary 0 for every state

    with pytest.raises(CountingBoundViolation):
        boundary_census(Fake())


def test_bar_count_below_six_on_valid_states(tiny):
    dims, _ = tiny
    space = enumerate_state_space(dims, dims.n_sites)
    for i in range(len(space)):
        cfg = space.config(i)
        for v in cfg.sites():
            assert unoccupied_neighbor_count(cfg, v, "lambda_bar") < 6


def test_ergodicity_witnesses(tiny):
    dims, scent = tiny
    space = enumerate_state_space(dims, 4, scent=scent)
    params = ChainParams(beta=1.0, eta=1.0, cap_n=4)
    p = transition_matrix(space, params, scent)
    assert strongly_connected(p)
    assert (np.diag(p) > 0).any()
    for i in range(len(space)):
        cfg = space.config(i)
        assert len(path_to_empty(cfg)) == cfg.count


def test_short_run_visits_match_exact():
    dims = LatticeDims(4, 3)
    scent = ScentFunction.power(3, k=1.0, phi=1.0)
    params = ChainParams(beta=1.0, eta=1.0, cap_n=4)
    space = enumerate_state_space(dims, 4, scent=scent)
    pi, _ = exact_distribution(space, params, scent)
    cfg = Configuration(dims, cap=4, scent=scent)
    visits = run_visit_counts(cfg, params, 400_000, 5, derive_rng(71))
    emp = np.array([visits[m] for m in space.masks], dtype=float)
    assert visits.sum() == emp.sum()  # nothing outside the space
    assert total_variation(emp / emp.sum(), pi) < 0.05


def test_narrow_cylinder_ring_guard(tiny):
    # At w = 3 the two lateral neighbors touch across the wrap, so the
    # neighborhood check alone would let an addition seal a pocket.
    from bridgesim import locally_simply_connected
    from bridgesim.chain import move_allowed

    dims, _ = tiny
    cfg = Configuration.from_sites(dims, [(0, 1), (1, 2), (2, 2)])
    v = Site(0, 2)
    assert locally_simply_connected(cfg, v)  # the blind spot
    assert not move_allowed(cfg, v)  # the guard catches it
    full_row1 = Configuration.from_sites(dims, [(0, 1), (1, 1), (2, 1), (1, 2), (2, 2)])
    assert move_allowed(full_row1, Site(0, 2))  # ring over a full layer is fine
