"""Exact brute-force ground truth on tiny lattices.

Enumerates every valid configuration, computes the stationary distribution
and the chain's exact transition matrix, and checks stationarity, detailed
balance, and the boundary-length counting bound.  Everything here is meant
to be small and transparent; the chain and its kernel are validated against
these objects.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .chain import ChainParams, acceptance_probability
from .config import Configuration, ScentFunction, globally_simply_connected
from .lattice import LatticeDims, Site

DEFAULT_MAX_SITES = 24


def _max_states() -> int:
    return int(os.environ.get("BRIDGESIM_MAX_STATES", 200_000))


@dataclass(frozen=True)
class StateSpace:
    """All valid configurations, canonically ordered by occupancy bitmask."""

    dims: LatticeDims
    cap: int
    masks: tuple[int, ...]
    scent: ScentFunction | None = None

    def __len__(self) -> int:
        return len(self.masks)

    def index(self, mask: int) -> int:
        i = _bisect(self.masks, mask)
        if i < 0:
            raise KeyError(f"mask {mask:#x} not a valid state")
        return i

    def config(self, i: int) -> Configuration:
        return self._materialize(self.masks[i])

    def _materialize(self, mask: int) -> Configuration:
        w = self.dims.w
        sites = [Site(b % w, 1 + b // w) for b in range(self.dims.n_sites) if mask >> b & 1]
        return Configuration.from_sites(self.dims, sites, cap=self.cap, scent=self.scent)


def _bisect(masks: tuple[int, ...], mask: int) -> int:
    lo, hi = 0, len(masks)
    while lo < hi:
        mid = (lo + hi) // 2
        if masks[mid] < mask:
            lo = mid + 1
        else:
            hi = mid
    return lo if lo < len(masks) and masks[lo] == mask else -1


def enumerate_state_space(dims: LatticeDims, cap: int, scent: ScentFunction | None = None,
                          method: str = "subset", max_sites: int = DEFAULT_MAX_SITES,
                          max_states: int | None = None) -> StateSpace:
    """All occupied-site sets of size <= cap that are valid configurations.

    ``subset`` filters every subset directly; ``bfs`` grows the space by
    single-site additions from the empty configuration.  The two must agree
    and are kept as mutual oracles.
    """
    if dims.n_sites > max_sites:
        raise ValueError(
            f"{dims.w}x{dims.h} has {dims.n_sites} sites; exact enumeration is capped at "
            f"{max_sites} (raise max_sites deliberately if you mean it)"
        )
    limit = _max_states() if max_states is None else max_states
    if method == "subset":
        masks = _enumerate_subset(dims, cap, limit)
    elif method == "bfs":
        masks = _enumerate_bfs(dims, cap, limit)
    else:
        raise ValueError(f"unknown method {method!r}")
    return StateSpace(dims=dims, cap=cap, masks=tuple(masks), scent=scent)


def _valid_mask(dims: LatticeDims, mask: int) -> bool:
    w = dims.w
    sites = [Site(b % w, 1 + b // w) for b in range(dims.n_sites) if mask >> b & 1]
    return globally_simply_connected(Configuration.from_sites(dims, sites))


def _enumerate_subset(dims: LatticeDims, cap: int, limit: int) -> list[int]:
    found = []
    indices = range(dims.n_sites)
    for size in range(min(cap, dims.n_sites) + 1):
        for combo in combinations(indices, size):
            mask = 0
            for b in combo:
                mask |= 1 << b
            if _valid_mask(dims, mask):
                found.append(mask)
                if len(found) > limit:
                    raise RuntimeError(f"state space exceeds {limit} states (BRIDGESIM_MAX_STATES)")
    found.sort()
    return found


def _enumerate_bfs(dims: LatticeDims, cap: int, limit: int) -> list[int]:
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for mask in frontier:
            if bin(mask).count("1") >= cap:
                continue
            for b in range(dims.n_sites):
                if mask >> b & 1:
                    continue
                cand = mask | 1 << b
                if cand in seen:
                    continue
                if _valid_mask(dims, cand):
                    seen.add(cand)
                    nxt.append(cand)
                    if len(seen) > limit:
                        raise RuntimeError(f"state space exceeds {limit} states (BRIDGESIM_MAX_STATES)")
        frontier = nxt
    return sorted(seen)


def state_energies(space: StateSpace, scent: ScentFunction, eta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boundary, scent, and H = B - eta*S for every state, in canonical order."""
    n = len(space)
    boundary = np.zeros(n)
    scent_tot = np.zeros(n)
    for i in range(n):
        cfg = space.config(i)
        boundary[i] = cfg.boundary
        scent_tot[i] = cfg.scent_total(scent)
    return boundary, scent_tot, boundary - eta * scent_tot


def exact_distribution(space: StateSpace, params: ChainParams, scent: ScentFunction) -> tuple[np.ndarray, float]:
    """Stationary law proportional to exp(-beta * H), with its normalizer."""
    _, _, ham = state_energies(space, scent, params.eta)
    weights = np.exp(-params.beta * ham)
    z = math.fsum(weights)
    return weights / z, z


def product_form_weights(space: StateSpace, params: ChainParams, scent: ScentFunction) -> np.ndarray:
    """Unnormalized weights in product form: prod over occupied sites of
    lam^(-B_v) * gamma^(S_v).  Must agree with exp(-beta * H)."""
    from .config import unoccupied_neighbor_count

    out = np.ones(len(space))
    for i in range(len(space)):
        cfg = space.config(i)
        weight = 1.0
        for v in cfg.sites():
            weight *= params.lam ** (-unoccupied_neighbor_count(cfg, v)) * params.gamma ** scent.value(v.y)
        out[i] = weight
    return out


def degree_modified_distribution(space: StateSpace, params: ChainParams,
                                 scent: ScentFunction) -> tuple[np.ndarray, float]:
    """Gibbs law for the energy H plus the total interior degree of occupied
    sites; the literal acceptance rule is reversible for this energy."""
    from .lattice import degree_in_lambda

    _, _, ham = state_energies(space, scent, params.eta)
    deg_tot = np.zeros(len(space))
    for i in range(len(space)):
        cfg = space.config(i)
        deg_tot[i] = sum(degree_in_lambda(space.dims, v) for v in cfg.sites())
    weights = np.exp(-params.beta * (ham + deg_tot))
    z = math.fsum(weights)
    return weights / z, z


def transition_matrix(space: StateSpace, params: ChainParams, scent: ScentFunction) -> np.ndarray:
    """Exact single-step law of the chain on the enumerated space.

    Off-diagonal mass comes from the uniform site proposal times the
    acceptance probability; the diagonal absorbs every rejection.
    """
    if len(space) > 100_000:
        raise ValueError("transition matrix limited to 1e5 states")
    if space.scent is not scent:
        space = StateSpace(space.dims, space.cap, space.masks, scent=scent)
    n = len(space)
    n_sites = space.dims.n_sites
    p = np.zeros((n, n))
    for i in range(n):
        cfg = space.config(i)
        mask = space.masks[i]
        for b in range(n_sites):
            v = space.dims.index_site(b)
            proposal, prob, _ = acceptance_probability(cfg, v, params)
            if proposal == "none" or prob == 0.0:
                continue
            j = space.index(mask ^ (1 << b))
            p[i, j] += prob / n_sites
        p[i, i] = 0.0
        p[i, i] = 1.0 - p[i].sum()
    return p


@dataclass(frozen=True)
class StationarityReport:
    stationarity_residual: float
    detailed_balance_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.stationarity_residual <= self.tol and self.detailed_balance_residual <= self.tol


def verify_stationarity(space: StateSpace, matrix: np.ndarray, candidate: np.ndarray,
                        tol: float = 1e-10) -> StationarityReport:
    """Residuals of pi P = pi and pairwise detailed balance for a candidate pi."""
    if matrix.shape != (len(space), len(space)) or len(candidate) != len(space):
        raise ValueError("dimension mismatch between space, matrix, and candidate")
    stationarity = float(np.abs(candidate @ matrix - candidate).max())
    flux = candidate[:, None] * matrix
    detailed = float(np.abs(flux - flux.T).max())
    return StationarityReport(stationarity_residual=stationarity,
                              detailed_balance_residual=detailed, tol=tol)


class CountingBoundViolation(AssertionError):
    """A boundary-length census exceeded the 2^(l + 2w) counting bound."""


def boundary_census(space: StateSpace) -> dict[int, int]:
    """Histogram of boundary length over the space, checked against the
    counting bound: at most 2^(l + 2w) configurations have boundary l."""
    hist: dict[int, int] = {}
    for i in range(len(space)):
        b = space.config(i).boundary
        hist[b] = hist.get(b, 0) + 1
    for length, count in sorted(hist.items()):
        if count > 2 ** (length + 2 * space.dims.w):
            raise CountingBoundViolation(
                f"{count} configurations of boundary {length} exceed 2^{length + 2 * space.dims.w}"
            )
    return dict(sorted(hist.items()))


def strongly_connected(matrix: np.ndarray) -> bool:
    """Strong connectivity of the off-diagonal transition graph."""
    n = matrix.shape[0]
    off = matrix.copy()
    np.fill_diagonal(off, 0.0)
    adj = off > 0
    return _reaches_all(adj, 0) and _reaches_all(adj.T, 0)


def _reaches_all(adj: np.ndarray, start: int) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        i = stack.pop()
        for j in np.nonzero(adj[i])[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())
