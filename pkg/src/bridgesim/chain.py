"""Single-site dynamics of the bridging occupancy chain.

Each step draws a uniformly random interior site and a uniform number in
[0, 1].  If the site passes the local simple-connectivity check, the move
that toggles it is accepted with a Metropolis probability.  Two acceptance
modes are provided:

* ``exact_gibbs`` uses the exact energy difference (including the site's
  interior degree), so the stationary law is exp(-beta * H) / Z.
* ``paper_literal`` uses the exponent beta * (2 * B - eta * S), which omits
  the degree term; it is reversible for the modified energy
  H + sum of interior degrees over occupied sites.

All randomness flows through a seeded numpy Generator, so runs are
reproducible bit for bit.  Long runs execute in a compiled kernel; the pure
Python step here is the reference the kernel is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernel
from .config import (
    CONVENTIONS,
    Configuration,
    delta_hamiltonian,
    globally_simply_connected,
    locally_simply_connected,
    unoccupied_neighbor_count,
)
from .lattice import Site, degree_in_lambda
from .observables import bridge_stats

MODES = ("exact_gibbs", "paper_literal")


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent, reproducible stream for (seed, cell, replica, ...) tuples."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, *keys])))


@dataclass(frozen=True)
class ChainParams:
    beta: float
    eta: float
    cap_n: int
    rho: float | None = None
    mode: str = "exact_gibbs"
    convention: str = "lambda_only"
    seed: int = 0

    def __post_init__(self):
        if self.beta < 0 or self.eta < 0:
            raise ValueError("beta and eta must be nonnegative")
        if self.cap_n < 0:
            raise ValueError("cap_n must be nonnegative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")

    @classmethod
    def from_density(cls, beta: float, eta: float, rho: float, h: int, **kw) -> "ChainParams":
        """Particle cap floor(rho * h^2), the scaling regime of interest."""
        return cls(beta=beta, eta=eta, cap_n=int(rho * h * h), rho=rho, **kw)

    @property
    def lam(self) -> float:
        return math.exp(self.beta)

    @property
    def gamma(self) -> float:
        return math.exp(self.beta * self.eta)


@dataclass(frozen=True)
class StepOutcome:
    site: Site
    proposal: str  # add | remove | none
    accepted: bool
    delta_h: float
    reject_reason: str  # not_locally_sc | cap_reached | metropolis | none


def move_allowed(cfg: Configuration, v: Site) -> bool:
    """Validity gate for toggling site v.

    The neighborhood check suffices for w >= 4.  At w = 3 the two lateral
    neighbors of a site are themselves adjacent across the wrap, so an
    addition can complete a full ring over a partial layer and seal a pocket
    that the neighborhood cannot see; additions there are re-validated
    against the whole-grid predicate (removals cannot trap anything).
    """
    if not locally_simply_connected(cfg, v):
        return False
    if cfg.dims.w == 3 and not cfg.occupied(v):
        cfg.add(v)
        try:
            return globally_simply_connected(cfg)
        finally:
            cfg.remove(v)
    return True


def acceptance_probability(cfg: Configuration, v: Site, params: ChainParams) -> tuple[str, float, str]:
    """Proposal type, acceptance probability, and blocking reason for site v.

    Returns (proposal, p_accept, reason); p_accept is 0 when the move is
    blocked.  This single code path defines the chain's law; the transition
    matrix oracle and both step implementations go through the same formula.
    """
    occupied = cfg.occupied(v)
    if not move_allowed(cfg, v):
        return "none", 0.0, "not_locally_sc"
    if not occupied and cfg.count >= params.cap_n:
        return "add", 0.0, "cap_reached"
    b = unoccupied_neighbor_count(cfg, v, params.convention)
    deg = degree_in_lambda(cfg.dims, v)
    if params.convention == "lambda_bar" and v.y == cfg.dims.h:
        deg += 2
    s_v = cfg.scent.per_layer[v.y] if cfg.scent is not None else 0.0
    if params.mode == "exact_gibbs":
        exponent = 2.0 * b - params.eta * s_v - deg
    else:
        exponent = 2.0 * b - params.eta * s_v
    if not occupied:
        exponent = -exponent
    prob = 1.0 if exponent >= 0 else math.exp(params.beta * exponent)
    return ("remove" if occupied else "add"), prob, "none"


def apply_proposal(cfg: Configuration, params: ChainParams, site_index: int, p: float) -> StepOutcome:
    """One chain step driven by an explicit (site, uniform) pair."""
    v = cfg.dims.index_site(site_index)
    proposal, prob, reason = acceptance_probability(cfg, v, params)
    if proposal == "none":
        return StepOutcome(v, "none", False, 0.0, reason)
    dh = delta_hamiltonian(cfg, v, proposal, eta=params.eta)
    if reason != "none":
        return StepOutcome(v, proposal, False, dh, reason)
    if p <= prob:
        (cfg.remove if proposal == "remove" else cfg.add)(v)
        return StepOutcome(v, proposal, True, dh, "none")
    return StepOutcome(v, proposal, False, dh, "metropolis")


def step(cfg: Configuration, params: ChainParams, rng: np.random.Generator) -> StepOutcome:
    site_index = int(rng.integers(0, cfg.dims.n_sites))
    p = float(rng.random())
    return apply_proposal(cfg, params, site_index, p)


class InvariantViolation(RuntimeError):
    """A mid-run check failed; carries the step index and a state dump."""

    def __init__(self, step_index: int, message: str, snapshot: str):
        super().__init__(f"step {step_index}: {message}")
        self.step_index = step_index
        self.snapshot = snapshot


@dataclass(frozen=True)
class RunSchedule:
    steps: int
    burn_in: int = 0
    sample_every: int = 100
    recheck_every: int = 10_000
    epsilon: float = 0.3

    def __post_init__(self):
        if self.steps < 0 or self.burn_in < 0:
            raise ValueError("steps and burn_in must be nonnegative")
        if self.burn_in > self.steps:
            raise ValueError("burn_in cannot exceed steps")
        if self.sample_every <= 0 or self.recheck_every <= 0:
            raise ValueError("sample_every and recheck_every must be positive")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")


@dataclass
class Trace:
    """Sampled observables from a run, column-oriented."""

    step: np.ndarray
    particles: np.ndarray
    boundary: np.ndarray
    scent: np.ndarray
    hamiltonian: np.ndarray
    nb: np.ndarray
    mb: np.ndarray
    bridge_count: np.ndarray
    layer_counts: np.ndarray
    epsilon: float

    def __len__(self):
        return len(self.step)

    @property
    def nb_fraction(self) -> float:
        return float(self.nb.mean()) if len(self) else math.nan

    @property
    def mb_fraction(self) -> float:
        return float(self.mb.mean()) if len(self) else math.nan

    @property
    def mean_hamiltonian(self) -> float:
        return float(self.hamiltonian.mean()) if len(self) else math.nan

    @property
    def mean_bridge_count(self) -> float:
        return float(self.bridge_count.mean()) if len(self) else math.nan

    def rows(self) -> Iterable[tuple]:
        for i in range(len(self)):
            yield (
                int(self.step[i]),
                int(self.particles[i]),
                int(self.boundary[i]),
                float(self.scent[i]),
                float(self.hamiltonian[i]),
                int(self.nb[i]),
                int(self.mb[i]),
                int(self.bridge_count[i]),
            )


_CHUNK = 1 << 16


def run(cfg: Configuration, params: ChainParams, schedule: RunSchedule, rng: np.random.Generator,
        use_kernel: bool = True) -> Trace:
    """Execute the chain, sampling and rechecking on the given cadence.

    Samples are taken at steps t > burn_in with (t - burn_in) divisible by
    sample_every.  Every recheck_every steps the full validity predicate and
    the incremental caches are re-verified; a failure raises
    InvariantViolation with the offending step and a state dump.
    """
    if cfg.cap != params.cap_n:
        raise ValueError(f"configuration cap {cfg.cap} differs from params cap {params.cap_n}")
    if not globally_simply_connected(cfg):
        raise ValueError("initial configuration is not simply connected")
    dims = cfg.dims
    use_kernel = use_kernel and dims.w > 3  # w = 3 needs the global add guard
    depth = int(schedule.epsilon * dims.h + 1e-9)
    if depth < 1:
        raise ValueError("epsilon depth is below the lattice resolution")

    n_rows = max(0, (schedule.steps - schedule.burn_in)) // schedule.sample_every
    cols = {
        "step": np.zeros(n_rows, dtype=np.int64),
        "particles": np.zeros(n_rows, dtype=np.int64),
        "boundary": np.zeros(n_rows, dtype=np.int64),
        "scent": np.zeros(n_rows, dtype=np.float64),
        "hamiltonian": np.zeros(n_rows, dtype=np.float64),
        "nb": np.zeros(n_rows, dtype=bool),
        "mb": np.zeros(n_rows, dtype=bool),
        "bridge_count": np.zeros(n_rows, dtype=np.int64),
    }
    layers = np.zeros((n_rows, dims.h), dtype=np.int64)

    s_table = cfg.scent.per_layer if cfg.scent is not None else np.zeros(dims.h + 2)
    mode_exact = params.mode == "exact_gibbs"
    conv_bar = params.convention == "lambda_bar"

    def record(row: int, t: int) -> None:
        stats = bridge_stats(cfg, depth)
        cols["step"][row] = t
        cols["particles"][row] = cfg.count
        cols["boundary"][row] = cfg.boundary
        cols["scent"][row] = cfg.scent_sum
        cols["hamiltonian"][row] = cfg.boundary - params.eta * cfg.scent_sum
        cols["nb"][row] = stats.nb
        cols["mb"][row] = stats.mb
        cols["bridge_count"][row] = stats.bridge_count
        layers[row] = cfg.layer_counts[1:]

    def recheck(t: int) -> None:
        try:
            cfg.assert_cache_consistent()
        except AssertionError as exc:
            raise InvariantViolation(t, str(exc), cfg.to_text()) from exc
        if cfg.count > params.cap_n:
            raise InvariantViolation(t, f"count {cfg.count} exceeds cap {params.cap_n}", cfg.to_text())
        if not globally_simply_connected(cfg):
            raise InvariantViolation(t, "configuration lost simple connectivity", cfg.to_text())

    t = 0
    row = 0
    while t < schedule.steps:
        boundaries = [schedule.steps, t + _CHUNK]
        boundaries.append((t // schedule.recheck_every + 1) * schedule.recheck_every)
        if t >= schedule.burn_in:
            k = (t - schedule.burn_in) // schedule.sample_every + 1
            boundaries.append(schedule.burn_in + k * schedule.sample_every)
        else:
            boundaries.append(schedule.burn_in)
        t_next = min(b for b in boundaries if b > t)
        n = t_next - t
        sites = rng.integers(0, dims.n_sites, size=n, dtype=np.int64)
        ps = rng.random(n)
        if use_kernel:
            count, boundary, scent_sum = _kernel.run_steps(
                cfg.occ, sites, ps, dims.w, dims.h, params.beta, params.eta, s_table,
                params.cap_n, cfg.count, cfg.boundary, cfg.scent_sum, mode_exact, conv_bar,
            )
            cfg.count = int(count)
            cfg.boundary = int(boundary)
            cfg.scent_sum = float(scent_sum)
            cfg.layer_counts[1:] = cfg.occ[1 : dims.h + 1, :].sum(axis=1)
        else:
            for i in range(n):
                apply_proposal(cfg, params, int(sites[i]), float(ps[i]))
        t = t_next
        if t % schedule.recheck_every == 0 or t == schedule.steps:
            recheck(t)
        if t > schedule.burn_in and (t - schedule.burn_in) % schedule.sample_every == 0 and row < n_rows:
            record(row, t)
            row += 1

    return Trace(
        step=cols["step"],
        particles=cols["particles"],
        boundary=cols["boundary"],
        scent=cols["scent"],
        hamiltonian=cols["hamiltonian"],
        nb=cols["nb"],
        mb=cols["mb"],
        bridge_count=cols["bridge_count"],
        layer_counts=layers,
        epsilon=schedule.epsilon,
    )


def run_visit_counts(cfg: Configuration, params: ChainParams, steps: int, sample_every: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Empirical state-visit counts by occupancy bitmask.

    Requires w * h <= 20 so the bitmask indexes a dense array.  Sampling
    happens inside the kernel, so very long runs stay cheap.
    """
    dims = cfg.dims
    if dims.n_sites > 20:
        raise ValueError("visit counting needs w * h <= 20")
    if dims.w == 3:
        raise ValueError("visit counting runs in the kernel, which needs w >= 4")
    visits = np.zeros(1 << dims.n_sites, dtype=np.int64)
    s_table = cfg.scent.per_layer if cfg.scent is not None else np.zeros(dims.h + 2)
    mask = cfg.bitmask()
    t = 0
    while t < steps:
        n = min(_CHUNK, steps - t)
        sites = rng.integers(0, dims.n_sites, size=n, dtype=np.int64)
        ps = rng.random(n)
        count, boundary, scent_sum, mask = _kernel.run_steps_visits(
            cfg.occ, sites, ps, dims.w, dims.h, params.beta, params.eta, s_table,
            params.cap_n, cfg.count, cfg.boundary, cfg.scent_sum,
            params.mode == "exact_gibbs", params.convention == "lambda_bar",
            visits, sample_every, t, mask,
        )
        cfg.count = int(count)
        cfg.boundary = int(boundary)
        cfg.scent_sum = float(scent_sum)
        t += n
    cfg.layer_counts[1:] = cfg.occ[1 : dims.h + 1, :].sum(axis=1)
    return visits


class PeelFailure(RuntimeError):
    """The constructive emptying procedure got stuck; keeps the state."""

    def __init__(self, cfg: Configuration, message: str):
        super().__init__(message)
        self.snapshot = cfg.to_text()


def path_to_empty(cfg: Configuration) -> list[Site]:
    """Removal order emptying the configuration through valid moves.

    Each round removes an occupied site of greatest distance from the bottom
    virtual layer along occupied edges (ties: higher layer, then larger
    column).  Such a site is always safe to remove from a simply connected
    configuration; if the local check ever rejects it, that would falsify
    the construction, so the failure is loud.
    """
    work = cfg.copy()
    order: list[Site] = []
    while work.count > 0:
        dist = _occupied_distances(work)
        best = max(work.sites(), key=lambda v: (dist[v], v.y, v.x))
        if not math.isfinite(dist[best]):
            raise PeelFailure(work, f"occupied site {best} unreachable from the bottom layer")
        if not locally_simply_connected(work, best):
            raise PeelFailure(work, f"peel candidate {best} is not locally simply connected")
        work.remove(best)
        order.append(best)
    return order


def _occupied_distances(cfg: Configuration) -> dict[Site, float]:
    from collections import deque

    from .lattice import neighbors

    dist: dict[Site, float] = {v: math.inf for v in cfg.sites()}
    queue: deque[tuple[Site, int]] = deque()
    for x in range(cfg.dims.w):
        queue.append((Site(x, 0), 0))
    seen = {Site(x, 0) for x in range(cfg.dims.w)}
    while queue:
        v, d = queue.popleft()
        for u in neighbors(cfg.dims, v):
            if u in seen or u.y == 0 or u.y > cfg.dims.h or not cfg.occ[u.y, u.x]:
                continue
            seen.add(u)
            dist[u] = d + 1
            queue.append((u, d + 1))
    return dist
