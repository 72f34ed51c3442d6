"""Named verification suites: each one exercises a family of exact checks
at fixed tolerances and returns a machine-readable report.

A report is {"suite", "passed", "checks": [{"name", "passed", ...}, ...]};
the CLI renders one line per check and exits nonzero on any failure.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .chain import ChainParams, PeelFailure, RunSchedule, derive_rng, path_to_empty, run
from .config import Configuration, ScentFunction, boundary_edge_census
from .lattice import LatticeDims
from .layerseq import (
    LayerSequence,
    boundary_bound_total,
    boundary_profile,
    bridge_transform,
    compress_steps,
    convex_approx,
    layer_sequence,
    sandwich_residuals,
    sequence_scent,
    truncate_config,
    witness_config,
)
from .oracle import (
    boundary_census,
    degree_modified_distribution,
    enumerate_state_space,
    exact_distribution,
    product_form_weights,
    strongly_connected,
    transition_matrix,
    verify_stationarity,
)

SUITES = ("gibbs", "connectivity", "layerseq", "counting", "convex", "transform", "irreducibility", "all")


def _check(name: str, passed: bool, **extra) -> dict:
    return {"name": name, "passed": bool(passed), **extra}


def _report(suite: str, checks: list[dict]) -> dict:
    return {"suite": suite, "passed": all(c["passed"] for c in checks), "checks": checks}


def verify_gibbs(width: int = 4, height: int = 3, n: int = 6, beta: float = 1.0, eta: float = 1.0,
                 phi: float = 1.0, db_tol: float = 1e-12, stat_tol: float = 1e-10) -> dict:
    """Exact stationarity of the chain law on an enumerated space.

    Also settles the open question about the literal acceptance rule: it is
    checked against the plain Gibbs law (expected to fail) and against the
    degree-modified law (expected to pass).
    """
    dims = LatticeDims(width, height)
    scent = ScentFunction.power(height, k=1.0, phi=phi)
    space = enumerate_state_space(dims, n, scent=scent)
    checks = []

    params = ChainParams(beta=beta, eta=eta, cap_n=n, mode="exact_gibbs")
    pi, _ = exact_distribution(space, params, scent)
    matrix = transition_matrix(space, params, scent)
    row_err = float(np.abs(matrix.sum(axis=1) - 1.0).max())
    checks.append(_check("rows_stochastic", row_err <= 1e-12, residual=row_err, tol=1e-12))

    rep = verify_stationarity(space, matrix, pi, tol=stat_tol)
    checks.append(_check("detailed_balance", rep.detailed_balance_residual <= db_tol,
                         residual=rep.detailed_balance_residual, tol=db_tol))
    checks.append(_check("stationarity", rep.stationarity_residual <= stat_tol,
                         residual=rep.stationarity_residual, tol=stat_tol))

    weights = product_form_weights(space, params, scent)
    _, _, ham = _energies(space, scent, eta)
    direct = np.exp(-beta * ham)
    prod_err = float(np.abs(weights / direct - 1.0).max())
    checks.append(_check("product_form", prod_err <= 1e-12, residual=prod_err, tol=1e-12))

    literal = ChainParams(beta=beta, eta=eta, cap_n=n, mode="paper_literal")
    lit_matrix = transition_matrix(space, literal, scent)
    rep_gibbs = verify_stationarity(space, lit_matrix, pi, tol=stat_tol)
    pi_alt, _ = degree_modified_distribution(space, literal, scent)
    rep_alt = verify_stationarity(space, lit_matrix, pi_alt, tol=stat_tol)
    checks.append(_check("literal_vs_gibbs", True, verdict="fails" if rep_gibbs.stationarity_residual > 1e-3 else "passes",
                         residual=rep_gibbs.stationarity_residual))
    checks.append(_check("literal_vs_degree_modified",
                         rep_alt.stationarity_residual <= stat_tol and rep_alt.detailed_balance_residual <= stat_tol,
                         verdict="passes" if rep_alt.stationarity_residual <= stat_tol else "fails",
                         residual=rep_alt.stationarity_residual, tol=stat_tol))
    return _report("gibbs", checks)


def _energies(space, scent, eta):
    from .oracle import state_energies

    return state_energies(space, scent, eta)


def verify_connectivity(width: int = 20, height: int = 10, n: int = 100, beta: float = 1.0,
                        eta: float = 2.0, steps: int = 1_000_000, recheck_every: int = 1_000,
                        seed: int = 20240) -> dict:
    """Long run with frequent full rechecks; any violation raises inside run()."""
    dims = LatticeDims(width, height)
    scent = ScentFunction.power(height, k=1.0, phi=1.0)
    params = ChainParams(beta=beta, eta=eta, cap_n=n)
    cfg = Configuration(dims, cap=n, scent=scent)
    schedule = RunSchedule(steps=steps, burn_in=0, sample_every=max(1, steps // 100),
                           recheck_every=recheck_every)
    run(cfg, params, schedule, derive_rng(seed))
    checks = [_check("trajectory_valid", True, steps=steps, rechecks=steps // recheck_every)]
    return _report("connectivity", checks)


def verify_irreducibility(width: int = 4, height: int = 3, n: int = 6) -> dict:
    """Constructive peel on every state, plus matrix-level ergodicity."""
    dims = LatticeDims(width, height)
    scent = ScentFunction.power(height, k=1.0, phi=1.0)
    space = enumerate_state_space(dims, n, scent=scent)
    failures = 0
    for i in range(len(space)):
        cfg = space.config(i)
        try:
            order = path_to_empty(cfg)
            if len(order) != cfg.count:
                failures += 1
        except PeelFailure:
            failures += 1
    checks = [_check("peel_all_states", failures == 0, states=len(space), failures=failures)]

    params = ChainParams(beta=1.0, eta=1.0, cap_n=n)
    matrix = transition_matrix(space, params, scent)
    checks.append(_check("strongly_connected", strongly_connected(matrix)))
    checks.append(_check("aperiodic", bool((np.diag(matrix) > 0).any())))
    return _report("irreducibility", checks)


def verify_counting(instances: tuple[tuple[int, int], ...] = ((3, 2), (4, 3))) -> dict:
    checks = []
    for w, h in instances:
        dims = LatticeDims(w, h)
        space = enumerate_state_space(dims, dims.n_sites)
        hist = boundary_census(space)  # raises on violation
        checks.append(_check(f"census_{w}x{h}", True, states=len(space), lengths=len(hist)))
    return _report("counting", checks)


def verify_layerseq(width: int = 12, height: int = 6, min_samples: int = 10_000,
                    witness_trials: int = 1_000, seed: int = 77) -> dict:
    """Boundary lower bounds on chain samples and witness tightness."""
    dims = LatticeDims(width, height)
    scent = ScentFunction.power(height, k=1.0, phi=1.0)
    n = 2 * height * height
    violations = 0
    samples = 0
    grid = [(0.3, 0.5), (1.0, 1.0), (1.0, 4.0), (2.0, 2.0), (0.5, 6.0), (2.0, 6.0)]
    per_cell = -(-min_samples // len(grid))
    for cell, (beta, eta) in enumerate(grid):
        params = ChainParams(beta=beta, eta=eta, cap_n=n)
        cfg = Configuration(dims, cap=n, scent=scent)
        schedule = RunSchedule(steps=per_cell * 20, burn_in=0, sample_every=20,
                               recheck_every=10_000)
        trace = run(cfg, params, schedule, derive_rng(seed, cell))
        for i in range(len(trace)):
            seq = LayerSequence(width, height, tuple(int(c) for c in trace.layer_counts[i]))
            profile = boundary_profile(seq)
            samples += 1
            if trace.boundary[i] < profile.top_corrected:
                violations += 1
    checks = [_check("chain_boundary_bound", violations == 0, samples=samples, violations=violations)]

    rng = derive_rng(seed, 999)
    bad = 0
    for _ in range(witness_trials):
        seq = random_sequence(width, height, rng)
        cfg = witness_config(seq)
        profile = boundary_profile(seq)
        for m in profile.layers:
            if truncate_config(cfg, m).boundary > profile.value_at(m):
                bad += 1
                break
        if boundary_edge_census(cfg) != cfg.boundary:
            bad += 1
    checks.append(_check("witness_meets_profile", bad == 0, trials=witness_trials, failures=bad))

    # Backtracking surplus: a second tower of depth d costs at least 2d more
    # boundary than the single-tower witness of the same layer sequence.
    gaps = []
    short = 0
    for w, h, start, top in ((10, 6, 2, 5), (8, 5, 2, 4), (12, 8, 3, 7), (9, 6, 1, 6)):
        cfg = two_tower_config(w, h, start, top)
        tau = witness_config(layer_sequence(cfg))
        depth = top - start + 1
        gap = cfg.boundary - tau.boundary
        gaps.append({"w": w, "h": h, "depth": depth, "gap": gap, "floor": 2 * depth})
        if gap < 2 * depth:
            short += 1
    checks.append(_check("two_tower_gap", short == 0, gaps=gaps))
    return _report("layerseq", checks)


def two_tower_config(w: int, h: int, start: int, top: int) -> Configuration:
    """Full rows below ``start``, then two width-1 towers through ``top``."""
    dims = LatticeDims(w, h)
    sites = [(x, y) for y in range(1, start) for x in range(w)]
    x2 = w // 2
    sites += [(0, y) for y in range(start, top + 1)]
    sites += [(x2, y) for y in range(start, top + 1)]
    return Configuration.from_sites(dims, sites, cap=len(sites))


def verify_compression(width: int = 12, height: int = 8, trials: int = 1_000, seed: int = 78) -> dict:
    """Promotion steps never raise the bound; the result is below 6w + 4h."""
    rng = derive_rng(seed)
    tables = [
        ScentFunction.power(height, k=1.0, phi=1.0),
        ScentFunction.power(height, k=2.0, phi=3.0),
        ScentFunction.reciprocal(height, k=1.0, phi=1.0),
    ]
    cap = 6 * width + 4 * height
    step_up = 0
    cap_miss = 0
    scent_drop = 0
    for _ in range(trials):
        seq = random_sequence(width, height, rng)
        steps = compress_steps(seq)
        bounds = [boundary_bound_total(s) for s in steps]
        if any(b2 > b1 for b1, b2 in zip(bounds, bounds[1:])):
            step_up += 1
        if bounds[-1] > cap:
            cap_miss += 1
        for scent in tables:
            if sequence_scent(steps[-1], scent) < sequence_scent(steps[0], scent) - 1e-9:
                scent_drop += 1
        if steps[-1].total != seq.total:
            step_up += 1
    checks = [
        _check("promotions_never_raise_bound", step_up == 0, trials=trials),
        _check("final_bound_cap", cap_miss == 0, cap=cap),
        _check("scent_nondecreasing", scent_drop == 0, tables=len(tables)),
    ]
    return _report("layerseq_compression", checks)


def verify_convex(count: int = 100, max_h: int = 64, seed: int = 79, tol: float = 1e-9) -> dict:
    rng = derive_rng(seed)
    worst = 0.0
    eq_worst = 0.0
    for _ in range(count):
        h = int(rng.integers(2, max_h + 1))
        f = random_nondecelerating(h, rng)
        fn = convex_approx(f)
        worst = max(worst, sandwich_residuals(fn, f))
        eq_worst = max(eq_worst, abs(fn.integral(0.0, float(h)) - float(np.sum(f))))
    checks = [
        _check("sandwich_bound", worst <= tol, worst=worst, tol=tol, tables=count),
        _check("total_integral_matches_sum", eq_worst <= tol, worst=eq_worst, tol=tol),
    ]
    return _report("convex", checks)


def verify_transform(width: int = 10, height: int = 6, trials: int = 1_000, seed: int = 80) -> dict:
    """Stage accounting of the bridge-reaching rearrangement.

    bridge_transform itself asserts conservation, the scent floor, and that
    the result reaches the top; this suite re-verifies the reported deltas
    independently and summarizes the boundary-bound changes.
    """
    rng = derive_rng(seed)
    scent = ScentFunction.power(height, k=1.0, phi=1.0)
    bad = 0
    slack = []
    for _ in range(trials):
        seq = random_sequence(width, height, rng, top_gap=True)
        n = int(rng.integers(seq.total, 2 * width * height))
        try:
            trace = bridge_transform(seq, n, scent)
        except ValueError:
            # Too few particles to reach the top; retry with one spare column.
            trace = bridge_transform(seq, seq.total + height, scent)
        s_in = sequence_scent(trace.input, scent)
        s_pre = sequence_scent(trace.pre, scent)
        s_post = sequence_scent(trace.post, scent)
        if abs((s_pre - s_in) - trace.scent_deltas["pre"]) > 1e-9:
            bad += 1
        if s_pre - s_in < trace.added_full_columns * scent.phi - 1e-9:
            bad += 1
        if s_post - s_pre < -1e-9 or trace.post.n(height) < 1:
            bad += 1
        if trace.post.total != trace.input.total + trace.added_full_columns * height:
            bad += 1
        slack.append(trace.bound_deltas["post_minus_input"] - trace.bound_deltas["leading_bound"])
    checks = [
        _check("stage_accounting", bad == 0, trials=trials, failures=bad),
        _check("boundary_delta_reported", True, mean_slack=float(np.mean(slack)),
               max_slack=float(np.max(slack))),
    ]
    return _report("transform", checks)


def random_sequence(width: int, height: int, rng: np.random.Generator, top_gap: bool = False) -> LayerSequence:
    """Random valid layer sequence; with top_gap, no full slab and r_top < h."""
    if top_gap:
        r_bot = 0
        r_top = int(rng.integers(1, height))
    else:
        r_bot = int(rng.integers(0, height // 2 + 1))
        r_top = int(rng.integers(max(r_bot, 1), height + 1))
    counts = [width] * r_bot
    counts += [int(rng.integers(1, width)) for _ in range(r_top - r_bot)]
    counts += [0] * (height - r_top)
    return LayerSequence(width, height, tuple(counts))


def random_nondecelerating(h: int, rng: np.random.Generator) -> np.ndarray:
    """Random table with f(1) = 0 and nondecreasing nonnegative differences."""
    d2 = rng.random(max(h - 2, 0)) * rng.choice([0.0, 0.5, 2.0], size=max(h - 2, 0))
    d1 = np.concatenate(([rng.random() * rng.choice([0.0, 1.0])], d2)).cumsum() if h > 1 else np.zeros(0)
    return np.concatenate(([0.0], d1)).cumsum()[:h]


_SUITE_FUNCS: dict[str, Callable[..., dict]] = {
    "gibbs": verify_gibbs,
    "connectivity": verify_connectivity,
    "irreducibility": verify_irreducibility,
    "counting": verify_counting,
    "layerseq": verify_layerseq,
    "convex": verify_convex,
    "transform": verify_transform,
}


def run_suites(names: list[str], **overrides) -> list[dict]:
    reports = []
    for name in names:
        if name == "layerseq":
            reports.append(verify_layerseq(**overrides.get("layerseq", {})))
            reports.append(verify_compression(**overrides.get("compression", {})))
        else:
            reports.append(_SUITE_FUNCS[name](**overrides.get(name, {})))
    return reports


def suite_names(selector: str) -> list[str]:
    if selector == "all":
        return [s for s in SUITES if s != "all"]
    if selector not in SUITES:
        raise ValueError(f"unknown suite {selector!r}; choose from {SUITES}")
    return [selector]
