"""Command-line frontend: simulate, sweep, verify, enumerate, render.

Exit codes: 0 success, 1 usage or configuration error, 2 verification
failure, 3 runtime invariant violation.  All randomness derives from the
config seed, so artifacts are byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .chain import ChainParams, InvariantViolation, RunSchedule, Trace, derive_rng, run
from .config import Configuration, ScentFunction, parse_snapshot
from .lattice import LatticeDims
from .layerseq import phase_thresholds
from .observables import render as render_config
from .observables import to_svg
from .oracle import enumerate_state_space, exact_distribution, state_energies, total_variation
from .verify import run_suites, suite_names


class UsageError(ValueError):
    pass


TIMESERIES_COLUMNS = ("step", "particles", "boundary", "scent", "hamiltonian", "nb", "mb_eps", "bridge_count")
SWEEP_COLUMNS = ("beta", "eta", "replica", "seed", "nb_fraction", "mb_fraction", "mean_bridge_count", "mean_H")


@dataclass
class ExperimentConfig:
    width: int = 6
    height: int = 4
    n: int | None = None
    rho: float | None = None
    beta: float = 1.0
    eta: float = 1.0
    scent: str = "power"
    scent_k: float = 1.0
    phi: float = 1.0
    scent_normalized: bool = True
    steps: int = 100_000
    burn_in: int | None = None
    sample_every: int = 100
    recheck_every: int = 10_000
    seed: int = 0
    mode: str = "exact_gibbs"
    convention: str = "lambda_only"
    epsilon: float = 0.3
    output_dir: str = "out"
    compare_exact: bool = False
    initial: str = "empty"

    def __post_init__(self):
        if (self.n is None) == (self.rho is None):
            raise UsageError("exactly one of n and rho must be given")
        if self.epsilon * self.height < 1:
            raise UsageError(f"epsilon={self.epsilon} resolves no layer at height {self.height}")
        if self.burn_in is None:
            self.burn_in = self.steps // 2
        if not 0 <= self.burn_in <= self.steps:
            raise UsageError("burn_in must lie in [0, steps]")
        if self.initial not in ("empty", "bridge"):
            raise UsageError("initial must be 'empty' or 'bridge'")

    @property
    def cap_n(self) -> int:
        return self.n if self.n is not None else int(self.rho * self.height * self.height)

    @property
    def density(self) -> float:
        return self.rho if self.rho is not None else self.cap_n / self.height**2

    def build(self) -> tuple[Configuration, ChainParams, RunSchedule, ScentFunction]:
        dims = LatticeDims(self.width, self.height)
        maker = {"power": ScentFunction.power, "reciprocal": ScentFunction.reciprocal}.get(self.scent)
        if maker is None:
            raise UsageError(f"unknown scent kind {self.scent!r}")
        scent = maker(self.height, k=self.scent_k, phi=self.phi, normalized=self.scent_normalized)
        params = ChainParams(beta=self.beta, eta=self.eta, cap_n=self.cap_n, rho=self.rho,
                             mode=self.mode, convention=self.convention, seed=self.seed)
        if self.initial == "bridge":
            cfg = bridged_start(dims, self.cap_n, scent)
        else:
            cfg = Configuration(dims, cap=self.cap_n, scent=scent)
        schedule = RunSchedule(steps=self.steps, burn_in=self.burn_in,
                               sample_every=self.sample_every, recheck_every=self.recheck_every,
                               epsilon=self.epsilon)
        return cfg, params, schedule, scent


def bridged_start(dims: LatticeDims, n: int, scent: ScentFunction) -> Configuration:
    """Initial state already spanning bottom to top: n // h adjacent full
    columns, remainder in the lowest layers.  Used to probe which phase is
    stable when nucleation from empty is too slow to observe."""
    if n < dims.h:
        raise UsageError(f"bridged start needs n >= h, got n={n}, h={dims.h}")
    full = n // dims.h
    rest = n - full * dims.h
    counts = tuple(full + (1 if k <= rest else 0) for k in range(1, dims.h + 1))
    from .layerseq import LayerSequence, witness_config

    return witness_config(LayerSequence(dims.w, dims.h, counts), dims, cap=n, scent=scent)


def _write_timeseries(path: Path, trace: Trace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMESERIES_COLUMNS)
        for row in trace.rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def run_experiment(config: ExperimentConfig) -> dict:
    """Run one chain and write timeseries.csv, summary.json, snapshots/."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "snapshots").mkdir(exist_ok=True)

    cfg, params, schedule, scent = config.build()
    trace = run(cfg, params, schedule, derive_rng(config.seed))
    _write_timeseries(out / "timeseries.csv", trace)

    (out / "snapshots" / "final.txt").write_text(cfg.to_text())
    (out / "snapshots" / "final.svg").write_text(to_svg(cfg))

    try:
        th = phase_thresholds(config.density, config.width / config.height, scent.phi, config.beta)
        thresholds = {"beta1": th.beta1, "beta2": th.beta2, "eta1": th.eta1, "eta2": th.eta2}
    except ValueError as exc:
        thresholds = {"undefined": str(exc)}

    summary = {
        "seed": config.seed,
        "samples": len(trace),
        "nb_fraction": trace.nb_fraction,
        "mb_fraction": trace.mb_fraction,
        "mean_hamiltonian": trace.mean_hamiltonian,
        "mean_bridge_count": trace.mean_bridge_count,
        "final_particles": cfg.count,
        "thresholds": thresholds,
        "config": asdict(config),
    }
    if config.compare_exact:
        summary["tv_distance_to_exact"] = _empirical_tv(config)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _empirical_tv(config: ExperimentConfig) -> float:
    from .chain import run_visit_counts

    cfg, params, _, scent = config.build()
    space = enumerate_state_space(cfg.dims, config.cap_n, scent=scent)
    pi, _ = exact_distribution(space, params, scent)
    visits = run_visit_counts(cfg, params, config.steps, config.sample_every, derive_rng(config.seed, 1))
    emp = np.array([visits[m] for m in space.masks], dtype=np.float64)
    stray = visits.sum() - emp.sum()
    if stray:
        raise InvariantViolation(config.steps, f"{stray} samples outside the state space", cfg.to_text())
    return total_variation(emp / emp.sum(), pi)


@dataclass
class SweepGrid:
    beta_values: list[float]
    eta_values: list[float]
    replicas: int = 1
    base: ExperimentConfig = field(default_factory=lambda: ExperimentConfig(n=8))

    def __post_init__(self):
        if not self.beta_values or not self.eta_values:
            raise UsageError("sweep needs nonempty beta and eta grids")
        if self.replicas < 1:
            raise UsageError("replicas must be >= 1")

    def cells(self):
        for bi, beta in enumerate(self.beta_values):
            for ei, eta in enumerate(self.eta_values):
                for rep in range(self.replicas):
                    yield (bi * len(self.eta_values) + ei, beta, eta, rep)


def _sweep_cell(grid: SweepGrid, cell_index: int, beta: float, eta: float, replica: int) -> dict:
    config = replace(grid.base, beta=beta, eta=eta)
    cfg, params, schedule, _ = config.build()
    trace = run(cfg, params, schedule, derive_rng(config.seed, cell_index, replica))
    return {
        "beta": beta,
        "eta": eta,
        "replica": replica,
        "seed": config.seed,
        "nb_fraction": trace.nb_fraction,
        "mb_fraction": trace.mb_fraction,
        "mean_bridge_count": trace.mean_bridge_count,
        "mean_H": trace.mean_hamiltonian,
    }


def run_sweep(grid: SweepGrid, out_path: str | os.PathLike, workers: int = 1) -> list[dict]:
    """One CSV row per (beta, eta, replica); appends and resumes by cell."""
    path = Path(out_path)
    done: set[tuple] = set()
    if path.exists():
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                done.add((float(row["beta"]), float(row["eta"]), int(row["replica"])))
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerow(SWEEP_COLUMNS)

    todo = [c for c in grid.cells() if (c[1], c[2], c[3]) not in done]
    rows = []

    def finish(row: dict) -> None:
        rows.append(row)
        with open(path, "a", newline="") as fh:
            csv.writer(fh).writerow([
                repr(row[c]) if isinstance(row[c], float) else row[c] for c in SWEEP_COLUMNS
            ])
            fh.flush()
            os.fsync(fh.fileno())

    if workers <= 1:
        for cell_index, beta, eta, rep in todo:
            finish(_sweep_cell(grid, cell_index, beta, eta, rep))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_cell, grid, *cell) for cell in todo]
            for fut in futures:
                finish(fut.result())
    return rows


def _dump_states(args) -> int:
    dims = LatticeDims(args.width, args.height)
    n = args.n if args.n is not None else dims.n_sites
    scent = ScentFunction.power(args.height, k=args.scent_k, phi=args.phi)
    space = enumerate_state_space(dims, n, scent=scent)
    params = ChainParams(beta=args.beta, eta=args.eta, cap_n=n)
    pi, _ = exact_distribution(space, params, scent)
    boundary, scent_tot, ham = state_energies(space, scent, args.eta)

    def dump(fh):
        writer = csv.writer(fh)
        writer.writerow(("index", "bitmask", "boundary", "scent", "hamiltonian", "pi"))
        for i, mask in enumerate(space.masks):
            writer.writerow((i, mask, int(boundary[i]), repr(float(scent_tot[i])),
                             repr(float(ham[i])), repr(float(pi[i]))))

    if args.out is None:
        dump(sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            dump(fh)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with experiment fields; flags override")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--scent", choices=("power", "reciprocal"))
    p.add_argument("--scent-k", type=float, dest="scent_k")
    p.add_argument("--phi", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--sample-every", type=int, dest="sample_every")
    p.add_argument("--recheck-every", type=int, dest="recheck_every")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("exact_gibbs", "paper_literal"))
    p.add_argument("--convention", choices=("lambda_only", "lambda_bar"))
    p.add_argument("--epsilon", type=float)
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--compare-exact", action="store_true", dest="compare_exact", default=None)
    p.add_argument("--initial", choices=("empty", "bridge"))


_CONFIG_KEYS = ("width", "height", "rho", "n", "beta", "eta", "scent", "scent_k", "phi",
                "scent_normalized", "steps", "burn_in", "sample_every", "recheck_every",
                "seed", "mode", "convention", "epsilon", "output_dir", "compare_exact")


def _experiment_config(args) -> ExperimentConfig:
    fields = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        fields.update({k: v for k, v in raw.items() if k in _CONFIG_KEYS})
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            fields[key] = value
    # A flag that pins one of n / rho overrides the other coming from a file.
    if getattr(args, "n", None) is not None and getattr(args, "rho", None) is None:
        fields.pop("rho", None)
    if getattr(args, "rho", None) is not None and getattr(args, "n", None) is None:
        fields.pop("n", None)
    try:
        return ExperimentConfig(**fields)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bridgesim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one chain and write artifacts")
    _add_experiment_flags(sim)

    sweep = sub.add_parser("sweep", help="grid of (beta, eta) cells with replicas")
    _add_experiment_flags(sweep)
    sweep.add_argument("--betas", help="comma-separated beta grid", default=None)
    sweep.add_argument("--etas", help="comma-separated eta grid", default=None)
    sweep.add_argument("--replicas", type=int, default=None)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--sweep-out", dest="sweep_out", default=None)

    ver = sub.add_parser("verify", help="run a named verification suite")
    ver.add_argument("suite", choices=("gibbs", "connectivity", "layerseq", "counting",
                                       "convex", "transform", "irreducibility", "all"))
    ver.add_argument("--json", dest="json_out", help="write the machine-readable report here")

    enum = sub.add_parser("enumerate", help="dump the exact state space as CSV")
    enum.add_argument("--width", type=int, required=True)
    enum.add_argument("--height", type=int, required=True)
    enum.add_argument("--n", type=int, default=None)
    enum.add_argument("--beta", type=float, default=1.0)
    enum.add_argument("--eta", type=float, default=1.0)
    enum.add_argument("--scent-k", type=float, default=1.0, dest="scent_k")
    enum.add_argument("--phi", type=float, default=1.0)
    enum.add_argument("--out", default=None)

    rend = sub.add_parser("render", help="re-render a snapshot file")
    rend.add_argument("snapshot", help="path to an ascii snapshot")
    rend.add_argument("--format", choices=("ascii", "svg"), default="svg")
    rend.add_argument("--out", default=None)
    return parser


def _cmd_simulate(args) -> int:
    summary = run_experiment(_experiment_config(args))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    base = _experiment_config(args)
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    else:
        raw = {}
    betas = [float(v) for v in args.betas.split(",")] if args.betas else raw.get("beta_values", [])
    etas = [float(v) for v in args.etas.split(",")] if args.etas else raw.get("eta_values", [])
    replicas = args.replicas if args.replicas is not None else raw.get("replicas", 1)
    grid = SweepGrid(beta_values=betas, eta_values=etas, replicas=replicas, base=base)
    out = args.sweep_out or str(Path(base.output_dir) / "sweep.csv")
    rows = run_sweep(grid, out, workers=args.workers)
    print(f"wrote {len(rows)} new rows to {out}")
    return 0


def _cmd_verify(args) -> int:
    reports = run_suites(suite_names(args.suite))
    failed = False
    for report in reports:
        for check in report["checks"]:
            status = "PASS" if check["passed"] else "FAIL"
            detail = ", ".join(f"{k}={v}" for k, v in check.items() if k not in ("name", "passed"))
            print(f"{status} {report['suite']}.{check['name']}" + (f" ({detail})" if detail else ""))
            failed = failed or not check["passed"]
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(reports, indent=2, default=float) + "\n")
    return 2 if failed else 0


def _cmd_render(args) -> int:
    cfg = parse_snapshot(Path(args.snapshot).read_text())
    text = render_config(cfg, format=args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            code = _cmd_simulate(args)
        elif args.command == "sweep":
            code = _cmd_sweep(args)
        elif args.command == "verify":
            code = _cmd_verify(args)
        elif args.command == "enumerate":
            code = _dump_states(args)
        else:
            code = _cmd_render(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        print(exc.snapshot, file=sys.stderr)
        return 3
    return code


if __name__ == "__main__":
    sys.exit(main())
