"""Layer-sequence machinery: boundary bounds, witnesses, and transformations.

The layer sequence of a configuration counts occupied sites per layer.  It
forgets the geometry but still bounds the boundary length from below, layer
by layer, and it determines the scent total exactly.  This module makes that
machinery executable:

* per-layer boundary increments and the cumulative lower-bound profile,
* explicit witness configurations that meet the profile,
* the compression move that caps the profile at 6w + 4h,
* a convex piecewise-linear approximation of a scent table with a two-sided
  integral error bound,
* the three-stage rearrangement that turns any sequence stopping short of
  the top layer into one that reaches it, with scent and boundary-bound
  accounting per stage,
* the closed-form parameter thresholds separating the bridging phases.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .config import Configuration, ScentFunction, globally_simply_connected
from .lattice import LatticeDims, Site


@dataclass(frozen=True)
class LayerSequence:
    """Per-layer occupancy counts (n_1, ..., n_h) for a w-column cylinder.

    Valid sequences never place a full layer above a partial one and never
    leave an empty layer below a nonempty one.
    """

    w: int
    h: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != self.h:
            raise ValueError(f"expected {self.h} layer counts, got {len(self.counts)}")
        for k, n in enumerate(self.counts, start=1):
            if not 0 <= n <= self.w:
                raise ValueError(f"layer {k} count {n} outside [0, {self.w}]")
        for k in range(self.h - 1):
            if self.counts[k + 1] == self.w and self.counts[k] < self.w:
                raise ValueError(f"full layer {k + 2} above partial layer {k + 1}")
            if self.counts[k] == 0 and self.counts[k + 1] > 0:
                raise ValueError(f"empty layer {k + 1} below nonempty layer {k + 2}")

    def n(self, k: int) -> int:
        if not 1 <= k <= self.h:
            raise ValueError(f"layer {k} outside 1..{self.h}")
        return self.counts[k - 1]

    @property
    def r_bot(self) -> int:
        """Topmost layer of the fully occupied bottom slab (0 if none)."""
        r = 0
        while r < self.h and self.counts[r] == self.w:
            r += 1
        return r

    @property
    def r_top(self) -> int:
        """Topmost nonempty layer (0 for the empty sequence)."""
        r = self.h
        while r > 0 and self.counts[r - 1] == 0:
            r -= 1
        return r

    @property
    def total(self) -> int:
        return sum(self.counts)

    def replace(self, k: int, value: int) -> "LayerSequence":
        counts = list(self.counts)
        counts[k - 1] = value
        return LayerSequence(self.w, self.h, tuple(counts))


def layer_sequence(cfg: Configuration) -> LayerSequence:
    return LayerSequence(cfg.dims.w, cfg.dims.h, tuple(int(c) for c in cfg.layer_counts[1:]))


def sequence_scent(seq: LayerSequence, scent: ScentFunction) -> float:
    """Total scent shared by every configuration with this layer sequence."""
    if scent.h != seq.h:
        raise ValueError("scent table height does not match the sequence")
    return float(np.dot(np.asarray(seq.counts, dtype=np.float64), scent.table))


def boundary_increment(n_below: int, n_above: int) -> int:
    """Minimum boundary growth when one more partial layer is stacked on."""
    d = n_above - n_below
    return 2 + 2 * max(d + 1, 0) + 2 * max(d - 1, 0)


@dataclass(frozen=True)
class BoundaryProfile:
    """Cumulative boundary lower bounds B(M) for truncations at layer M.

    ``layers`` runs from the first bounded layer to the topmost nonempty
    one.  ``total`` is the bound for the whole configuration;
    ``top_corrected`` subtracts 2 * n_h, the top-layer edges that do not
    exist inside the domain, and is the bound to compare against an actual
    boundary length when the sequence reaches the top layer.
    """

    layers: tuple[int, ...]
    values: tuple[int, ...]
    top_correction: int

    @property
    def total(self) -> int:
        return self.values[-1] if self.values else 0

    @property
    def top_corrected(self) -> int:
        return self.total - self.top_correction

    def value_at(self, m: int) -> int:
        if not self.layers or not self.layers[0] <= m <= self.layers[-1]:
            raise ValueError(f"layer {m} outside bounded range {self.layers[:1]}..{self.layers[-1:]}")
        return self.values[m - self.layers[0]]


def boundary_profile(seq: LayerSequence) -> BoundaryProfile:
    """Lower bounds on B for every truncation of a valid sequence.

    The base is 2*n_1 + 2 when layer 1 is partial and 2*w when a full slab
    sits at the bottom; each further layer adds its boundary increment.
    """
    r_bot, r_top = seq.r_bot, seq.r_top
    if r_top == 0:
        return BoundaryProfile(layers=(), values=(), top_correction=0)
    r_min = max(r_bot, 1)
    base = 2 * seq.w if r_bot >= 1 else 2 * seq.n(1) + 2
    layers = [r_min]
    values = [base]
    for k in range(r_min, r_top):
        values.append(values[-1] + boundary_increment(seq.n(k), seq.n(k + 1)))
        layers.append(k + 1)
    correction = 2 * seq.n(seq.h) if r_top == seq.h else 0
    return BoundaryProfile(layers=tuple(layers), values=tuple(values), top_correction=correction)


def boundary_bound_total(seq: LayerSequence) -> int:
    return boundary_profile(seq).total


def truncate_config(cfg: Configuration, m: int) -> Configuration:
    """The sub-configuration keeping only layers 1..m."""
    sites = [v for v in cfg.sites() if v.y <= m]
    return Configuration.from_sites(cfg.dims, sites, cap=cfg.cap, scent=cfg.scent)


def _run_members(start: int, length: int, w: int) -> set[int]:
    return {(start + i) % w for i in range(length)}


def _down_edges(above: set[int], below: set[int], w: int) -> int:
    return sum((x in below) + ((x + 1) % w in below) for x in above)


def witness_config(seq: LayerSequence, dims: LatticeDims | None = None, cap: int | None = None,
                   scent: ScentFunction | None = None) -> Configuration:
    """A configuration realizing the sequence at the boundary-bound profile.

    Each partial layer is one contiguous run whose circular offset is chosen
    by exhaustive search to maximize edges down to the layer below, so every
    stacked layer meets its boundary increment exactly.
    """
    if dims is None:
        dims = LatticeDims(seq.w, seq.h)
    if (dims.w, dims.h) != (seq.w, seq.h):
        raise ValueError("dims do not match the sequence")
    w = seq.w
    sites: list[Site] = []
    below: set[int] = set()
    start_prev = 0
    for k in range(1, seq.r_top + 1):
        n_k = seq.n(k)
        if n_k == w:
            row = set(range(w))
            start = 0
        elif not below or len(below) == w:
            # Bottom layer or a layer over a full slab: every offset ties.
            start = 0
            row = _run_members(start, n_k, w)
        else:
            best, start = -1, 0
            for delta in sorted(range(-(w // 2), w - w // 2), key=lambda d: (abs(d), d > 0)):
                t = (start_prev + delta) % w
                e = _down_edges(_run_members(t, n_k, w), below, w)
                if e > best:
                    best, start = e, t
            row = _run_members(start, n_k, w)
        sites.extend(Site(x, k) for x in sorted(row))
        below = row
        start_prev = start
    cfg = Configuration.from_sites(dims, sites, cap=cap if cap is not None else max(seq.total, 1), scent=scent)
    if not globally_simply_connected(cfg):
        raise AssertionError("witness construction produced an invalid configuration")
    return cfg


def compress_steps(seq: LayerSequence) -> list[LayerSequence]:
    """All intermediate sequences of the compression loop, input first.

    While two layers k1 < k2 at distance >= 2 both jump by >= 2, one site is
    promoted from layer k1 + 1 to layer k2.  Each promotion keeps the
    boundary-bound total from rising and can only raise the scent total.
    """
    steps = [seq]
    counts = list(seq.counts)
    h = seq.h
    while True:
        jumps = [k for k in range(1, h) if counts[k] - counts[k - 1] >= 2]
        pair = None
        for i, k1 in enumerate(jumps):
            for k2 in jumps[i + 1 :]:
                if k2 >= k1 + 2:
                    pair = (k1, k2)
                    break
            if pair:
                break
        if pair is None:
            return steps
        k1, k2 = pair
        counts[k1] -= 1  # layer k1 + 1, zero-based
        counts[k2 - 1] += 1
        steps.append(LayerSequence(seq.w, seq.h, tuple(counts)))


def compress(seq: LayerSequence) -> LayerSequence:
    return compress_steps(seq)[-1]


class _Line(NamedTuple):
    slope: float
    intercept: float

    def at(self, x: float) -> float:
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Convex function on [0, domain_end] given as a maximum of lines."""

    lines: tuple[_Line, ...]
    domain_end: float

    def value(self, x: float) -> float:
        if not 0 <= x <= self.domain_end:
            raise ValueError(f"x={x} outside [0, {self.domain_end}]")
        return max(line.at(x) for line in self.lines)

    @property
    def nonneg(self) -> bool:
        xs = [0.0, self.domain_end]
        xs += [x for _, x in _envelope(self.lines)[1:] if 0.0 < x < self.domain_end]
        return min(self.value(x) for x in xs) >= -1e-12

    def segments(self, x0: float, x1: float) -> list[tuple[float, float, _Line]]:
        """Upper-envelope pieces covering [x0, x1], left to right."""
        hull = _envelope(self.lines)
        starts = [s for _, s in hull]
        segs = []
        for i, (line, start) in enumerate(hull):
            end = starts[i + 1] if i + 1 < len(hull) else math.inf
            a, b = max(start, x0), min(end, x1)
            if a < b:
                segs.append((a, b, line))
        return segs

    def integral(self, x0: float, x1: float) -> float:
        """Exact integral over [x0, x1] (piecewise quadratic antiderivative)."""
        if x0 > x1:
            raise ValueError("reversed integration bounds")
        total = 0.0
        for a, b, line in self.segments(x0, x1):
            total += line.slope * (b * b - a * a) / 2.0 + line.intercept * (b - a)
        return total


def _envelope(lines: Sequence[_Line]) -> list[tuple[_Line, float]]:
    """Upper envelope as (line, x where it takes over), takeover increasing."""
    by_slope: dict[float, float] = {}
    for m, b in lines:
        if m not in by_slope or b > by_slope[m]:
            by_slope[m] = b
    ordered = [_Line(m, b) for m, b in sorted(by_slope.items())]
    hull: list[tuple[_Line, float]] = []
    for line in ordered:
        cross = -math.inf
        while hull:
            prev, prev_start = hull[-1]
            cross = (prev.intercept - line.intercept) / (line.slope - prev.slope)
            if cross <= prev_start:
                hull.pop()
            else:
                break
        hull.append((line, cross if hull else -math.inf))
    return hull


def _nondecelerating_table(f: np.ndarray, tol: float = 1e-9) -> bool:
    if abs(f[0]) > tol:
        return False
    d1 = np.diff(f)
    if len(d1) and (np.any(d1 < -tol) or np.any(np.diff(d1) < -tol)):
        return False
    return True


def convex_approx(values: Iterable[float]) -> PiecewiseLinearFn:
    """Convex approximation of a table f(1..h) with nondecreasing differences.

    The result fhat is a max of one line per level K, where the level-K line
    has slope f(K) - f(K-1) and is lowered by an offset found by bisection so
    that the integral of the envelope over [0, K] equals f(1) + ... + f(K)
    exactly.  For all 1 <= K1 <= K2 <= h the approximation then satisfies

        -df(K1-1)/8 <= integral(K1-1, K2) - sum(f(K1..K2)) <= df(K2)/8

    with the lower bound replaced by 0 at K1 = 1 and the upper bound by 0 at
    K2 = h.
    """
    f = np.asarray(list(values), dtype=np.float64)
    h = len(f)
    if h < 1:
        raise ValueError("need at least one table entry")
    if not _nondecelerating_table(f):
        raise ValueError("table must start at 0 with nondecreasing nonnegative differences")

    lines = [_Line(0.0, 0.0)]
    offsets = [0.0]  # offset of level 1 is 0
    running_sum = float(f[0])
    for big_k in range(2, h + 1):
        df_prev = float(f[big_k - 1] - f[big_k - 2])
        df_prev2 = float(f[big_k - 2] - f[big_k - 3]) if big_k >= 3 else 0.0
        a_max = offsets[-1] + 0.5 * (df_prev - df_prev2)
        base = _Line(df_prev, float(f[big_k - 1]) - (big_k - 0.5) * df_prev)
        running_sum += float(f[big_k - 1])
        target = running_sum

        def gap(a: float) -> float:
            fn = PiecewiseLinearFn(tuple(lines) + (_Line(base.slope, base.intercept - a),), float(big_k))
            return fn.integral(0.0, float(big_k)) - target

        if gap(a_max) >= -1e-12:
            a_k = a_max
        elif gap(0.0) <= 1e-12:
            a_k = 0.0
        else:
            lo, hi = 0.0, a_max
            while hi - lo > 1e-12:
                mid = 0.5 * (lo + hi)
                if gap(mid) >= 0.0:
                    lo = mid
                else:
                    hi = mid
            a_k = lo
        offsets.append(a_k)
        lines.append(_Line(base.slope, base.intercept - a_k))
    return PiecewiseLinearFn(tuple(lines), float(h))


def sandwich_residuals(fn: PiecewiseLinearFn, values: Sequence[float]) -> float:
    """Worst violation of the two-sided integral bound over all (K1, K2)."""
    f = np.asarray(values, dtype=np.float64)
    h = len(f)
    prefix = np.concatenate(([0.0], np.cumsum(f)))
    worst = 0.0
    for k1 in range(1, h + 1):
        lower = 0.0 if k1 == 1 else -(f[k1 - 1] - f[k1 - 2]) / 8.0
        for k2 in range(k1, h + 1):
            upper = 0.0 if k2 == h else (f[k2] - f[k2 - 1]) / 8.0
            diff = fn.integral(float(k1 - 1), float(k2)) - (prefix[k2] - prefix[k1 - 1])
            worst = max(worst, lower - diff, diff - upper)
    return worst


@dataclass(frozen=True)
class TransformTrace:
    """Record of the three-stage rearrangement toward the top layer."""

    input: LayerSequence
    pre: LayerSequence
    mid: LayerSequence
    post: LayerSequence
    u: int
    added_full_columns: int
    j_full: int
    j_bot: int
    leftover_m: int
    scent_deltas: dict
    bound_deltas: dict


def bridge_transform(seq: LayerSequence, n: int, scent: ScentFunction) -> TransformTrace:
    """Rearrange a sequence that stops below the top into one reaching it.

    Stages: *pre* fills empty columns with unused particles (or, lacking
    those, moves particles to assemble one full column); *mid* consolidates
    bottom-supported columns into full columns and shifts the remaining
    columns flush against the top; *post* reinstates the at most h - 1
    particles left over from the consolidation, one per topmost layer with
    room.  Scent never drops from input to pre, nor from pre to post; the
    mid stage alone may dip because it temporarily sets those leftovers
    aside.  Boundary-bound values are recorded for comparison, not asserted,
    since only their leading behavior is pinned down.
    """
    if scent.h != seq.h:
        raise ValueError("scent table height does not match the sequence")
    w, h = seq.w, seq.h
    depth = seq.r_top
    if seq.r_bot != 0:
        raise ValueError("transform expects no fully occupied bottom slab")
    if depth >= h:
        raise ValueError("sequence already reaches the top layer")
    if seq.total > n:
        raise ValueError(f"sequence holds {seq.total} particles, more than the cap {n}")

    u = w - max(seq.counts, default=0) - 1
    spare_columns = (n - seq.total) // h
    added = min(u, spare_columns)
    pre_counts = [c + added for c in seq.counts]
    if added == 0:
        moved_to = depth + 1
        for _ in range(h - depth):
            source = max((k for k in range(1, h + 1) if pre_counts[k - 1] >= 2), default=None)
            if source is None:
                raise ValueError("not enough particles to assemble a full column")
            pre_counts[source - 1] -= 1
            pre_counts[moved_to - 1] += 1
            moved_to += 1
    pre = LayerSequence(w, h, tuple(pre_counts))

    j_full = pre.n(h)
    if j_full < 1 or any(c < j_full for c in pre.counts):
        raise AssertionError("pre-stage did not produce full columns")
    bottom_supported = [
        j
        for j in range(j_full + 1, w + 1)
        if all(pre.n(k) >= j or pre.n(k + 1) < j for k in range(1, h))
    ]
    n_bot = [sum(1 for j in bottom_supported if pre.n(k) >= j) for k in range(1, h + 1)]
    n_top = [pre.n(k) - j_full - n_bot[k - 1] for k in range(1, h + 1)]
    if min(n_top) < 0:
        raise AssertionError("column decomposition produced negative counts")

    top_heights = [sum(1 for c in n_top if c >= i) for i in range(1, max(n_top, default=0) + 1)]
    j_bot = sum(n_bot) // h
    leftover = sum(n_bot) - j_bot * h
    mid_counts = [
        j_full + j_bot + sum(1 for c in top_heights if c >= h - k + 1) for k in range(1, h + 1)
    ]
    mid = LayerSequence(w, h, tuple(mid_counts))

    post_counts = list(mid_counts)
    rooms = [k for k in range(h, 0, -1) if post_counts[k - 1] < w - 1]
    if len(rooms) < leftover:
        raise AssertionError("no room to reinstate leftover particles")
    for k in rooms[:leftover]:
        post_counts[k - 1] += 1
    post = LayerSequence(w, h, tuple(post_counts))

    if pre.total != seq.total + added * h or mid.total != pre.total - leftover or post.total != pre.total:
        raise AssertionError("particle accounting broke across stages")
    if post.n(h) < 1 or max(post.counts) > w - 1:
        raise AssertionError("final sequence invalid")

    s_in, s_pre = sequence_scent(seq, scent), sequence_scent(pre, scent)
    s_mid, s_post = sequence_scent(mid, scent), sequence_scent(post, scent)
    tol = 1e-9 * max(1.0, abs(s_post))
    if s_pre - s_in < added * scent.phi - tol:
        raise AssertionError("pre-stage scent gain below the full-column floor")
    if s_post - s_pre < -tol or s_post - s_mid < -tol:
        raise AssertionError("scent decreased across the guaranteed stages")

    scent_deltas = {
        "pre": s_pre - s_in,
        "mid": s_mid - s_pre,
        "post": s_post - s_mid,
        "pre_to_post": s_post - s_pre,
    }
    b_in = boundary_bound_total(seq)
    b_post = boundary_bound_total(post)
    bound_deltas = {
        "input": float(b_in),
        "pre": float(boundary_bound_total(pre)),
        "mid": float(boundary_bound_total(mid)),
        "post": float(b_post),
        "post_minus_input": float(b_post - b_in),
        "leading_bound": 4.0 * (h - depth)
        - 2.0 * max(w - u - depth, seq.total / h - h / 2.0),
    }
    return TransformTrace(
        input=seq,
        pre=pre,
        mid=mid,
        post=post,
        u=u,
        added_full_columns=added,
        j_full=j_full,
        j_bot=j_bot,
        leftover_m=leftover,
        scent_deltas=scent_deltas,
        bound_deltas=bound_deltas,
    )


class Thresholds(NamedTuple):
    beta1: float
    beta2: float
    eta1: float
    eta2: float


def phase_thresholds(rho: float, alpha: float, phi: float, beta: float) -> Thresholds:
    """Closed-form parameter thresholds for the bridging phase diagram.

    Bridges form (asymptotically) above (beta1, eta1) and fail to form below
    (beta2, eta2(beta)).  Natural logarithms throughout.
    """
    if rho <= 0.5:
        raise ValueError("density rho must exceed 1/2 for the thresholds to be defined")
    if phi <= 0 or beta <= 0:
        raise ValueError("phi and beta must be positive")
    if not rho < alpha - 2:
        warnings.warn(
            f"rho={rho} outside (1/2, alpha-2) with alpha={alpha}; thresholds extrapolate",
            stacklevel=2,
        )
    ln2 = math.log(2.0)
    beta1 = (2 * rho + 3 + 4 * alpha) / (2 * rho - 1) * ln2
    beta2 = (1 + alpha / 2) * ln2
    eta1 = 4.0 / phi * (1 + 1 / rho)
    eta2 = (1.0 / phi) * min(
        2 * (1 - ln2 / beta),
        4 / (1 + rho) * (1 - (1 + alpha / 2) * ln2 / beta),
    )
    return Thresholds(beta1=float(beta1), beta2=float(beta2), eta1=float(eta1), eta2=float(eta2))
