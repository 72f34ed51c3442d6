"""Occupancy configurations, scent fields, and the energy function.

A configuration is a set of occupied interior sites.  Its energy combines the
total boundary length ``B`` (edges between occupied and unoccupied interior
sites) with the total scent ``S`` weighted by ``eta``:

    H = B - eta * S

Lower energy means higher stationary weight for the chain.  Boundary and
per-layer occupancy totals are cached and updated incrementally on every
add/remove; ``assert_cache_consistent`` recomputes from scratch to catch
drift.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .lattice import LatticeDims, Site, are_adjacent, degree_in_lambda, neighbors

CONVENTIONS = ("lambda_only", "lambda_bar")


@dataclass(frozen=True)
class ScentFunction:
    """Per-layer scent intensity table S(1..h).

    The table is nondecreasing with S(1) = 0.  ``phi`` is the column scent,
    the sum of the table.  ``per_layer`` has length h + 2 with zeros at the
    virtual layers so it can be indexed directly by layer.
    """

    h: int
    per_layer: np.ndarray = field(repr=False)
    kind: str = "table"
    k: float = 1.0

    def __post_init__(self):
        if self.per_layer.shape != (self.h + 2,):
            raise ValueError("per_layer must have length h + 2")
        if abs(self.per_layer[1]) > 1e-12:
            raise ValueError("scent at layer 1 must be 0")
        if np.any(np.diff(self.per_layer[1 : self.h + 1]) < -1e-12):
            raise ValueError("scent table must be nondecreasing")

    @classmethod
    def from_table(cls, values: Iterable[float]) -> "ScentFunction":
        vals = np.asarray(list(values), dtype=np.float64)
        per_layer = np.zeros(len(vals) + 2)
        per_layer[1 : len(vals) + 1] = vals
        return cls(h=len(vals), per_layer=per_layer, kind="table")

    @classmethod
    def power(cls, h: int, k: float = 1.0, phi: float = 1.0, normalized: bool = True) -> "ScentFunction":
        """S(y) proportional to y**k - 1; k = 1 gives the linear gradient.

        With ``normalized`` the table sums to ``phi`` over a column.
        """
        if k < 1:
            raise ValueError("power scent needs k >= 1")
        y = np.arange(1, h + 1, dtype=np.float64)
        raw = y**k - 1.0
        scale = phi / raw.sum() if normalized else 1.0
        per_layer = np.zeros(h + 2)
        per_layer[1 : h + 1] = scale * raw
        return cls(h=h, per_layer=per_layer, kind="power", k=k)

    @classmethod
    def reciprocal(cls, h: int, k: float = 1.0, phi: float = 1.0, normalized: bool = True) -> "ScentFunction":
        """S(y) proportional to (h - y + 1)**-k minus its value at y = 1.

        The +1 shift keeps the table finite at the top layer; without it the
        reciprocal form diverges at y = h.
        """
        if k < 1:
            raise ValueError("reciprocal scent needs k >= 1")
        y = np.arange(1, h + 1, dtype=np.float64)
        raw = (h - y + 1.0) ** (-k)
        raw -= raw[0]
        scale = phi / raw.sum() if normalized else 1.0
        per_layer = np.zeros(h + 2)
        per_layer[1 : h + 1] = scale * raw
        return cls(h=h, per_layer=per_layer, kind="reciprocal", k=k)

    @property
    def table(self) -> np.ndarray:
        return self.per_layer[1 : self.h + 1]

    @property
    def phi(self) -> float:
        return float(self.table.sum())

    def value(self, y: int) -> float:
        if not 1 <= y <= self.h:
            raise ValueError(f"layer {y} outside 1..{self.h}")
        return float(self.per_layer[y])

    @property
    def nondecelerating(self) -> bool:
        """True when first and second differences are both nonnegative."""
        t = self.table
        d1 = np.diff(t)
        d2 = np.diff(d1)
        tol = 1e-12 * max(1.0, float(np.abs(t).max(initial=0.0)))
        return bool(np.all(d1 >= -tol) and np.all(d2 >= -tol))


class EnergyTerms(NamedTuple):
    boundary: int
    scent: float
    hamiltonian: float


class Configuration:
    """Occupied-site set over the interior layers, with cached totals.

    ``occ`` is an (h + 2, w) uint8 grid including the virtual rows: row 0 is
    all ones, row h + 1 all zeros.  ``cap`` is the particle budget.  The
    optional attached scent keeps ``scent_sum`` current; energy queries may
    also pass a scent explicitly.
    """

    __slots__ = ("dims", "cap", "scent", "occ", "count", "boundary", "layer_counts", "scent_sum")

    def __init__(self, dims: LatticeDims, cap: int | None = None, scent: ScentFunction | None = None):
        if scent is not None and scent.h != dims.h:
            raise ValueError("scent table height does not match the lattice")
        self.dims = dims
        self.cap = dims.n_sites if cap is None else int(cap)
        if self.cap < 0:
            raise ValueError("cap must be nonnegative")
        self.scent = scent
        self.occ = np.zeros((dims.h + 2, dims.w), dtype=np.uint8)
        self.occ[0, :] = 1
        self.count = 0
        self.boundary = 0
        self.layer_counts = np.zeros(dims.h + 1, dtype=np.int64)
        self.scent_sum = 0.0

    @classmethod
    def from_sites(cls, dims: LatticeDims, sites: Iterable[Site], cap: int | None = None,
                   scent: ScentFunction | None = None) -> "Configuration":
        cfg = cls(dims, cap=cap, scent=scent)
        for v in sites:
            cfg.add(Site(*v))
        return cfg

    def occupied(self, v: Site) -> bool:
        x, y = v
        if not self.dims.contains(v):
            raise ValueError(f"site {v} outside extended domain")
        return bool(self.occ[y, x])

    def sites(self) -> list[Site]:
        ys, xs = np.nonzero(self.occ[1 : self.dims.h + 1, :])
        return [Site(int(x), int(y) + 1) for y, x in zip(ys, xs)]

    def add(self, v: Site) -> None:
        x, y = v
        if not 1 <= y <= self.dims.h:
            raise ValueError(f"cannot occupy virtual layer site {v}")
        if self.occ[y, x]:
            raise ValueError(f"site {v} already occupied")
        self.boundary += 2 * unoccupied_neighbor_count(self, v) - degree_in_lambda(self.dims, v)
        self.occ[y, x] = 1
        self.count += 1
        self.layer_counts[y] += 1
        if self.scent is not None:
            self.scent_sum += self.scent.per_layer[y]

    def remove(self, v: Site) -> None:
        x, y = v
        if not 1 <= y <= self.dims.h:
            raise ValueError(f"cannot vacate virtual layer site {v}")
        if not self.occ[y, x]:
            raise ValueError(f"site {v} not occupied")
        self.boundary += degree_in_lambda(self.dims, v) - 2 * unoccupied_neighbor_count(self, v)
        self.occ[y, x] = 0
        self.count -= 1
        self.layer_counts[y] -= 1
        if self.scent is not None:
            self.scent_sum -= self.scent.per_layer[y]

    def copy(self) -> "Configuration":
        out = Configuration(self.dims, cap=self.cap, scent=self.scent)
        out.occ = self.occ.copy()
        out.count = self.count
        out.boundary = self.boundary
        out.layer_counts = self.layer_counts.copy()
        out.scent_sum = self.scent_sum
        return out

    def bitmask(self) -> int:
        mask = 0
        for y in range(1, self.dims.h + 1):
            for x in range(self.dims.w):
                if self.occ[y, x]:
                    mask |= 1 << ((y - 1) * self.dims.w + x)
        return mask

    def scent_total(self, scent: ScentFunction | None = None) -> float:
        s = scent if scent is not None else self.scent
        if s is None:
            return 0.0
        return float(np.dot(self.layer_counts[1:].astype(np.float64), s.per_layer[1 : self.dims.h + 1]))

    def recompute(self) -> tuple[int, int, np.ndarray, float]:
        count = int(self.occ[1 : self.dims.h + 1, :].sum())
        boundary = boundary_edge_census(self)
        layer_counts = np.zeros(self.dims.h + 1, dtype=np.int64)
        layer_counts[1:] = self.occ[1 : self.dims.h + 1, :].sum(axis=1)
        scent_sum = 0.0
        if self.scent is not None:
            scent_sum = float(np.dot(layer_counts[1:].astype(np.float64), self.scent.per_layer[1 : self.dims.h + 1]))
        return count, boundary, layer_counts, scent_sum

    def assert_cache_consistent(self, tol: float = 1e-9) -> None:
        count, boundary, layer_counts, scent_sum = self.recompute()
        if count != self.count or boundary != self.boundary or not np.array_equal(layer_counts, self.layer_counts):
            raise AssertionError(
                f"cache drift: count {self.count}/{count}, boundary {self.boundary}/{boundary}"
            )
        if abs(scent_sum - self.scent_sum) > tol * max(1.0, abs(scent_sum)):
            raise AssertionError(f"scent cache drift: {self.scent_sum} vs {scent_sum}")

    def layer_sequence(self):
        from .layerseq import layer_sequence

        return layer_sequence(self)

    def to_text(self) -> str:
        """Snapshot, one line per layer from the top: 'L<k> ' then '#'/'.'.

        Odd layers (counting down from the top) are indented one extra space
        to suggest the triangular stagger.
        """
        h, w = self.dims.h, self.dims.w
        lines = []
        for y in range(h, 0, -1):
            row = "".join("#" if self.occ[y, x] else "." for x in range(w))
            lines.append(f"L{y} " + " " * ((h - y) % 2) + row)
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return f"Configuration(w={self.dims.w}, h={self.dims.h}, count={self.count}, cap={self.cap})"


def parse_snapshot(text: str, cap: int | None = None, scent: ScentFunction | None = None) -> Configuration:
    """Inverse of Configuration.to_text."""
    rows = {}
    for line in text.splitlines():
        line = line.rstrip()
        if not line:
            continue
        label, _, body = line.partition(" ")
        if not label.startswith("L"):
            raise ValueError(f"bad snapshot line: {line!r}")
        y = int(label[1:])
        rows[y] = body.lstrip(" ")
    if not rows:
        raise ValueError("empty snapshot")
    h = max(rows)
    widths = {len(r) for r in rows.values()}
    if len(widths) != 1 or sorted(rows) != list(range(1, h + 1)):
        raise ValueError("snapshot rows are inconsistent")
    w = widths.pop()
    dims = LatticeDims(w, h)
    sites = [Site(x, y) for y, row in rows.items() for x, c in enumerate(row) if c == "#"]
    return Configuration.from_sites(dims, sites, cap=cap, scent=scent)


def unoccupied_neighbor_count(cfg: Configuration, v: Site, convention: str = "lambda_only") -> int:
    """Number of v's neighbors that are unoccupied.

    ``lambda_only`` counts only interior neighbors, matching the boundary
    term of the energy.  ``lambda_bar`` additionally counts neighbors on the
    always-unoccupied top virtual layer, which makes every interior site
    effectively degree 6.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    x, y = v
    if not 1 <= y <= cfg.dims.h:
        raise ValueError(f"site {v} not on an interior layer")
    top = cfg.dims.h + 1 if convention == "lambda_bar" else cfg.dims.h
    count = 0
    for u in neighbors(cfg.dims, v):
        if 1 <= u[1] <= top and not cfg.occ[u[1], u[0]]:
            count += 1
    return count


def boundary_edge_census(cfg: Configuration) -> int:
    """Boundary length recomputed as an edge census, independent of caches.

    Counts interior edges with exactly one occupied endpoint; each occupied
    site contributes its unoccupied interior neighbors, so the census equals
    the sum of per-site boundary counts.
    """
    dims = cfg.dims
    total = 0
    # Count each undirected edge once via the three "forward" offsets.
    for y in range(1, dims.h + 1):
        for x in range(dims.w):
            a = cfg.occ[y, x]
            for dx, dy in ((1, 0), (0, 1), (-1, 1)):
                ny = y + dy
                if ny > dims.h:
                    continue
                if a != cfg.occ[ny, (x + dx) % dims.w]:
                    total += 1
    return total


def energy_terms(cfg: Configuration, scent: ScentFunction | None = None, eta: float = 1.0) -> EnergyTerms:
    """Total boundary, total scent, and H = B - eta * S."""
    b = cfg.boundary
    s = cfg.scent_total(scent)
    return EnergyTerms(boundary=b, scent=s, hamiltonian=b - eta * s)


def delta_hamiltonian(cfg: Configuration, v: Site, move: str, scent: ScentFunction | None = None,
                      eta: float = 1.0) -> float:
    """Exact energy change of adding or removing v, without applying it."""
    s = scent if scent is not None else cfg.scent
    s_v = s.per_layer[v[1]] if s is not None else 0.0
    occupied = cfg.occupied(v)
    if move == "remove":
        if not occupied:
            raise ValueError(f"remove requires {v} occupied")
        return eta * s_v + degree_in_lambda(cfg.dims, v) - 2 * unoccupied_neighbor_count(cfg, v)
    if move == "add":
        if occupied:
            raise ValueError(f"add requires {v} unoccupied")
        return 2 * unoccupied_neighbor_count(cfg, v) - degree_in_lambda(cfg.dims, v) - eta * s_v
    raise ValueError(f"unknown move {move!r}")


def extended_neighborhood(cfg: Configuration, v: Site) -> list[Site]:
    """Neighbors of v lying in the occupied set or on the bottom virtual layer."""
    out = []
    for u in neighbors(cfg.dims, v):
        if u[1] == 0 or (u[1] <= cfg.dims.h and cfg.occ[u[1], u[0]]):
            out.append(u)
    return out


def _induced_connected(dims: LatticeDims, nodes: list[Site]) -> bool:
    if len(nodes) <= 1:
        return True
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in range(len(nodes)):
            if j not in seen and are_adjacent(dims, nodes[i], nodes[j]):
                seen.add(j)
                stack.append(j)
    return len(seen) == len(nodes)


def locally_simply_connected(cfg: Configuration, v: Site) -> bool:
    """Neighborhood-only predicate gating single-site moves.

    For an occupied site the extended neighborhood must have at most five
    members and induce a connected subgraph (removal neither disconnects the
    neighborhood nor seals a hole at v).  For an unoccupied site it must be
    nonempty and connected (addition cannot join previously separate arms).
    """
    if not 1 <= v[1] <= cfg.dims.h:
        raise ValueError(f"site {v} not on an interior layer")
    nbhd = extended_neighborhood(cfg, v)
    if cfg.occupied(v):
        return len(nbhd) <= 5 and _induced_connected(cfg.dims, nbhd)
    return len(nbhd) >= 1 and _induced_connected(cfg.dims, nbhd)


def globally_simply_connected(cfg: Configuration) -> bool:
    """Whole-grid validity check.

    True when every occupied site connects to the bottom virtual layer
    through occupied sites, and every unoccupied interior site escapes to the
    top virtual layer through unoccupied sites (no enclosed holes).
    """
    dims = cfg.dims
    occ = cfg.occ
    w, h = dims.w, dims.h

    seen = np.zeros_like(occ, dtype=bool)
    queue = deque(Site(x, 0) for x in range(w))
    seen[0, :] = True
    reached = 0
    while queue:
        v = queue.popleft()
        for u in neighbors(dims, v):
            x, y = u
            if not seen[y, x] and y <= h and occ[y, x]:
                seen[y, x] = True
                reached += 1
                queue.append(u)
    if reached != cfg.count:
        return False

    seen = np.zeros_like(occ, dtype=bool)
    queue = deque(Site(x, h + 1) for x in range(w))
    seen[h + 1, :] = True
    reached = 0
    while queue:
        v = queue.popleft()
        for u in neighbors(dims, v):
            x, y = u
            if not seen[y, x] and 1 <= y and not occ[y, x]:
                seen[y, x] = True
                reached += 1
                queue.append(u)
    unoccupied = w * h - cfg.count
    return reached == unoccupied
