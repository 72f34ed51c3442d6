"""Geometry of the cylindrical triangular domain.

The domain is a band of the triangular lattice with ``w`` columns wrapping
around horizontally and ``h`` layers stacked vertically.  Two virtual layers
extend the band: layer 0 is always occupied and layer ``h + 1`` is always
unoccupied, so queries near the bottom and top behave uniformly.

Sites use axial coordinates ``(x, y)`` with column ``x`` in ``[0, w)`` and
layer ``y`` in ``[0, h + 1]``.  The six neighbors of a site are given by
``NEIGHBOR_OFFSETS`` with columns reduced mod ``w``.  Under this stencil the
graph distance from ``(x, y)`` to layer 0 equals ``y`` for every column.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

NEIGHBOR_OFFSETS = ((-1, 0), (1, 0), (0, -1), (1, -1), (0, 1), (-1, 1))


class Site(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class LatticeDims:
    """Dimensions of the domain: w columns (>= 3) by h layers (>= 2)."""

    w: int
    h: int

    def __post_init__(self):
        if self.w < 3:
            raise ValueError(f"need w >= 3 so column wrap is simple, got w={self.w}")
        if self.h < 2:
            raise ValueError(f"need h >= 2, got h={self.h}")

    @property
    def alpha(self) -> Fraction:
        """Aspect ratio w/h, kept exact."""
        return Fraction(self.w, self.h)

    @property
    def n_sites(self) -> int:
        return self.w * self.h

    def contains(self, v: Site, include_virtual: bool = True) -> bool:
        lo, hi = (0, self.h + 1) if include_virtual else (1, self.h)
        return 0 <= v[0] < self.w and lo <= v[1] <= hi

    def site_index(self, v: Site) -> int:
        """Flat index of an interior site; layer 1 comes first."""
        if not self.contains(v, include_virtual=False):
            raise ValueError(f"site {v} not in the interior of {self}")
        return (v[1] - 1) * self.w + v[0]

    def index_site(self, i: int) -> Site:
        if not 0 <= i < self.n_sites:
            raise ValueError(f"site index {i} out of range")
        return Site(i % self.w, 1 + i // self.w)

    def interior_sites(self):
        for y in range(1, self.h + 1):
            for x in range(self.w):
                yield Site(x, y)


def neighbors(dims: LatticeDims, v: Site) -> list[Site]:
    """The six neighbors of v in the extended domain, columns mod w.

    Neighbors whose layer falls outside [0, h+1] are omitted; that only
    happens when v itself sits on a virtual layer.
    """
    if not dims.contains(v):
        raise ValueError(f"site {v} outside extended domain of {dims}")
    x, y = v
    out = []
    for dx, dy in NEIGHBOR_OFFSETS:
        ny = y + dy
        if 0 <= ny <= dims.h + 1:
            out.append(Site((x + dx) % dims.w, ny))
    return out


def degree_in_lambda(dims: LatticeDims, v: Site) -> int:
    """Number of neighbors of v lying on the interior layers 1..h."""
    if not dims.contains(v, include_virtual=False):
        raise ValueError(f"site {v} not on an interior layer of {dims}")
    deg = 6
    if v[1] == 1:
        deg -= 2
    if v[1] == dims.h:
        deg -= 2
    return deg


def are_adjacent(dims: LatticeDims, u: Site, v: Site) -> bool:
    dy = v[1] - u[1]
    if abs(dy) > 1:
        return False
    dx = (v[0] - u[0]) % dims.w
    if dy == 0:
        return dx == 1 or dx == dims.w - 1
    if dy == 1:
        return dx == 0 or dx == dims.w - 1
    return dx == 0 or dx == 1
