"""Bridge-event detection and snapshot rendering.

A configuration bridges when a connected component of occupied sites reaches
the top layer.  The events tracked here:

* ``no_bridge``: the top layer is empty.
* ``multiple_bridges(a, b)``: the restriction to layers >= floor(a*h) has at
  least two components that each reach layer floor(b*h), i.e. the contour
  backtracks between two excursions.
* ``multi_bridge_event(epsilon)``: some window of depth epsilon exhibits
  multiple bridges.  Because floor(a*h) only takes integer values, the union
  over real window positions collapses to a scan over integer start layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import _kernel
from .config import Configuration
from .lattice import NEIGHBOR_OFFSETS, Site


@dataclass(frozen=True)
class BridgeStats:
    nb: bool
    bridge_count: int
    mb: bool


@dataclass(frozen=True)
class BridgeReport:
    nb: bool
    bridge_count: int
    mb_hits: tuple[tuple[int, int], ...]
    epsilon_used: float


def connected_components(cfg: Configuration, min_layer: int = 1) -> list[set[Site]]:
    """Components of the occupied set restricted to layers >= min_layer."""
    dims = cfg.dims
    seen: set[Site] = set()
    comps: list[set[Site]] = []
    for v in cfg.sites():
        if v.y < min_layer or v in seen:
            continue
        comp = {v}
        stack = [v]
        seen.add(v)
        while stack:
            cx, cy = stack.pop()
            for dx, dy in NEIGHBOR_OFFSETS:
                u = Site((cx + dx) % dims.w, cy + dy)
                if min_layer <= u.y <= dims.h and cfg.occ[u.y, u.x] and u not in seen:
                    seen.add(u)
                    comp.add(u)
                    stack.append(u)
        comps.append(comp)
    return comps


def no_bridge(cfg: Configuration) -> bool:
    """True when no occupied site sits on the top layer."""
    return int(cfg.layer_counts[cfg.dims.h]) == 0


def bridge_count(cfg: Configuration) -> int:
    """Number of occupied components containing a top-layer site."""
    h = cfg.dims.h
    return sum(1 for comp in connected_components(cfg) if any(v.y == h for v in comp))


def _floor_layer(fraction: float, h: int) -> int:
    # Tiny slack so exact products like 0.4 * 5 do not round down.
    return int(math.floor(fraction * h + 1e-9))


def multiple_bridges(cfg: Configuration, a: float, b: float) -> bool:
    """Two components above layer floor(a*h) both reaching layer floor(b*h)."""
    if not 0 < a < b <= 1:
        raise ValueError(f"need 0 < a < b <= 1, got a={a}, b={b}")
    h = cfg.dims.h
    start = max(_floor_layer(a, h), 1)
    target = _floor_layer(b, h)
    comps = connected_components(cfg, min_layer=start)
    return sum(1 for comp in comps if any(v.y == target for v in comp)) >= 2


def multi_bridge_event(cfg: Configuration, epsilon: float) -> tuple[bool, tuple[tuple[int, int], ...]]:
    """Scan all depth-epsilon windows; returns the flag and all witnesses.

    Window starts run over integer layers A = 1 .. h - floor(epsilon*h) with
    target layer A + floor(epsilon*h).
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    h = cfg.dims.h
    depth = _floor_layer(epsilon, h)
    if depth < 1:
        raise ValueError(f"epsilon={epsilon} is below the layer resolution of h={h}")
    hits = []
    for start in range(1, h - depth + 1):
        comps = connected_components(cfg, min_layer=start)
        if sum(1 for comp in comps if any(v.y == start + depth for v in comp)) >= 2:
            hits.append((start, start + depth))
    return bool(hits), tuple(hits)


def bridge_report(cfg: Configuration, epsilon: float) -> BridgeReport:
    flag, hits = multi_bridge_event(cfg, epsilon)
    return BridgeReport(nb=no_bridge(cfg), bridge_count=bridge_count(cfg),
                        mb_hits=hits, epsilon_used=epsilon)


def bridge_stats(cfg: Configuration, depth: int) -> BridgeStats:
    """Compiled fast path for the per-sample observables of a run."""
    nb, bridges, mb = _kernel.bridge_stats(cfg.occ, cfg.dims.w, cfg.dims.h, depth)
    return BridgeStats(nb=bool(nb), bridge_count=int(bridges), mb=bool(mb))


def render(cfg: Configuration, format: str = "ascii") -> str:
    if format == "ascii":
        return cfg.to_text()
    if format == "svg":
        return to_svg(cfg)
    raise ValueError(f"unknown format {format!r}")


def to_svg(cfg: Configuration, radius: float = 0.45) -> str:
    """Standalone SVG, one circle per interior site, cylinder cut at column 0.

    Rows are staggered half a unit per layer so the triangular adjacency is
    visible; occupied sites are filled.
    """
    w, h = cfg.dims.w, cfg.dims.h
    dy = math.sqrt(3.0) / 2.0
    pad = 1.0
    width = w + 0.5 * h + 2 * pad
    height = (h - 1) * dy + 2 * pad
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:.3f} {height:.3f}">',
        f'<rect width="{width:.3f}" height="{height:.3f}" fill="white"/>',
    ]
    for y in range(1, h + 1):
        cy = pad + (h - y) * dy
        for x in range(w):
            cx = pad + x + 0.5 * (y - 1)
            fill = "black" if cfg.occ[y, x] else "white"
            parts.append(
                f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{radius}" '
                f'fill="{fill}" stroke="gray" stroke-width="0.05"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
