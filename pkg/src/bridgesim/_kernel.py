"""Compiled inner loops: chain steps and component scans on the occupancy grid.

These mirror the pure-Python implementations in ``chain`` and
``observables`` and are cross-checked against them in the tests.  The grid
is the (h + 2, w) uint8 array owned by a Configuration; callers pass cached
totals in and take the updated values back.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_OFF_X = np.array([-1, 1, 0, 1, 0, -1], dtype=np.int64)
_OFF_Y = np.array([0, 0, -1, -1, 1, 1], dtype=np.int64)


@njit(cache=True, nogil=True, inline="always")
def _pair_adjacent(x1, y1, x2, y2, w):
    dy = y2 - y1
    if dy > 1 or dy < -1:
        return False
    dx = (x2 - x1) % w
    if dy == 0:
        return dx == 1 or dx == w - 1
    if dy == 1:
        return dx == 0 or dx == w - 1
    return dx == 0 or dx == 1


@njit(cache=True, nogil=True)
def _locally_sc(occ, w, h, x, y, occupied):
    nxs = np.empty(6, np.int64)
    nys = np.empty(6, np.int64)
    m = 0
    for i in range(6):
        nx = (x + _OFF_X[i]) % w
        ny = y + _OFF_Y[i]
        if ny == 0 or (1 <= ny <= h and occ[ny, nx] == 1):
            nxs[m] = nx
            nys[m] = ny
            m += 1
    if occupied:
        if m > 5:
            return False
        if m == 0:
            return True
    elif m == 0:
        return False
    # Flood the induced subgraph on the <= 6 neighborhood members.
    seen = np.zeros(6, np.uint8)
    stack = np.empty(6, np.int64)
    seen[0] = 1
    stack[0] = 0
    top = 1
    reached = 1
    while top > 0:
        top -= 1
        i = stack[top]
        for j in range(m):
            if seen[j] == 0 and _pair_adjacent(nxs[i], nys[i], nxs[j], nys[j], w):
                seen[j] = 1
                stack[top] = j
                top += 1
                reached += 1
    return reached == m


@njit(cache=True, nogil=True)
def run_steps(occ, sites, ps, w, h, beta, eta, s_table, cap, count, b_cache, s_cache,
              exact_mode, bar_conv):
    """Advance the chain by len(sites) proposals, updating caches in place."""
    for t in range(sites.shape[0]):
        idx = sites[t]
        y = 1 + idx // w
        x = idx % w
        occupied = occ[y, x] == 1
        if not occupied and count >= cap:
            continue
        if not _locally_sc(occ, w, h, x, y, occupied):
            continue
        b_lambda = 0
        deg = 0
        for i in range(6):
            nx = (x + _OFF_X[i]) % w
            ny = y + _OFF_Y[i]
            if 1 <= ny <= h:
                deg += 1
                if occ[ny, nx] == 0:
                    b_lambda += 1
        b_acc = b_lambda
        deg_acc = deg
        if bar_conv and y == h:
            b_acc += 2
            deg_acc += 2
        s_v = s_table[y]
        exponent = 2.0 * b_acc - eta * s_v
        if exact_mode:
            exponent -= deg_acc
        if not occupied:
            exponent = -exponent
        if exponent >= 0.0 or ps[t] <= np.exp(beta * exponent):
            if occupied:
                occ[y, x] = 0
                count -= 1
                b_cache += deg - 2 * b_lambda
                s_cache -= s_v
            else:
                occ[y, x] = 1
                count += 1
                b_cache += 2 * b_lambda - deg
                s_cache += s_v
    return count, b_cache, s_cache


@njit(cache=True, nogil=True)
def run_steps_visits(occ, sites, ps, w, h, beta, eta, s_table, cap, count, b_cache, s_cache,
                     exact_mode, bar_conv, visits, sample_every, step_offset, mask):
    """run_steps plus in-loop visit counting by occupancy bitmask (w*h <= 20)."""
    for t in range(sites.shape[0]):
        idx = sites[t]
        y = 1 + idx // w
        x = idx % w
        occupied = occ[y, x] == 1
        ok = True
        if not occupied and count >= cap:
            ok = False
        if ok and _locally_sc(occ, w, h, x, y, occupied):
            b_lambda = 0
            deg = 0
            for i in range(6):
                nx = (x + _OFF_X[i]) % w
                ny = y + _OFF_Y[i]
                if 1 <= ny <= h:
                    deg += 1
                    if occ[ny, nx] == 0:
                        b_lambda += 1
            b_acc = b_lambda
            deg_acc = deg
            if bar_conv and y == h:
                b_acc += 2
                deg_acc += 2
            s_v = s_table[y]
            exponent = 2.0 * b_acc - eta * s_v
            if exact_mode:
                exponent -= deg_acc
            if not occupied:
                exponent = -exponent
            if exponent >= 0.0 or ps[t] <= np.exp(beta * exponent):
                bit = np.int64(1) << ((y - 1) * w + x)
                if occupied:
                    occ[y, x] = 0
                    count -= 1
                    b_cache += deg - 2 * b_lambda
                    s_cache -= s_v
                else:
                    occ[y, x] = 1
                    count += 1
                    b_cache += 2 * b_lambda - deg
                    s_cache += s_v
                mask ^= bit
        if (step_offset + t + 1) % sample_every == 0:
            visits[mask] += 1
    return count, b_cache, s_cache, mask


@njit(cache=True, nogil=True)
def _components_reaching(occ, w, h, min_layer, target_layer, labels, stack):
    """Count connected components of occupied sites on layers >= min_layer
    that contain a site on target_layer."""
    labels[:] = 0
    next_label = 0
    hits = 0
    for x0 in range(w):
        if occ[target_layer, x0] == 0 or labels[target_layer, x0] != 0:
            continue
        next_label += 1
        hits += 1
        top = 0
        stack[top, 0] = x0
        stack[top, 1] = target_layer
        top += 1
        labels[target_layer, x0] = next_label
        while top > 0:
            top -= 1
            cx = stack[top, 0]
            cy = stack[top, 1]
            for i in range(6):
                nx = (cx + _OFF_X[i]) % w
                ny = cy + _OFF_Y[i]
                if min_layer <= ny <= h and occ[ny, nx] == 1 and labels[ny, nx] == 0:
                    labels[ny, nx] = next_label
                    stack[top, 0] = nx
                    stack[top, 1] = ny
                    top += 1
    return hits


@njit(cache=True, nogil=True)
def bridge_stats(occ, w, h, depth):
    """(top layer empty, components touching the top, any multi-bridge window).

    The window scan tests every start layer A with target A + depth; two
    components of the restriction to layers >= A both reaching the target
    layer constitute a multi-bridge at that depth.
    """
    nb = True
    for x in range(w):
        if occ[h, x] == 1:
            nb = False
            break
    labels = np.zeros((h + 2, w), dtype=np.int32)
    stack = np.empty((w * h, 2), dtype=np.int64)
    bridges = _components_reaching(occ, w, h, 1, h, labels, stack)
    mb = False
    for start in range(1, h - depth + 1):
        if _components_reaching(occ, w, h, start, start + depth, labels, stack) >= 2:
            mb = True
            break
    return nb, bridges, mb
