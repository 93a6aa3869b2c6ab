"""Compiled inner loops for cluster labeling and radius queries."""
from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _find(parent, du, dv, i):
    # returns (root, u-offset, v-offset) of i relative to its root; compresses the path
    r = i
    ou = 0
    ov = 0
    while parent[r] != r:
        ou += du[r]
        ov += dv[r]
        r = parent[r]
    j = i
    cu = ou
    cv = ov
    while parent[j] != j:
        nxt = parent[j]
        tu = du[j]
        tv = dv[j]
        parent[j] = r
        du[j] = cu
        dv[j] = cv
        cu -= tu
        cv -= tv
        j = nxt
    return r, ou, ov


@nb.njit(cache=True)
def label(occ, src, dst, offu, offv):
    """Weighted union-find over the occupied endpoints of each edge.

    Returns canonical labels (smallest member index, -1 if unoccupied),
    per-label sizes, per-label winding flags (1: winds along u, 2: along v)
    and every site's unwrapped anchor displacement from its cluster root.
    """
    n = occ.size
    parent = np.arange(n)
    size = np.ones(n, np.int64)
    du = np.zeros(n, np.int64)
    dv = np.zeros(n, np.int64)
    wind = np.zeros(n, np.uint8)
    for e in range(src.size):
        s = src[e]
        t = dst[e]
        if not (occ[s] and occ[t]):
            continue
        rs, su, sv = _find(parent, du, dv, s)
        rt, tu, tv = _find(parent, du, dv, t)
        if rs == rt:
            wu = su + offu[e] - tu
            wv = sv + offv[e] - tv
            if wu != 0:
                wind[rs] |= 1
            if wv != 0:
                wind[rs] |= 2
            continue
        # displacement of rt relative to rs
        ru = offu[e] - tu + su
        rv = offv[e] - tv + sv
        if size[rs] >= size[rt]:
            parent[rt] = rs
            du[rt] = ru
            dv[rt] = rv
            size[rs] += size[rt]
            wind[rs] |= wind[rt]
        else:
            parent[rs] = rt
            du[rs] = -ru
            dv[rs] = -rv
            size[rt] += size[rs]
            wind[rt] |= wind[rs]
    labels = np.full(n, -1, np.int64)
    first = np.full(n, -1, np.int64)
    sizes = np.zeros(n, np.int64)
    winds = np.zeros(n, np.uint8)
    unw_u = np.zeros(n, np.int64)
    unw_v = np.zeros(n, np.int64)
    for i in range(n):
        if not occ[i]:
            continue
        r, ou, ov = _find(parent, du, dv, i)
        if first[r] == -1:
            first[r] = i
            sizes[i] = size[r]
            winds[i] = wind[r]
        labels[i] = first[r]
        unw_u[i] = ou
        unw_v[i] = ov
    return labels, sizes, winds, unw_u, unw_v


@nb.njit(cache=True)
def reaches(occ, nbr, ndu, ndv, start, shift_u, shift_v, radius2):
    """BFS from ``start`` over occupied sites.

    True iff the cluster winds (some site is reached at two different
    unwrapped positions) or contains a site whose unwrapped Euclidean
    distance from ``start`` is at least ``sqrt(radius2)``.  ``shift_*`` give
    each site's axial position relative to its anchor.
    """
    if not occ[start]:
        return False
    if radius2 <= 0.0:
        return True
    n = occ.size
    seen = np.zeros(n, np.bool_)
    pu = np.zeros(n, np.int64)
    pv = np.zeros(n, np.int64)
    queue = np.empty(n, np.int64)
    head = 0
    tail = 1
    queue[0] = start
    seen[start] = True
    x0u = shift_u[start]
    x0v = shift_v[start]
    deg = nbr.shape[1]
    while head < tail:
        i = queue[head]
        head += 1
        for k in range(deg):
            j = nbr[i, k]
            if j < 0 or not occ[j]:
                continue
            ju = pu[i] + ndu[i, k]
            jv = pv[i] + ndv[i, k]
            if seen[j]:
                if ju != pu[j] or jv != pv[j]:
                    return True
                continue
            seen[j] = True
            pu[j] = ju
            pv[j] = jv
            a = ju + shift_u[j] - x0u
            b = jv + shift_v[j] - x0v
            if 3.0 * (a * a + a * b + b * b) >= radius2:
                return True
            queue[tail] = j
            tail += 1
    return False


@nb.njit(cache=True)
def pair_connected_fraction(labels, base, Lu, Lv, k, base2):
    """Mean over anchors ``c`` of [site base+c and site base2+(c + k e1) share a label]."""
    hits = 0
    for u in range(Lu):
        u2 = (u + k) % Lu
        for v in range(Lv):
            a = labels[base + u * Lv + v]
            if a < 0:
                continue
            if labels[base2 + u2 * Lv + v] == a:
                hits += 1
    return hits / (Lu * Lv)


@nb.njit(cache=True)
def two_core(occ, nbr):
    """Sites of the 2-core of the occupied subgraph (loops, barbells, windings)."""
    n = occ.size
    deg = np.zeros(n, np.int64)
    for i in range(n):
        if occ[i]:
            for k in range(nbr.shape[1]):
                j = nbr[i, k]
                if j >= 0 and occ[j]:
                    deg[i] += 1
    alive = occ.copy()
    stack = np.empty(n, np.int64)
    top = 0
    for i in range(n):
        if alive[i] and deg[i] < 2:
            alive[i] = False
            stack[top] = i
            top += 1
    while top > 0:
        top -= 1
        i = stack[top]
        for k in range(nbr.shape[1]):
            j = nbr[i, k]
            if j >= 0 and alive[j]:
                deg[j] -= 1
                if deg[j] < 2:
                    alive[j] = False
                    stack[top] = j
                    top += 1
    return alive
