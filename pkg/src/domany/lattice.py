"""Hexagonal / triangular lattice geometry.

Embedding
---------
B-sites form a triangular lattice indexed by axial coordinates ``(u, v)`` with
basis vectors

    e1 = (sqrt(3), 0)        e2 = (sqrt(3)/2, 3/2)

so that the hexagons of H have side length 1 and T-neighbors are sqrt(3) apart.
The six T-neighbor offsets are::

    (1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)

A :class:`PairScheme` picks one triangle orientation.  Each triangle
``{c, c + a1, c + a2}`` of that orientation gets an A-site at its center,
indexed by its *anchor* ``c``.  With the default ``UP`` scheme
(``a1 = (1, 0)``, ``a2 = (0, 1)``)::

    A(u, v) -- B(u, v), B(u + 1, v), B(u, v + 1)
    B(u, v) -- A(u, v), A(u - 1, v), A(u, v - 1)

Every B-site is a vertex of exactly three scheme triangles, so the number of
A-sites equals the number of B-sites.  On free boxes the A-sites are those
anchored inside the box; under ``UP`` every in-box T-edge then has its center
in the box, under ``DOWN`` some rim edges do not.  Flat site index:
``sub * Lu * Lv + u * Lv + v`` with ``A = 0`` and ``B = 1``.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class Sub(enum.IntEnum):
    A = 0
    B = 1


class SiteRef(NamedTuple):
    u: int
    v: int
    sub: Sub


TRI_OFFSETS: tuple[tuple[int, int], ...] = (
    (1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1),
)

SQRT3 = math.sqrt(3.0)
E1 = np.array([SQRT3, 0.0])
E2 = np.array([SQRT3 / 2.0, 1.5])


@dataclass(frozen=True)
class PairScheme:
    """Translation-invariant pairing of the six T-neighbors of every site.

    ``a1`` and ``a2`` are the offsets of the other two corners of the triangle
    anchored at a B-site; the three pairs of ``x`` come from the three
    scheme triangles containing ``x``.
    """

    name: str
    a1: tuple[int, int]
    a2: tuple[int, int]

    def __post_init__(self):
        offs = set(TRI_OFFSETS)
        d = (self.a2[0] - self.a1[0], self.a2[1] - self.a1[1])
        if self.a1 not in offs or self.a2 not in offs or d not in offs:
            raise DomainError(f"{self.name}: corners do not form a triangle")

    @property
    def hex_offsets(self) -> tuple[tuple[int, int], ...]:
        """B-neighbors of A(c) are B(c + o) for these offsets."""
        return ((0, 0), self.a1, self.a2)

    @property
    def pairs(self) -> tuple[tuple[tuple[int, int], tuple[int, int]], ...]:
        """The three T-neighbor pairs of a B-site, as offsets from it."""
        a1, a2 = self.a1, self.a2
        neg = lambda o: (-o[0], -o[1])  # noqa: E731
        sub = lambda o, q: (o[0] - q[0], o[1] - q[1])  # noqa: E731
        return (
            (a1, a2),                        # triangle anchored at x
            (neg(a1), sub(a2, a1)),          # anchored at x - a1
            (neg(a2), sub(a1, a2)),          # anchored at x - a2
        )

    @property
    def center_shift(self) -> np.ndarray:
        """Axial offset from the anchor B-site to the A-site it anchors."""
        return np.array([(self.a1[0] + self.a2[0]) / 3.0,
                         (self.a1[1] + self.a2[1]) / 3.0])


UP = PairScheme("up", (1, 0), (0, 1))
DOWN = PairScheme("down", (1, 0), (1, -1))
SCHEMES = {"up": UP, "down": DOWN}


@dataclass(frozen=True)
class BoxSpec:
    Lu: int
    Lv: int
    boundary: str = "periodic"
    scheme: PairScheme = UP

    def __post_init__(self):
        if self.boundary not in ("periodic", "free"):
            raise DomainError(f"unknown boundary {self.boundary!r}")
        if self.Lu < 1 or self.Lv < 1:
            raise DomainError("box extents must be positive")
        if self.periodic and (self.Lu % 2 or self.Lv % 2 or self.Lu < 4 or self.Lv < 4):
            # small or odd wraps create multi-edges and break the bipartite bookkeeping
            raise DomainError("periodic boxes need even extents >= 4")

    @classmethod
    def square(cls, L: int, boundary: str = "periodic", scheme: PairScheme = UP) -> "BoxSpec":
        return cls(L, L, boundary, scheme)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def n_cells(self) -> int:
        """Sites per sublattice."""
        return self.Lu * self.Lv

    @property
    def n_sites(self) -> int:
        return 2 * self.Lu * self.Lv

    def contains(self, x: SiteRef) -> bool:
        return 0 <= x.u < self.Lu and 0 <= x.v < self.Lv and x.sub in (Sub.A, Sub.B)

    def index(self, x: SiteRef) -> int:
        if not self.contains(x):
            raise DomainError(f"{x} outside box {self.Lu}x{self.Lv}")
        return int(x.sub) * self.n_cells + x.u * self.Lv + x.v

    def site(self, i: int) -> SiteRef:
        sub, rest = divmod(int(i), self.n_cells)
        u, v = divmod(rest, self.Lv)
        return SiteRef(u, v, Sub(sub))

    def sites(self, sub: Sub | None = None):
        subs = (Sub.A, Sub.B) if sub is None else (sub,)
        for s in subs:
            for u in range(self.Lu):
                for v in range(self.Lv):
                    yield SiteRef(u, v, s)

    def _wrap(self, u: int, v: int) -> tuple[int, int] | None:
        if self.periodic:
            return u % self.Lu, v % self.Lv
        if 0 <= u < self.Lu and 0 <= v < self.Lv:
            return u, v
        return None

    def position(self, x: SiteRef) -> np.ndarray:
        """Euclidean position (hexagon side 1) of an in-box site."""
        return axial_to_xy(axial_position(x, self.scheme))


def axial_position(x: SiteRef, scheme: PairScheme = UP) -> np.ndarray:
    a = np.array([x.u, x.v], dtype=float)
    if x.sub == Sub.A:
        a = a + scheme.center_shift
    return a


def axial_to_xy(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[..., :1] * E1 + a[..., 1:2] * E2


def axial_norm(du, dv):
    """Euclidean length of the axial displacement ``du*e1 + dv*e2``."""
    du = np.asarray(du, dtype=float)
    dv = np.asarray(dv, dtype=float)
    return SQRT3 * np.sqrt(du * du + du * dv + dv * dv)


def min_image_distance(box: BoxSpec, x: SiteRef, y: SiteRef) -> float:
    """Euclidean distance, using the nearest periodic image on periodic boxes."""
    d = axial_position(y, box.scheme) - axial_position(x, box.scheme)
    if not box.periodic:
        return float(axial_norm(d[0], d[1]))
    du = (d[0] + box.Lu / 2) % box.Lu - box.Lu / 2
    dv = (d[1] + box.Lv / 2) % box.Lv - box.Lv / 2
    best = math.inf
    for su in (-box.Lu, 0, box.Lu):
        for sv in (-box.Lv, 0, box.Lv):
            best = min(best, float(axial_norm(du + su, dv + sv)))
    return best


def hex_neighbors(x: SiteRef, box: BoxSpec) -> list[SiteRef]:
    """H-neighbors of ``x``; on free boxes only the in-box ones."""
    if not box.contains(x):
        raise DomainError(f"{x} outside box")
    out = []
    if x.sub == Sub.A:
        for du, dv in box.scheme.hex_offsets:
            w = box._wrap(x.u + du, x.v + dv)
            if w is not None:
                out.append(SiteRef(w[0], w[1], Sub.B))
    else:
        for du, dv in box.scheme.hex_offsets:
            w = box._wrap(x.u - du, x.v - dv)
            if w is not None:
                out.append(SiteRef(w[0], w[1], Sub.A))
    return out


def tri_neighbors(x: SiteRef, box: BoxSpec) -> list[SiteRef]:
    if x.sub != Sub.B:
        raise DomainError("tri_neighbors is defined on B-sites only")
    if not box.contains(x):
        raise DomainError(f"{x} outside box")
    out = []
    for du, dv in TRI_OFFSETS:
        w = box._wrap(x.u + du, x.v + dv)
        if w is not None:
            out.append(SiteRef(w[0], w[1], Sub.B))
    return out


def pair_neighbors(x: SiteRef, box: BoxSpec) -> list[tuple[SiteRef | None, SiteRef | None]]:
    """The three scheme pairs of ``x``; out-of-box members are ``None``."""
    if x.sub != Sub.B:
        raise DomainError("pairs are defined on B-sites only")
    out = []
    for pair in box.scheme.pairs:
        members = []
        for du, dv in pair:
            w = box._wrap(x.u + du, x.v + dv)
            members.append(None if w is None else SiteRef(w[0], w[1], Sub.B))
        out.append(tuple(members))
    return out


@dataclass(frozen=True)
class StarTriangleMap:
    box: BoxSpec
    t_to_b: dict[tuple[int, int], SiteRef]
    b_to_t: dict[SiteRef, tuple[int, int]]
    centers: dict[SiteRef, tuple[SiteRef, SiteRef, SiteRef]]
    incomplete: tuple[SiteRef, ...]  # free boxes: A-sites whose triangle leaves the box


def star_triangle_map(box: BoxSpec) -> StarTriangleMap:
    """Correspondence T <-> B and scheme triangle <-> A-site at its center."""
    t_to_b, b_to_t = {}, {}
    for x in box.sites(Sub.B):
        t_to_b[(x.u, x.v)] = x
        b_to_t[x] = (x.u, x.v)
    centers, incomplete = {}, []
    for a in box.sites(Sub.A):
        nb = hex_neighbors(a, box)
        if len(nb) == 3:
            centers[a] = tuple(nb)
        else:
            incomplete.append(a)
    return StarTriangleMap(box, t_to_b, b_to_t, centers, tuple(incomplete))


@functools.lru_cache(maxsize=64)
def edge_arrays(box: BoxSpec, kind: str):
    """Flat edge list ``(src, dst, off_u, off_v)`` for the H or T adjacency.

    ``off`` is the unwrapped axial displacement from the anchor of ``src`` to
    the anchor of ``dst``; on periodic boxes it differs from the index
    difference exactly on edges that cross the seam.
    """
    Lu, Lv, nc = box.Lu, box.Lv, box.n_cells
    uu, vv = np.meshgrid(np.arange(Lu), np.arange(Lv), indexing="ij")
    uu, vv = uu.ravel(), vv.ravel()
    if kind == "H":
        src_base = uu * Lv + vv                  # A anchors
        offsets = box.scheme.hex_offsets
    elif kind == "T":
        src_base = nc + uu * Lv + vv
        offsets = ((1, 0), (0, 1), (-1, 1))      # one direction per T-edge
    else:
        raise DomainError(f"unknown lattice kind {kind!r}")
    srcs, dsts, ous, ovs = [], [], [], []
    for du, dv in offsets:
        tu, tv = uu + du, vv + dv
        if box.periodic:
            keep = np.ones_like(tu, dtype=bool)
        else:
            keep = (tu >= 0) & (tu < Lu) & (tv >= 0) & (tv < Lv)
        tu, tv = tu % Lu, tv % Lv
        srcs.append(src_base[keep])
        dsts.append(nc + (tu * Lv + tv)[keep])
        ous.append(np.full(keep.sum(), du))
        ovs.append(np.full(keep.sum(), dv))
    src = np.concatenate(srcs).astype(np.int64)
    dst = np.concatenate(dsts).astype(np.int64)
    ou = np.concatenate(ous).astype(np.int64)
    ov = np.concatenate(ovs).astype(np.int64)
    for a in (src, dst, ou, ov):
        a.setflags(write=False)
    return src, dst, ou, ov


@functools.lru_cache(maxsize=64)
def neighbor_table(box: BoxSpec, kind: str):
    """Dense ``(n_sites, deg)`` neighbor table with ``-1`` padding, plus the
    matching unwrapped anchor displacements."""
    src, dst, ou, ov = edge_arrays(box, kind)
    n = box.n_sites
    deg_max = 3 if kind == "H" else 6
    nbr = np.full((n, deg_max), -1, dtype=np.int64)
    du = np.zeros((n, deg_max), dtype=np.int64)
    dv = np.zeros((n, deg_max), dtype=np.int64)
    s_all = np.concatenate([src, dst])
    t_all = np.concatenate([dst, src])
    u_all = np.concatenate([ou, -ou])
    v_all = np.concatenate([ov, -ov])
    order = np.argsort(s_all, kind="stable")
    s_all, t_all, u_all, v_all = s_all[order], t_all[order], u_all[order], v_all[order]
    starts = np.searchsorted(s_all, np.arange(n))
    slot = np.arange(s_all.size) - starts[s_all]
    nbr[s_all, slot] = t_all
    du[s_all, slot] = u_all
    dv[s_all, slot] = v_all
    for a in (nbr, du, dv):
        a.setflags(write=False)
    return nbr, du, dv


def anchor_coords(box: BoxSpec) -> tuple[np.ndarray, np.ndarray]:
    """Axial anchor coordinates of every flat site index."""
    idx = np.arange(box.n_sites)
    rest = idx % box.n_cells
    return rest // box.Lv, rest % box.Lv
