"""Cluster analysis on H (3-neighbor) and T (6-neighbor, B-sites only)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, bits
from .automaton import SpinConfiguration, TriConfiguration
from .lattice import (
    BoxSpec, DomainError, SiteRef, Sub, anchor_coords, axial_norm, edge_arrays,
    neighbor_table, tri_neighbors,
)
from .rng import make_rng

# side-contact bits for free boxes
U_MIN, U_MAX, V_MIN, V_MAX = 1, 2, 4, 8
# winding bits for periodic boxes
WIND_U, WIND_V = 1, 2


@dataclass(frozen=True)
class ClusterLabeling:
    box: BoxSpec
    kind: str                # "H" or "T"
    sign: int
    labels: np.ndarray       # per flat site: canonical cluster id or -1
    sizes: np.ndarray        # sizes[id] for canonical ids, 0 elsewhere
    contact: np.ndarray      # per id: side bits (free) or winding bits (periodic)
    unwrapped: np.ndarray    # (2, n_sites) anchor displacement from the cluster root

    def cluster_id(self, x: SiteRef) -> int:
        return int(self.labels[self.box.index(x)])

    @property
    def cluster_ids(self) -> np.ndarray:
        return np.flatnonzero(self.sizes)

    def size_of(self, x: SiteRef) -> int:
        c = self.cluster_id(x)
        return 0 if c < 0 else int(self.sizes[c])

    def winds(self, x: SiteRef) -> bool:
        c = self.cluster_id(x)
        return c >= 0 and self.box.periodic and bool(self.contact[c])

    def members(self, cid: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cid)


def occupancy(planes: np.ndarray, box: BoxSpec, kind: str, sign: int) -> np.ndarray:
    """Flat boolean mask of the sites taking part in a ``kind``/``sign`` labeling."""
    s = bits.unpack(planes, box.Lv).reshape(2, -1)
    occ = s if sign > 0 else ~s
    if kind == "T":
        occ = occ.copy()
        occ[0] = False
    return occ.ravel()


def _as_planes(config) -> np.ndarray:
    if isinstance(config, SpinConfiguration):
        return config.planes
    if isinstance(config, TriConfiguration):
        planes = np.zeros((2,) + config.plane.shape, dtype=np.uint64)
        planes[1] = config.plane
        return planes
    raise TypeError(f"cannot label {type(config).__name__}")


def label_occupied(box: BoxSpec, kind: str, sign: int, occ: np.ndarray) -> ClusterLabeling:
    src, dst, ou, ov = edge_arrays(box, kind)
    labels, sizes, winds, unu, unv = _kernels.label(occ, src, dst, ou, ov)
    if box.periodic:
        contact = winds
    else:
        contact = np.zeros(box.n_sites, dtype=np.uint8)
        Lu, Lv, nc = box.Lu, box.Lv, box.n_cells
        sides = (
            (U_MIN, nc + np.arange(Lv)),
            (U_MAX, nc + (Lu - 1) * Lv + np.arange(Lv)),
            (V_MIN, nc + np.arange(Lu) * Lv),
            (V_MAX, nc + np.arange(Lu) * Lv + Lv - 1),
        )
        for bit, idx in sides:
            lab = labels[idx]
            lab = lab[lab >= 0]
            contact[lab] |= bit
    return ClusterLabeling(box, kind, sign, labels, sizes, contact, np.stack([unu, unv]))


def label_clusters(config, kind: str = "H", sign: int = 1) -> ClusterLabeling:
    """Union-find labeling of the ``sign`` clusters of ``config``.

    ``kind="T"`` uses only B-sites with the triangular adjacency; it accepts
    either a :class:`SpinConfiguration` or a :class:`TriConfiguration`.
    """
    if kind not in ("H", "T"):
        raise DomainError(f"unknown lattice kind {kind!r}")
    if isinstance(config, TriConfiguration) and kind == "H":
        raise DomainError("a T configuration has no A-sites")
    planes = _as_planes(config)
    return label_occupied(config.box, kind, sign, occupancy(planes, config.box, kind, sign))


def connected(labeling: ClusterLabeling, x: SiteRef, y: SiteRef) -> bool:
    a = labeling.cluster_id(x)
    return a >= 0 and a == labeling.cluster_id(y)


def _site_shifts(box: BoxSpec) -> tuple[np.ndarray, np.ndarray]:
    """Axial offset of every flat site from its anchor (A-centers are off-anchor)."""
    su = np.zeros(box.n_sites)
    sv = np.zeros(box.n_sites)
    cu, cv = box.scheme.center_shift
    su[: box.n_cells] = cu
    sv[: box.n_cells] = cv
    return su, sv


def max_radius(box: BoxSpec) -> float:
    """Largest admissible radius for boundary-connection queries."""
    if box.periodic:
        # half the shortest period of the torus
        return 0.5 * math.sqrt(3.0) * min(box.Lu, box.Lv)
    return math.inf


def connected_to_boundary(labeling: ClusterLabeling, x: SiteRef, radius: float) -> bool:
    """Does the cluster of ``x`` reach Euclidean distance ``radius`` from ``x``?

    Distances use unwrapped positions along the cluster, so on periodic boxes
    a winding cluster reaches every radius.  On free boxes the radius must
    not exceed the distance from ``x`` to the farthest in-box site.
    """
    box = labeling.box
    if radius < 0 or radius > max_radius(box):
        raise DomainError(f"radius {radius} does not fit the box")
    if not box.periodic:
        _check_reachable(box, x, radius)
    c = labeling.cluster_id(x)
    if c < 0:
        return False
    if radius == 0:
        return True
    if box.periodic and labeling.contact[c]:
        return True
    idx = labeling.members(c)
    su, sv = _site_shifts(box)
    i = box.index(x)
    if box.periodic:
        du = labeling.unwrapped[0, idx] - labeling.unwrapped[0, i]
        dv = labeling.unwrapped[1, idx] - labeling.unwrapped[1, i]
    else:
        au, av = anchor_coords(box)
        du = au[idx] - au[i]
        dv = av[idx] - av[i]
    d = axial_norm(du + su[idx] - su[i], dv + sv[idx] - sv[i])
    return bool(np.any(d >= radius - 1e-9))


def _check_reachable(box: BoxSpec, x: SiteRef, radius: float) -> None:
    su, sv = _site_shifts(box)
    au, av = anchor_coords(box)
    i = box.index(x)
    d = axial_norm(au + su - au[i] - su[i], av + sv - av[i] - sv[i])
    if radius > d.max() + 1e-9:
        raise DomainError("radius exceeds the box")


def reaches_radius(occ: np.ndarray, box: BoxSpec, kind: str, x: int, radius: float) -> bool:
    """BFS form of :func:`connected_to_boundary` on a flat occupancy mask."""
    nbr, ndu, ndv = neighbor_table(box, kind)
    su, sv = _site_shifts(box)
    return bool(_kernels.reaches(occ, nbr, ndu, ndv, int(x), su, sv, float(radius) ** 2))


@dataclass(frozen=True)
class Region:
    """Axial rhombus ``[u0, u0 + nu) x [v0, v0 + nv)`` of B-anchors."""

    u0: int
    v0: int
    nu: int
    nv: int

    @classmethod
    def whole(cls, box: BoxSpec) -> "Region":
        return cls(0, 0, box.Lu, box.Lv)


@dataclass(frozen=True)
class CrossingEvent:
    region: Region
    direction: str
    sign: int
    kind: str
    occurred: bool

    def __bool__(self) -> bool:
        return self.occurred


def _region_planes(planes: np.ndarray, box: BoxSpec, region: Region) -> tuple[np.ndarray, BoxSpec]:
    if region.nu < 2 or region.nv < 2:
        raise DomainError("degenerate region")
    if (region.u0 < 0 or region.v0 < 0 or region.u0 + region.nu > box.Lu
            or region.v0 + region.nv > box.Lv):
        raise DomainError("region leaves the box")
    s = bits.unpack(planes, box.Lv)
    sub = s[..., region.u0:region.u0 + region.nu, region.v0:region.v0 + region.nv]
    rbox = BoxSpec(region.nu, region.nv, "free", box.scheme)
    return sub, rbox


def crossing(config, region: Region, direction: str = "horizontal", sign: int = 1,
             kind: str = "T") -> CrossingEvent:
    """Is there a ``sign`` path inside ``region`` joining two opposite sides?

    ``horizontal`` joins the sides ``u = u0`` and ``u = u0 + nu - 1``;
    ``vertical`` joins ``v = v0`` and ``v = v0 + nv - 1``.  Only paths inside
    the region count.  On H an A-site belongs to the region iff its whole
    triangle does, which is the same as its center lying in the closed
    rhombus; side contact is made by B-sites lying on the side.
    """
    if direction not in ("horizontal", "vertical"):
        raise DomainError(f"unknown direction {direction!r}")
    planes = _as_planes(config)
    sub, rbox = _region_planes(planes, config.box, region)
    occ2 = sub if sign > 0 else ~sub
    occ2 = occ2.reshape(2, -1).copy()
    if kind == "T":
        occ2[0] = False
    elif kind == "H":
        occ2[0] &= _full_triangle_mask(rbox)
    else:
        raise DomainError(f"unknown lattice kind {kind!r}")
    lab = label_occupied(rbox, kind, sign, occ2.ravel())
    want = (U_MIN | U_MAX) if direction == "horizontal" else (V_MIN | V_MAX)
    hit = bool(np.any((lab.contact & want) == want))
    return CrossingEvent(region, direction, sign, kind, hit)


def _full_triangle_mask(box: BoxSpec) -> np.ndarray:
    uu, vv = np.meshgrid(np.arange(box.Lu), np.arange(box.Lv), indexing="ij")
    ok = np.ones_like(uu, dtype=bool)
    for du, dv in box.scheme.hex_offsets:
        ok &= (uu + du >= 0) & (uu + du < box.Lu) & (vv + dv >= 0) & (vv + dv < box.Lv)
    return ok.ravel()


def enclosing_minus_loop(config, x: SiteRef) -> bool:
    """True iff no plus T-path joins the T-neighborhood of ``x`` to the box rim.

    By self-matching of T this is the same as a minus T-circuit separating
    ``x`` from the rim.  The box is read as a free box (its rim is the
    boundary) whatever its wrap rule; only B-spins are consulted.
    """
    box = config.box
    if x.sub != Sub.B:
        raise DomainError("enclosure is defined for B-sites")
    if not (0 < x.u < box.Lu - 1 and 0 < x.v < box.Lv - 1):
        raise DomainError("x must be an interior site")
    planes = _as_planes(config)
    free = BoxSpec(box.Lu, box.Lv, "free", box.scheme)
    lab = label_occupied(free, "T", 1, occupancy(planes, free, "T", 1))
    for y in [x] + tri_neighbors(x, free):
        c = lab.cluster_id(y)
        if c >= 0 and lab.contact[c]:
            return False
    return True


def sample_independent_T(box: BoxSpec, p: float, seed: int) -> TriConfiguration:
    """Independent Bernoulli(p) site percolation on T (the reference model)."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")
    u = make_rng(seed).random((box.Lu, box.Lv))
    return TriConfiguration(box, bits.pack(u < p), 0)


def stable_core(config: SpinConfiguration) -> np.ndarray:
    """Flat mask of sites lying on a constant-sign H-loop, barbell or winding path.

    These are the sites of the 2-core of their sign's subgraph: each has at
    least two same-sign neighbors inside the core, so none of them can flip.
    """
    nbr, _, _ = neighbor_table(config.box, "H")
    plus = occupancy(config.planes, config.box, "H", 1)
    return _kernels.two_core(plus, nbr) | _kernels.two_core(~plus, nbr)
