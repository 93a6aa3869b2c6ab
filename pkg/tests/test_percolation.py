import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bfs_partition
from domany.automaton import SpinConfiguration, TriConfiguration, advance, init_random, step
from domany.lattice import DOWN, BoxSpec, DomainError, SiteRef, Sub, min_image_distance
from domany.percolation import (
    Region, connected, connected_to_boundary, crossing, enclosing_minus_loop, label_clusters,
    occupancy, reaches_radius, sample_independent_T,
)

BOXES = [BoxSpec(4, 4), BoxSpec(6, 4), BoxSpec(4, 66), BoxSpec(6, 6, scheme=DOWN),
         BoxSpec(5, 3, "free"), BoxSpec(4, 5, "free", DOWN)]


def rand_cfg(box, seed, p=0.5):
    return init_random(box, p, seed)


def _check_partition(cfg, kind, sign):
    box = cfg.box
    lab = label_clusters(cfg, kind, sign)
    s = cfg.spins
    comp = bfs_partition(box, kind, lambda x: s[x.sub, x.u, x.v] == sign)
    subs = (Sub.A, Sub.B) if kind == "H" else (Sub.B,)
    for x in (y for su in subs for y in box.sites(su)):
        if x in comp:
            c = lab.cluster_id(x)
            members = {box.site(i) for i in lab.members(c)}
            assert members == comp[x]
            assert c == min(box.index(y) for y in comp[x])
            assert lab.size_of(x) == len(comp[x])
        else:
            assert lab.cluster_id(x) == -1
    assert lab.sizes.sum() == len(comp)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(BOXES), st.sampled_from(["H", "T"]),
       st.sampled_from([1, -1]), st.floats(0.2, 0.8))
def test_union_find_matches_bfs(seed, box, kind, sign, p):
    _check_partition(rand_cfg(box, seed, p), kind, sign)


def test_union_find_matches_bfs_16x16():
    box = BoxSpec(16, 16)
    for seed in range(5):
        for kind, sign in itertools.product("HT", (1, -1)):
            _check_partition(rand_cfg(box, seed), kind, sign)


def test_trivial_labelings():
    box = BoxSpec(6, 6)
    plus = SpinConfiguration.constant(box, 1)
    lab = label_clusters(plus, "H", 1)
    assert lab.cluster_ids.tolist() == [0] and lab.sizes[0] == box.n_sites
    assert label_clusters(plus, "H", -1).cluster_ids.size == 0
    t = label_clusters(plus, "T", 1)
    assert t.sizes.sum() == box.n_cells
    with pytest.raises(DomainError):
        label_clusters(plus, "Q", 1)
    with pytest.raises(DomainError):
        label_clusters(TriConfiguration.from_spins(box, np.ones((6, 6))), "H", 1)


def test_connected_examples():
    box = BoxSpec(6, 6)
    x, y = SiteRef(1, 1, Sub.B), SiteRef(3, 1, Sub.B)
    cfg = SpinConfiguration.constant(box, 1).with_spin(y, -1)
    lab = label_clusters(cfg, "H", 1)
    assert connected(lab, x, x)
    assert not connected(lab, x, y)
    assert not connected(lab, y, y)


def test_winding_flag():
    box = BoxSpec(6, 6)
    s = -np.ones((2, 6, 6))
    # a plus line along u: B(u, 2) and A(u, 2) join B(u, 2) to B(u + 1, 2)
    s[:, :, 2] = 1
    cfg = SpinConfiguration.from_spins(box, s)
    lab = label_clusters(cfg, "H", 1)
    assert lab.winds(SiteRef(0, 2, Sub.B))
    assert connected_to_boundary(lab, SiteRef(0, 2, Sub.B), 5.0)
    single = SpinConfiguration.constant(box, -1).with_spin(SiteRef(2, 2, Sub.B), 1)
    assert not label_clusters(single, "H", 1).winds(SiteRef(2, 2, Sub.B))


# -- boundary connection ---------------------------------------------------

def test_connected_to_boundary_examples():
    box = BoxSpec(8, 8)
    x = SiteRef(4, 4, Sub.B)
    plus = label_clusters(SpinConfiguration.constant(box, 1), "H", 1)
    assert connected_to_boundary(plus, x, 0)
    assert connected_to_boundary(plus, x, 6.0)
    single = SpinConfiguration.constant(box, -1).with_spin(x, 1)
    lab = label_clusters(single, "H", 1)
    assert connected_to_boundary(lab, x, 0)
    assert not connected_to_boundary(lab, x, 2)
    with pytest.raises(DomainError):
        connected_to_boundary(lab, x, 100.0)
    with pytest.raises(DomainError):
        connected_to_boundary(lab, x, -1.0)


def _brute_reach(cfg, kind, x, radius):
    s = cfg.spins
    comp = bfs_partition(cfg.box, kind, lambda y: s[y.sub, y.u, y.v] == 1)
    if x not in comp:
        return False
    return any(min_image_distance(cfg.box, x, y) >= radius - 1e-9 for y in comp[x])


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["H", "T"]), st.floats(0, 4.0),
       st.sampled_from([BoxSpec(5, 5, "free"), BoxSpec(6, 5, "free", DOWN)]))
def test_boundary_connection_free_box_brute_force(seed, kind, radius, box):
    cfg = rand_cfg(box, seed, 0.6)
    lab = label_clusters(cfg, kind, 1)
    occ = occupancy(cfg.planes, box, kind, 1)
    x = SiteRef(2, 2, Sub.B)
    want = _brute_reach(cfg, kind, x, radius)
    assert connected_to_boundary(lab, x, radius) == want
    assert reaches_radius(occ, box, kind, box.index(x), radius) == want


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["H", "T"]), st.floats(0, 6.9),
       st.floats(0.3, 0.7))
def test_boundary_connection_union_find_vs_bfs_periodic(seed, kind, radius, p):
    box = BoxSpec(8, 8)
    cfg = rand_cfg(box, seed, p)
    lab = label_clusters(cfg, kind, 1)
    occ = occupancy(cfg.planes, box, kind, 1)
    subs = (Sub.A, Sub.B) if kind == "H" else (Sub.B,)
    for x in (SiteRef(u, v, s) for s in subs for u in range(0, 8, 3) for v in range(0, 8, 3)):
        got = connected_to_boundary(lab, x, radius)
        assert got == reaches_radius(occ, box, kind, box.index(x), radius)
        if not lab.winds(x):
            # without winding, the minimal image distance is a lower bound
            assert got or not _brute_reach(cfg, kind, x, radius)


# -- crossings -------------------------------------------------------------

def test_crossing_trivial_and_domain():
    box = BoxSpec(6, 6)
    plus = SpinConfiguration.constant(box, 1)
    whole = Region.whole(box)
    for kind in "HT":
        assert crossing(plus, whole, "horizontal", 1, kind)
        assert not crossing(plus, whole, "vertical", -1, kind)
    with pytest.raises(DomainError):
        crossing(plus, Region(0, 0, 1, 4))
    with pytest.raises(DomainError):
        crossing(plus, Region(3, 3, 4, 4))
    with pytest.raises(DomainError):
        crossing(plus, whole, "diagonal")


@pytest.mark.parametrize("nu,nv,scheme", [(2, 2, "up"), (3, 3, "up"), (3, 4, "down"),
                                          (4, 3, "up")])
def test_crossing_duality_exhaustive(nu, nv, scheme):
    from domany.lattice import SCHEMES
    box = BoxSpec(nu, nv, "free", SCHEMES[scheme])
    region = Region.whole(box)
    n = nu * nv
    for code in range(1 << n):
        s = np.array([1 if (code >> i) & 1 else -1 for i in range(n)]).reshape(nu, nv)
        cfg = TriConfiguration.from_spins(box, s)
        lr = crossing(cfg, region, "horizontal", 1, "T").occurred
        tb = crossing(cfg, region, "vertical", -1, "T").occurred
        assert lr != tb


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_crossing_duality_random_subregion(seed):
    box = BoxSpec(10, 10)
    cfg = rand_cfg(box, seed)
    region = Region(2, 1, 6, 7)
    assert (crossing(cfg, region, "horizontal", 1).occurred
            != crossing(cfg, region, "vertical", -1).occurred)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["H", "T"]), st.integers(0, 71))
def test_promotion_monotonicity(seed, kind, site):
    box = BoxSpec(6, 6)
    cfg = rand_cfg(box, seed, 0.5)
    x = box.site(site if kind == "H" else box.n_cells + site % box.n_cells)
    up = cfg.with_spin(x, 1)
    a, b = label_clusters(cfg, kind, 1), label_clusters(up, kind, 1)
    la = a.labels
    for c in a.cluster_ids:
        mem = a.members(c)
        assert len(set(b.labels[mem].tolist())) == 1
    assert np.all(b.labels[la >= 0] >= 0)
    region = Region.whole(box)
    for d in ("horizontal", "vertical"):
        if crossing(cfg, region, d, 1, kind):
            assert crossing(up, region, d, 1, kind)


# -- independent reference -------------------------------------------------

def test_sample_independent_T():
    box = BoxSpec(8, 8)
    assert np.all(sample_independent_T(box, 1.0, 0).spins == 1)
    assert np.all(sample_independent_T(box, 0.0, 0).spins == -1)
    assert sample_independent_T(box, 0.5, 7) == sample_independent_T(box, 0.5, 7)
    with pytest.raises(DomainError):
        sample_independent_T(box, 2.0, 0)


def test_independent_crossing_is_one_half():
    box = BoxSpec(16, 16)
    region = Region.whole(box)
    R = 2000
    hits = sum(crossing(sample_independent_T(box, 0.5, k), region).occurred for k in range(R))
    f = hits / R
    assert abs(f - 0.5) <= 3 * math.sqrt(0.25 / R)


# -- enclosure and path promotion ------------------------------------------

def test_enclosure_examples():
    box = BoxSpec(8, 8)
    x = SiteRef(4, 4, Sub.B)
    assert enclosing_minus_loop(SpinConfiguration.constant(box, -1), x)
    assert not enclosing_minus_loop(SpinConfiguration.constant(box, 1), x)
    # minus ring at T-distance 2 around x in an all-plus sea
    s = np.ones((8, 8))
    ring = [(2, 0), (2, -1), (2, -2), (1, -2), (0, -2), (-1, -1), (-2, 0), (-2, 1),
            (-2, 2), (-1, 2), (0, 2), (1, 1)]
    for du, dv in ring:
        s[4 + du, 4 + dv] = -1
    cfg = TriConfiguration.from_spins(box, s)
    assert enclosing_minus_loop(cfg, x)
    # opening one ring site lets the plus inside escape
    s[6, 4] = 1
    assert not enclosing_minus_loop(TriConfiguration.from_spins(box, s), x)
    with pytest.raises(DomainError):
        enclosing_minus_loop(cfg, SiteRef(0, 3, Sub.B))
    with pytest.raises(DomainError):
        enclosing_minus_loop(cfg, SiteRef(4, 4, Sub.A))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.3, 0.7), st.sampled_from(["up", "down"]))
def test_path_promotion(seed, p, scheme):
    from domany.lattice import SCHEMES
    box = BoxSpec(12, 12, scheme=SCHEMES[scheme])
    cfg = rand_cfg(box, seed, p)
    t0 = label_clusters(cfg, "T", 1).labels[box.n_cells:]
    h1 = label_clusters(step(cfg), "H", 1).labels[box.n_cells:]
    # every plus T-path at n = 0 is a plus H-path at n = 1 (and nothing more on B)
    plus = t0 >= 0
    assert np.array_equal(plus, h1 >= 0)
    for c in np.unique(t0[plus]):
        assert np.unique(h1[t0 == c]).size == 1
    for c in np.unique(h1[plus]):
        assert np.unique(t0[h1 == c]).size == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_enclosure_is_stable(seed):
    box = BoxSpec(14, 14)
    cfg = rand_cfg(box, seed, 0.4)
    rim = [box.index(SiteRef(u, v, Sub.B)) for u in range(14) for v in range(14)
           if u in (0, 13) or v in (0, 13)]
    xs = [SiteRef(u, v, Sub.B) for u in range(3, 11, 2) for v in range(3, 11, 2)]
    enclosed = [x for x in xs if enclosing_minus_loop(cfg, x)]
    for n in (1, 2, 5, math.inf):
        cur = advance(cfg, n)
        lab = label_clusters(cur, "H", 1)
        for x in enclosed:
            c = lab.cluster_id(x)
            if c < 0:
                continue
            assert not lab.winds(x)
            assert not np.any(lab.labels[rim] == c)
