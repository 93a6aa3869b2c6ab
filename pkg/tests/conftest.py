from collections import deque

import numpy as np
import pytest

from domany.lattice import BoxSpec, Sub, hex_neighbors, tri_neighbors


def bfs_partition(box, kind, plus):
    """Same-sign components by flood fill over the SiteRef neighbor functions.

    ``plus`` maps a SiteRef to True when the site takes part.  Returns a dict
    site -> frozenset(component).
    """
    nbrs = hex_neighbors if kind == "H" else tri_neighbors
    subs = (Sub.A, Sub.B) if kind == "H" else (Sub.B,)
    comp = {}
    for s in subs:
        for x in box.sites(s):
            if not plus(x) or x in comp:
                continue
            seen = {x}
            q = deque([x])
            while q:
                y = q.popleft()
                for z in nbrs(y, box):
                    if z not in seen and plus(z):
                        seen.add(z)
                        q.append(z)
            fs = frozenset(seen)
            for y in seen:
                comp[y] = fs
    return comp


def reference_step(spins, box, t):
    """Per-site majority update of the sublattice scheduled at time ``t``."""
    sub = Sub.A if t % 2 == 1 else Sub.B
    new = spins.copy()
    for x in box.sites(sub):
        nb = hex_neighbors(x, box)
        s = spins[x.sub, x.u, x.v]
        dis = sum(1 for y in nb if spins[y.sub, y.u, y.v] != s)
        if 2 * dis > len(nb):
            new[x.sub, x.u, x.v] = -s
    return new


@pytest.fixture
def box4():
    return BoxSpec(4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance verdict lines ---------------------------------------------

_ACCEPTANCE = {}


def record_acceptance(n, ok, detail):
    _ACCEPTANCE[n] = (ok, detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: full-scale acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
