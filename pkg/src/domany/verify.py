"""Verification suites: exhaustive and randomized checks of the dynamics.

Every check returns a dict ``{check, paper_ref, status, detail}`` where
``paper_ref`` names the property being tested and ``status`` is ``pass`` or
``fail``.  The heavy lifting is batched: configurations are stacked along a
leading axis of the bit planes and advanced together.
"""
from __future__ import annotations

import itertools

import numpy as np

from . import bits
from .automaton import energy_planes, half_step, tri_step_plane
from .lattice import BoxSpec, Sub
from .rng import make_rng


def _result(check, ref, ok, detail):
    return {"check": check, "paper_ref": ref, "status": "pass" if ok else "fail",
            "detail": detail}


def all_configurations(box: BoxSpec) -> np.ndarray:
    """Every T configuration of a small box as planes ``(2^N, Lu, W)``."""
    n = box.Lu * box.Lv
    if n > 20:
        raise ValueError("box too large to enumerate")
    idx = np.arange(1 << n, dtype=np.int64)
    spins = ((idx[:, None] >> np.arange(n)) & 1).astype(bool)
    return bits.pack(spins.reshape(-1, box.Lu, box.Lv))


def step_pair(planes: np.ndarray, box: BoxSpec, t: int):
    """Advance batched planes from time ``t`` to ``t + 1``; returns planes and flip counts."""
    target = Sub.A if (t + 1) % 2 == 1 else Sub.B
    out, flip = half_step(planes, box, target)
    return out, bits.popcount(flip)


def check_equivalence(box: BoxSpec | None = None) -> dict:
    """m pair-rule steps on T equal 2m Domany steps restricted to B, for every
    initial T configuration of ``box`` and every m up to fixation of both."""
    box = box or BoxSpec(4, 4)
    x = all_configurations(box)
    N = x.shape[0]
    h = np.empty((N, 2) + x.shape[1:], dtype=np.uint64)
    h[:, 0] = bits.full((), box.Lu, box.Lv, True)
    h[:, 1] = x
    bad = np.zeros(N, dtype=bool)
    limit = 3 * box.n_sites + 2
    m = 0
    for m in range(1, limit + 1):
        x_new = tri_step_plane(x, box)
        h, fa = step_pair(h, box, 2 * m - 2)
        h, fb = step_pair(h, box, 2 * m - 1)
        bad |= np.any(h[:, 1] != x_new, axis=(-2, -1))
        still = np.any(x_new != x, axis=(-2, -1)) | (fa > 0) | (fb > 0)
        x = x_new
        if not still.any():
            break
    passed = int(N - bad.sum())
    return _result("star_triangle_equivalence",
                   "pair-rule automaton on T equals Domany dynamics on B at even times",
                   passed == N, f"{passed}/{N} configurations pass; max m = {m}")


def _trajectory(planes: np.ndarray, box: BoxSpec, limit: int):
    """Yield ``(t, planes, flips)`` after each step until the whole batch fixates."""
    quiet = np.zeros(planes.shape[0], dtype=np.int64)
    for t in range(limit):
        planes, flips = step_pair(planes, box, t)
        quiet = np.where(flips > 0, 0, quiet + 1)
        yield t + 1, planes, flips
        if np.all(quiet >= 2):
            return


def check_a_irrelevance_exhaustive(box: BoxSpec | None = None) -> dict:
    """All B configurations, A filled with all-plus vs all-minus."""
    box = box or BoxSpec(4, 4)
    x = all_configurations(box)
    N = x.shape[0]
    pair = np.empty((2, N, 2) + x.shape[1:], dtype=np.uint64)
    pair[0, :, 0] = bits.full((), box.Lu, box.Lv, True)
    pair[1, :, 0] = 0
    pair[:, :, 1] = x
    flat = pair.reshape((2 * N,) + pair.shape[2:])
    bad = np.zeros(N, dtype=bool)
    for _, planes, _ in _trajectory(flat, box, 3 * box.n_sites + 4):
        p = planes.reshape(pair.shape)
        bad |= np.any(p[0] != p[1], axis=(-3, -2, -1))
    return _result("a_irrelevance_exhaustive", "A-spins at time 0 are irrelevant",
                   not bad.any(), f"{int(bad.sum())} of {N} B-configurations differ for n >= 1")


def _random_planes(rng, count, box, p):
    u = rng.random((count, 2, box.Lu, box.Lv))
    return bits.pack(u < p)


def check_a_irrelevance_random(L=64, pairs=1000, seed=0, batch=250) -> dict:
    box = BoxSpec(L, L)
    rng = make_rng(seed)
    bad = 0
    done = 0
    while done < pairs:
        c = min(batch, pairs - done)
        a = _random_planes(rng, c, box, 0.5)
        b = a.copy()
        b[:, 0] = bits.pack(rng.random((c, L, L)) < 0.5)
        flat = np.concatenate([a, b])
        diff = np.zeros(c, dtype=bool)
        for _, planes, _ in _trajectory(flat, box, 3 * box.n_sites + 4):
            diff |= np.any(planes[:c] != planes[c:], axis=(-3, -2, -1))
        bad += int(diff.sum())
        done += c
    return _result("a_irrelevance_random", "A-spins at time 0 are irrelevant",
                   bad == 0, f"{bad} of {pairs} random pairs at L={L} differ for n >= 1")


def check_energy_descent(ps=(0.3, 0.5, 0.7), L=64, runs=10_000, seed=0, batch=500) -> dict:
    """Energy non-increasing, strictly lower after a flipping step, fixation
    within ``3N/2`` flipping steps; ``runs`` is split evenly over ``ps``."""
    box = BoxSpec(L, L)
    rng = make_rng(seed)
    bound = 3 * box.n_sites // 2
    violations = 0
    unfixated = 0
    max_fix = 0
    per_p = [runs // len(ps) + (i < runs % len(ps)) for i in range(len(ps))]
    for p, count in zip(ps, per_p):
        done = 0
        while done < count:
            c = min(batch, count - done)
            planes = _random_planes(rng, c, box, p)
            e = energy_planes(planes, box)
            flipping = np.zeros(c, dtype=np.int64)
            last_flip = np.zeros(c, dtype=np.int64)
            quiet = np.zeros(c, dtype=np.int64)
            for t, planes, flips in _trajectory(planes, box, 3 * box.n_sites + 4):
                e2 = energy_planes(planes, box)
                violations += int(np.sum(e2 > e))
                violations += int(np.sum((flips > 0) & (e2 >= e)))
                violations += int(np.sum((flips == 0) & (e2 != e)))
                flipping += flips > 0
                last_flip = np.where(flips > 0, t, last_flip)
                quiet = np.where(flips > 0, 0, quiet + 1)
                e = e2
            unfixated += int(np.sum(quiet < 2))
            violations += int(np.sum(flipping > bound))
            max_fix = max(max_fix, int(last_flip.max()))
            done += c
    ok = violations == 0 and unfixated == 0
    return _result("energy_descent",
                   "flips strictly lower the Hamiltonian; finite boxes fixate",
                   ok, f"{runs} runs at L={L}, p in {list(ps)}: {violations} violations, "
                       f"{unfixated} not fixated, max fixation time {max_fix}")


def check_determinism(L=64, runs=1000, seed=0, batch=250) -> dict:
    """Same seed twice gives bit-identical trajectories."""
    box = BoxSpec(L, L)
    bad = 0
    for rep in range(2):
        traj = []
        rng = make_rng(seed)
        done = 0
        while done < runs:
            c = min(batch, runs - done)
            planes = _random_planes(rng, c, box, 0.5)
            traj.append([pl for _, pl, _ in _trajectory(planes, box, 3 * box.n_sites + 4)])
            done += c
        if rep == 0:
            first = traj
        else:
            for a, b in zip(first, traj):
                if len(a) != len(b) or any(not np.array_equal(x, y) for x, y in zip(a, b)):
                    bad += 1
    return _result("determinism", "the dynamics is completely deterministic",
                   bad == 0, f"{runs} seeded runs at L={L} repeated; {bad} batches differ")


def check_spin_flip_symmetry(L=32, runs=200, seed=0) -> dict:
    box = BoxSpec(L, L)
    rng = make_rng(seed)
    planes = _random_planes(rng, runs, box, 0.5)
    mask = bits.full((), L, L, True)
    neg = planes ^ mask
    bad = np.zeros(runs, dtype=bool)
    flat = np.concatenate([planes, neg])
    for _, pl, _ in _trajectory(flat, box, 3 * box.n_sites + 4):
        bad |= np.any(pl[:runs] != (pl[runs:] ^ mask), axis=(-3, -2, -1))
    return _result("spin_flip_symmetry", "the update rule is odd under a global flip",
                   not bad.any(), f"{int(bad.sum())} of {runs} runs break the symmetry")


def check_local_consistency(L=32, runs=200, seed=0) -> dict:
    """After a half-step every updated site agrees with >= 2 of its neighbors."""
    from .automaton import _neighbor_planes
    box = BoxSpec(L, L)
    rng = make_rng(seed)
    planes = _random_planes(rng, runs, box, 0.5)
    bad = 0
    for t, pl, _ in _trajectory(planes, box, 3 * box.n_sites + 4):
        sub = Sub.A if t % 2 == 1 else Sub.B
        s = pl[:, int(sub)]
        nb = _neighbor_planes(pl[:, 1 - int(sub)], box, sub)
        disagree = bits.majority(*[s ^ n for n in nb])
        bad += int(bits.popcount(disagree).sum())
    return _result("local_consistency", "updated spins agree with the neighbor majority",
                   bad == 0, f"{bad} disagreeing sites over {runs} runs")


def check_stability(L=32, runs=50, seed=0) -> dict:
    """Sites on a constant-sign loop, barbell or winding path never flip again."""
    from .automaton import SpinConfiguration, run
    from .percolation import stable_core
    box = BoxSpec(L, L)
    rng = make_rng(seed)
    bad = 0
    for _ in range(runs):
        cfg = SpinConfiguration(box, bits.pack(rng.random((2, L, L)) < 0.5), 0)
        _, trace = run(cfg, record_flips=True)
        cur = cfg
        frozen = np.zeros(box.n_sites, dtype=bool)
        for t, mask in zip(trace.times, trace.flip_masks):
            frozen |= stable_core(cur)
            sub = Sub.A if t % 2 == 1 else Sub.B
            flipped = np.zeros((2, L, L), dtype=bool)
            flipped[int(sub)] = bits.unpack(mask, L)
            bad += int(np.sum(flipped.ravel() & frozen))
            planes = cur.planes.copy()
            planes[int(sub)] ^= mask
            cur = SpinConfiguration(box, planes, t)
    return _result("loop_stability", "spins on a constant-sign loop or barbell never flip",
                   bad == 0, f"{bad} flips of stable sites over {runs} runs")


def invariants_suite(quick: bool = False, seed: int = 0) -> list[dict]:
    scale = 10 if quick else 1
    return [
        check_energy_descent(runs=10_000 // scale, seed=seed),
        check_a_irrelevance_random(pairs=1000 // scale, seed=seed),
        check_determinism(runs=1000 // scale, seed=seed),
        check_spin_flip_symmetry(seed=seed),
        check_local_consistency(seed=seed),
        check_stability(runs=50 // scale, seed=seed),
    ]


def equivalence_suite() -> list[dict]:
    return [check_equivalence(), check_a_irrelevance_exhaustive()]


def bounds_suite(ps_theta=(0.6,), ns=(1,), L=128, replicates=200, ps_tau=(0.5,),
                 rs=(8, 16), tau_replicates=50, seed=0, workers=1) -> list[dict]:
    from .estimators import check_tau_bounds, check_theta_bounds
    out = []
    for p, site in itertools.product(ps_theta, ("B", "A")):
        for rep in check_theta_bounds(p, list(ns), L, replicates=replicates, master_seed=seed,
                                      site=site, workers=workers):
            out.append(_bound_result(rep, "theta sandwich bound"))
    for p, sites in itertools.product(ps_tau, (("B", "B"), ("A", "A"))):
        for rep in check_tau_bounds(p, list(ns), L, list(rs), replicates=tau_replicates,
                                    master_seed=seed, sites=sites, workers=workers):
            out.append(_bound_result(rep, "tau sandwich bound"))
    return out


def _bound_result(rep, ref):
    d = rep.as_dict()
    name = f"{rep.observable}_bound p={rep.p} n={d['n']} sites={rep.sites} param={rep.param:g}"
    detail = (f"ratio {rep.ratio:.4g} +- {rep.ratio_stderr:.2g} in "
              f"[{rep.lower:.4g}, {rep.upper:.4g}] ({rep.status})")
    ok = rep.passed or rep.status.startswith("below")
    return _result(name, ref, ok, detail)
