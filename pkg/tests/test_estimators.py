import math

import numpy as np
import pytest

from conftest import bfs_partition
from domany.estimators import (
    ObservationRecord, beta_fit, check_tau_bounds, check_theta_bounds, estimate_chi,
    estimate_crossing, estimate_tau, estimate_theta, estimate_xi, eta_fit, flip_tail,
    map_replicates, parse_time, tau_bound_interval, tau_samples, theta_bound_interval,
    theta_samples, xi_fit_from_samples,
)
from domany.fitting import InsufficientStatistics
from domany.lattice import SQRT3, BoxSpec, DomainError, SiteRef, Sub, min_image_distance


# -- exact small-box oracles -----------------------------------------------

def _exact(box, event, p):
    n = box.n_cells
    total = 0.0
    for code in range(1 << n):
        plus = {SiteRef(i // box.Lv, i % box.Lv, Sub.B) for i in range(n) if (code >> i) & 1}
        comp = bfs_partition(box, "T", lambda x: x in plus)
        if event(comp):
            k = len(plus)
            total += p ** k * (1 - p) ** (n - k)
    return total


def test_theta_independent_matches_enumeration():
    box = BoxSpec(3, 3, "free")
    x = SiteRef(1, 1, Sub.B)
    R = 4000
    for p in (0.4, 0.6):
        exact = _exact(box, lambda c: x in c and any(
            min_image_distance(box, x, y) >= 2 for y in c[x]), p)
        rec = estimate_theta(p, 0, 3, radius=2.0, replicates=R, master_seed=5,
                             model="independent", boundary="free")
        se = math.sqrt(exact * (1 - exact) / R)
        assert abs(rec.value - exact) <= 3 * se, (p, rec.value, exact)


def test_tau_independent_matches_enumeration():
    box = BoxSpec(3, 3, "free")
    x, y = SiteRef(0, 1, Sub.B), SiteRef(2, 1, Sub.B)
    R = 4000
    for p in (0.5, 0.7):
        exact = _exact(box, lambda c: x in c and y in c[x], p)
        rec = estimate_tau(p, 0, 3, [2], replicates=R, master_seed=9, model="independent",
                           boundary="free")[0]
        se = math.sqrt(exact * (1 - exact) / R)
        assert abs(rec.value - exact) <= 3 * se, (p, rec.value, exact)


# -- trivial values --------------------------------------------------------

@pytest.mark.parametrize("model", ["domany", "independent"])
def test_extreme_p(model):
    r1 = estimate_theta(1.0, 1, 16, replicates=5, model=model)
    assert (r1.value, r1.stderr) == (1.0, 0.0)
    assert estimate_theta(0.0, 1, 16, replicates=5, model=model).value == 0.0
    assert [r.value for r in estimate_tau(1.0, "inf", 16, [0, 3, 8], replicates=3,
                                          model=model)] == [1.0, 1.0, 1.0]
    assert estimate_chi(0.0, 1, 8, replicates=3, model=model).value == 0.0
    n_sites = 2 * 64 if model == "domany" else 64
    assert estimate_chi(1.0, 1, 8, replicates=3, model=model).value == n_sites


def test_tau_at_zero_is_plus_density():
    s = tau_samples([0.5], [2], 16, [0], replicates=4, master_seed=3)[:, 0, 0, 0]
    from domany.automaton import advance
    from domany.rng import replicate_rng
    from domany import bits
    from domany.automaton import SpinConfiguration
    box = BoxSpec(16, 16)
    for k in range(4):
        u = replicate_rng(3, k, 0).random((2, 16, 16))
        cfg = advance(SpinConfiguration(box, bits.pack(u < 0.5), 0), 2)
        assert s[k] == pytest.approx(cfg.spins[1].mean() / 2 + 0.5)


def test_records_and_domain_errors():
    rec = estimate_theta(0.7, "inf", 16, replicates=4, master_seed=2)
    assert isinstance(rec, ObservationRecord)
    assert rec.as_row()["n"] == "inf" and 0 <= rec.value <= 1 and rec.stderr >= 0
    with pytest.raises(DomainError):
        estimate_theta(0.5, 1, 16, radius=100)
    with pytest.raises(DomainError):
        estimate_theta(1.2, 1, 16)
    with pytest.raises(DomainError):
        estimate_theta(0.5, 1, 16, model="bond")
    with pytest.raises(DomainError):
        estimate_tau(0.5, 1, 16, [])
    with pytest.raises(DomainError):
        estimate_tau(0.5, 1, 16, [9])
    with pytest.raises(DomainError):
        parse_time(-1)
    assert parse_time("inf") == math.inf and parse_time("3") == 3


# -- coupling, symmetry, determinism ---------------------------------------

@pytest.mark.parametrize("model", ["domany", "independent"])
def test_theta_exactly_monotone_in_p(model):
    ps = [0.45, 0.5, 0.55, 0.6, 0.7]
    s = theta_samples(ps, [0, 1, "inf"], 32, replicates=20, master_seed=1, model=model,
                      probes=4)
    assert np.all(np.diff(s, axis=1) >= 0)


def test_tau_symmetric_under_exchange():
    # the translation average over pairs (x, y = x + r) equals the one over (y, x)
    from domany.automaton import init_random, advance
    from domany.estimators import _pair_fraction
    from domany.percolation import label_clusters
    L = 16
    box = BoxSpec(L, L)
    for seed in range(4):
        lab = label_clusters(advance(init_random(box, 0.55, seed), 1), "H", 1)
        for r in (1, 3, 7):
            for a, b in ((Sub.A, Sub.B), (Sub.B, Sub.B), (Sub.A, Sub.A)):
                assert (_pair_fraction(lab.labels, box, r, (a, b))
                        == _pair_fraction(lab.labels, box, L - r, (b, a)))


def test_workers_do_not_change_results():
    a = estimate_tau(0.5, 1, 16, [1, 2, 4], replicates=9, master_seed=11, workers=1)
    b = estimate_tau(0.5, 1, 16, [1, 2, 4], replicates=9, master_seed=11, workers=2)
    assert a == b
    assert (map_replicates(abs, 5, 2) == np.arange(5)).all()


def test_independent_ignores_n():
    a = estimate_theta(0.6, 1, 16, replicates=20, model="independent")
    b = estimate_theta(0.6, "inf", 16, replicates=20, model="independent")
    assert a == b and a.n == 0


# -- physics-level sanity --------------------------------------------------

def test_theta_n0_below_n1_at_half():
    s = theta_samples([0.5], [0, 1], 128, replicates=40, master_seed=0, probes=16)[:, 0]
    m = s.mean(axis=0)
    assert m[0] < m[1]


def test_crossing_symmetric_at_half():
    rec = estimate_crossing(0.5, 1, 32, replicates=300, master_seed=3)
    assert abs(rec.value - 0.5) <= 3 * math.sqrt(0.25 / 300)


def test_flip_tail_trivial_and_nested():
    ft = flip_tail(1.0, 16, 8, replicates=2)
    assert np.all(ft.P_A == 0) and np.all(ft.P_B == 0)
    assert ft.fit_A is None and ft.fit_B is None
    ft = flip_tail(0.5, 32, 10, replicates=4)
    assert np.all(np.diff(ft.P_A) <= 0) and np.all(np.diff(ft.P_B) <= 0)
    assert len(ft.records) == 2 * 11
    with pytest.raises(DomainError):
        flip_tail(0.5, 16, 4)


# -- fits ------------------------------------------------------------------

def test_xi_fit_synthetic():
    seps = [2, 4, 8, 16]
    tau = np.exp(-SQRT3 * np.asarray(seps) / 5.0)
    fit = xi_fit_from_samples(np.tile(tau, (10, 1)), seps)
    assert fit.slope == pytest.approx(0.2) and fit.r_squared == pytest.approx(1.0)
    shrunk = xi_fit_from_samples(np.tile(np.append(tau, 0.0), (10, 1)), seps + [32])
    assert "window_shrunk" in shrunk.flags and shrunk.points_used == 4
    with pytest.raises(InsufficientStatistics):
        xi_fit_from_samples(np.zeros((4, 4)), seps)


def test_xi_preconditions():
    with pytest.raises(DomainError):
        estimate_xi(0.5, 1, 32, [2, 4, 8])
    with pytest.raises(DomainError):
        estimate_xi(0.3, 1, 32, [2, 3, 4])


def test_xi_grows_toward_half():
    a = estimate_xi(0.35, 1, 64, [1, 2, 3, 4], replicates=30, master_seed=2)
    b = estimate_xi(0.45, 1, 64, [1, 2, 3, 4], replicates=30, master_seed=2)
    assert b.slope < a.slope


def test_exponent_fits_synthetic():
    ps = np.array([0.52, 0.54, 0.56, 0.58, 0.60])
    theta = (ps - 0.5) ** (5 / 36)
    assert beta_fit(ps, np.tile(theta, (8, 1))).slope == pytest.approx(5 / 36)
    seps = np.array([8, 12, 16, 24])
    tau = (SQRT3 * seps) ** (-5 / 24)
    assert -eta_fit(seps, np.tile(tau, (8, 1))).slope == pytest.approx(5 / 24)


# -- sandwich bounds -------------------------------------------------------

def test_bound_intervals():
    assert theta_bound_interval(0.6, "B") == pytest.approx((0.6 ** 6, 1 / 0.6))
    assert theta_bound_interval(0.75, "A") == pytest.approx((0.75 ** 6, 0.75 ** -3))
    assert tau_bound_interval(0.5, "BB") == (0.5 ** 12, 4.0, False)
    assert tau_bound_interval(0.5, "AA") == (0.5 ** 12, 64.0, False)
    assert tau_bound_interval(0.5, "AB") == (0.5 ** 12, 16.0, True)


def test_theta_bounds_at_p_one_are_exact():
    for site in "AB":
        for rep in check_theta_bounds(1.0, [1, "inf"], 16, replicates=3, site=site):
            assert rep.ratio == 1.0 and rep.passed and (rep.lower, rep.upper) == (1.0, 1.0)
    with pytest.raises(DomainError):
        check_theta_bounds(0.5, [1], 16)


def test_tau_bounds_small_box():
    # at p = 1 every pair is connected: ratio exactly 1
    with pytest.raises(DomainError):
        check_tau_bounds(1.0, [1], 16, 4)
    reps = check_tau_bounds(0.02, [1], 16, [4, 8], replicates=3)
    assert all(r.status in ("insufficient statistics", "below r>=8 validity cut") for r in reps)
    assert reps[0].status == "below r>=8 validity cut"
    assert not reps[1].passed
