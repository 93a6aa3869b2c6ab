"""Monte Carlo estimators of theta, tau, chi, xi and flip tails, and the
sandwich-bound checks between the Domany model and independent percolation.

Conventions
-----------
* Every replicate ``k`` draws from its own stream (:mod:`domany.rng`); the
  Domany model uses stream 0, the independent reference on T stream 1.
* One uniform per site serves a whole p-sweep (spin = +1 iff uniform < p),
  so estimates at different p are coupled and exactly monotone per sample.
* ``n`` counts half-sweeps; ``math.inf`` (or ``"inf"``) means the fixed point.
* Radii are Euclidean (hexagon side 1).  Separations are integer steps of the
  T-lattice along the u-axis; one step is ``sqrt(3)`` long.
* On periodic boxes tau and chi are averaged over all translates of the
  probe pair / site within each replicate; errors come from the spread
  between replicates.
"""
from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels, bits
from .automaton import SpinConfiguration, TriConfiguration, advance, run, scheduled_sublattice
from .fitting import FitResult, InsufficientStatistics, fit_exponent, jackknife, wls
from .lattice import SQRT3, BoxSpec, DomainError, Sub
from .percolation import Region, crossing, label_occupied, max_radius, occupancy, reaches_radius
from .rng import replicate_rng

P_C = 0.5
MODELS = ("domany", "independent")
DOMANY_STREAM, INDEPENDENT_STREAM = 0, 1


@dataclass(frozen=True)
class ObservationRecord:
    observable: str
    model: str
    p: float
    n: float
    L: int
    boundary: str
    param: float
    value: float
    stderr: float
    replicates: int
    seed: int

    def as_row(self) -> dict:
        d = asdict(self)
        d["n"] = format_time(self.n)
        return d


def parse_time(n) -> float:
    if isinstance(n, str):
        if n.strip().lower() in ("inf", "infinity", "∞"):
            return math.inf
        n = int(n)
    if n != math.inf and (int(n) != n or n < 0):
        raise DomainError(f"time {n!r} must be a nonnegative integer or 'inf'")
    return math.inf if n == math.inf else int(n)


def format_time(n) -> str:
    return "inf" if n == math.inf else str(int(n))


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")


def _check_model(model):
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}")


def _box(L: int, boundary: str) -> BoxSpec:
    return BoxSpec(L, L, boundary)


def map_replicates(fn, replicates: int, workers: int = 1):
    """Evaluate ``fn(k)`` for ``k < replicates`` and stack the results in k order."""
    if replicates < 1:
        raise DomainError("replicates must be >= 1")
    if workers <= 1 or replicates == 1:
        return np.stack([np.asarray(fn(k)) for k in range(replicates)])
    chunks = np.array_split(np.arange(replicates), min(workers * 4, replicates))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_run_chunk, [fn] * len(chunks), [c.tolist() for c in chunks]))
    return np.concatenate([p for p in parts if len(p)])


def _run_chunk(fn, ks):
    return np.stack([np.asarray(fn(k)) for k in ks]) if ks else np.empty((0,))


def _summary(samples: np.ndarray, binomial: bool):
    R = samples.shape[0]
    v = samples.mean(axis=0)
    if binomial or R < 2:
        se = np.sqrt(np.clip(v * (1 - v), 0, None) / R)
    else:
        se = samples.std(axis=0, ddof=1) / np.sqrt(R)
    return v, se


def _snapshots(box: BoxSpec, planes0: np.ndarray, times):
    """Planes at each requested time (ascending; inf last) from one start."""
    cur = SpinConfiguration(box, planes0, 0)
    out = {}
    for n in sorted(times):
        cur = advance(cur, n)
        out[n] = cur.planes
    return out


def probe_anchors(L: int, probes: int, boundary: str) -> list[tuple[int, int]]:
    """Probe anchors: the center, or an evenly spaced m x m grid on periodic boxes."""
    if probes <= 1 or boundary != "periodic":
        return [(L // 2, L // 2)]
    m = math.isqrt(probes)
    step = L // m
    return [((L // 2 + i * step) % L, (L // 2 + j * step) % L)
            for i in range(m) for j in range(m)]


def _site_index(box: BoxSpec, sub: Sub, u: int, v: int) -> int:
    return int(sub) * box.n_cells + u * box.Lv + v


# --------------------------------------------------------------------------
# theta

def _theta_rep(k, *, ps, ns, L, boundary, radius, master_seed, model, site, probes,
               with_reference):
    box = _box(L, boundary)
    anchors = probe_anchors(L, probes, boundary)
    sub = Sub[site]
    out = np.zeros((len(ps), len(ns) + (1 if with_reference else 0)))
    if model == "independent":
        u = replicate_rng(master_seed, k, INDEPENDENT_STREAM).random((L, L))
        for i, p in enumerate(ps):
            planes = np.zeros((2, L, bits.n_words(L)), dtype=np.uint64)
            planes[1] = bits.pack(u < p)
            occ = occupancy(planes, box, "T", 1)
            val = np.mean([reaches_radius(occ, box, "T", _site_index(box, Sub.B, a, b), radius)
                           for a, b in anchors])
            out[i, :] = val
        return out
    u = replicate_rng(master_seed, k, DOMANY_STREAM).random((2, L, L))
    for i, p in enumerate(ps):
        planes0 = bits.pack(u < p)
        snaps = _snapshots(box, planes0, ns)
        for j, n in enumerate(ns):
            occ = occupancy(snaps[n], box, "H", 1)
            out[i, j] = np.mean([reaches_radius(occ, box, "H", _site_index(box, sub, a, b), radius)
                                 for a, b in anchors])
        if with_reference:
            # independent percolation on T read off sigma^0 restricted to B, at x'
            # (x itself for B, its H-neighbor B(anchor) for A)
            occ = occupancy(planes0, box, "T", 1)
            out[i, -1] = np.mean([reaches_radius(occ, box, "T", _site_index(box, Sub.B, a, b), radius)
                                  for a, b in anchors])
    return out


def default_radius(L: int) -> float:
    """A quarter of the box side, in Euclidean units."""
    return SQRT3 * L / 4.0


def theta_samples(ps, ns, L, radius=None, replicates=100, master_seed=0, model="domany",
                  site="B", probes=1, boundary="periodic", workers=1, with_reference=False):
    """Per-replicate theta indicators, shape ``(R, len(ps), len(ns) [+1])``."""
    _check_model(model)
    for p in ps:
        _check_p(p)
    ns = [parse_time(n) for n in ns]
    box = _box(L, boundary)
    radius = default_radius(L) if radius is None else float(radius)
    if radius < 0 or radius > min(max_radius(box), SQRT3 * L / 2):
        raise DomainError(f"radius {radius} exceeds half the box")
    fn = functools.partial(_theta_rep, ps=list(ps), ns=ns, L=L, boundary=boundary,
                           radius=radius, master_seed=master_seed, model=model,
                           site=site, probes=probes, with_reference=with_reference)
    return map_replicates(fn, replicates, workers)


def estimate_theta(p, n, L, radius=None, replicates=100, master_seed=0, model="domany",
                   site="B", probes=1, boundary="periodic", workers=1) -> ObservationRecord:
    """Fraction of replicates whose probe site is plus and plus-connected to
    distance ``radius`` at time ``n`` (binomial error when ``probes == 1``)."""
    n = parse_time(n)
    s = theta_samples([p], [n], L, radius, replicates, master_seed, model, site, probes,
                      boundary, workers)[:, 0, 0]
    v, se = _summary(s, binomial=probes <= 1)
    return ObservationRecord("theta", model, p, n if model == "domany" else 0, L, boundary,
                             default_radius(L) if radius is None else radius,
                             float(v), float(se), replicates, master_seed)


# --------------------------------------------------------------------------
# tau

def _pair_fraction(labels, box, k, subs):
    nc = box.n_cells
    b1 = int(subs[0]) * nc
    b2 = int(subs[1]) * nc
    if box.periodic:
        return _kernels.pair_connected_fraction(labels, b1, box.Lu, box.Lv, int(k), b2)
    # free boxes: a single centered pair
    u = box.Lu // 2 - int(k) // 2
    v = box.Lv // 2
    a = labels[b1 + u * box.Lv + v]
    return float(a >= 0 and labels[b2 + (u + int(k)) * box.Lv + v] == a)


def _tau_rep(k, *, ps, ns, L, boundary, seps, master_seed, model, sites, with_reference):
    box = _box(L, boundary)
    subs = (Sub[sites[0]], Sub[sites[1]])
    width = len(ns) + (1 if with_reference else 0)
    out = np.zeros((len(ps), width, len(seps)))
    if model == "independent":
        u = replicate_rng(master_seed, k, INDEPENDENT_STREAM).random((L, L))
        for i, p in enumerate(ps):
            planes = np.zeros((2, L, bits.n_words(L)), dtype=np.uint64)
            planes[1] = bits.pack(u < p)
            lab = label_occupied(box, "T", 1, occupancy(planes, box, "T", 1))
            row = [_pair_fraction(lab.labels, box, r, (Sub.B, Sub.B)) for r in seps]
            out[i, :, :] = row
        return out
    u = replicate_rng(master_seed, k, DOMANY_STREAM).random((2, L, L))
    for i, p in enumerate(ps):
        planes0 = bits.pack(u < p)
        snaps = _snapshots(box, planes0, ns)
        for j, n in enumerate(ns):
            lab = label_occupied(box, "H", 1, occupancy(snaps[n], box, "H", 1))
            out[i, j, :] = [_pair_fraction(lab.labels, box, r, subs) for r in seps]
        if with_reference:
            lab = label_occupied(box, "T", 1, occupancy(planes0, box, "T", 1))
            out[i, -1, :] = [_pair_fraction(lab.labels, box, r, (Sub.B, Sub.B)) for r in seps]
    return out


def tau_samples(ps, ns, L, separations, replicates=100, master_seed=0, model="domany",
                sites=("B", "B"), boundary="periodic", workers=1, with_reference=False):
    """Per-replicate connection fractions, shape ``(R, len(ps), len(ns) [+1], len(seps))``."""
    _check_model(model)
    seps = [int(r) for r in separations]
    if not seps:
        raise DomainError("empty separation list")
    if any(r < 0 for r in seps):
        raise DomainError("separations must be nonnegative")
    if boundary == "periodic" and max(seps) > L // 2:
        raise DomainError("separations must lie in [0, L/2] under periodic wrap")
    if max(seps) >= L:
        raise DomainError("separation exceeds the box")
    for p in ps:
        _check_p(p)
    ns = [parse_time(n) for n in ns]
    fn = functools.partial(_tau_rep, ps=list(ps), ns=ns, L=L, boundary=boundary, seps=seps,
                           master_seed=master_seed, model=model, sites=tuple(sites),
                           with_reference=with_reference)
    return map_replicates(fn, replicates, workers)


def estimate_tau(p, n, L, separations, replicates=100, master_seed=0, model="domany",
                 sites=("B", "B"), boundary="periodic", workers=1) -> list[ObservationRecord]:
    """Connectivity of two sites ``r`` T-steps apart along the u-axis, one record per r."""
    n = parse_time(n)
    s = tau_samples([p], [n], L, separations, replicates, master_seed, model, sites,
                    boundary, workers)[:, 0, 0, :]
    v, se = _summary(s, binomial=boundary != "periodic")
    nn = n if model == "domany" else 0
    return [ObservationRecord("tau", model, p, nn, L, boundary, float(r), float(v[i]),
                              float(se[i]), replicates, master_seed)
            for i, r in enumerate(separations)]


# --------------------------------------------------------------------------
# chi

def _chi_rep(k, *, ps, ns, L, master_seed, model):
    box = _box(L, "periodic")
    nc = box.n_cells
    out = np.zeros((len(ps), len(ns)))
    if model == "independent":
        u = replicate_rng(master_seed, k, INDEPENDENT_STREAM).random((L, L))
        for i, p in enumerate(ps):
            planes = np.zeros((2, L, bits.n_words(L)), dtype=np.uint64)
            planes[1] = bits.pack(u < p)
            lab = label_occupied(box, "T", 1, occupancy(planes, box, "T", 1))
            out[i, :] = _mean_cluster_size(lab, nc)
        return out
    u = replicate_rng(master_seed, k, DOMANY_STREAM).random((2, L, L))
    for i, p in enumerate(ps):
        snaps = _snapshots(box, bits.pack(u < p), ns)
        for j, n in enumerate(ns):
            lab = label_occupied(box, "H", 1, occupancy(snaps[n], box, "H", 1))
            out[i, j] = _mean_cluster_size(lab, nc)
    return out


def _mean_cluster_size(lab, nc):
    # mean over B-sites x of |C_x| (0 for minus sites)
    b = lab.labels[nc:]
    return float(np.where(b >= 0, lab.sizes[np.clip(b, 0, None)], 0).mean())


def chi_samples(ps, ns, L, replicates=100, master_seed=0, model="domany", workers=1):
    _check_model(model)
    for p in ps:
        _check_p(p)
    ns = [parse_time(n) for n in ns]
    fn = functools.partial(_chi_rep, ps=list(ps), ns=ns, L=L, master_seed=master_seed, model=model)
    return map_replicates(fn, replicates, workers)


def estimate_chi(p, n, L, replicates=100, master_seed=0, model="domany",
                 workers=1) -> ObservationRecord:
    """Mean size of the plus cluster of a B-site (0 if the site is minus)."""
    n = parse_time(n)
    s = chi_samples([p], [n], L, replicates, master_seed, model, workers)[:, 0, 0]
    v, se = _summary(s, binomial=False)
    return ObservationRecord("chi", model, p, n if model == "domany" else 0, L, "periodic",
                             float("nan"), float(v), float(se), replicates, master_seed)


# --------------------------------------------------------------------------
# crossing

def _crossing_rep(k, *, ps, ns, L, master_seed, model, kind, direction):
    box = _box(L, "periodic")
    region = Region.whole(box)
    out = np.zeros((len(ps), len(ns)))
    if model == "independent":
        u = replicate_rng(master_seed, k, INDEPENDENT_STREAM).random((L, L))
        for i, p in enumerate(ps):
            cfg = TriConfiguration(box, bits.pack(u < p), 0)
            out[i, :] = crossing(cfg, region, direction, 1, "T").occurred
        return out
    u = replicate_rng(master_seed, k, DOMANY_STREAM).random((2, L, L))
    for i, p in enumerate(ps):
        snaps = _snapshots(box, bits.pack(u < p), ns)
        for j, n in enumerate(ns):
            cfg = SpinConfiguration(box, snaps[n], 0)
            out[i, j] = crossing(cfg, region, direction, 1, kind).occurred
    return out


def crossing_samples(ps, ns, L, replicates=100, master_seed=0, model="domany", kind="T",
                     direction="horizontal", workers=1):
    """Plus crossings of the whole L x L rhombus (paths kept inside it),
    shape ``(R, len(ps), len(ns))``.  ``kind="T"`` reads only the B-spins."""
    _check_model(model)
    for p in ps:
        _check_p(p)
    ns = [parse_time(n) for n in ns]
    fn = functools.partial(_crossing_rep, ps=list(ps), ns=ns, L=L, master_seed=master_seed,
                           model=model, kind=kind, direction=direction)
    return map_replicates(fn, replicates, workers)


def estimate_crossing(p, n, L, replicates=100, master_seed=0, model="domany", kind="T",
                      direction="horizontal", workers=1) -> ObservationRecord:
    n = parse_time(n)
    s = crossing_samples([p], [n], L, replicates, master_seed, model, kind, direction,
                         workers)[:, 0, 0]
    v, se = _summary(s, binomial=True)
    return ObservationRecord(f"crossing_{kind}", model, p, n if model == "domany" else 0, L,
                             "periodic", float("nan"), float(v), float(se), replicates,
                             master_seed)


# --------------------------------------------------------------------------
# xi

def xi_fit_from_samples(samples: np.ndarray, separations) -> FitResult:
    """Fit ``-log tau`` against Euclidean distance; slope is ``1/xi``.

    ``samples`` has shape ``(R, S)``.  Separations whose tau estimate is 0
    are dropped (flag ``window_shrunk``); the slope error is a replicate
    jackknife over the same window and weights.
    """
    seps = np.asarray(separations, float)
    v, se = _summary(samples, binomial=False)
    keep = v > 0
    if keep.sum() == 0:
        raise InsufficientStatistics("insufficient connectivity signal")
    if keep.sum() < 3:
        raise InsufficientStatistics(f"only {keep.sum()} separations with tau > 0")
    d = SQRT3 * seps[keep]
    sig = se[keep] / v[keep] if samples.shape[0] > 1 and np.all(se[keep] > 0) else None
    b, a, se_b, r2 = wls(d, -np.log(v[keep]), sig)

    def slope(mean):
        m = mean[keep]
        if np.any(m <= 0):
            return float("nan")
        return wls(d, -np.log(m), sig)[0]

    if samples.shape[0] > 1:
        _, se_b = jackknife(samples, slope)
    flags = () if keep.all() else ("window_shrunk",)
    return FitResult(b, a, se_b, r2, int(keep.sum()), (float(d.min()), float(d.max())), flags)


def estimate_xi(p, n, L, separations, replicates=100, master_seed=0, model="domany",
                workers=1) -> FitResult:
    if p >= P_C:
        raise DomainError("the correlation length fit needs p < 1/2")
    seps = sorted(int(r) for r in separations)
    if len(seps) < 3 or min(seps) <= 0 or max(seps) < 4 * min(seps):
        raise DomainError("need >= 3 positive separations spanning a factor of 4")
    s = tau_samples([p], [n], L, seps, replicates, master_seed, model, workers=workers)
    return xi_fit_from_samples(s[:, 0, 0, :], seps)


def correlation_length(fit: FitResult) -> tuple[float, float]:
    """``xi = 1/slope`` with its propagated error."""
    xi = 1.0 / fit.slope
    return xi, fit.slope_stderr / fit.slope ** 2


# --------------------------------------------------------------------------
# flip tails

def _fliptail_rep(k, *, p, L, n_max, master_seed):
    box = _box(L, "periodic")
    u = replicate_rng(master_seed, k, DOMANY_STREAM).random((2, L, L))
    cfg = SpinConfiguration(box, bits.pack(u < p), 0)
    _, trace = run(cfg, record_flips=True)
    last = np.zeros((2, L, L), dtype=np.int64)
    for t, mask in zip(trace.times, trace.flip_masks):
        last[int(scheduled_sublattice(t))][bits.unpack(mask, L)] = t
    n = np.arange(n_max + 1)
    PA = (last[0].ravel()[None, :] > n[:, None]).mean(axis=1)
    PB = (last[1].ravel()[None, :] > n[:, None]).mean(axis=1)
    return np.stack([PA, PB])


@dataclass(frozen=True)
class FlipTail:
    records: list[ObservationRecord]
    P_A: np.ndarray
    P_B: np.ndarray
    fit_A: FitResult | None
    fit_B: FitResult | None


def fit_tail(n, P, se, window) -> FitResult:
    n = np.asarray(n)
    lo, hi = window
    sel = (n >= lo) & (n <= hi)
    pts = [(float(a), float(b), float(c)) for a, b, c in zip(n[sel], P[sel], se[sel])]
    usable = [q for q in pts if q[1] > 0]
    fit = fit_exponent([(a, b, None) for a, b, _ in usable], "loglinear")
    if len(usable) < len(pts):
        fit = FitResult(fit.slope, fit.intercept, fit.slope_stderr, fit.r_squared,
                        fit.points_used, fit.window, fit.flags + ("zero_tail",))
    return fit


def flip_tail(p, L, n_max, replicates=20, master_seed=0, window=(2, None), workers=1) -> FlipTail:
    """Probability that a fixed A- (B-) site flips at some time > n, for n <= n_max,
    plus log-linear fits of both tails over ``window`` (``None`` = n_max).

    Within each replicate the probability is averaged over all sites of the
    sublattice.  The unweighted fit treats every n equally.
    """
    if n_max < 8:
        raise DomainError("n_max must be >= 8")
    _check_p(p)
    fn = functools.partial(_fliptail_rep, p=p, L=L, n_max=n_max, master_seed=master_seed)
    s = map_replicates(fn, replicates, workers)
    v, se = _summary(s, binomial=False)
    n = np.arange(n_max + 1)
    recs = []
    for j, name in enumerate(("fliptail_A", "fliptail_B")):
        for t in n:
            recs.append(ObservationRecord(name, "domany", p, int(t), L, "periodic", float(t),
                                          float(v[j, t]), float(se[j, t]), replicates,
                                          master_seed))
    win = (window[0], n_max if window[1] is None else window[1])
    fits = []
    for j in range(2):
        try:
            fits.append(fit_tail(n, v[j], se[j], win))
        except InsufficientStatistics:
            fits.append(None)
    return FlipTail(recs, v[0], v[1], fits[0], fits[1])


# --------------------------------------------------------------------------
# sandwich bounds

@dataclass(frozen=True)
class BoundReport:
    observable: str
    p: float
    n: float
    L: int
    sites: str
    param: float
    numerator: float
    denominator: float
    ratio: float
    ratio_stderr: float
    lower: float
    upper: float
    passed: bool
    status: str
    derived: bool = False

    def as_dict(self) -> dict:
        d = asdict(self)
        d["n"] = format_time(self.n)
        return d


def _ratio(num: np.ndarray, den: np.ndarray):
    """Ratio of replicate means with a jackknife error (paired samples)."""
    pair = np.stack([num, den], axis=1)

    def r(m):
        return m[0] / m[1] if m[1] > 0 else float("nan")

    return jackknife(pair, r)


def _judge(observable, p, n, L, sites, param, num, den, lower, upper, slack, derived=False):
    nm, dm = float(num.mean()), float(den.mean())
    if dm <= 0:
        return BoundReport(observable, p, n, L, sites, param, nm, dm, float("nan"),
                           float("nan"), lower, upper, False, "insufficient statistics", derived)
    ratio, se = _ratio(num, den)
    if not np.isfinite(se):
        se = 0.0
    ok = (lower - slack * se) <= ratio <= (upper + slack * se)
    return BoundReport(observable, p, n, L, sites, param, nm, dm, float(ratio), float(se),
                       lower, upper, bool(ok), "ok", derived)


def theta_bound_interval(p: float, site: str) -> tuple[float, float]:
    return (p ** 6, p ** -1) if site == "B" else (p ** 6, p ** -3)


def tau_bound_interval(p: float, sites) -> tuple[float, float, bool]:
    """Interval for tau_{p,n}/tau_p and whether it is our derived mixed case."""
    na = sum(s == "A" for s in sites)
    upper = {0: p ** -2, 1: p ** -4, 2: p ** -6}[na]
    return p ** 12, upper, na == 1


def check_theta_bounds(p, ns, L, radius=None, replicates=200, master_seed=0, site="B",
                       probes=1, slack=3.0, workers=1) -> list[BoundReport]:
    """Ratio theta_x(p, n) / theta_x'(p) against ``[p^6, p^-1]`` (B) or ``[p^6, p^-3]`` (A)."""
    if not 0.5 < p <= 1.0:
        raise DomainError("theta bounds hold for p in (1/2, 1]")
    ns = [parse_time(n) for n in (ns if isinstance(ns, (list, tuple)) else [ns])]
    s = theta_samples([p], ns, L, radius, replicates, master_seed, "domany", site, probes,
                      workers=workers, with_reference=True)[:, 0, :]
    lo, hi = theta_bound_interval(p, site)
    r = default_radius(L) if radius is None else radius
    return [_judge("theta", p, n, L, site, r, s[:, j], s[:, -1], lo, hi, slack)
            for j, n in enumerate(ns)]


def check_tau_bounds(p, ns, L, r, replicates=50, master_seed=0, sites=("B", "B"), slack=3.0,
                     workers=1) -> list[BoundReport]:
    """Ratio tau_{p,n}(x, y) / tau_p(x', y') against ``[p^12, p^-2]`` (B, B),
    ``[p^12, p^-6]`` (A, A) or the derived ``[p^12, p^-4]`` (mixed)."""
    if not 0.0 < p <= 0.5:
        raise DomainError("tau bounds hold for p in (0, 1/2]")
    rs = [int(x) for x in (r if isinstance(r, (list, tuple)) else [r])]
    ns = [parse_time(n) for n in (ns if isinstance(ns, (list, tuple)) else [ns])]
    s = tau_samples([p], ns, L, rs, replicates, master_seed, "domany", sites,
                    workers=workers, with_reference=True)[:, 0]
    lo, hi, derived = tau_bound_interval(p, sites)
    label = "".join(sites)
    reports = []
    for j, n in enumerate(ns):
        for q, rr in enumerate(rs):
            rep = _judge("tau", p, n, L, label, rr, s[:, j, q], s[:, -1, q], lo, hi, slack,
                         derived)
            if rr < 8:
                rep = BoundReport(**{**asdict(rep), "status": "below r>=8 validity cut"})
            reports.append(rep)
    return reports


# --------------------------------------------------------------------------
# exponents

def beta_fit(ps, samples: np.ndarray) -> FitResult:
    """Fit ``log theta`` against ``log(p - 1/2)``; ``samples`` is ``(R, len(ps))``."""
    x = np.asarray(ps, float) - P_C
    if np.any(x <= 0):
        raise DomainError("beta fit needs p > 1/2")
    v, se = _summary(samples, binomial=False)
    fit = fit_exponent(zip(x, v, se), "loglog")

    def slope(m):
        return fit_exponent(zip(x, m, se), "loglog").slope if np.all(m > 0) else float("nan")

    _, err = jackknife(samples, slope)
    return FitResult(fit.slope, fit.intercept, err, fit.r_squared, fit.points_used,
                     (float(ps[0]), float(ps[-1])), fit.flags)


def eta_fit(separations, samples: np.ndarray) -> FitResult:
    """Fit ``log tau`` against ``log ||x - y||`` at p = 1/2; eta is minus the slope."""
    d = SQRT3 * np.asarray(separations, float)
    v, se = _summary(samples, binomial=False)
    fit = fit_exponent(zip(d, v, se), "loglog")

    def slope(m):
        return fit_exponent(zip(d, m, se), "loglog").slope if np.all(m > 0) else float("nan")

    _, err = jackknife(samples, slope)
    return FitResult(fit.slope, fit.intercept, err, fit.r_squared, fit.points_used,
                     (float(d.min()), float(d.max())), fit.flags)


def nu_fit(ps, separations, samples: np.ndarray) -> FitResult:
    """Fit ``log xi(p)`` against ``log(1/2 - p)``; nu is minus the slope.

    ``samples`` is ``(R, len(ps), len(separations))`` of tau estimates.
    """
    x = P_C - np.asarray(ps, float)
    d = SQRT3 * np.asarray(separations, float)

    def xis(m):
        out = []
        for i in range(len(ps)):
            row = m[i]
            if np.any(row <= 0):
                return None
            out.append(1.0 / wls(d, -np.log(row))[0])
        return np.array(out)

    full = xis(samples.mean(axis=0))
    if full is None or np.any(full <= 0):
        raise InsufficientStatistics("tau vanished inside the xi window")
    fit = fit_exponent([(a, b, None) for a, b in zip(x, full)], "loglog")

    def slope(m):
        xs = xis(m)
        if xs is None or np.any(xs <= 0):
            return float("nan")
        return fit_exponent([(a, b, None) for a, b in zip(x, xs)], "loglog").slope

    _, err = jackknife(samples, slope)
    return FitResult(fit.slope, fit.intercept, err, fit.r_squared, fit.points_used,
                     (float(min(ps)), float(max(ps))), fit.flags)
