"""Zero-temperature Domany dynamics on H and the pair-rule automaton on T.

Time ``n`` counts half-sweeps: the update that produces time ``n`` acts on the
A-sublattice when ``n`` is odd and on B when ``n`` is even.  Both sublattices
are stored as bit planes (see :mod:`domany.bits`), and the update functions
accept planes with leading batch axes so many configurations can be advanced
in one pass.

With three neighbors there are no ties: flipping iff ``delta_H < 0`` is the
same as copying the majority of the neighbors.  On free boxes a rim site of
degree ``d < 3`` flips iff a strict majority of its ``d`` existing neighbors
disagree with it (so ``d = 0`` never flips).
"""
from __future__ import annotations

import functools
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import bits
from .lattice import BoxSpec, DomainError, SiteRef, Sub, hex_neighbors
from .rng import make_rng


@dataclass
class SpinConfiguration:
    box: BoxSpec
    planes: np.ndarray  # uint64 (2, Lu, W): [A, B]
    time: int = 0

    @classmethod
    def from_spins(cls, box: BoxSpec, spins, time: int = 0) -> "SpinConfiguration":
        """Build from a ``(2, Lu, Lv)`` array of +-1 (or bool) values."""
        spins = np.asarray(spins)
        if spins.shape != (2, box.Lu, box.Lv):
            raise DomainError(f"expected shape {(2, box.Lu, box.Lv)}, got {spins.shape}")
        return cls(box, bits.pack(spins), time)

    @classmethod
    def constant(cls, box: BoxSpec, value: int, time: int = 0) -> "SpinConfiguration":
        return cls(box, bits.full((2,), box.Lu, box.Lv, value > 0), time)

    @property
    def spins(self) -> np.ndarray:
        """Unpacked +-1 values as int8, shape ``(2, Lu, Lv)``."""
        return np.where(bits.unpack(self.planes, self.box.Lv), 1, -1).astype(np.int8)

    def spin(self, x: SiteRef) -> int:
        if not self.box.contains(x):
            raise DomainError(f"{x} outside box")
        w = self.planes[int(x.sub), x.u, x.v // 64]
        return 1 if (int(w) >> (x.v % 64)) & 1 else -1

    def with_spin(self, x: SiteRef, value: int) -> "SpinConfiguration":
        s = self.spins
        s[int(x.sub), x.u, x.v] = 1 if value > 0 else -1
        return SpinConfiguration.from_spins(self.box, s, self.time)

    def copy(self) -> "SpinConfiguration":
        return SpinConfiguration(self.box, self.planes.copy(), self.time)

    def plus_count(self) -> int:
        return int(bits.popcount(self.planes).sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpinConfiguration):
            return NotImplemented
        return (self.box == other.box and self.time == other.time
                and np.array_equal(self.planes, other.planes))


@dataclass
class TriConfiguration:
    box: BoxSpec
    plane: np.ndarray  # uint64 (Lu, W), the B / T spins
    time: int = 0

    @classmethod
    def from_spins(cls, box: BoxSpec, spins, time: int = 0) -> "TriConfiguration":
        spins = np.asarray(spins)
        if spins.shape != (box.Lu, box.Lv):
            raise DomainError(f"expected shape {(box.Lu, box.Lv)}, got {spins.shape}")
        return cls(box, bits.pack(spins), time)

    @property
    def spins(self) -> np.ndarray:
        return np.where(bits.unpack(self.plane, self.box.Lv), 1, -1).astype(np.int8)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TriConfiguration):
            return NotImplemented
        return (self.box == other.box and self.time == other.time
                and np.array_equal(self.plane, other.plane))


@dataclass
class DynamicsTrace:
    initial_energy: int
    times: list[int] = field(default_factory=list)
    sublattices: list[str] = field(default_factory=list)
    flips: list[int] = field(default_factory=list)
    energies: list[int] = field(default_factory=list)
    fixated: bool = False
    fixation_time: int | None = None  # time of the last flip; None while not fixated
    flip_masks: list[np.ndarray] | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,sublattice,flips,energy\n")
        for n, s, f, e in zip(self.times, self.sublattices, self.flips, self.energies):
            buf.write(f"{n},{s},{f},{e}\n")
        return buf.getvalue()


# --------------------------------------------------------------------------
# plane kernels

@functools.lru_cache(maxsize=64)
def _masks(box: BoxSpec):
    """Presence masks of the three neighbors of every A- and every B-site."""
    valid = bits.full((), box.Lu, box.Lv, True)
    offs = box.scheme.hex_offsets
    mA = tuple(bits.shift(valid, du, dv, box.Lv, box.periodic) for du, dv in offs)
    mB = tuple(bits.shift(valid, -du, -dv, box.Lv, box.periodic) for du, dv in offs)
    for m in mA + mB:
        m.setflags(write=False)
    valid.setflags(write=False)
    return valid, mA, mB


def _neighbor_planes(src: np.ndarray, box: BoxSpec, target: Sub):
    sign = 1 if target == Sub.A else -1
    return [bits.shift(src, sign * du, sign * dv, box.Lv, box.periodic)
            for du, dv in box.scheme.hex_offsets]


def _flip_mask(s, nbrs, masks, periodic: bool):
    if periodic:
        return s ^ bits.majority(*nbrs)
    d = [(s ^ n) & m for n, m in zip(nbrs, masks)]
    m1, m2, m3 = masks
    exactly_one = (m1 ^ m2 ^ m3) & ~(m1 & m2 & m3)
    return bits.majority(*d) | (exactly_one & (d[0] | d[1] | d[2]))


def half_step(planes: np.ndarray, box: BoxSpec, target: Sub) -> tuple[np.ndarray, np.ndarray]:
    """Update every ``target`` site against the current planes.

    ``planes`` has shape ``(..., 2, Lu, W)``.  Returns the new planes and the
    flip mask of the updated sublattice.
    """
    _, mA, mB = _masks(box)
    if target == Sub.A:
        s, other, masks = planes[..., 0, :, :], planes[..., 1, :, :], mA
    else:
        s, other, masks = planes[..., 1, :, :], planes[..., 0, :, :], mB
    flip = _flip_mask(s, _neighbor_planes(other, box, target), masks, box.periodic)
    out = planes.copy()
    out[..., int(target), :, :] = s ^ flip
    return out, flip


def scheduled_sublattice(new_time: int) -> Sub:
    return Sub.A if new_time % 2 == 1 else Sub.B


def energy_planes(planes: np.ndarray, box: BoxSpec) -> np.ndarray:
    """Hamiltonian ``-sum sigma_x sigma_y`` for planes ``(..., 2, Lu, W)``."""
    _, mA, _ = _masks(box)
    A, B = planes[..., 0, :, :], planes[..., 1, :, :]
    broken = 0
    edges = 0
    for (du, dv), m in zip(box.scheme.hex_offsets, mA):
        nb = bits.shift(B, du, dv, box.Lv, box.periodic)
        broken = broken + bits.popcount((A ^ nb) & m)
        edges += int(bits.popcount(m))
    return 2 * broken - edges


# --------------------------------------------------------------------------
# public operations

def init_random(box: BoxSpec, p: float, seed: int) -> SpinConfiguration:
    """Bernoulli(p) product state; deterministic in ``(box, p, seed)``."""
    return init_from_uniforms(box, uniform_field(box, make_rng(seed)), p)


def uniform_field(box: BoxSpec, rng: np.random.Generator) -> np.ndarray:
    """One uniform per site, shape ``(2, Lu, Lv)``; spins are ``u < p``."""
    return rng.random((2, box.Lu, box.Lv))


def init_from_uniforms(box: BoxSpec, uniforms: np.ndarray, p: float) -> SpinConfiguration:
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise DomainError(f"p={p} outside [0, 1]")
    return SpinConfiguration(box, bits.pack(uniforms < p), 0)


def delta_H(config: SpinConfiguration, x: SiteRef) -> int:
    """Energy change if ``x`` alone were flipped: ``2 sum_y s_x s_y``.

    Rim sites of free boxes only count their existing neighbors.
    """
    sx = config.spin(x)
    return 2 * sum(sx * config.spin(y) for y in hex_neighbors(x, config.box))


def total_energy(config: SpinConfiguration) -> int:
    return int(energy_planes(config.planes, config.box))


def step(config: SpinConfiguration) -> SpinConfiguration:
    out, _ = _step_with_flips(config)
    return out


def _step_with_flips(config: SpinConfiguration):
    t = config.time + 1
    planes, flip = half_step(config.planes, config.box, scheduled_sublattice(t))
    return SpinConfiguration(config.box, planes, t), flip


def run(config: SpinConfiguration, max_steps: int | None = None,
        record_flips: bool = False) -> tuple[SpinConfiguration, DynamicsTrace]:
    """Iterate :func:`step` until fixation or ``max_steps`` steps.

    Fixation is two consecutive flip-free steps (one per sublattice).  With
    ``max_steps=None`` the run continues to fixation; on periodic boxes the
    energy bound caps the number of flipping steps at ``3N/2`` and exceeding
    it raises ``RuntimeError``.
    """
    box = config.box
    trace = DynamicsTrace(initial_energy=total_energy(config))
    if record_flips:
        trace.flip_masks = []
    limit = max_steps
    if limit is None:
        # each flipping step lowers the energy by >= 2 and |E| <= 3N/2
        limit = 3 * box.n_sites + 2
    quiet = 0
    last_flip = config.time
    cur = config
    for _ in range(limit):
        cur, flip = _step_with_flips(cur)
        nflip = int(bits.popcount(flip))
        trace.times.append(cur.time)
        trace.sublattices.append(scheduled_sublattice(cur.time).name)
        trace.flips.append(nflip)
        trace.energies.append(total_energy(cur))
        if record_flips:
            trace.flip_masks.append(flip)
        if nflip:
            quiet = 0
            last_flip = cur.time
        else:
            quiet += 1
            if quiet == 2:
                trace.fixated = True
                trace.fixation_time = last_flip
                break
    if not trace.fixated and max_steps is None and box.periodic:
        raise RuntimeError("no fixation within the energy bound")
    return cur, trace


def advance(config: SpinConfiguration, n: int | float) -> SpinConfiguration:
    """Configuration at absolute time ``n`` (``math.inf`` = fixed point)."""
    if n == math.inf:
        return run(config)[0]
    if n < config.time:
        raise DomainError("cannot step backwards")
    cur = config
    while cur.time < n:
        cur = step(cur)
    return cur


# --------------------------------------------------------------------------
# triangular automaton

@functools.lru_cache(maxsize=64)
def _pair_masks(box: BoxSpec):
    valid = bits.full((), box.Lu, box.Lv, True)
    out = []
    for (o1, o2) in box.scheme.pairs:
        m = (bits.shift(valid, *o1, box.Lv, box.periodic)
             & bits.shift(valid, *o2, box.Lv, box.periodic))
        m.setflags(write=False)
        out.append(m)
    return tuple(out), valid


def tri_step_plane(x: np.ndarray, box: BoxSpec) -> np.ndarray:
    """One simultaneous pair-rule update of T planes ``(..., Lu, W)``.

    A site flips iff at least two of its three pairs are entirely of the
    opposite sign.  On free boxes a pair with an out-of-box member never
    counts.
    """
    masks, valid = _pair_masks(box)
    plus, minus = [], []
    for (o1, o2), m in zip(box.scheme.pairs, masks):
        y1 = bits.shift(x, *o1, box.Lv, box.periodic)
        y2 = bits.shift(x, *o2, box.Lv, box.periodic)
        plus.append(y1 & y2 & m)
        minus.append(~y1 & ~y2 & m)
    to_minus = x & bits.majority(*minus)
    to_plus = ~x & bits.majority(*plus) & valid
    return (x & ~to_minus) | to_plus


def tri_step(config: TriConfiguration) -> TriConfiguration:
    return TriConfiguration(config.box, tri_step_plane(config.plane, config.box), config.time + 1)


def lift_to_hex(config: TriConfiguration) -> SpinConfiguration:
    """Star-triangle lift: B copies T, A-sites start at +1 (overwritten at n = 1)."""
    box = config.box
    planes = np.empty((2,) + config.plane.shape, dtype=np.uint64)
    planes[0] = bits.full((), box.Lu, box.Lv, True)
    planes[1] = config.plane
    return SpinConfiguration(box, planes, 0)


def restrict_to_B(config: SpinConfiguration) -> TriConfiguration:
    """B-sublattice as a T configuration; H time ``2m`` maps to T time ``m``."""
    return TriConfiguration(config.box, config.planes[1].copy(), config.time // 2)
