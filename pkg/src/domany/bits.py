"""Bit-packed spin planes.

A plane holds one sublattice as ``uint64`` words of shape ``(..., Lu, W)``
with ``W = ceil(Lv / 64)``; site ``(u, v)`` is bit ``v % 64`` of word
``[u, v // 64]`` and a set bit means spin +1.  Bits at ``v >= Lv`` are kept
zero.  Leading axes are batch axes and are carried through every operation.
"""
from __future__ import annotations

import numpy as np

ONE = np.uint64(1)
ALL = np.uint64(0xFFFFFFFFFFFFFFFF)
_S1 = np.uint64(1)
_S63 = np.uint64(63)


def n_words(Lv: int) -> int:
    return (Lv + 63) // 64


def tail_mask(Lv: int) -> np.ndarray:
    """Per-word mask of the valid bit positions of one row."""
    W = n_words(Lv)
    m = np.full(W, ALL, dtype=np.uint64)
    r = Lv % 64
    if r:
        m[-1] = np.uint64((1 << r) - 1)
    return m


def pack(spins: np.ndarray) -> np.ndarray:
    """Pack a boolean / 0-1 / +-1 array ``(..., Lu, Lv)`` into a plane."""
    a = np.asarray(spins)
    bits = (a > 0) if a.dtype != bool else a
    Lv = bits.shape[-1]
    W = n_words(Lv)
    pad = W * 64 - Lv
    if pad:
        bits = np.concatenate([bits, np.zeros(bits.shape[:-1] + (pad,), dtype=bool)], axis=-1)
    by = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(by).view("<u8").astype(np.uint64, copy=False)


def unpack(plane: np.ndarray, Lv: int) -> np.ndarray:
    """Inverse of :func:`pack`; returns a boolean array ``(..., Lu, Lv)``."""
    by = np.ascontiguousarray(plane).astype("<u8", copy=False).view(np.uint8)
    bits = np.unpackbits(by, axis=-1, bitorder="little")
    return bits[..., :Lv].astype(bool)


def full(shape_lead: tuple[int, ...], Lu: int, Lv: int, value: bool) -> np.ndarray:
    W = n_words(Lv)
    if not value:
        return np.zeros(shape_lead + (Lu, W), dtype=np.uint64)
    return np.broadcast_to(tail_mask(Lv), shape_lead + (Lu, W)).copy()


def _shift_u(plane: np.ndarray, du: int, periodic: bool) -> np.ndarray:
    # result[u] = plane[u + du]
    if du == 0:
        return plane
    if periodic:
        return np.roll(plane, -du, axis=-2)
    out = np.zeros_like(plane)
    if du > 0:
        out[..., :-du, :] = plane[..., du:, :]
    else:
        out[..., -du:, :] = plane[..., :du, :]
    return out


def _shift_v(plane: np.ndarray, dv: int, Lv: int, periodic: bool) -> np.ndarray:
    # result bit v = plane bit (v + dv), dv in {-1, 0, +1}
    if dv == 0:
        return plane
    W = plane.shape[-1]
    last = (Lv - 1) % 64
    if dv == 1:
        out = plane >> _S1
        if W > 1:
            out[..., :-1] |= plane[..., 1:] << _S63
        if periodic:
            bit0 = plane[..., 0] & ONE
            out[..., -1] |= bit0 << np.uint64(last)
    elif dv == -1:
        out = plane << _S1
        if W > 1:
            out[..., 1:] |= plane[..., :-1] >> _S63
        if periodic:
            top = (plane[..., -1] >> np.uint64(last)) & ONE
            out[..., 0] |= top
        out &= tail_mask(Lv)
    else:
        raise ValueError("dv must be -1, 0 or 1")
    return out


def shift(plane: np.ndarray, du: int, dv: int, Lv: int, periodic: bool) -> np.ndarray:
    """Plane whose site ``(u, v)`` holds the input's ``(u + du, v + dv)``.

    Out-of-box reads are 0 on free boxes and wrap on periodic ones.
    """
    return _shift_v(_shift_u(plane, du, periodic), dv, Lv, periodic)


def majority(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return (a & b) | (a & c) | (b & c)


def popcount(plane: np.ndarray) -> np.ndarray:
    """Number of set bits, summed over the last two axes."""
    return np.bitwise_count(plane).sum(axis=(-2, -1), dtype=np.int64)
