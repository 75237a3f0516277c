"""Deterministic coding of deep hierarchy levels.

A level's nodes split into unary (popcount 1) and non-unary (popcount
>= 2). Non-unary positions are stored as an Elias-Fano monotone index
set with their raw occupancy bytes; unary nodes store only the 3-bit
child index of their single occupied child. No entropy coding and no
model dependence anywhere on this path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorruptStreamError, ParameterError
from .hierarchy import POPCOUNT8, VoxelLevel

_LOG2_POW2 = np.zeros(256, dtype=np.uint8)
for _k in range(8):
    _LOG2_POW2[1 << _k] = _k
del _k


@dataclass(frozen=True)
class DeepLevelStream:
    """Wire form of one deep level."""

    nu: int  # node count at this level
    msplit: int  # count of non-unary nodes
    llow: int  # Elias-Fano low-bit width
    ef_high: bytes
    ef_low: bytes
    unary_k: bytes
    nonunary_occ: bytes

    def payload_size(self) -> int:
        return (
            len(self.ef_high)
            + len(self.ef_low)
            + len(self.unary_k)
            + len(self.nonunary_occ)
        )


def partition(occ):
    """Split coding-order positions into unary (with child index k) and
    non-unary sets. Returns (unary_positions, unary_ks, nonunary_positions)."""
    occ = np.asarray(occ, dtype=np.uint8)
    if occ.size and occ.min() == 0:
        raise ParameterError("occupancy code 0 violates the level invariant")
    pc = POPCOUNT8[occ]
    unary = np.flatnonzero(pc == 1)
    nonunary = np.flatnonzero(pc >= 2)
    # popcount 1 means occ == 2^k
    ks = _LOG2_POW2[occ[unary]].astype(np.int64)
    return unary, ks, nonunary


def pack3(ks) -> bytes:
    """Pack 3-bit symbols LSB-first, zero-padded to a byte boundary."""
    ks = np.asarray(ks, dtype=np.int64)
    if ks.size == 0:
        return b""
    if ks.min() < 0 or ks.max() > 7:
        raise ParameterError("3-bit symbols must be in 0..7")
    bits = ((ks[:, None] >> np.arange(3)) & 1).astype(np.uint8).ravel()
    return np.packbits(bits, bitorder="little").tobytes()


def unpack3(data: bytes, count: int) -> np.ndarray:
    """Inverse of :func:`pack3` given the symbol count."""
    if count == 0:
        return np.empty(0, dtype=np.int64)
    need = (3 * count + 7) // 8
    if len(data) < need:
        raise CorruptStreamError(
            f"packed 3-bit stream needs {need} bytes, got {len(data)}"
        )
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    trip = bits[: 3 * count].reshape(count, 3).astype(np.int64)
    return trip[:, 0] + (trip[:, 1] << 1) + (trip[:, 2] << 2)


def ef_low_width(m: int, universe: int) -> int:
    """Elias-Fano low-part width: floor(log2(U/M)), 0 when M = 0 or U <= M."""
    if m == 0 or universe <= m:
        return 0
    return (universe // m).bit_length() - 1


def ef_encode(indices, universe: int):
    """Encode a strictly increasing index set over [0, universe).

    Returns (llow, ef_high bytes, ef_low bytes). The high vector holds
    exactly M + (U >> llow) + 1 bits with a 1 at (index_i >> llow) + i,
    LSB-first within bytes, zero-padded to a byte boundary.
    """
    if universe < 1:
        raise ParameterError(f"universe must be >= 1, got {universe}")
    idx = np.asarray(indices, dtype=np.int64)
    m = len(idx)
    if m:
        if idx.min() < 0 or idx.max() >= universe:
            raise ParameterError("index outside [0, universe)")
        if np.any(np.diff(idx) <= 0):
            raise ParameterError("indices must be strictly increasing")
    llow = ef_low_width(m, universe)
    if llow:
        lows = idx & ((1 << llow) - 1)
        low_bits = ((lows[:, None] >> np.arange(llow)) & 1).astype(np.uint8).ravel()
        ef_low = np.packbits(low_bits, bitorder="little").tobytes()
    else:
        ef_low = b""
    n_high_bits = m + (universe >> llow) + 1
    high_bits = np.zeros(n_high_bits, dtype=np.uint8)
    if m:
        high_bits[(idx >> llow) + np.arange(m)] = 1
    ef_high = np.packbits(high_bits, bitorder="little").tobytes()
    return llow, ef_high, ef_low


def ef_decode(llow: int, ef_high: bytes, ef_low: bytes, m: int, universe: int) -> np.ndarray:
    """Exact inverse of :func:`ef_encode` given M and the universe."""
    if m == 0:
        return np.empty(0, dtype=np.int64)
    n_high_bits = m + (universe >> llow) + 1
    if len(ef_high) * 8 < n_high_bits:
        raise CorruptStreamError(
            f"EF high vector needs {n_high_bits} bits, got {len(ef_high) * 8}"
        )
    bits = np.unpackbits(np.frombuffer(ef_high, dtype=np.uint8), bitorder="little")
    ones = np.flatnonzero(bits[:n_high_bits])
    if len(ones) != m:
        raise CorruptStreamError(
            f"EF high vector holds {len(ones)} set bits, expected {m}"
        )
    highs = ones - np.arange(m)
    if llow:
        need = (m * llow + 7) // 8
        if len(ef_low) < need:
            raise CorruptStreamError(
                f"EF low stream needs {need} bytes, got {len(ef_low)}"
            )
        low_bits = np.unpackbits(np.frombuffer(ef_low, dtype=np.uint8), bitorder="little")
        lows = (
            low_bits[: m * llow].reshape(m, llow).astype(np.int64)
            << np.arange(llow)
        ).sum(axis=1)
    else:
        lows = np.zeros(m, dtype=np.int64)
    idx = (highs << llow) | lows
    if np.any(idx >= universe) or np.any(np.diff(idx) <= 0):
        raise CorruptStreamError("decoded EF indices not strictly increasing in range")
    return idx


def encode_deep_level(level: VoxelLevel) -> DeepLevelStream:
    """Compose partition, EF index coding, 3-bit packing and raw bytes."""
    unary, ks, nonunary = partition(level.occ)
    nu = len(level)
    llow, ef_high, ef_low = ef_encode(nonunary, max(nu, 1))
    return DeepLevelStream(
        nu=nu,
        msplit=len(nonunary),
        llow=llow,
        ef_high=ef_high,
        ef_low=ef_low,
        unary_k=pack3(ks),
        nonunary_occ=level.occ[nonunary].tobytes(),
    )


def decode_deep_level(stream: DeepLevelStream) -> np.ndarray:
    """Reconstruct the level's occupancy bytes in coding order."""
    if stream.msplit > stream.nu:
        raise CorruptStreamError("Msplit exceeds the node count")
    if len(stream.nonunary_occ) != stream.msplit:
        raise CorruptStreamError(
            f"{len(stream.nonunary_occ)} non-unary bytes for Msplit={stream.msplit}"
        )
    nonunary = ef_decode(stream.llow, stream.ef_high, stream.ef_low, stream.msplit, max(stream.nu, 1))
    ks = unpack3(stream.unary_k, stream.nu - stream.msplit)
    occ = np.zeros(stream.nu, dtype=np.uint8)
    nn_occ = np.frombuffer(stream.nonunary_occ, dtype=np.uint8)
    if np.any(POPCOUNT8[nn_occ] < 2):
        raise CorruptStreamError("non-unary occupancy byte with popcount < 2")
    occ[nonunary] = nn_occ
    mask = np.ones(stream.nu, dtype=bool)
    mask[nonunary] = False
    occ[mask] = np.uint8(1) << ks.astype(np.uint8)
    return occ
