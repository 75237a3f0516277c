"""Bit-exact integer CDF construction and a byte-wise rANS coder.

The CDF is built from quantized integer logits by rank-template
assignment: score each symbol s_r = 1000 * z_r - r, sort descending
(the -r term makes ties impossible and favors lower indices), then hand
out the fixed count template (60000, 369 x 14, 370). Everything after
logit quantization is integer-only, so encoder and decoder rebuild
identical tables on any platform.

rANS variant: 32-bit state in [2^23, 2^31), 16-bit total mass, byte-wise
renormalization. The encoder walks the symbols in reverse and the output
starts with the 4-byte little-endian final state followed by the renorm
bytes in reverse emission order, so the decoder reads strictly forward.
"""
from __future__ import annotations

import struct
from bisect import bisect_right
from functools import lru_cache

import numpy as np

from .errors import CorruptStreamError, InputError, IntegrityError, ParameterError

LOGIT_SCALE = 128  # fp_inv_step: z -> z~ quantizer scale
MASS_BITS = 16  # fp_B: total CDF mass is 2^16
MAX_SYMBOL = 15  # fp_KMAX: 16-symbol alphabet
RANK_LAMBDA = 1000
COUNT_TEMPLATE = (60000,) + (369,) * 14 + (370,)

RANS_L = 1 << 23  # lower bound of the state interval, also the initial state
_STATE = struct.Struct("<I")

_LOGIT_MIN = -(1 << 15)
_LOGIT_MAX = (1 << 15) - 1


def quantize_logits(z) -> np.ndarray:
    """Quantize 16 real logits to integers via floor(128*z + 0.5)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (16,):
        raise ParameterError(f"expected 16 logits, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InputError("logits contain NaN or Inf")
    zt = np.floor(LOGIT_SCALE * z + 0.5)
    if zt.min() < _LOGIT_MIN or zt.max() > _LOGIT_MAX:
        raise InputError("quantized logit outside the int16 domain")
    return zt.astype(np.int16)


@lru_cache(maxsize=1 << 16)
def _cdf_cached(zt: tuple) -> tuple:
    ranked = sorted(range(16), key=lambda r: RANK_LAMBDA * zt[r] - r, reverse=True)
    counts = [0] * 16
    for rank, sym in enumerate(ranked):
        counts[sym] = COUNT_TEMPLATE[rank]
    cdf = [0] * 17
    for r in range(16):
        cdf[r + 1] = cdf[r] + counts[r]
    return tuple(cdf)


def logits_to_cdf(zt) -> tuple:
    """Deterministic 17-entry integer CDF (total mass 65536) from int logits."""
    key = tuple(int(v) for v in zt)
    if len(key) != 16:
        raise ParameterError(f"expected 16 quantized logits, got {len(key)}")
    return _cdf_cached(key)


def cdf_counts(cdf) -> tuple:
    """Per-symbol counts n_r = cdf[r+1] - cdf[r]."""
    return tuple(cdf[r + 1] - cdf[r] for r in range(16))


def rans_encode(symbols, cdfs) -> bytes:
    """Encode 4-bit symbols under per-position CDFs.

    ``cdfs`` is a sequence of 17-entry CDFs, one per symbol position.
    """
    symbols = list(symbols)
    cdfs = list(cdfs)
    if len(cdfs) != len(symbols):
        raise ParameterError(
            f"{len(symbols)} symbols but {len(cdfs)} CDFs supplied"
        )
    x = RANS_L
    renorm = bytearray()
    threshold_base = (RANS_L >> MASS_BITS) << 8
    for i in range(len(symbols) - 1, -1, -1):
        s = symbols[i]
        cdf = cdfs[i]
        c = cdf[s]
        f = cdf[s + 1] - c
        limit = threshold_base * f
        while x >= limit:
            renorm.append(x & 0xFF)
            x >>= 8
        x = ((x // f) << MASS_BITS) + (x % f) + c
    renorm.reverse()
    return _STATE.pack(x) + bytes(renorm)


def rans_decode(data, cdf_provider, count: int) -> list:
    """Decode ``count`` symbols; exact inverse of :func:`rans_encode`.

    ``cdf_provider`` is either a sequence of CDFs or a callable
    ``(i, decoded_prefix) -> cdf`` so position i's table may depend on
    symbols decoded before it.
    """
    data = bytes(data)
    if len(data) < 4:
        raise CorruptStreamError("rANS stream shorter than the 4-byte state")
    (x,) = _STATE.unpack_from(data, 0)
    pos = 4
    n = len(data)
    mask = (1 << MASS_BITS) - 1
    out = []
    provider = cdf_provider if callable(cdf_provider) else None
    for i in range(count):
        cdf = provider(i, out) if provider else cdf_provider[i]
        low = x & mask
        s = bisect_right(cdf, low) - 1
        f = cdf[s + 1] - cdf[s]
        x = f * (x >> MASS_BITS) + low - cdf[s]
        while x < RANS_L:
            if pos >= n:
                raise CorruptStreamError(
                    f"rANS stream exhausted after {i + 1} of {count} symbols"
                )
            x = (x << 8) | data[pos]
            pos += 1
        out.append(s)
    if x != RANS_L or pos != n:
        raise IntegrityError(
            "rANS final state/stream mismatch: wrong model or corrupt payload"
        )
    return out
