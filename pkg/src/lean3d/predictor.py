"""Context-table occupancy predictor for the shallow levels.

Each 8-bit occupancy code is coded as two 4-bit sub-symbols, s0 (low
nibble) first, then s1 conditioned on s0. The model maps a decodable
context -- (depth, within-parent child index, parent occupancy code) --
to 16 pre-quantized integer logits; unseen contexts fall back to all-zero
logits. No floating point exists on the decode path, so a shared model
file guarantees identical predictions on any platform.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .entropy import cdf_counts, logits_to_cdf
from .errors import FormatError, ParameterError
from .hierarchy import OccupancyPyramid, bce_expand

MODEL_MAGIC = b"L3DM\x00\x01"
_RECORD_KEY = struct.Struct("<BHBBB")  # table, depth, child_index, parent_occ, s0
_RECORD_LOGITS = struct.Struct("<16h")

_LOGIT_MIN = -(1 << 15)
_LOGIT_MAX = (1 << 15) - 1

FALLBACK_LOGITS = np.zeros(16, dtype=np.int16)
FALLBACK_LOGITS.setflags(write=False)


class NodeContext(NamedTuple):
    depth: int
    child_index: int
    parent_occ: int


@dataclass
class LogitTableModel:
    """Integer logit tables for s0 and s1 predictions."""

    table_s0: dict = field(default_factory=dict)
    table_s1: dict = field(default_factory=dict)

    def save(self, path) -> None:
        records = []
        for (d, k, po), logits in self.table_s0.items():
            records.append((_RECORD_KEY.pack(0, d, k, po, 0), logits))
        for (d, k, po, s0), logits in self.table_s1.items():
            records.append((_RECORD_KEY.pack(1, d, k, po, s0), logits))
        records.sort(key=lambda r: r[0])
        with Path(path).open("wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<I", len(records)))
            for key, logits in records:
                fh.write(key)
                fh.write(_RECORD_LOGITS.pack(*(int(v) for v in logits)))

    @classmethod
    def load(cls, path) -> "LogitTableModel":
        data = Path(path).read_bytes()
        if data[: len(MODEL_MAGIC)] != MODEL_MAGIC:
            raise FormatError(f"{path}: not a logit table model file")
        off = len(MODEL_MAGIC)
        if len(data) < off + 4:
            raise FormatError(f"{path}: truncated model header", offset=len(data))
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        rec_size = _RECORD_KEY.size + _RECORD_LOGITS.size
        if len(data) != off + count * rec_size:
            raise FormatError(f"{path}: model size mismatch", offset=len(data))
        model = cls()
        for _ in range(count):
            table, d, k, po, s0 = _RECORD_KEY.unpack_from(data, off)
            off += _RECORD_KEY.size
            logits = np.array(_RECORD_LOGITS.unpack_from(data, off), dtype=np.int16)
            logits.setflags(write=False)
            off += _RECORD_LOGITS.size
            if table == 0:
                model.table_s0[(d, k, po)] = logits
            elif table == 1:
                model.table_s1[(d, k, po, s0)] = logits
            else:
                raise FormatError(f"{path}: unknown table id {table}", offset=off)
        return model


def predict_s0(model: LogitTableModel, ctx: NodeContext) -> np.ndarray:
    """16 integer logits for the low nibble; fallback is all zeros."""
    return model.table_s0.get(
        (ctx.depth, ctx.child_index, ctx.parent_occ), FALLBACK_LOGITS
    )


def predict_s1(model: LogitTableModel, ctx: NodeContext, s0: int) -> np.ndarray:
    """16 integer logits for the high nibble given the decoded low nibble."""
    return model.table_s1.get(
        (ctx.depth, ctx.child_index, ctx.parent_occ, s0), FALLBACK_LOGITS
    )


def shallow_nodes(pyramid: OccupancyPyramid, split_depth: int):
    """Yield (ctx, s0, s1) for every shallow-coded node, in coding order.

    Shallow occupancy arrays are O^(1)..O^(D_s - 1); O^(0) ships raw in
    the base stream.
    """
    for d in range(1, min(split_depth, pyramid.depth)):
        parent = pyramid.levels[d - 1]
        level = pyramid.levels[d]
        _, parent_idx, ks = bce_expand(parent)
        for i in range(len(level)):
            occ = int(level.occ[i])
            ctx = NodeContext(d, int(ks[i]), int(parent.occ[parent_idx[i]]))
            yield ctx, occ & 0xF, occ >> 4


def _counts_to_logits(counts: np.ndarray) -> np.ndarray:
    total = int(counts.sum())
    logits = np.empty(16, dtype=np.int16)
    for r in range(16):
        z = 128.0 * math.log((int(counts[r]) + 1) / (total + 16))
        logits[r] = min(max(int(math.floor(z + 0.5)), _LOGIT_MIN), _LOGIT_MAX)
    logits.setflags(write=False)
    return logits


def fit_table(pyramids, split_depths) -> LogitTableModel:
    """Fit count-based logit tables over the shallow levels of a corpus.

    Deterministic given input order; ties in the counts resolve to the
    lower sub-symbol index through the CDF rank tiebreak downstream.
    """
    pyramids = list(pyramids)
    split_depths = list(split_depths)
    if not pyramids:
        raise ParameterError("fit_table needs at least one pyramid")
    if len(split_depths) != len(pyramids):
        raise ParameterError("one split depth required per pyramid")
    counts_s0: dict = {}
    counts_s1: dict = {}
    for pyr, ds in zip(pyramids, split_depths):
        for ctx, s0, s1 in shallow_nodes(pyr, ds):
            key0 = (ctx.depth, ctx.child_index, ctx.parent_occ)
            c0 = counts_s0.get(key0)
            if c0 is None:
                c0 = counts_s0[key0] = np.zeros(16, dtype=np.int64)
            c0[s0] += 1
            key1 = key0 + (s0,)
            c1 = counts_s1.get(key1)
            if c1 is None:
                c1 = counts_s1[key1] = np.zeros(16, dtype=np.int64)
            c1[s1] += 1
    model = LogitTableModel()
    for key, counts in counts_s0.items():
        model.table_s0[key] = _counts_to_logits(counts)
    for key, counts in counts_s1.items():
        model.table_s1[key] = _counts_to_logits(counts)
    return model


def _bits(logits, symbol: int) -> float:
    n = cdf_counts(logits_to_cdf(logits))
    return -math.log2(n[symbol] / 65536.0)


def rate_bits(model: LogitTableModel, pyramid: OccupancyPyramid, split_depth: int) -> float:
    """Total coded bits of the shallow nodes under the model's CDFs.

    Matches the actual rANS cost up to per-stream constant overhead.
    """
    total = 0.0
    for ctx, s0, s1 in shallow_nodes(pyramid, split_depth):
        total += _bits(predict_s0(model, ctx), s0)
        total += _bits(predict_s1(model, ctx, s0), s1)
    return total


def kl_bits(
    model_a: LogitTableModel,
    model_b: LogitTableModel,
    pyramid: OccupancyPyramid,
    split_depth: int,
) -> float:
    """KL(model_a || model_b) in bits, summed over shallow nodes and both
    nibble positions, with each model materialized as its n_r/65536 CDF
    distribution."""
    total = 0.0
    for ctx, s0, _ in shallow_nodes(pyramid, split_depth):
        for logits_a, logits_b in (
            (predict_s0(model_a, ctx), predict_s0(model_b, ctx)),
            (predict_s1(model_a, ctx, s0), predict_s1(model_b, ctx, s0)),
        ):
            na = cdf_counts(logits_to_cdf(logits_a))
            nb = cdf_counts(logits_to_cdf(logits_b))
            total += sum(
                (a / 65536.0) * math.log2(a / b) for a, b in zip(na, nb)
            )
    return total
