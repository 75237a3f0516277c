"""Frame-level encode/decode orchestration.

Level partition: O^(0) ships raw in the base stream, O^(1)..O^(D_s-1)
are shallow-coded (two rANS streams per level, s0 then s1, nodes in
canonical order), O^(D_s)..O^(L-1) go through the deterministic deep
codec. The final BCE of level L-1 yields the leaf voxels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import deepcodec, entropy, hierarchy
from .bitstream import FramePacket, parse_frame, serialize_frame
from .errors import CorruptStreamError, IntegrityError, ParameterError
from .geometry import QuantizedCloud, quantize
from .hierarchy import OccupancyPyramid, VoxelLevel, bce_expand
from .predictor import LogitTableModel, NodeContext, predict_s0, predict_s1


@dataclass
class CodecConfig:
    pos_q: int = 1
    split_threshold: float = 0.6
    split_override: int | None = None
    depth_override: int | None = None
    model: LogitTableModel = field(default_factory=LogitTableModel)

    def __post_init__(self):
        if not 0 < self.split_threshold < 1:
            raise ParameterError(
                f"split threshold must be in (0, 1), got {self.split_threshold}"
            )
        if self.pos_q < 1:
            raise ParameterError(f"posQ must be a positive integer, got {self.pos_q}")


def _level_contexts(parent: VoxelLevel, depth: int):
    """Contexts of level ``depth`` nodes in canonical order, derived the
    same way on both sides: BCE of the parent level."""
    children, parent_idx, ks = bce_expand(parent)
    parent_occ = parent.occ[parent_idx]
    ctxs = [
        NodeContext(depth, int(ks[i]), int(parent_occ[i]))
        for i in range(len(children))
    ]
    return children, ctxs


def _shallow_cdfs_s0(model, ctxs):
    return [entropy.logits_to_cdf(predict_s0(model, c)) for c in ctxs]


def _shallow_cdfs_s1(model, ctxs, s0s):
    return [
        entropy.logits_to_cdf(predict_s1(model, c, int(s)))
        for c, s in zip(ctxs, s0s)
    ]


def choose_depth(cfg: CodecConfig, leaves) -> int:
    return cfg.depth_override or hierarchy.default_depth(leaves)


def choose_split(cfg: CodecConfig, pyramid: OccupancyPyramid) -> int:
    if cfg.split_override is not None:
        ds = cfg.split_override
    else:
        ds = hierarchy.select_split_depth(pyramid, cfg.split_threshold)
    # D_s = 0 would deep-code O^(0), which already ships raw in the base
    # stream; clamp to keep the level partition disjoint
    return min(max(ds, 1), pyramid.depth)


def encode_pyramid(pyramid: OccupancyPyramid, split_depth: int, cfg: CodecConfig,
                   n_points: int) -> FramePacket:
    base = pyramid.levels[0]
    if np.abs(base.coords).max(initial=0) >= 1 << 31:
        raise ParameterError("base coordinates do not fit int32")
    shallow_streams = []
    for d in range(1, split_depth):
        level = pyramid.levels[d]
        _, ctxs = _level_contexts(pyramid.levels[d - 1], d)
        s0 = (level.occ & 0xF).tolist()
        s1 = (level.occ >> 4).tolist()
        stream0 = entropy.rans_encode(s0, _shallow_cdfs_s0(cfg.model, ctxs))
        stream1 = entropy.rans_encode(s1, _shallow_cdfs_s1(cfg.model, ctxs, s0))
        shallow_streams.append((stream0, stream1))
    deep_streams = [
        deepcodec.encode_deep_level(pyramid.levels[d])
        for d in range(split_depth, pyramid.depth)
    ]
    return FramePacket(
        pos_q=cfg.pos_q,
        n_points=n_points,
        depths=pyramid.depth,
        shallow_d=split_depth,
        base_coords=base.coords.astype(np.int32),
        base_occ=base.occ,
        shallow_streams=shallow_streams,
        deep_streams=deep_streams,
    )


def encode_frame_packet(points, cfg: CodecConfig) -> FramePacket:
    """Quantize, build the pyramid, code every level, assemble the packet."""
    cloud = quantize(points, cfg.pos_q)
    return encode_voxels(cloud.voxels, cfg)


def encode_voxels(voxels, cfg: CodecConfig) -> FramePacket:
    voxels = np.asarray(voxels, dtype=np.int64).reshape(-1, 3)
    if len(voxels) == 0:
        raise ParameterError("cannot encode an empty cloud")
    depth = choose_depth(cfg, voxels)
    pyramid = hierarchy.build_pyramid(voxels, depth)
    split_depth = choose_split(cfg, pyramid)
    return encode_pyramid(pyramid, split_depth, cfg, n_points=len(voxels))


def encode_frame(points, cfg: CodecConfig) -> bytes:
    return serialize_frame(encode_frame_packet(points, cfg))


def decode_packet(packet: FramePacket, model: LogitTableModel) -> QuantizedCloud:
    """Reconstruct the quantized voxel set from a parsed packet."""
    if np.any(packet.base_occ == 0):
        raise IntegrityError("base stream holds an occupancy code of 0")
    level = VoxelLevel(packet.base_coords.astype(np.int64), packet.base_occ.copy())
    for d in range(1, packet.shallow_d):
        stream0, stream1 = packet.shallow_streams[d - 1]
        children, ctxs = _level_contexts(level, d)
        try:
            s0 = entropy.rans_decode(
                stream0, _shallow_cdfs_s0(model, ctxs), len(children)
            )
            s1 = entropy.rans_decode(
                stream1, _shallow_cdfs_s1(model, ctxs, s0), len(children)
            )
        except (CorruptStreamError, IntegrityError) as exc:
            raise IntegrityError(
                f"shallow level {d}: entropy decode failed ({exc})"
            ) from exc
        occ = (np.array(s1, dtype=np.uint8) << 4) | np.array(s0, dtype=np.uint8)
        if occ.size and occ.min() == 0:
            raise IntegrityError(
                f"shallow level {d}: decoded occupancy code 0 (model mismatch?)"
            )
        level = VoxelLevel(children, occ)
    for i in range(packet.n_deep_levels):
        d = packet.shallow_d + i
        coords, _, _ = bce_expand(level)
        ds = packet.deep_streams[i]
        if ds.nu != len(coords):
            raise IntegrityError(
                f"deep level {d}: stream holds {ds.nu} nodes, hierarchy "
                f"expects {len(coords)}"
            )
        occ = deepcodec.decode_deep_level(ds)
        level = VoxelLevel(coords, occ)
    leaves, _, _ = bce_expand(level)
    if len(leaves) != packet.n_points:
        raise IntegrityError(
            f"decoded {len(leaves)} voxels, header says {packet.n_points}"
        )
    return QuantizedCloud(leaves, float(packet.pos_q))


def decode_frame(data: bytes, model: LogitTableModel) -> QuantizedCloud:
    """Parse and decode one frame; inverse of :func:`encode_frame` under
    the byte-identical model."""
    packet = parse_frame(data)
    return decode_packet(packet, model)


def packet_stream_sizes(packet: FramePacket) -> dict:
    """Byte accounting per stream family (for reports and the CLI)."""
    shallow = sum(len(a) + len(b) for a, b in packet.shallow_streams)
    deep = sum(
        deepcodec.DeepLevelStream.payload_size(ds) + 28 for ds in packet.deep_streams
    )
    base = 4 + 13 * len(packet.base_coords)
    return {
        "base_bytes": base,
        "shallow_bytes": shallow,
        "deep_bytes": deep,
        "metadata_bytes": 20,
    }
