"""Frame packet serialization and parsing.

Layout (all integers little-endian):

    title(8B) | nS(u32) | posQ(u32) | N(u32) | lens[nS](u32 each) |
    metadata stream | base stream | shallow streams | deep streams

The figure the format derives from lists the length array before the
stream count, but the count must be read first to size the array; the
header therefore orders nS ahead of lens.

metadata stream: depths, shallow_D, fp_inv_step, fp_B, fp_KMAX (u32 x5).
base stream: n0(u32) | int32 x 3 x n0 coords | u8 x n0 occupancy.
shallow streams: raw rANS bytes, s0 stream then s1 stream per level.
deep stream: Nu | Msplit | Llow | 4 substream lengths (u32 each) |
ef_high | ef_low | unary_k | nonunary_occ.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .deepcodec import DeepLevelStream
from .entropy import LOGIT_SCALE, MASS_BITS, MAX_SYMBOL
from .errors import CorruptStreamError, FormatError, ParameterError

TITLE = b"LEAN3D\x00\x01"
FRAME_EXTENSION = ".l3d"

_U32 = struct.Struct("<I")
_META = struct.Struct("<5I")
_DEEP_HEAD = struct.Struct("<7I")


@dataclass
class FramePacket:
    """Parsed form of one encoded frame."""

    pos_q: int
    n_points: int
    depths: int
    shallow_d: int
    base_coords: np.ndarray  # (n0, 3) int32
    base_occ: np.ndarray  # (n0,) uint8
    shallow_streams: list = field(default_factory=list)  # [(s0 bytes, s1 bytes)]
    deep_streams: list = field(default_factory=list)  # [DeepLevelStream]
    fp_inv_step: int = LOGIT_SCALE
    fp_b: int = MASS_BITS
    fp_kmax: int = MAX_SYMBOL

    @property
    def n_shallow_levels(self) -> int:
        return max(0, self.shallow_d - 1)

    @property
    def n_deep_levels(self) -> int:
        return self.depths - self.shallow_d

    @property
    def n_streams(self) -> int:
        return 2 + 2 * len(self.shallow_streams) + len(self.deep_streams)

    def validate(self) -> None:
        if not 1 <= self.shallow_d <= self.depths:
            raise ParameterError(
                f"shallow_d={self.shallow_d} outside 1..depths={self.depths}"
            )
        if len(self.shallow_streams) != self.n_shallow_levels:
            raise ParameterError(
                f"{len(self.shallow_streams)} shallow stream pairs, "
                f"expected {self.n_shallow_levels}"
            )
        if len(self.deep_streams) != self.n_deep_levels:
            raise ParameterError(
                f"{len(self.deep_streams)} deep streams, expected {self.n_deep_levels}"
            )
        if len(self.base_coords) != len(self.base_occ):
            raise ParameterError("base coords/occ length mismatch")
        for v in (self.pos_q, self.n_points, self.depths):
            if not 0 <= v < 1 << 32:
                raise ParameterError(f"header field {v} does not fit u32")


def _serialize_deep(ds: DeepLevelStream) -> bytes:
    head = _DEEP_HEAD.pack(
        ds.nu,
        ds.msplit,
        ds.llow,
        len(ds.ef_high),
        len(ds.ef_low),
        len(ds.unary_k),
        len(ds.nonunary_occ),
    )
    return head + ds.ef_high + ds.ef_low + ds.unary_k + ds.nonunary_occ


def serialize_frame(packet: FramePacket) -> bytes:
    """Serialize a frame packet; deterministic byte-for-byte."""
    packet.validate()
    streams = [
        _META.pack(
            packet.depths,
            packet.shallow_d,
            packet.fp_inv_step,
            packet.fp_b,
            packet.fp_kmax,
        )
    ]
    coords = np.ascontiguousarray(packet.base_coords, dtype="<i4")
    occ = np.ascontiguousarray(packet.base_occ, dtype=np.uint8)
    streams.append(_U32.pack(len(coords)) + coords.tobytes() + occ.tobytes())
    for s0_stream, s1_stream in packet.shallow_streams:
        streams.append(bytes(s0_stream))
        streams.append(bytes(s1_stream))
    for ds in packet.deep_streams:
        streams.append(_serialize_deep(ds))
    out = bytearray()
    out += TITLE
    out += _U32.pack(len(streams))
    out += _U32.pack(packet.pos_q)
    out += _U32.pack(packet.n_points)
    for s in streams:
        out += _U32.pack(len(s))
    for s in streams:
        out += s
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.off = offset

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.off + n > len(self.data):
            raise FormatError(
                f"truncated packet: {what} needs {n} bytes at offset {self.off}",
                offset=self.off,
            )
        chunk = self.data[self.off : self.off + n]
        self.off += n
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def _parse_deep(raw: bytes, index: int) -> DeepLevelStream:
    r = _Reader(raw)
    head = r.take(_DEEP_HEAD.size, f"deep stream {index} header")
    nu, msplit, llow, lh, ll, lu, ln = _DEEP_HEAD.unpack(head)
    if msplit > nu:
        raise CorruptStreamError(f"deep stream {index}: Msplit {msplit} > Nu {nu}")
    if llow > 32:
        raise CorruptStreamError(f"deep stream {index}: Llow {llow} out of range")
    ef_high = r.take(lh, f"deep stream {index} EF high")
    ef_low = r.take(ll, f"deep stream {index} EF low")
    unary_k = r.take(lu, f"deep stream {index} unary-k")
    nonunary = r.take(ln, f"deep stream {index} non-unary occupancy")
    if r.off != len(raw):
        raise CorruptStreamError(
            f"deep stream {index}: {len(raw) - r.off} trailing bytes"
        )
    if ln != msplit:
        raise CorruptStreamError(
            f"deep stream {index}: {ln} non-unary bytes for Msplit={msplit}"
        )
    if lu != (3 * (nu - msplit) + 7) // 8:
        raise CorruptStreamError(f"deep stream {index}: unary-k length mismatch")
    return DeepLevelStream(nu, msplit, llow, ef_high, ef_low, unary_k, nonunary)


def parse_frame(data: bytes, strict: bool = True) -> FramePacket:
    """Parse one frame packet; exact inverse of :func:`serialize_frame`.

    Safe on arbitrary bytes: every declared length is bounds-checked
    before it is read. With ``strict=True`` trailing bytes raise a
    :class:`FormatError`.
    """
    packet, _ = parse_frame_at(data, strict=strict)
    return packet


def parse_frame_at(data: bytes, strict: bool = True):
    """Like :func:`parse_frame` but also returns the bytes consumed."""
    data = bytes(data)
    r = _Reader(data)
    title = r.take(len(TITLE), "signature")
    if title != TITLE:
        raise FormatError("bad packet signature", offset=0)
    n_streams = r.u32("stream count")
    pos_q = r.u32("posQ")
    n_points = r.u32("point count")
    if n_streams < 2:
        raise FormatError(f"stream count {n_streams} < 2", offset=r.off - 12)
    if r.off + 4 * n_streams > len(data):
        raise FormatError(
            f"truncated packet: length array needs {4 * n_streams} bytes",
            offset=r.off,
        )
    lens = [r.u32("stream length") for _ in range(n_streams)]
    raw_streams = [r.take(n, f"stream {i}") for i, n in enumerate(lens)]
    consumed = r.off
    if strict and consumed != len(data):
        raise FormatError(
            f"{len(data) - consumed} trailing bytes after packet", offset=consumed
        )

    meta_raw = raw_streams[0]
    if len(meta_raw) != _META.size:
        raise FormatError(
            f"metadata stream is {len(meta_raw)} bytes, expected {_META.size}"
        )
    depths, shallow_d, fp_inv_step, fp_b, fp_kmax = _META.unpack(meta_raw)
    if not 1 <= shallow_d <= depths:
        raise FormatError(f"shallow_D={shallow_d} outside 1..depths={depths}")
    n_shallow = shallow_d - 1
    n_deep = depths - shallow_d
    if n_streams != 2 + 2 * n_shallow + n_deep:
        raise FormatError(
            f"stream count {n_streams} inconsistent with depths={depths}, "
            f"shallow_D={shallow_d}"
        )
    if (fp_inv_step, fp_b, fp_kmax) != (LOGIT_SCALE, MASS_BITS, MAX_SYMBOL):
        raise FormatError(
            f"unsupported entropy parameters ({fp_inv_step}, {fp_b}, {fp_kmax})"
        )

    base_raw = raw_streams[1]
    br = _Reader(base_raw)
    n0 = br.u32("base node count")
    coords = np.frombuffer(br.take(12 * n0, "base coordinates"), dtype="<i4")
    coords = coords.reshape(n0, 3)
    occ = np.frombuffer(br.take(n0, "base occupancy"), dtype=np.uint8)
    if br.off != len(base_raw):
        raise FormatError(f"{len(base_raw) - br.off} trailing bytes in base stream")

    shallow_streams = [
        (raw_streams[2 + 2 * i], raw_streams[3 + 2 * i]) for i in range(n_shallow)
    ]
    deep_streams = [
        _parse_deep(raw_streams[2 + 2 * n_shallow + i], i) for i in range(n_deep)
    ]
    packet = FramePacket(
        pos_q=pos_q,
        n_points=n_points,
        depths=depths,
        shallow_d=shallow_d,
        base_coords=coords,
        base_occ=occ,
        shallow_streams=shallow_streams,
        deep_streams=deep_streams,
        fp_inv_step=fp_inv_step,
        fp_b=fp_b,
        fp_kmax=fp_kmax,
    )
    return packet, consumed


def read_frames(data: bytes):
    """Split a concatenation of packets (each self-delimiting) into packets."""
    packets = []
    off = 0
    while off < len(data):
        packet, used = parse_frame_at(data[off:], strict=False)
        packets.append(packet)
        off += used
    return packets
