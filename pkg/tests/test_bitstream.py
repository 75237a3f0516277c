import struct

import numpy as np
import pytest

from helpers import random_voxel_level
from lean3d.bitstream import (
    TITLE,
    FramePacket,
    parse_frame,
    parse_frame_at,
    read_frames,
    serialize_frame,
)
from lean3d.deepcodec import encode_deep_level
from lean3d.errors import FormatError, ParameterError


def _minimal_packet():
    return FramePacket(
        pos_q=2,
        n_points=1,
        depths=1,
        shallow_d=1,
        base_coords=np.array([[0, 0, 0]], np.int32),
        base_occ=np.array([1], np.uint8),
    )


def _rich_packet(seed=0):
    rng = np.random.default_rng(seed)
    deep = [encode_deep_level(random_voxel_level(rng, 40)) for _ in range(2)]
    return FramePacket(
        pos_q=4,
        n_points=321,
        depths=6,
        shallow_d=4,
        base_coords=rng.integers(-10, 10, (5, 3)).astype(np.int32),
        base_occ=rng.integers(1, 256, 5).astype(np.uint8),
        shallow_streams=[
            (rng.bytes(9), rng.bytes(11)),
            (rng.bytes(4), rng.bytes(4)),
            (b"", b"\x01"),
        ],
        deep_streams=deep,
    )


def test_minimal_packet_roundtrip():
    data = serialize_frame(_minimal_packet())
    assert data.startswith(TITLE)
    pkt = parse_frame(data)
    assert pkt.pos_q == 2
    assert pkt.n_points == 1
    assert pkt.depths == 1 and pkt.shallow_d == 1
    assert pkt.n_streams == 2
    assert pkt.base_coords.tolist() == [[0, 0, 0]]
    assert pkt.base_occ.tolist() == [1]


def test_rich_packet_roundtrip():
    src = _rich_packet()
    pkt = parse_frame(serialize_frame(src))
    assert pkt.n_streams == 2 + 2 * 3 + 2 == src.n_streams
    assert np.array_equal(pkt.base_coords, src.base_coords)
    assert np.array_equal(pkt.base_occ, src.base_occ)
    assert [
        (bytes(a), bytes(b)) for a, b in pkt.shallow_streams
    ] == src.shallow_streams
    for got, want in zip(pkt.deep_streams, src.deep_streams):
        assert got == want


def test_serialization_is_deterministic():
    assert serialize_frame(_rich_packet(3)) == serialize_frame(_rich_packet(3))
    rt = parse_frame(serialize_frame(_rich_packet(3)))
    assert serialize_frame(rt) == serialize_frame(_rich_packet(3))


def test_length_accounting():
    src = _rich_packet(1)
    data = serialize_frame(src)
    n_streams = struct.unpack_from("<I", data, 8)[0]
    assert n_streams == src.n_streams
    lens = struct.unpack_from(f"<{n_streams}I", data, 20)
    assert len(data) == 20 + 4 * n_streams + sum(lens)
    assert lens[0] == 20  # metadata stream
    assert lens[1] == 4 + 13 * len(src.base_coords)


def test_header_field_values():
    data = serialize_frame(_minimal_packet())
    assert struct.unpack_from("<I", data, 12)[0] == 2  # posQ
    assert struct.unpack_from("<I", data, 16)[0] == 1  # N


def test_bad_signature():
    data = bytearray(serialize_frame(_minimal_packet()))
    data[0] ^= 0xFF
    with pytest.raises(FormatError):
        parse_frame(bytes(data))


def test_trailing_garbage_strict():
    data = serialize_frame(_minimal_packet())
    with pytest.raises(FormatError):
        parse_frame(data + b"\x00")
    pkt, used = parse_frame_at(data + b"\x00", strict=False)
    assert used == len(data)
    assert pkt.pos_q == 2


def test_concatenated_frames():
    a = serialize_frame(_minimal_packet())
    b = serialize_frame(_rich_packet(2))
    packets = read_frames(a + b + a)
    assert [p.n_points for p in packets] == [1, 321, 1]


def test_truncation_at_every_prefix():
    data = serialize_frame(_rich_packet(4))
    step = max(1, len(data) // 200)
    for cut in range(0, len(data), step):
        with pytest.raises(FormatError):
            parse_frame(data[:cut])


def test_length_field_mutation_detected():
    data = bytearray(serialize_frame(_rich_packet(5)))
    # grow the first stream length so later reads run off the end
    struct.pack_into("<I", data, 20, struct.unpack_from("<I", data, 20)[0] + 1000)
    with pytest.raises(FormatError):
        parse_frame(bytes(data))


def test_byte_fuzz_never_crashes():
    rng = np.random.default_rng(6)
    base = serialize_frame(_rich_packet(6))
    for _ in range(500):
        blob = bytearray(base)
        for _ in range(int(rng.integers(1, 8))):
            blob[int(rng.integers(0, len(blob)))] = int(rng.integers(0, 256))
        try:
            parse_frame(bytes(blob))
        except FormatError:
            pass
    for _ in range(500):
        try:
            parse_frame(rng.bytes(int(rng.integers(0, 80))))
        except FormatError:
            pass


def test_validate_rejects_inconsistent_packets():
    pkt = _minimal_packet()
    pkt.shallow_d = 0
    with pytest.raises(ParameterError):
        serialize_frame(pkt)
    pkt = _minimal_packet()
    pkt.shallow_streams = [(b"", b"")]
    with pytest.raises(ParameterError):
        serialize_frame(pkt)
    pkt = _minimal_packet()
    pkt.depths = 3  # declares deep levels that are not present
    with pytest.raises(ParameterError):
        serialize_frame(pkt)


def test_parse_rejects_bad_metadata():
    pkt = _minimal_packet()
    data = bytearray(serialize_frame(pkt))
    meta_off = 20 + 4 * 2
    struct.pack_into("<I", data, meta_off + 8, 129)  # fp_inv_step != 128
    with pytest.raises(FormatError):
        parse_frame(bytes(data))
    data = bytearray(serialize_frame(pkt))
    struct.pack_into("<I", data, meta_off + 4, 0)  # shallow_D = 0
    with pytest.raises(FormatError):
        parse_frame(bytes(data))
