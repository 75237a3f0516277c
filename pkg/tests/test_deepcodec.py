import numpy as np
import pytest

from helpers import random_voxel_level
from lean3d.deepcodec import (
    DeepLevelStream,
    decode_deep_level,
    ef_decode,
    ef_encode,
    encode_deep_level,
    pack3,
    partition,
    unpack3,
)
from lean3d.errors import CorruptStreamError, ParameterError


def test_partition_examples():
    unary, ks, nonunary = partition([1, 3, 8])
    assert unary.tolist() == [0, 2]
    assert ks.tolist() == [0, 3]
    assert nonunary.tolist() == [1]

    unary, ks, nonunary = partition([2, 4, 16])
    assert unary.tolist() == [0, 1, 2]
    assert ks.tolist() == [1, 2, 4]
    assert nonunary.tolist() == []

    unary, ks, nonunary = partition([255])
    assert unary.tolist() == []
    assert nonunary.tolist() == [0]


def test_partition_rejects_zero():
    with pytest.raises(ParameterError):
        partition([1, 0, 2])


def test_ef_empty():
    llow, high, low = ef_encode([], 100)
    assert llow == 0
    assert high == b"\x00" * 13  # ceil(101 / 8)
    assert low == b""
    assert ef_decode(llow, high, low, 0, 100).tolist() == []


def test_ef_hand_packed_example():
    llow, high, low = ef_encode([2, 3, 5, 7, 11], 16)
    assert llow == 1  # floor(log2(16/5))
    bits = np.unpackbits(np.frombuffer(high, np.uint8), bitorder="little")
    assert len(bits) == 16  # 14-bit vector padded to 2 bytes
    assert np.flatnonzero(bits).tolist() == [1, 2, 4, 6, 9]
    low_bits = np.unpackbits(np.frombuffer(low, np.uint8), bitorder="little")[:5]
    assert low_bits.tolist() == [0, 1, 1, 1, 1]
    assert ef_decode(llow, high, low, 5, 16).tolist() == [2, 3, 5, 7, 11]


def test_ef_dense_case():
    u = 20
    llow, high, low = ef_encode(list(range(u)), u)
    assert llow == 0
    bits = np.unpackbits(np.frombuffer(high, np.uint8), bitorder="little")[: 2 * u + 1]
    assert np.flatnonzero(bits).tolist() == list(range(0, 2 * u, 2))
    assert ef_decode(llow, high, low, u, u).tolist() == list(range(u))


def test_ef_random_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        u = int(rng.integers(1, 5000))
        m = int(rng.integers(0, u + 1))
        idx = np.sort(rng.choice(u, size=m, replace=False))
        llow, high, low = ef_encode(idx, u)
        assert ef_decode(llow, high, low, m, u).tolist() == idx.tolist()


def test_ef_validation():
    with pytest.raises(ParameterError):
        ef_encode([3, 3], 10)
    with pytest.raises(ParameterError):
        ef_encode([10], 10)
    with pytest.raises(ParameterError):
        ef_encode([], 0)
    llow, high, low = ef_encode(list(range(0, 42, 3)), 64)
    assert len(high) > 1
    with pytest.raises(CorruptStreamError):
        ef_decode(llow, high[:1], low, 14, 64)


def test_pack3_examples():
    assert pack3([]) == b""
    assert pack3([7, 0, 7]) == bytes([0xC7, 0x01])
    packed = pack3(list(range(8)))
    assert len(packed) == 3
    assert unpack3(packed, 8).tolist() == list(range(8))


def test_pack3_validation():
    with pytest.raises(ParameterError):
        pack3([8])
    with pytest.raises(CorruptStreamError):
        unpack3(b"\x00", 3)


def test_encode_deep_level_all_unary():
    level = random_voxel_level(np.random.default_rng(1), 3)
    level = level.__class__(level.coords[:3], np.array([2, 4, 16], np.uint8))
    stream = encode_deep_level(level)
    assert stream.msplit == 0
    assert stream.nonunary_occ == b""
    assert unpack3(stream.unary_k, 3).tolist() == [1, 2, 4]
    assert decode_deep_level(stream).tolist() == [2, 4, 16]


def test_encode_deep_level_single_nonunary():
    level = random_voxel_level(np.random.default_rng(2), 1)
    level = level.__class__(level.coords[:1], np.array([255], np.uint8))
    stream = encode_deep_level(level)
    assert stream.msplit == 1
    assert stream.nonunary_occ == b"\xff"
    assert stream.unary_k == b""
    assert decode_deep_level(stream).tolist() == [255]


def test_size_formula_10000_node_level():
    rng = np.random.default_rng(3)
    occ = (np.uint8(1) << rng.integers(0, 8, 10000).astype(np.uint8)).astype(np.uint8)
    nonunary_pos = np.sort(rng.choice(10000, 500, replace=False))
    occ[nonunary_pos] = 0b101  # popcount 2
    coords = np.stack(
        [np.arange(10000), np.zeros(10000, np.int64), np.zeros(10000, np.int64)], 1
    )
    from lean3d.hierarchy import VoxelLevel

    stream = encode_deep_level(VoxelLevel(coords, occ))
    assert len(stream.unary_k) == 3563
    assert len(stream.nonunary_occ) == 500
    assert stream.llow == 4  # floor(log2(10000/500))
    assert len(stream.ef_low) == 250
    assert len(stream.ef_high) == 141  # ceil((500 + 625 + 1) / 8)
    assert decode_deep_level(stream).tolist() == occ.tolist()


def test_payload_size_closed_form():
    rng = np.random.default_rng(4)
    for _ in range(100):
        level = random_voxel_level(rng, int(rng.integers(1, 300)))
        stream = encode_deep_level(level)
        nu, m, llow = stream.nu, stream.msplit, stream.llow
        expected = (
            (3 * (nu - m) + 7) // 8
            + m
            + len(stream.ef_high)
            + len(stream.ef_low)
        )
        assert stream.payload_size() == expected
        assert len(stream.ef_low) == (m * llow + 7) // 8
        assert len(stream.ef_high) == (m + (max(nu, 1) >> llow) + 1 + 7) // 8


def test_deep_level_roundtrip_random():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        n = int(rng.integers(1, 200))
        # bias the popcount mix, covering all-unary and all-non-unary extremes
        style = rng.integers(0, 3)
        if style == 0:
            occ = (np.uint8(1) << rng.integers(0, 8, n).astype(np.uint8)).astype(np.uint8)
        elif style == 1:
            occ = rng.integers(3, 256, n).astype(np.uint8)
            occ[(occ & (occ - 1)) == 0] |= 3
        else:
            occ = rng.integers(1, 256, n).astype(np.uint8)
        from lean3d.hierarchy import VoxelLevel

        coords = np.stack([np.arange(n), np.zeros(n, np.int64), np.zeros(n, np.int64)], 1)
        level = VoxelLevel(coords, occ)
        stream = encode_deep_level(level)
        assert decode_deep_level(stream).tolist() == occ.tolist()


def test_corrupted_msplit_detected():
    level = random_voxel_level(np.random.default_rng(6), 50)
    stream = encode_deep_level(level)
    bad = DeepLevelStream(
        stream.nu,
        stream.msplit + 1,
        stream.llow,
        stream.ef_high,
        stream.ef_low,
        stream.unary_k,
        stream.nonunary_occ,
    )
    with pytest.raises(CorruptStreamError):
        decode_deep_level(bad)
