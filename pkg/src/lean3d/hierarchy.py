"""Sparse occupancy pyramid: bitwise parent aggregation (BPA), bitwise
child expansion (BCE), occupancy statistics, and split-depth selection.

The node order everywhere is the canonical (z, y, x)-ascending
lexicographic order; the encoder and decoder must agree on it for the
entropy-coded levels to line up.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .geometry import canonical_argsort, canonical_unique

# child offset table: offset for child index k is (k&1, (k>>1)&1, (k>>2)&1)
CHILD_OFFSETS = np.array(
    [[(k >> 0) & 1, (k >> 1) & 1, (k >> 2) & 1] for k in range(8)], dtype=np.int64
)

POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


@dataclass(frozen=True)
class VoxelLevel:
    """One hierarchy level: canonical coords plus an occupancy byte each."""

    coords: np.ndarray  # (N, 3) int64, canonically sorted, unique
    occ: np.ndarray  # (N,) uint8, values 1..255

    def __post_init__(self):
        if len(self.coords) != len(self.occ):
            raise ParameterError("coords and occ lengths differ")

    def __len__(self):
        return len(self.coords)


@dataclass(frozen=True)
class OccupancyPyramid:
    """Levels from coarse (depth 0) to the finest occupancy level L-1.

    Leaf coordinates are implied by BCE of the last level.
    """

    levels: list[VoxelLevel]

    @property
    def depth(self) -> int:
        return len(self.levels)

    def leaves(self) -> np.ndarray:
        return bce(self.levels[-1])


def child_index(coords: np.ndarray) -> np.ndarray:
    """Within-parent child index k = (x&1) + 2(y&1) + 4(z&1)."""
    c = np.asarray(coords, dtype=np.int64)
    return (c[:, 0] & 1) + ((c[:, 1] & 1) << 1) + ((c[:, 2] & 1) << 2)


def _aggregate_unique(children: np.ndarray) -> VoxelLevel:
    """BPA over a unique (not necessarily sorted) child set."""
    parents = children >> 1
    bits = np.uint16(1) << child_index(children).astype(np.uint16)
    order = canonical_argsort(parents)
    ps = parents[order]
    new = np.empty(len(ps), dtype=bool)
    new[0] = True
    np.any(ps[1:] != ps[:-1], axis=1, out=new[1:])
    starts = np.flatnonzero(new)
    # each child of a parent contributes a distinct power-of-two bit, so
    # grouped summation equals the bitwise OR
    occ = np.add.reduceat(bits[order], starts).astype(np.uint8)
    return VoxelLevel(ps[new], occ)


def bpa(child_coords) -> VoxelLevel:
    """Aggregate children into unique floor-halved parents with occupancy codes.

    Works for negative coordinates: ``>> 1`` floors and ``& 1`` is the
    non-negative modulo in two's complement.
    """
    children = np.asarray(child_coords, dtype=np.int64).reshape(-1, 3)
    if len(children) == 0:
        raise ParameterError("bpa requires a non-empty child set")
    uniq, _ = canonical_unique(children)
    return _aggregate_unique(uniq)


def bce(level: VoxelLevel) -> np.ndarray:
    """Expand a level into its occupied children, canonically sorted."""
    children, _, _ = bce_expand(level)
    return children


def bce_expand(level: VoxelLevel):
    """BCE returning (children, parent_index, child_k), all in canonical
    child order. parent_index/child_k give each child's coding context."""
    if np.any(level.occ == 0):
        raise ParameterError("occupancy code 0 violates the level invariant")
    masks = (level.occ[:, None] >> np.arange(8, dtype=np.uint8)) & 1
    rows, ks = np.nonzero(masks)
    children = (level.coords[rows] << 1) + CHILD_OFFSETS[ks]
    order = canonical_argsort(children)
    return children[order], rows[order], ks[order]


def build_pyramid(leaves, depth: int) -> OccupancyPyramid:
    """Build `depth` occupancy levels above the leaf voxel set by repeated BPA."""
    if depth < 1:
        raise ParameterError(f"pyramid depth must be >= 1, got {depth}")
    leaves = np.asarray(leaves, dtype=np.int64).reshape(-1, 3)
    if len(leaves) == 0:
        raise ParameterError("cannot build a pyramid over an empty voxel set")
    cur, _ = canonical_unique(leaves)
    levels = []
    for _ in range(depth):
        lvl = _aggregate_unique(cur)
        levels.append(lvl)
        cur = lvl.coords
    levels.reverse()
    return OccupancyPyramid(levels)


def default_depth(leaves) -> int:
    """Smallest depth for which the coarsest level collapses to a handful
    of nodes: the bit length of the largest absolute leaf coordinate."""
    leaves = np.asarray(leaves, dtype=np.int64)
    m = int(np.abs(leaves).max(initial=0))
    return max(1, m.bit_length())


def unary_fraction(level: VoxelLevel) -> float:
    """Fraction of nodes whose occupancy code has popcount 1."""
    if len(level) == 0:
        raise ParameterError("unary_fraction of an empty level")
    return float(np.count_nonzero(POPCOUNT8[level.occ] == 1)) / len(level)


def select_split_depth(pyramid: OccupancyPyramid, threshold: float = 0.6) -> int:
    """First level whose unary fraction strictly exceeds the threshold.

    Returns the pyramid depth L when no level qualifies (all shallow).
    """
    if not 0 < threshold < 1:
        raise ParameterError(f"threshold must be in (0, 1), got {threshold}")
    for d, level in enumerate(pyramid.levels):
        if unary_fraction(level) > threshold:
            return d
    return pyramid.depth
