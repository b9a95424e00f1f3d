"""Index arithmetic and compact spin storage for complete b-ary trees.

Nodes are numbered breadth-first: the root is node 0, level ``l`` starts at
``(b**l - 1) // (b - 1)`` and holds ``b**l`` nodes. Children of any node are
consecutive, and the leaves below any node form a contiguous range of leaf
offsets, so subtree restrictions are plain slices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CapacityError(ValueError):
    """An exact/enumerative routine was asked for more than it can hold."""


@dataclass(frozen=True)
class TreeShape:
    """Complete tree with `arity` children per internal node and `depth` levels below the root."""

    arity: int
    depth: int

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise ValueError(f"arity must be >= 1, got {self.arity}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")

    @property
    def leaf_count(self) -> int:
        return self.arity ** self.depth

    @property
    def node_count(self) -> int:
        if self.arity == 1:
            return self.depth + 1
        return (self.arity ** (self.depth + 1) - 1) // (self.arity - 1)

    def level_start(self, level: int) -> int:
        """First node id of the given level."""
        if not 0 <= level <= self.depth:
            raise IndexError(f"level {level} out of range for depth {self.depth}")
        if self.arity == 1:
            return level
        return (self.arity ** level - 1) // (self.arity - 1)

    def level_size(self, level: int) -> int:
        if not 0 <= level <= self.depth:
            raise IndexError(f"level {level} out of range for depth {self.depth}")
        return self.arity ** level

    @property
    def leaf_start(self) -> int:
        return self.level_start(self.depth)


def node_index(level: int, offset: int, shape: TreeShape) -> int:
    """Dense id of the node at (level, offset) under breadth-first numbering."""
    if not 0 <= level <= shape.depth:
        raise IndexError(f"level {level} out of range for depth {shape.depth}")
    if not 0 <= offset < shape.level_size(level):
        raise IndexError(f"offset {offset} out of range at level {level}")
    return shape.level_start(level) + offset


def node_level_offset(index: int, shape: TreeShape) -> tuple[int, int]:
    """Inverse of node_index."""
    if not 0 <= index < shape.node_count:
        raise IndexError(f"node id {index} out of range")
    for level in range(shape.depth + 1):
        start = shape.level_start(level)
        if index < start + shape.level_size(level):
            return level, index - start
    raise IndexError(f"node id {index} out of range")  # unreachable


def parent_of(index: int, shape: TreeShape) -> int:
    level, offset = node_level_offset(index, shape)
    if level == 0:
        raise IndexError("the root has no parent")
    return shape.level_start(level - 1) + offset // shape.arity


def children_of(index: int, shape: TreeShape) -> range:
    """Ids of the node's children (empty range for leaves)."""
    level, offset = node_level_offset(index, shape)
    if level == shape.depth:
        return range(0)
    start = shape.level_start(level + 1) + offset * shape.arity
    return range(start, start + shape.arity)


def parent_indices(shape: TreeShape) -> np.ndarray:
    """parent id per node, with -1 at the root."""
    out = np.empty(shape.node_count, dtype=np.int64)
    out[0] = -1
    for level in range(1, shape.depth + 1):
        start = shape.level_start(level)
        size = shape.level_size(level)
        prev = shape.level_start(level - 1)
        out[start:start + size] = prev + np.arange(size) // shape.arity
    return out


def subtree_leaf_range(index: int, shape: TreeShape) -> tuple[int, int]:
    """Inclusive (first, last) leaf offsets spanned by the node's subtree.

    Offsets count within the leaf level, so the root spans
    (0, leaf_count - 1) and a leaf spans (own offset, own offset).
    """
    level, offset = node_level_offset(index, shape)
    width = shape.arity ** (shape.depth - level)
    return offset * width, (offset + 1) * width - 1


def height_k_blocks(shape: TreeShape, k: int) -> list[tuple[int, int]]:
    """Partition of the leaf offsets into the subtrees rooted k levels up.

    Returns arity**(depth-k) half-open (start, stop) ranges of arity**k
    leaves each, in left-to-right order.
    """
    if not 1 <= k <= shape.depth:
        raise IndexError(f"block height {k} out of range for depth {shape.depth}")
    width = shape.arity ** k
    return [(i * width, (i + 1) * width) for i in range(shape.arity ** (shape.depth - k))]


class SpinVector:
    """A sequence of -1/+1 spins stored one bit per entry.

    `start` records which node id the first entry labels (0 for whole-tree
    vectors, the leaf level's first id for leaf vectors); it is bookkeeping
    only and does not affect arithmetic.
    """

    __slots__ = ("_bits", "length", "start")

    def __init__(self, values, start: int = 0):
        arr = np.asarray(values, dtype=np.int8)
        if arr.ndim != 1:
            raise ValueError("spin values must be one-dimensional")
        if arr.size and not np.all((arr == 1) | (arr == -1)):
            bad = int(np.flatnonzero((arr != 1) & (arr != -1))[0])
            raise ValueError(f"spin at position {bad} is not -1 or +1")
        self.length = int(arr.size)
        self.start = int(start)
        self._bits = np.packbits(arr > 0)

    @classmethod
    def from_string(cls, text: str, start: int = 0) -> "SpinVector":
        """Parse a '+'/'-' literal such as '++-'."""
        values = []
        for ch in text:
            if ch == "+":
                values.append(1)
            elif ch == "-":
                values.append(-1)
            else:
                raise ValueError(f"spin literal may contain only '+' and '-', got {ch!r}")
        return cls(np.asarray(values, dtype=np.int8), start=start)

    def to_array(self) -> np.ndarray:
        """Unpacked int8 view with values in {-1, +1}."""
        bits = np.unpackbits(self._bits, count=self.length)
        return (bits.astype(np.int8) << 1) - 1

    def to_string(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.to_array())

    def negated(self) -> "SpinVector":
        return SpinVector(-self.to_array(), start=self.start)

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpinVector):
            return NotImplemented
        return (
            self.length == other.length
            and self.start == other.start
            and np.array_equal(self._bits, other._bits)
        )

    def __hash__(self):
        return hash((self.length, self.start, self._bits.tobytes()))

    def __repr__(self) -> str:
        body = self.to_string() if self.length <= 40 else self.to_string()[:37] + "..."
        return f"SpinVector({body!r}, start={self.start})"


@dataclass(frozen=True)
class CorruptionMask:
    """Per-leaf flip permissions plus the density they were sampled at."""

    flags: np.ndarray
    density: float

    def __post_init__(self) -> None:
        flags = np.asarray(self.flags, dtype=bool)
        object.__setattr__(self, "flags", flags)
        if not 0.0 <= self.density < 1.0:
            raise ValueError(f"mask density must lie in [0, 1), got {self.density}")

    @property
    def popcount(self) -> int:
        return int(self.flags.sum())

    def __len__(self) -> int:
        return int(self.flags.size)
