"""Per-class tree sets: one ordered index per feature dimension.

Each dimension is a small B+ tree keyed by bin index. Its entries
("leaves" in the tree-set sense) carry a store-wide unique ``LeafId`` and an
append-only posting list of instance ids. Leaves are never removed, so leaf
ids, and the hash keys built from them, are stable for the store's lifetime.

Every block node touched during a descent or a range walk bumps a shared
:class:`VisitCounter`; that is what the bounded-computation checks measure.
"""

from __future__ import annotations

import hashlib
import struct
from array import array
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from . import kernels
from .errors import ArityError, EpimemError

HashKey = int
Digest = Callable[[Sequence[int]], HashKey]

# max entries per block before it splits
BLOCK_ORDER = 32


def hash_leaves(leaf_ids: Sequence[int]) -> HashKey:
    """Order-sensitive 64-bit digest of a leaf-id sequence."""
    if not leaf_ids:
        raise ValueError("hash_leaves needs at least one leaf id")
    packed = struct.pack(f"<{len(leaf_ids)}q", *leaf_ids)
    return int.from_bytes(hashlib.blake2b(packed, digest_size=8).digest(), "little")


class VisitCounter:
    __slots__ = ("nodes",)

    def __init__(self) -> None:
        self.nodes = 0

    def take(self) -> int:
        n, self.nodes = self.nodes, 0
        return n


@dataclass
class Leaf:
    bin: int
    leaf_id: int
    postings: array = field(default_factory=lambda: array("q"))


class _Block:
    __slots__ = ("keys", "children", "leaves", "next", "fence")

    def __init__(self, leaf: bool) -> None:
        self.keys: list[int] = []
        # internal blocks: children[i] holds keys >= keys[i-1]
        self.children: list[_Block] | None = None if leaf else []
        self.leaves: list[Leaf] | None = [] if leaf else None
        self.next: _Block | None = None
        # every key in .next is >= fence; None means no right sibling
        self.fence: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.leaves is not None


class DimensionTree:
    """Ordered map ``bin -> Leaf`` with logarithmic point access and in-order ranges."""

    def __init__(self, class_id: str, dim_index: int, counter: VisitCounter) -> None:
        self.class_id = class_id
        self.dim_index = dim_index
        self.counter = counter
        self._root = _Block(leaf=True)
        self._levels = 1
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def height(self) -> int:
        """Edges on the root-to-leaf-block path; a lone root block has height 0."""
        return self._levels - 1

    def _descend(self, key: int) -> tuple[_Block, list[tuple[_Block, int]]]:
        node = self._root
        path: list[tuple[_Block, int]] = []
        self.counter.nodes += 1
        while not node.is_leaf:
            i = bisect_right(node.keys, key)
            path.append((node, i))
            node = node.children[i]  # type: ignore[index]
            self.counter.nodes += 1
        return node, path

    def get(self, key: int) -> Leaf | None:
        block, _ = self._descend(key)
        i = bisect_left(block.keys, key)
        if i < len(block.keys) and block.keys[i] == key:
            return block.leaves[i]  # type: ignore[index]
        return None

    def get_or_create(self, key: int, new_id: Callable[[], int]) -> tuple[Leaf, bool]:
        block, path = self._descend(key)
        i = bisect_left(block.keys, key)
        if i < len(block.keys) and block.keys[i] == key:
            return block.leaves[i], False  # type: ignore[index]
        leaf = Leaf(key, new_id())
        self._insert_at(block, path, i, leaf)
        return leaf, True

    def attach(self, leaf: Leaf) -> None:
        """Insert an already-identified leaf (store loading)."""
        block, path = self._descend(leaf.bin)
        i = bisect_left(block.keys, leaf.bin)
        if i < len(block.keys) and block.keys[i] == leaf.bin:
            raise EpimemError(f"duplicate leaf for bin {leaf.bin}")
        self._insert_at(block, path, i, leaf)

    def _insert_at(self, block: _Block, path: list[tuple[_Block, int]], i: int, leaf: Leaf) -> None:
        block.keys.insert(i, leaf.bin)
        block.leaves.insert(i, leaf)  # type: ignore[union-attr]
        self._size += 1
        if len(block.keys) <= BLOCK_ORDER:
            return
        # split upward
        node = block
        while len(node.keys) > BLOCK_ORDER:
            mid = len(node.keys) // 2
            right = _Block(leaf=node.is_leaf)
            if node.is_leaf:
                right.keys, node.keys = node.keys[mid:], node.keys[:mid]
                right.leaves, node.leaves = node.leaves[mid:], node.leaves[:mid]  # type: ignore[index]
                right.next, node.next = node.next, right
                right.fence, node.fence = node.fence, right.keys[0]
                sep = right.keys[0]
            else:
                sep = node.keys[mid]
                right.keys, node.keys = node.keys[mid + 1 :], node.keys[:mid]
                right.children, node.children = node.children[mid + 1 :], node.children[: mid + 1]  # type: ignore[index]
            if path:
                parent, ci = path.pop()
                parent.keys.insert(ci, sep)
                parent.children.insert(ci + 1, right)  # type: ignore[union-attr]
                node = parent
            else:
                root = _Block(leaf=False)
                root.keys = [sep]
                root.children = [node, right]
                self._root = root
                self._levels += 1
                break

    def range(self, lo: int, hi: int) -> Iterator[Leaf]:
        """Leaves with ``lo <= bin <= hi`` in ascending bin order."""
        block: _Block | None
        block, _ = self._descend(lo)
        i = bisect_left(block.keys, lo)
        while block is not None:
            keys = block.keys
            while i < len(keys):
                if keys[i] > hi:
                    return
                yield block.leaves[i]  # type: ignore[index]
                i += 1
            if block.fence is None or block.fence > hi:
                return
            block = block.next
            i = 0
            self.counter.nodes += 1

    def leaves(self) -> Iterator[Leaf]:
        node = self._root
        while not node.is_leaf:
            node = node.children[0]  # type: ignore[index]
        block: _Block | None = node
        while block is not None:
            yield from block.leaves  # type: ignore[misc]
            block = block.next


class TreeSet:
    """The collection of dimension trees for one class."""

    def __init__(
        self,
        class_id: str,
        ndim: int,
        counter: VisitCounter,
        new_leaf_id: Callable[[], int],
        digest: Digest = hash_leaves,
    ) -> None:
        self.class_id = class_id
        self.trees = [DimensionTree(class_id, d, counter) for d in range(ndim)]
        self.counter = counter
        self._new_leaf_id = new_leaf_id
        self._digest = digest
        # every instance of the class, ascending
        self.members = array("q")

    @property
    def ndim(self) -> int:
        return len(self.trees)

    def _check(self, bins: Sequence[int]) -> None:
        if len(bins) != len(self.trees):
            raise ArityError(
                f"class {self.class_id!r}: expected {len(self.trees)} bins, got {len(bins)}"
            )

    def insert(self, bins: Sequence[int], instance: int) -> tuple[list[int], HashKey]:
        self._check(bins)
        leaf_ids = []
        for tree, b in zip(self.trees, bins):
            leaf, _ = tree.get_or_create(b, self._new_leaf_id)
            post = leaf.postings
            if not post or post[-1] < instance:
                post.append(instance)
            elif instance not in post:
                raise EpimemError("posting lists are append-only in instance order")
            leaf_ids.append(leaf.leaf_id)
        if not self.members or self.members[-1] < instance:
            self.members.append(instance)
        return leaf_ids, self._digest(leaf_ids)

    def lookup_exact(self, bins: Sequence[int]) -> tuple[list[int], HashKey] | None:
        self._check(bins)
        leaf_ids = []
        for tree, b in zip(self.trees, bins):
            leaf = tree.get(b)
            if leaf is None:
                return None
            leaf_ids.append(leaf.leaf_id)
        return leaf_ids, self._digest(leaf_ids)

    def range_leaves(self, dim_index: int, lo_bin: int, hi_bin: int) -> list[Leaf]:
        if not 0 <= dim_index < len(self.trees):
            raise IndexError(f"class {self.class_id!r} has no dimension {dim_index}")
        if lo_bin > hi_bin:
            raise ValueError(f"empty bin range [{lo_bin}, {hi_bin}]")
        return list(self.trees[dim_index].range(lo_bin, hi_bin))

    def range_postings(self, dim_index: int, lo_bin: int, hi_bin: int) -> array:
        leaves = self.range_leaves(dim_index, lo_bin, hi_bin)
        return kernels.merge_disjoint([leaf.postings for leaf in leaves])

    def hash_key(self, leaf_ids: Sequence[int]) -> HashKey:
        return self._digest(leaf_ids)

    def height(self) -> int:
        return max(t.height for t in self.trees)
