"""Merkle trees for per-block transaction roots and a Merkle mountain range
for chain commitments.

Node hashing uses one-byte domain prefixes::

    leaf      H(0x00 || leaf)
    internal  H(0x01 || left || right)
    bag       H(0x02 || peak || bag)          (peaks folded right to left)
    mmr root  H(0x02 || u64(leaf_count) || bag)

Hashing the leaf count into the MMR root binds a proof to one snapshot of the
accumulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .crypto import hash_bytes
from .encoding import DIGEST_SIZE, Reader, Writer

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
BAG_PREFIX = b"\x02"


def leaf_hash(leaf: bytes) -> bytes:
    return hash_bytes(LEAF_PREFIX + leaf)


def node_hash(left: bytes, right: bytes) -> bytes:
    return hash_bytes(NODE_PREFIX + left + right)


def _is_digest(d: object) -> bool:
    return isinstance(d, bytes) and len(d) == DIGEST_SIZE


# --------------------------------------------------------------------------
# Merkle tree


@dataclass(frozen=True)
class MerkleProof:
    """Sibling path from a leaf to the root.

    Each entry is ``(digest, sibling_is_left)``.  Sides must agree with the
    bits of ``leaf_index``; that is what binds the proof to a position.
    """

    leaf_index: int
    siblings: tuple[tuple[bytes, bool], ...] = ()

    def write(self, w: Writer) -> None:
        w.u64(self.leaf_index).u32(len(self.siblings))
        for digest, is_left in self.siblings:
            w.flag(is_left).digest(digest)

    @classmethod
    def read(cls, r: Reader) -> "MerkleProof":
        index = r.u64()
        n = r.count(1 + DIGEST_SIZE)
        siblings = []
        for _ in range(n):
            is_left = r.flag()
            siblings.append((r.digest(), is_left))
        return cls(index, tuple(siblings))

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "MerkleProof":
        r = Reader(data)
        proof = cls.read(r)
        r.done()
        return proof


@dataclass(frozen=True)
class MerkleTree:
    leaves: tuple[bytes, ...]
    # levels[0] holds the padded leaf nodes, levels[-1] == (root,)
    levels: tuple[tuple[bytes, ...], ...] = field(repr=False)

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1


def merkle_build(leaves: Sequence[bytes]) -> MerkleTree:
    if not leaves:
        raise ValueError("cannot build a Merkle tree over zero leaves")
    width = 1
    while width < len(leaves):
        width *= 2
    padded = list(leaves) + [leaves[-1]] * (width - len(leaves))
    level = tuple(leaf_hash(leaf) for leaf in padded)
    levels = [level]
    while len(level) > 1:
        level = tuple(node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2))
        levels.append(level)
    return MerkleTree(tuple(leaves), tuple(levels))


def merkle_prove(tree: MerkleTree, index: int) -> MerkleProof:
    if not 0 <= index < len(tree.leaves):
        raise IndexError(f"leaf index {index} out of range for {len(tree.leaves)} leaves")
    siblings = []
    pos = index
    for level in tree.levels[:-1]:
        if pos & 1:
            siblings.append((level[pos - 1], True))
        else:
            siblings.append((level[pos + 1], False))
        pos >>= 1
    return MerkleProof(index, tuple(siblings))


def merkle_verify(proof: MerkleProof, leaf: bytes, root: bytes) -> bool:
    if not (_is_digest(leaf) and _is_digest(root)):
        return False
    depth = len(proof.siblings)
    if not 0 <= proof.leaf_index < (1 << depth):
        return False
    node = leaf_hash(leaf)
    pos = proof.leaf_index
    for sibling, is_left in proof.siblings:
        if not _is_digest(sibling) or is_left != bool(pos & 1):
            return False
        node = node_hash(sibling, node) if is_left else node_hash(node, sibling)
        pos >>= 1
    return node == root


# --------------------------------------------------------------------------
# Merkle mountain range


def peak_heights(leaf_count: int) -> list[int]:
    """Mountain heights left to right: the set bits of ``leaf_count``, high first."""
    return [h for h in range(leaf_count.bit_length() - 1, -1, -1) if leaf_count >> h & 1]


def mmr_size(leaf_count: int) -> int:
    """Total nodes stored for ``leaf_count`` leaves."""
    return 2 * leaf_count - bin(leaf_count).count("1")


def bag_peaks(peaks: Sequence[bytes], leaf_count: int) -> bytes:
    if not peaks:
        return empty_mmr_root()
    acc = peaks[-1]
    for peak in reversed(peaks[:-1]):
        acc = hash_bytes(BAG_PREFIX + peak + acc)
    return hash_bytes(BAG_PREFIX + leaf_count.to_bytes(8, "big") + acc)


def empty_mmr_root() -> bytes:
    """Commitment to an empty window (only reachable with a checkpoint interval of 1)."""
    return hash_bytes(BAG_PREFIX + (0).to_bytes(8, "big"))


@dataclass(frozen=True)
class MmrProof:
    leaf_index: int
    mountain_path: tuple[bytes, ...] = ()
    peak_bag: tuple[bytes, ...] = ()

    @property
    def digest_count(self) -> int:
        return len(self.mountain_path) + len(self.peak_bag)

    def write(self, w: Writer) -> None:
        w.u64(self.leaf_index)
        w.u32(len(self.mountain_path))
        for d in self.mountain_path:
            w.digest(d)
        w.u32(len(self.peak_bag))
        for d in self.peak_bag:
            w.digest(d)

    @classmethod
    def read(cls, r: Reader) -> "MmrProof":
        index = r.u64()
        path = tuple(r.digest() for _ in range(r.count(DIGEST_SIZE)))
        bag = tuple(r.digest() for _ in range(r.count(DIGEST_SIZE)))
        return cls(index, path, bag)

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "MmrProof":
        r = Reader(data)
        proof = cls.read(r)
        r.done()
        return proof


@dataclass(frozen=True)
class Mmr:
    """Immutable accumulator snapshot.

    Nodes live in a post-order list shared by every snapshot derived from the
    same history.  A snapshot only reads the first ``mmr_size(leaf_count)``
    entries, so appending to a later snapshot never disturbs an earlier one;
    appending to an older snapshot copies the prefix first.
    """

    leaf_count: int = 0
    peaks: tuple[tuple[int, bytes], ...] = ()
    peak_positions: tuple[int, ...] = field(default=(), repr=False, compare=False)
    _nodes: list = field(default_factory=list, repr=False, compare=False)

    @classmethod
    def from_leaves(cls, leaves: Sequence[bytes]) -> "Mmr":
        mmr = cls()
        for leaf in leaves:
            mmr = mmr.append(leaf)
        return mmr

    @property
    def size(self) -> int:
        return mmr_size(self.leaf_count)

    def node(self, pos: int) -> bytes:
        if not 0 <= pos < self.size:
            raise IndexError(pos)
        return self._nodes[pos]

    def append(self, leaf: bytes) -> "Mmr":
        if not _is_digest(leaf):
            raise ValueError("MMR leaves are 32-byte digests")
        nodes = self._nodes if len(self._nodes) == self.size else self._nodes[: self.size]
        peaks = list(zip(self.peaks, self.peak_positions))
        nodes.append(leaf_hash(leaf))
        cur = ((0, nodes[-1]), len(nodes) - 1)
        while peaks and peaks[-1][0][0] == cur[0][0]:
            (height, left), _ = peaks.pop()
            nodes.append(node_hash(left, cur[0][1]))
            cur = ((height + 1, nodes[-1]), len(nodes) - 1)
        peaks.append(cur)
        return Mmr(
            leaf_count=self.leaf_count + 1,
            peaks=tuple(p for p, _ in peaks),
            peak_positions=tuple(pos for _, pos in peaks),
            _nodes=nodes,
        )

    def root(self) -> bytes:
        if self.leaf_count == 0:
            raise ValueError("empty MMR has no root")
        return bag_peaks([d for _, d in self.peaks], self.leaf_count)

    def root_or_empty(self) -> bytes:
        return self.root() if self.leaf_count else empty_mmr_root()

    def prove(self, index: int) -> MmrProof:
        if not 0 <= index < self.leaf_count:
            raise IndexError(f"leaf index {index} out of range for {self.leaf_count} leaves")
        start = 0
        for j, (height, _) in enumerate(self.peaks):
            if index < start + (1 << height):
                break
            start += 1 << height
        offset = index - start
        pos = self.peak_positions[j]
        path = []
        for level in range(height, 0, -1):
            left, right = pos - (1 << level), pos - 1
            if offset >> (level - 1) & 1:
                path.append(self._nodes[left])
                pos = right
            else:
                path.append(self._nodes[right])
                pos = left
        path.reverse()
        bag = tuple(d for k, (_, d) in enumerate(self.peaks) if k != j)
        return MmrProof(index, tuple(path), bag)


def mmr_verify(proof: MmrProof, leaf: bytes, root: bytes, leaf_count: int) -> bool:
    if not (_is_digest(leaf) and _is_digest(root)):
        return False
    if leaf_count < 1 or not 0 <= proof.leaf_index < leaf_count:
        return False
    heights = peak_heights(leaf_count)
    start = 0
    for j, height in enumerate(heights):
        if proof.leaf_index < start + (1 << height):
            break
        start += 1 << height
    offset = proof.leaf_index - start
    if len(proof.mountain_path) != height or len(proof.peak_bag) != len(heights) - 1:
        return False
    if not all(_is_digest(d) for d in proof.mountain_path + proof.peak_bag):
        return False
    node = leaf_hash(leaf)
    for level, sibling in enumerate(proof.mountain_path):
        if offset >> level & 1:
            node = node_hash(sibling, node)
        else:
            node = node_hash(node, sibling)
    peaks = list(proof.peak_bag[:j]) + [node] + list(proof.peak_bag[j:])
    return bag_peaks(peaks, leaf_count) == root
