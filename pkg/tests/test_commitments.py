import hashlib
import math

import pytest
from hypothesis import given, settings, strategies as st

from horizon.commitments import (
    MerkleProof,
    Mmr,
    MmrProof,
    empty_mmr_root,
    merkle_build,
    merkle_prove,
    merkle_verify,
    mmr_size,
    mmr_verify,
    peak_heights,
)
from horizon.encoding import DecodeError


def H(b):
    return hashlib.sha256(b).digest()


def leaves(n, tag=b"L"):
    return [H(tag + i.to_bytes(4, "big")) for i in range(n)]


# independent oracles: plain recursion over hashlib, nothing shared with the library


def oracle_merkle_root(xs):
    width = 1 << math.ceil(math.log2(len(xs))) if len(xs) > 1 else 1
    nodes = [H(b"\x00" + x) for x in xs + [xs[-1]] * (width - len(xs))]
    while len(nodes) > 1:
        nodes = [H(b"\x01" + nodes[i] + nodes[i + 1]) for i in range(0, len(nodes), 2)]
    return nodes[0]


def oracle_perfect_root(xs):
    if len(xs) == 1:
        return H(b"\x00" + xs[0])
    half = len(xs) // 2
    return H(b"\x01" + oracle_perfect_root(xs[:half]) + oracle_perfect_root(xs[half:]))


def oracle_mmr_root(xs):
    n, peaks, start = len(xs), [], 0
    for h in reversed(range(n.bit_length())):
        if n >> h & 1:
            peaks.append(oracle_perfect_root(xs[start : start + (1 << h)]))
            start += 1 << h
    acc = peaks[-1]
    for p in reversed(peaks[:-1]):
        acc = H(b"\x02" + p + acc)
    return H(b"\x02" + n.to_bytes(8, "big") + acc)


def test_merkle_single_leaf():
    x = leaves(1)
    tree = merkle_build(x)
    assert tree.root == H(b"\x00" + x[0]) and tree.depth == 0
    assert merkle_prove(tree, 0).siblings == ()
    assert merkle_verify(merkle_prove(tree, 0), x[0], tree.root)


def test_merkle_empty_rejected():
    with pytest.raises(ValueError):
        merkle_build([])


def test_merkle_matches_oracle_and_round_trips():
    for n in range(1, 65):
        xs = leaves(n)
        tree = merkle_build(xs)
        assert tree.root == oracle_merkle_root(xs)
        for i in range(n):
            proof = merkle_prove(tree, i)
            assert len(proof.siblings) == math.ceil(math.log2(n))
            assert merkle_verify(proof, xs[i], tree.root)
            assert MerkleProof.decode(proof.encode()) == proof
            # the proof binds the position as well as the leaf
            other = xs[(i + 1) % n]
            if other != xs[i]:
                assert not merkle_verify(proof, other, tree.root)


def test_merkle_prove_out_of_range():
    tree = merkle_build(leaves(3))
    with pytest.raises(IndexError):
        merkle_prove(tree, 3)


def test_merkle_proof_side_must_match_index():
    xs = leaves(4)
    tree = merkle_build(xs)
    p = merkle_prove(tree, 2)
    assert not merkle_verify(MerkleProof(3, p.siblings), xs[2], tree.root)
    flipped = ((p.siblings[0][0], not p.siblings[0][1]),) + p.siblings[1:]
    assert not merkle_verify(MerkleProof(2, flipped), xs[2], tree.root)


def test_merkle_padding_position_carries_last_leaf():
    # padding duplicates the last leaf; the contract's replay guard is keyed on
    # the burn hash, so a second position for the same leaf mints nothing new
    xs = leaves(3)
    tree = merkle_build(xs)
    sibling = tree.levels[0][2]
    p = MerkleProof(3, ((sibling, True), (tree.levels[1][0], True)))
    assert merkle_verify(p, xs[2], tree.root)


def test_peak_heights_and_size():
    assert peak_heights(11) == [3, 1, 0]
    assert peak_heights(0) == []
    for n in range(0, 70):
        assert mmr_size(n) == 2 * n - bin(n).count("1")


def test_empty_mmr():
    m = Mmr()
    assert m.root_or_empty() == empty_mmr_root() == H(b"\x02" + bytes(8))
    with pytest.raises(ValueError):
        m.root()


def test_mmr_root_matches_rebuild_after_every_append():
    xs = leaves(64)
    m = Mmr()
    for n in range(1, 65):
        m = m.append(xs[n - 1])
        assert m.root() == oracle_mmr_root(xs[:n])
        assert m.root() == Mmr.from_leaves(xs[:n]).root()


def test_mmr_prove_verify_all_positions():
    xs = leaves(64)
    m = Mmr()
    for n in range(1, 65):
        m = m.append(xs[n - 1])
        root = m.root()
        bound = 2 * math.ceil(math.log2(n)) + 1 if n > 1 else 0
        for i in range(n):
            proof = m.prove(i)
            assert mmr_verify(proof, xs[i], root, n)
            assert proof.digest_count <= bound
            assert MmrProof.decode(proof.encode()) == proof
            assert not mmr_verify(proof, xs[i], root, n + 1)
            if n > 1:
                assert not mmr_verify(proof, xs[(i + 1) % n], root, n)


def test_mmr_snapshots_are_append_only():
    xs = leaves(20)
    snaps = [Mmr()]
    for x in xs:
        snaps.append(snaps[-1].append(x))
    roots = [s.root_or_empty() for s in snaps]
    # forking an old snapshot must not disturb later ones
    fork = snaps[5].append(H(b"fork"))
    assert [s.root_or_empty() for s in snaps] == roots
    assert fork.root() != roots[6]
    assert snaps[12].prove(3) == Mmr.from_leaves(xs[:12]).prove(3)


def test_mmr_rejects_non_digest_leaves():
    with pytest.raises(ValueError):
        Mmr().append(b"short")


def test_mmr_proof_decode_strict():
    data = Mmr.from_leaves(leaves(5)).prove(1).encode()
    with pytest.raises(DecodeError):
        MmrProof.decode(data + b"\x00")
    with pytest.raises(DecodeError):
        MmrProof.decode(data[:-1])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 200), st.data())
def test_mmr_property(n, data):
    xs = leaves(n, b"P")
    m = Mmr.from_leaves(xs)
    i = data.draw(st.integers(0, n - 1))
    proof = m.prove(i)
    assert mmr_verify(proof, xs[i], m.root(), n)
    assert m.root() == oracle_mmr_root(xs)
    # any single flipped digest in the proof breaks it
    digests = list(proof.mountain_path + proof.peak_bag)
    if digests:
        j = data.draw(st.integers(0, len(digests) - 1))
        digests[j] = bytes([digests[j][0] ^ 1]) + digests[j][1:]
        k = len(proof.mountain_path)
        bad = MmrProof(i, tuple(digests[:k]), tuple(digests[k:]))
        assert not mmr_verify(bad, xs[i], m.root(), n)
