"""Golden conformance vectors for the commitment and signature layers.

One JSON file per seed.  All byte strings are lowercase hex; proofs are in
their canonical encoding so another implementation can decode and check them.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Union

from .chain import validator_seeds
from .commitments import MerkleProof, Mmr, MmrProof, merkle_build, merkle_prove, merkle_verify, mmr_verify
from .crypto import QuorumSignature, aggregate, committee_commitment, hash_bytes, keygen, quorum_verify, sign

VECTOR_SEEDS = (0, 1, 2, 3)
FORMAT = "horizon-vectors/1"


def _leaves(seed: int, label: bytes, n: int) -> list[bytes]:
    return [hash_bytes(label + seed.to_bytes(8, "big") + i.to_bytes(4, "big")) for i in range(n)]


def make_vectors(seed: int) -> dict:
    merkle_leaves = _leaves(seed, b"merkle", 5 + 3 * seed)
    tree = merkle_build(merkle_leaves)
    mmr_leaves = _leaves(seed, b"mmr", 7 + 5 * seed)
    mmr = Mmr()
    roots = []
    for leaf in mmr_leaves:
        mmr = mmr.append(leaf)
        roots.append(mmr.root().hex())

    keys = [keygen(s) for s in validator_seeds(seed, 4)]
    message = b"quorum vector " + seed.to_bytes(8, "big")
    signers = [i for i in range(4) if i != seed % 4]
    qsig = aggregate([(i, sign(keys[i].secret, message)) for i in signers], 4)

    return {
        "format": FORMAT,
        "seed": seed,
        "merkle": {
            "leaves": [x.hex() for x in merkle_leaves],
            "root": tree.root.hex(),
            "proofs": [merkle_prove(tree, i).encode().hex() for i in range(len(merkle_leaves))],
        },
        "mmr": {
            "leaves": [x.hex() for x in mmr_leaves],
            "roots_after_append": roots,
            "proofs": [mmr.prove(i).encode().hex() for i in range(len(mmr_leaves))],
        },
        "quorum": {
            "public_keys": [k.public.hex() for k in keys],
            "commitment": committee_commitment([k.public for k in keys]).hex(),
            "message": message.hex(),
            "signature": qsig.encode().hex(),
            "threshold": "2/3",
            "valid": True,
        },
    }


def write_vectors(out_dir: Union[str, Path], seeds=VECTOR_SEEDS) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for seed in seeds:
        path = out / f"vectors-seed{seed}.json"
        path.write_text(json.dumps(make_vectors(seed), indent=1, sort_keys=True) + "\n", encoding="utf-8")
        paths.append(path)
    return paths


def check_vectors(doc: dict) -> list[str]:
    """Verify one vector document independently of how it was produced."""
    errors = []
    if doc.get("format") != FORMAT:
        return [f"unknown format {doc.get('format')!r}"]
    m = doc["merkle"]
    leaves = [bytes.fromhex(x) for x in m["leaves"]]
    root = bytes.fromhex(m["root"])
    if merkle_build(leaves).root != root:
        errors.append("merkle root mismatch")
    for i, hexproof in enumerate(m["proofs"]):
        proof = MerkleProof.decode(bytes.fromhex(hexproof))
        if proof.leaf_index != i or not merkle_verify(proof, leaves[i], root):
            errors.append(f"merkle proof {i} rejected")

    m = doc["mmr"]
    leaves = [bytes.fromhex(x) for x in m["leaves"]]
    roots = [bytes.fromhex(x) for x in m["roots_after_append"]]
    for n in range(1, len(leaves) + 1):
        if Mmr.from_leaves(leaves[:n]).root() != roots[n - 1]:
            errors.append(f"mmr root after {n} leaves mismatch")
    for i, hexproof in enumerate(m["proofs"]):
        proof = MmrProof.decode(bytes.fromhex(hexproof))
        if proof.leaf_index != i or not mmr_verify(proof, leaves[i], roots[-1], len(leaves)):
            errors.append(f"mmr proof {i} rejected")

    q = doc["quorum"]
    pks = [bytes.fromhex(x) for x in q["public_keys"]]
    if committee_commitment(pks).hex() != q["commitment"]:
        errors.append("committee commitment mismatch")
    try:
        qsig = QuorumSignature.decode(bytes.fromhex(q["signature"]))
        ok = quorum_verify(qsig, pks, bytes.fromhex(q["message"]), Fraction(q["threshold"]))
    except ValueError:
        ok = False
    if ok != q["valid"]:
        errors.append("quorum signature verdict mismatch")
    return errors


def verify_vectors(path: Union[str, Path]) -> dict[str, list[str]]:
    """Check a vector file or every ``*.json`` file in a directory."""
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    return {f.name: check_vectors(json.loads(f.read_text(encoding="utf-8"))) for f in files}
