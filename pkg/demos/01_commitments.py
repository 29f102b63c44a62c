"""
Commitments: Merkle trees and mountain ranges
=============================================

Chain A commits to the transactions of a block with a Merkle tree and to its
block history with a Merkle mountain range (MMR).  Both give short membership
proofs; the MMR also grows by appending without rewriting old nodes.
"""

# %%
from horizon.commitments import Mmr, merkle_build, merkle_prove, merkle_verify, mmr_verify
from horizon.crypto import count_hashes, hash_bytes

leaves = [hash_bytes(f"tx {i}".encode()) for i in range(6)]
tree = merkle_build(leaves)
proof = merkle_prove(tree, 4)
print("merkle root   ", tree.root.hex()[:16])
print("proof digests ", len(proof.siblings), "for", len(leaves), "leaves")
print("verifies      ", merkle_verify(proof, leaves[4], tree.root))
print("wrong leaf    ", merkle_verify(proof, leaves[3], tree.root))

# %%
# Appending returns a new snapshot, so an old root stays checkable.
mmr = Mmr()
history = []
for leaf in leaves:
    mmr = mmr.append(leaf)
    history.append(mmr)

old = history[2]
p = old.prove(1)
print("old snapshot  ", mmr_verify(p, leaves[1], old.root(), 3))
print("current root  ", mmr_verify(mmr.prove(1), leaves[1], mmr.root(), len(leaves)))

# %%
# Proof size grows with the log of the range, and so does verification work.
for n in (8, 64, 512):
    big = Mmr.from_leaves([hash_bytes(i.to_bytes(4, "big")) for i in range(n)])
    p = big.prove(n // 3)
    with count_hashes() as c:
        mmr_verify(p, hash_bytes((n // 3).to_bytes(4, "big")), big.root(), n)
    print(f"n={n:4d} digests={p.digest_count:2d} hashes={c.n}")
