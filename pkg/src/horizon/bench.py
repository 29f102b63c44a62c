"""Cost and proof-size measurements on synthetic chains.

Every chain here is built directly (no simulator): blocks carry a fixed number
of filler transfers, one burn is placed at a fixed offset before the last
checkpoint, the contract is synced with every checkpoint, and the mint's gas
row is read back.  Measurements are pure functions of their arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .chain import BurnTx, ChainA, ChainParams, TransferTx, validator_seeds
from .contract import BridgeContract, GasRow, MintTx, StatelessMintTx
from .fullnode import build_pob, build_stateless_proof
from .relay import SyncTx

BENCH_HEADER = ("variant", "delta", "epochs", "block_size", "hashes", "sigverifies", "writes", "calldata", "weighted",
                "pi_b_digests", "pi_t_digests", "handoff")


@dataclass(frozen=True)
class MintMeasurement:
    variant: str
    delta: int
    epochs: int
    block_size: int
    gas: GasRow
    pi_b_digests: int
    pi_t_digests: int
    handoff: int

    def row(self) -> tuple[str, ...]:
        return (
            self.variant,
            str(self.delta),
            str(self.epochs),
            str(self.block_size),
            *(str(c) for c in self.gas.counts()),
            f"{float(self.gas.weighted()):.1f}",
            str(self.pi_b_digests),
            str(self.pi_t_digests),
            str(self.handoff),
        )


def build_chain(
    delta: int,
    epochs: int,
    block_size: int = 4,
    *,
    epoch_length: int | None = None,
    burn_offset: int = 1,
    seed: int = 0,
) -> tuple[ChainA, BurnTx]:
    """A chain of ``epochs`` full epochs whose blocks each hold ``block_size`` txs.

    The burn sits at tx position 0 of the block ``burn_offset`` after the
    second-to-last checkpoint, so its proof shape does not depend on ``epochs``.
    """
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    length = epoch_length if epoch_length is not None else delta
    params = ChainParams(delta=delta, epoch_length=length, committee_size=4)
    height = epochs * length
    burn_height = height - delta + burn_offset
    if not 0 < burn_height <= height:
        raise ValueError("burn offset outside the chain")
    chain = ChainA(params, validator_seeds(seed, 8), {"alice": 10**6, "filler": 10**9})
    burn = BurnTx(sender="alice", amount=5, nonce=0)
    nonce = 0
    for h in range(1, height + 1):
        txs = []
        if h == burn_height:
            txs.append(burn)
        while len(txs) < block_size:
            txs.append(TransferTx("filler", "sink", 1, nonce))
            nonce += 1
        chain.produce_block(txs)
    return chain, burn


def synced_contract(chain: ChainA) -> BridgeContract:
    contract = BridgeContract(
        delta=chain.params.delta,
        epoch_length=chain.params.epoch_length,
        genesis_committee=chain.headers[0].pks,
        relay_pool=("relay0",),
    )
    for h in chain.checkpoint_heights:
        receipt = contract.apply(SyncTx("relay0", chain.headers[h]))
        if not receipt.accepted:
            raise RuntimeError(f"sync of checkpoint {h} rejected: {receipt.reason}")
    return contract


def measure_mint(variant: str, delta: int, epochs: int, block_size: int = 4, *, burn_offset: int = 1) -> MintMeasurement:
    chain, burn = build_chain(delta, epochs, block_size, burn_offset=burn_offset)
    if variant == "stateful":
        contract = synced_contract(chain)
        pob = build_pob(chain, burn.id)
        receipt = contract.apply(MintTx("alice", burn.amount, burn, pob), "alice")
        pi_b, pi_t, handoff = pob.pi_b, pob.pi_t, 0
    elif variant == "stateless":
        contract = BridgeContract(
            delta=delta, epoch_length=chain.params.epoch_length, genesis_committee=chain.headers[0].pks
        )
        proof = build_stateless_proof(chain, burn.id)
        receipt = contract.apply(StatelessMintTx("alice", burn.amount, burn, proof), "alice")
        pi_b, pi_t, handoff = proof.pi_b, proof.pi_t, len(proof.epoch_handoff)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if not receipt.accepted:
        raise RuntimeError(f"bench mint rejected: {receipt.reason}")
    return MintMeasurement(variant, delta, epochs, block_size, receipt.gas, pi_b.digest_count, len(pi_t.siblings), handoff)


def mint_cost_table(
    deltas: Sequence[int] = (16,),
    epochs: Sequence[int] = (1, 4, 16),
    variant: str = "stateful",
    block_size: int = 4,
) -> list[tuple[str, ...]]:
    rows = [BENCH_HEADER]
    for d in deltas:
        for e in epochs:
            rows.append(measure_mint(variant, d, e, block_size).row())
    return rows


def pi_b_bound(delta: int) -> int:
    return 2 * math.ceil(math.log2(delta)) + 1 if delta > 1 else 1


def pi_t_bound(block_size: int) -> int:
    return math.ceil(math.log2(block_size)) if block_size > 1 else 0


def _burn_chain(delta: int, height: int, per_block: int) -> ChainA:
    """Chain whose every transaction is a burn, so each position can be proven."""
    params = ChainParams(delta=delta, epoch_length=delta, committee_size=4)
    chain = ChainA(params, validator_seeds(0, 8), {"alice": 10**9})
    nonce = 0
    for _ in range(height):
        chain.produce_block([BurnTx("alice", 1, nonce + j) for j in range(per_block)])
        nonce += per_block
    return chain


def pi_b_sizes(delta: int) -> list[tuple[int, int]]:
    """(height, pi_b digest count) for every block of the first checkpoint window."""
    chain = _burn_chain(delta, delta, 1)
    return [(k, build_pob(chain, chain.blocks[k][0].id).pi_b.digest_count) for k in range(1, delta + 1)]


def pi_t_sizes(block_size: int) -> list[tuple[int, int]]:
    """(position, pi_t digest count) for every transaction of one block."""
    chain = _burn_chain(1, 1, block_size)
    return [(pos, len(build_pob(chain, tx.id).pi_t.siblings)) for pos, tx in enumerate(chain.blocks[1])]


def proof_size_table(deltas: Iterable[int] = (4, 16, 64, 256), block_sizes: Iterable[int] = (1, 2, 8, 32)):
    rows = [("proof", "parameter", "max_digests", "bound")]
    for d in deltas:
        rows.append(("pi_b", f"delta={d}", str(max(c for _, c in pi_b_sizes(d))), str(pi_b_bound(d))))
    for b in block_sizes:
        rows.append(("pi_t", f"block_size={b}", str(max(c for _, c in pi_t_sizes(b))), str(pi_t_bound(b))))
    return rows


def format_table(rows: Sequence[Sequence[str]]) -> str:
    return "".join("\t".join(r) + "\n" for r in rows)
