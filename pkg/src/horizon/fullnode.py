"""Untrusted full node answering proof-of-burn queries over chain A."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .chain import BlockHeader, ChainA
from .commitments import MerkleProof, MmrProof, merkle_prove
from .encoding import Reader, Writer


class NotFound(LookupError):
    pass


class NotYetCheckpointed(LookupError):
    """The burn's block is not yet covered by a checkpoint; retry later."""


class FullNodeMode(str, Enum):
    HONEST = "honest"
    SILENT = "silent"
    WRONG_PROOF = "wrong-proof"
    STALE_CHECKPOINT = "stale-checkpoint"


@dataclass(frozen=True)
class PoB:
    pi_b: MmrProof
    pi_t: MerkleProof
    checkpoint_height: int
    header: BlockHeader

    def write(self, w: Writer) -> None:
        self.pi_b.write(w)
        self.pi_t.write(w)
        w.u64(self.checkpoint_height)
        self.header.write(w)

    @classmethod
    def read(cls, r: Reader) -> "PoB":
        return cls(MmrProof.read(r), MerkleProof.read(r), r.u64(), BlockHeader.read(r))

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "PoB":
        r = Reader(data)
        value = cls.read(r)
        r.done()
        return value


@dataclass(frozen=True)
class StatelessProof:
    """Everything a relay-free contract needs to accept one burn.

    ``header_tip`` is a newer checkpoint whose ``cp_mmr_root`` commits to
    ``header_bcp`` (via ``pi_cp``); it is ``None`` when ``header_bcp`` is itself
    the latest checkpoint.  ``epoch_handoff`` lists the epoch blocks of epochs
    ``0 .. anchor.epoch - 1``.
    """

    header_btx: BlockHeader
    header_bcp: BlockHeader
    header_tip: Optional[BlockHeader]
    pi_t: MerkleProof
    pi_b: MmrProof
    pi_cp: Optional[MmrProof]
    epoch_handoff: tuple[BlockHeader, ...]

    def write(self, w: Writer) -> None:
        self.header_btx.write(w)
        self.header_bcp.write(w)
        w.flag(self.header_tip is not None)
        if self.header_tip is not None:
            self.header_tip.write(w)
        self.pi_t.write(w)
        self.pi_b.write(w)
        w.flag(self.pi_cp is not None)
        if self.pi_cp is not None:
            self.pi_cp.write(w)
        w.u32(len(self.epoch_handoff))
        for h in self.epoch_handoff:
            h.write(w)

    @classmethod
    def read(cls, r: Reader) -> "StatelessProof":
        btx, bcp = BlockHeader.read(r), BlockHeader.read(r)
        tip = BlockHeader.read(r) if r.flag() else None
        pi_t, pi_b = MerkleProof.read(r), MmrProof.read(r)
        pi_cp = MmrProof.read(r) if r.flag() else None
        handoff = tuple(BlockHeader.read(r) for _ in range(r.count(1)))
        return cls(btx, bcp, tip, pi_t, pi_b, pi_cp, handoff)

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "StatelessProof":
        r = Reader(data)
        value = cls.read(r)
        r.done()
        return value


def _locate(chain: ChainA, tx_id: bytes) -> tuple[int, int, int]:
    found = chain.find_tx(tx_id)
    if found is None:
        raise NotFound(tx_id.hex())
    k, idx = found
    i = chain.params.checkpoint_for(k)
    if i > chain.latest_checkpoint:
        raise NotYetCheckpointed(f"block {k} awaits checkpoint {i}")
    return k, idx, i


def _window_proof(chain: ChainA, k: int, i: int) -> MmrProof:
    if k == i:
        # the checkpoint block itself: proven by header identity, not by the window
        return MmrProof(0)
    return chain.windows[i].prove(k - (i - chain.params.delta + 1))


def build_pob(chain: ChainA, tx_id: bytes) -> PoB:
    k, idx, i = _locate(chain, tx_id)
    pi_t = merkle_prove(chain.tx_tree(k), idx)
    return PoB(_window_proof(chain, k, i), pi_t, i, chain.headers[k])


def build_stateless_proof(chain: ChainA, tx_id: bytes) -> StatelessProof:
    k, idx, i = _locate(chain, tx_id)
    delta = chain.params.delta
    tip_height = chain.latest_checkpoint
    bcp = chain.headers[i]
    if tip_height == i:
        tip, pi_cp = None, None
    else:
        tip = chain.headers[tip_height]
        pi_cp = chain.cp_snapshots[tip_height].prove(i // delta - 1)
    anchor = tip or bcp
    return StatelessProof(
        header_btx=chain.headers[k],
        header_bcp=bcp,
        header_tip=tip,
        pi_t=merkle_prove(chain.tx_tree(k), idx),
        pi_b=_window_proof(chain, k, i),
        pi_cp=pi_cp,
        epoch_handoff=tuple(chain.epoch_blocks(anchor.epoch)),
    )


def _flip(d: bytes) -> bytes:
    return bytes([d[0] ^ 0x01]) + d[1:]


def _corrupt_pob(pob: PoB) -> PoB:
    """Damage exactly one digest, preferring the header proof."""
    if pob.pi_b.mountain_path:
        path = (_flip(pob.pi_b.mountain_path[0]),) + pob.pi_b.mountain_path[1:]
        return replace(pob, pi_b=replace(pob.pi_b, mountain_path=path))
    if pob.pi_b.peak_bag:
        bag = (_flip(pob.pi_b.peak_bag[0]),) + pob.pi_b.peak_bag[1:]
        return replace(pob, pi_b=replace(pob.pi_b, peak_bag=bag))
    if pob.pi_t.siblings:
        (d, side), *rest = pob.pi_t.siblings
        return replace(pob, pi_t=replace(pob.pi_t, siblings=((_flip(d), side), *rest)))
    return replace(pob, header=replace(pob.header, tx_root=_flip(pob.header.tx_root)))


class FullNode:
    def __init__(self, chain: ChainA, mode: FullNodeMode | str = FullNodeMode.HONEST, name: str = "F") -> None:
        self.chain = chain
        self.mode = FullNodeMode(mode)
        self.name = name

    @property
    def honest(self) -> bool:
        return self.mode is FullNodeMode.HONEST

    def handle_pob_request(self, tx_id: bytes) -> Optional[PoB]:
        """Answer ``[pob-req, h]``; ``None`` models a silent node."""
        if self.mode is FullNodeMode.SILENT:
            return None
        pob = build_pob(self.chain, tx_id)
        if self.mode is FullNodeMode.WRONG_PROOF:
            return _corrupt_pob(pob)
        if self.mode is FullNodeMode.STALE_CHECKPOINT:
            return replace(pob, checkpoint_height=pob.checkpoint_height - self.chain.params.delta)
        return pob

    def handle_stateless_request(self, tx_id: bytes) -> Optional[StatelessProof]:
        if self.mode is FullNodeMode.SILENT:
            return None
        proof = build_stateless_proof(self.chain, tx_id)
        if self.mode is FullNodeMode.WRONG_PROOF:
            pob = _corrupt_pob(PoB(proof.pi_b, proof.pi_t, proof.header_bcp.height, proof.header_btx))
            return replace(proof, pi_b=pob.pi_b, pi_t=pob.pi_t, header_btx=pob.header)
        if self.mode is FullNodeMode.STALE_CHECKPOINT:
            older = proof.header_bcp.height - self.chain.params.delta
            return replace(proof, header_bcp=self.chain.headers[max(older, 0)])
        return proof
