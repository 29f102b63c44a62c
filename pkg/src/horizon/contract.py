"""Bridge contract on chain B, modeled as a sequential state machine.

Every handler returns a :class:`Receipt`.  Rejected transactions never touch
protocol state, with one deliberate exception: a sync rejected for a
Byzantine cause (bad committee, bad quorum signature, malformed checkpoint)
marks the submitting relay faulty and hands the active role to the next
relay in the pool.

Gas is an abstract tally per transaction: hash evaluations (counted as they
happen), individual signature verifications (one per set bitmap bit handed
to the verifier), storage writes and calldata bytes, combined with
configurable weights.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union

from .chain import NULL_ADDRESS, BlockHeader, BurnTx
from .commitments import MerkleProof, MmrProof, merkle_verify, mmr_verify
from .crypto import (
    DEFAULT_THRESHOLD,
    check_threshold,
    committee_commitment,
    count_hashes,
    hash_bytes,
    quorum_verify,
)
from .encoding import DecodeError, Reader, Writer
from .fullnode import PoB, StatelessProof
from .relay import SyncTx

_SYNC_TAG = 0x10
_MINT_TAG = 0x11
_STATELESS_TAG = 0x12


class Reject(str, Enum):
    MALFORMED = "malformed"
    UNKNOWN_RELAY = "unknown-relay"
    FAULTY_RELAY = "faulty-relay"
    OUT_OF_SEQUENCE = "out-of-sequence"
    COMMITTEE_MISMATCH = "committee-mismatch"
    BAD_QUORUM_SIGNATURE = "bad-quorum-signature"
    NOT_A_BURN = "not-a-burn"
    SENDER_RECEIVER_MISMATCH = "sender-receiver-mismatch"
    AMOUNT_MISMATCH = "amount-mismatch"
    UNKNOWN_CHECKPOINT = "unknown-checkpoint"
    BAD_HEADER_PROOF = "bad-header-proof"
    BAD_TX_PROOF = "bad-tx-proof"
    REPLAY = "replay"
    BROKEN_HANDOFF = "broken-handoff"
    BAD_CHECKPOINT_PROOF = "bad-checkpoint-proof"


# a relay submitting one of these is replaced
BYZANTINE_SYNC = frozenset({Reject.MALFORMED, Reject.COMMITTEE_MISMATCH, Reject.BAD_QUORUM_SIGNATURE})


@dataclass(frozen=True)
class MintTx:
    receiver: str
    amount: int
    burn_tx: BurnTx
    pob: PoB

    def write(self, w: Writer) -> None:
        w.text(self.receiver).u64(self.amount)
        self.burn_tx.write(w)
        self.pob.write(w)

    @classmethod
    def read(cls, r: Reader) -> "MintTx":
        return cls(r.text(), r.u64(), BurnTx.read(r), PoB.read(r))

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()


@dataclass(frozen=True)
class StatelessMintTx:
    receiver: str
    amount: int
    burn_tx: BurnTx
    proof: StatelessProof

    # flattened accessors matching the transaction's logical fields
    header_btx = property(lambda self: self.proof.header_btx)
    header_bcp = property(lambda self: self.proof.header_bcp)
    header_tip = property(lambda self: self.proof.header_tip)
    epoch_handoff = property(lambda self: self.proof.epoch_handoff)
    pi_t = property(lambda self: self.proof.pi_t)
    pi_b = property(lambda self: self.proof.pi_b)
    pi_cp = property(lambda self: self.proof.pi_cp)

    def write(self, w: Writer) -> None:
        w.text(self.receiver).u64(self.amount)
        self.burn_tx.write(w)
        self.proof.write(w)

    @classmethod
    def read(cls, r: Reader) -> "StatelessMintTx":
        return cls(r.text(), r.u64(), BurnTx.read(r), StatelessProof.read(r))

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()


BridgeTx = Union[SyncTx, MintTx, StatelessMintTx]
_TAGS = {SyncTx: _SYNC_TAG, MintTx: _MINT_TAG, StatelessMintTx: _STATELESS_TAG}
_BY_TAG = {v: k for k, v in _TAGS.items()}


def encode_calldata(tx: BridgeTx) -> bytes:
    w = Writer().u8(_TAGS[type(tx)])
    tx.write(w)
    return w.getvalue()


def decode_calldata(data: bytes) -> BridgeTx:
    r = Reader(data)
    tag = r.u8()
    if tag not in _BY_TAG:
        raise DecodeError(f"unknown transaction tag {tag:#04x}")
    tx = _BY_TAG[tag].read(r)
    r.done()
    return tx


# --------------------------------------------------------------------------
# gas


@dataclass(frozen=True)
class GasWeights:
    hash: Fraction = Fraction(1)
    sigverify: Fraction = Fraction(50)
    write: Fraction = Fraction(100)
    calldata_byte: Fraction = Fraction(1, 10)


@dataclass
class GasRow:
    tx_id: int
    kind: str
    sender: str
    accepted: bool = False
    reason: str = ""
    hashes: int = 0
    sigverifies: int = 0
    writes: int = 0
    calldata: int = 0

    def weighted(self, weights: GasWeights = GasWeights()) -> Fraction:
        return (
            self.hashes * weights.hash
            + self.sigverifies * weights.sigverify
            + self.writes * weights.write
            + self.calldata * weights.calldata_byte
        )

    def counts(self) -> tuple[int, int, int, int]:
        return (self.hashes, self.sigverifies, self.writes, self.calldata)


GAS_HEADER = ("tx_id", "kind", "sender", "result", "hashes", "sigverifies", "writes", "calldata", "weighted")


@dataclass(frozen=True)
class Receipt:
    accepted: bool
    reason: Optional[Reject]
    gas: GasRow


class _Abort(Exception):
    def __init__(self, reason: Reject) -> None:
        self.reason = reason


# --------------------------------------------------------------------------
# state


@dataclass
class ContractState:
    delta: int
    epoch_length: int
    checkpoints: dict[int, BlockHeader] = field(default_factory=dict)
    checkpoint_hashes: dict[int, bytes] = field(default_factory=dict)
    last_seq: int = 0
    committees: dict[int, bytes] = field(default_factory=dict)
    relay_pool: tuple[str, ...] = ()
    active: int = 0
    faulty: set[str] = field(default_factory=set)
    balances: dict[str, int] = field(default_factory=dict)
    spent_burns: set[bytes] = field(default_factory=set)

    @property
    def active_relay(self) -> Optional[str]:
        return self.relay_pool[self.active] if self.relay_pool else None

    def ledger_encoding(self) -> bytes:
        w = Writer().u64(self.last_seq).u32(len(self.checkpoints))
        for seq in sorted(self.checkpoints):
            w.u64(seq)
            self.checkpoints[seq].write(w)
        w.u32(len(self.committees))
        for epoch in sorted(self.committees):
            w.u64(epoch).digest(self.committees[epoch])
        w.u32(len(self.balances))
        for addr in sorted(self.balances):
            w.text(addr).u64(self.balances[addr])
        w.u32(len(self.spent_burns))
        for h in sorted(self.spent_burns):
            w.digest(h)
        return w.getvalue()

    def ledger_digest(self) -> bytes:
        """Digest of checkpoints, committees, balances and spent burns."""
        return hash_bytes(self.ledger_encoding())

    def digest(self) -> bytes:
        """Digest of the full protocol state, relay bookkeeping included."""
        w = Writer().raw(self.ledger_encoding()).u32(len(self.relay_pool))
        for r in self.relay_pool:
            w.text(r)
        w.u32(self.active).u32(len(self.faulty))
        for r in sorted(self.faulty):
            w.text(r)
        return hash_bytes(w.getvalue())


@dataclass(frozen=True)
class ContractView:
    last_seq: int
    relay_pool: tuple[str, ...]
    active_relay: Optional[str]
    faulty: frozenset[str]


class BridgeContract:
    def __init__(
        self,
        delta: int,
        epoch_length: int,
        genesis_committee: Sequence[bytes],
        relay_pool: Sequence[str] = (),
        threshold: Fraction = DEFAULT_THRESHOLD,
        sync_rule: str = "strict",
        weights: GasWeights = GasWeights(),
        validator_weights: Optional[dict[bytes, Fraction]] = None,
    ) -> None:
        if sync_rule not in ("strict", "monotonic"):
            raise ValueError(f"unknown sync rule {sync_rule!r}")
        if delta < 1 or epoch_length % delta:
            raise ValueError("epoch_length must be a positive multiple of delta")
        self.threshold = check_threshold(threshold)
        self.sync_rule = sync_rule
        self.weights = weights
        self.validator_weights = validator_weights
        self.state = ContractState(delta=delta, epoch_length=epoch_length, relay_pool=tuple(relay_pool))
        self.state.committees[0] = committee_commitment(genesis_committee)
        self.gas_rows: list[GasRow] = []

    # ------------------------------------------------------------------ api

    @property
    def view(self) -> ContractView:
        s = self.state
        return ContractView(s.last_seq, s.relay_pool, s.active_relay, frozenset(s.faulty))

    def apply(self, tx: BridgeTx, sender: str = "") -> Receipt:
        if isinstance(tx, SyncTx):
            return self.handle_sync(tx)
        if isinstance(tx, MintTx):
            return self.handle_mint(tx, sender)
        if isinstance(tx, StatelessMintTx):
            return self.handle_stateless_mint(tx, sender)
        raise TypeError(f"not a bridge transaction: {type(tx).__name__}")

    def apply_calldata(self, data: bytes, sender: str = "") -> Receipt:
        try:
            tx = decode_calldata(data)
        except DecodeError:
            row = GasRow(len(self.gas_rows), "unknown", sender, reason=Reject.MALFORMED.value, calldata=len(data))
            self.gas_rows.append(row)
            return Receipt(False, Reject.MALFORMED, row)
        return self.apply(tx, sender)

    def gas_report(self) -> list[GasRow]:
        return list(self.gas_rows)

    def gas_report_rows(self) -> list[tuple[str, ...]]:
        rows = [GAS_HEADER]
        for g in self.gas_rows:
            rows.append(
                (
                    str(g.tx_id),
                    g.kind,
                    g.sender,
                    "accept" if g.accepted else f"reject:{g.reason}",
                    str(g.hashes),
                    str(g.sigverifies),
                    str(g.writes),
                    str(g.calldata),
                    f"{float(g.weighted(self.weights)):.1f}",
                )
            )
        return rows

    # ------------------------------------------------------------ internals

    @contextmanager
    def _metered(self, kind: str, sender: str, tx: BridgeTx) -> Iterator[GasRow]:
        row = GasRow(len(self.gas_rows), kind, sender, calldata=len(encode_calldata(tx)))
        with count_hashes() as counter:
            try:
                yield row
            finally:
                row.hashes = counter.n
                self.gas_rows.append(row)

    def _quorum(self, row: GasRow, header: BlockHeader, pks: Sequence[bytes]) -> bool:
        if header.qsig is None or len(header.qsig.bitmap) != len(pks):
            return False
        row.sigverifies += len(header.qsig.signers)
        weights = None
        if self.validator_weights is not None:
            weights = [self.validator_weights.get(pk, 0) for pk in pks]
        return quorum_verify(header.qsig, pks, header.signing_payload(), self.threshold, weights)

    def _finish(self, row: GasRow, reason: Optional[Reject]) -> Receipt:
        row.accepted = reason is None
        row.reason = reason.value if reason else ""
        return Receipt(reason is None, reason, row)

    # ------------------------------------------------------------------ sync

    def handle_sync(self, tx: SyncTx) -> Receipt:
        s = self.state
        with self._metered("sync", tx.relay, tx) as row:
            try:
                if tx.relay not in s.relay_pool:
                    raise _Abort(Reject.UNKNOWN_RELAY)
                if tx.relay in s.faulty:
                    raise _Abort(Reject.FAULTY_RELAY)
                hdr = tx.header
                if (
                    hdr.mmr_root is None
                    or hdr.height == 0
                    or hdr.height % s.delta
                    or hdr.epoch != (hdr.height - 1) // s.epoch_length
                    or hdr.is_epoch_block != (hdr.height % s.epoch_length == 0)
                ):
                    raise _Abort(Reject.MALFORMED)
                seq = hdr.height // s.delta
                in_order = seq == s.last_seq + 1 if self.sync_rule == "strict" else seq > s.last_seq
                if not in_order:
                    raise _Abort(Reject.OUT_OF_SEQUENCE)
                expected = s.committees.get(hdr.epoch)
                if expected is None or committee_commitment(hdr.pks) != expected:
                    raise _Abort(Reject.COMMITTEE_MISMATCH)
                if not self._quorum(row, hdr, hdr.pks):
                    raise _Abort(Reject.BAD_QUORUM_SIGNATURE)
            except _Abort as abort:
                if abort.reason in BYZANTINE_SYNC:
                    self._replace_relay(tx.relay, row)
                return self._finish(row, abort.reason)

            s.checkpoints[seq] = hdr
            s.checkpoint_hashes[seq] = hash_bytes(hdr.encode())
            s.last_seq = seq
            row.writes += 2
            if hdr.next_committee is not None:
                s.committees[hdr.epoch + 1] = committee_commitment(hdr.next_committee)
                row.writes += 1
            if s.active_relay != tx.relay:
                s.active = s.relay_pool.index(tx.relay)
                row.writes += 1
            return self._finish(row, None)

    def _replace_relay(self, relay: str, row: GasRow) -> None:
        s = self.state
        s.faulty.add(relay)
        row.writes += 1
        if s.active_relay != relay:
            return
        n = len(s.relay_pool)
        for step in range(1, n + 1):
            candidate = (s.active + step) % n
            if s.relay_pool[candidate] not in s.faulty:
                s.active = candidate
                row.writes += 1
                return

    # ------------------------------------------------------------------ mint

    def _check_fields(self, receiver: str, amount: int, burn: BurnTx) -> None:
        if burn.target != NULL_ADDRESS:
            raise _Abort(Reject.NOT_A_BURN)
        if burn.sender != receiver:
            raise _Abort(Reject.SENDER_RECEIVER_MISMATCH)
        if burn.amount != amount:
            raise _Abort(Reject.AMOUNT_MISMATCH)

    def _check_window(self, header_bk: BlockHeader, pi_b: MmrProof, cp: BlockHeader, cp_hash: bytes) -> None:
        """Prove ``header_bk`` sits in the window committed by checkpoint ``cp``."""
        delta = self.state.delta
        i, k = cp.height, header_bk.height
        if not i - delta < k <= i:
            raise _Abort(Reject.BAD_HEADER_PROOF)
        header_hash = hash_bytes(header_bk.encode())
        if k == i:
            if pi_b != MmrProof(0) or header_hash != cp_hash:
                raise _Abort(Reject.BAD_HEADER_PROOF)
            return
        if pi_b.leaf_index != k - (i - delta + 1):
            raise _Abort(Reject.BAD_HEADER_PROOF)
        if not mmr_verify(pi_b, header_hash, cp.mmr_root, delta - 1):
            raise _Abort(Reject.BAD_HEADER_PROOF)

    def _check_tx(self, burn: BurnTx, pi_t: MerkleProof, header_bk: BlockHeader) -> bytes:
        burn_hash = hash_bytes(burn.encode())
        if not merkle_verify(pi_t, burn_hash, header_bk.tx_root):
            raise _Abort(Reject.BAD_TX_PROOF)
        if burn_hash in self.state.spent_burns:
            raise _Abort(Reject.REPLAY)
        return burn_hash

    def _unlock(self, row: GasRow, burn_hash: bytes, receiver: str, amount: int) -> None:
        s = self.state
        s.spent_burns.add(burn_hash)
        s.balances[receiver] = s.balances.get(receiver, 0) + amount
        row.writes += 2

    def handle_mint(self, tx: MintTx, sender: str = "") -> Receipt:
        s = self.state
        with self._metered("mint", sender or tx.receiver, tx) as row:
            try:
                self._check_fields(tx.receiver, tx.amount, tx.burn_tx)
                i = tx.pob.checkpoint_height
                seq = i // s.delta
                if i % s.delta or seq not in s.checkpoints:
                    raise _Abort(Reject.UNKNOWN_CHECKPOINT)
                self._check_window(tx.pob.header, tx.pob.pi_b, s.checkpoints[seq], s.checkpoint_hashes[seq])
                burn_hash = self._check_tx(tx.burn_tx, tx.pob.pi_t, tx.pob.header)
            except _Abort as abort:
                return self._finish(row, abort.reason)
            self._unlock(row, burn_hash, tx.receiver, tx.amount)
            return self._finish(row, None)

    def handle_stateless_mint(self, tx: StatelessMintTx, sender: str = "") -> Receipt:
        s = self.state
        with self._metered("stateless-mint", sender or tx.receiver, tx) as row:
            try:
                self._check_fields(tx.receiver, tx.amount, tx.burn_tx)

                # walk the committee chain from the deployment-time genesis committee
                commitment = s.committees[0]
                for epoch, eh in enumerate(tx.epoch_handoff):
                    if (
                        eh.epoch != epoch
                        or eh.next_committee is None
                        or eh.height != (epoch + 1) * s.epoch_length
                        or committee_commitment(eh.pks) != commitment
                        or not self._quorum(row, eh, eh.pks)
                    ):
                        raise _Abort(Reject.BROKEN_HANDOFF)
                    commitment = committee_commitment(eh.next_committee)

                bcp, tip = tx.header_bcp, tx.header_tip
                anchor = tip if tip is not None else bcp
                for h in (bcp, anchor):
                    if h.mmr_root is None or h.cp_mmr_root is None or h.height == 0 or h.height % s.delta:
                        raise _Abort(Reject.BAD_CHECKPOINT_PROOF)
                if anchor.epoch != len(tx.epoch_handoff) or committee_commitment(anchor.pks) != commitment:
                    raise _Abort(Reject.BROKEN_HANDOFF)
                if not self._quorum(row, anchor, anchor.pks):
                    raise _Abort(Reject.BAD_QUORUM_SIGNATURE)

                bcp_hash = hash_bytes(bcp.encode())
                if tip is None:
                    if tx.pi_cp is not None:
                        raise _Abort(Reject.BAD_CHECKPOINT_PROOF)
                else:
                    tip_seq, bcp_seq = tip.height // s.delta, bcp.height // s.delta
                    if (
                        tx.pi_cp is None
                        or bcp_seq >= tip_seq
                        or tx.pi_cp.leaf_index != bcp_seq - 1
                        or not mmr_verify(tx.pi_cp, bcp_hash, tip.cp_mmr_root, tip_seq - 1)
                    ):
                        raise _Abort(Reject.BAD_CHECKPOINT_PROOF)

                self._check_window(tx.header_btx, tx.pi_b, bcp, bcp_hash)
                burn_hash = self._check_tx(tx.burn_tx, tx.pi_t, tx.header_btx)
            except _Abort as abort:
                return self._finish(row, abort.reason)
            self._unlock(row, burn_hash, tx.receiver, tx.amount)
            return self._finish(row, None)
