"""Source chain A (quorum-signed BFT blocks with checkpoint commitments) and a
minimal destination chain B that feeds transactions to the bridge contract.

Heights and epochs
    Genesis is height 0.  Epoch ``e`` ends at height ``(e + 1) * epoch_length``;
    that block is the epoch block, it is signed by committee ``e`` and carries
    committee ``e + 1``.  Every ``delta``-th block is a checkpoint and, since
    ``delta`` divides ``epoch_length``, every epoch block is one too.

Checkpoint windows
    Checkpoint ``i`` commits (``mmr_root``) to the headers at heights
    ``i - delta + 1 .. i - 1``, i.e. ``delta - 1`` leaves.  A checkpoint header
    cannot commit to its own hash, so a burn inside checkpoint block ``i`` is
    proven by header identity instead.  ``cp_mmr_root`` commits to all earlier
    checkpoint headers (sequences ``1 .. c - 1``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Iterable, Optional, Sequence, Union

from .commitments import Mmr, MerkleTree, merkle_build
from .crypto import (
    DEFAULT_THRESHOLD,
    KeyPair,
    QuorumSignature,
    aggregate,
    check_threshold,
    hash_bytes,
    keygen,
    sign,
)
from .encoding import DecodeError, Reader, Writer

NULL_ADDRESS = "0x" + "00" * 20
ZERO_DIGEST = bytes(32)
# tx_root of a block without transactions
EMPTY_TX_ROOT = ZERO_DIGEST

_BURN_TAG = 0x01
_TRANSFER_TAG = 0x02


class InvalidTransaction(ValueError):
    pass


@dataclass(frozen=True)
class BurnTx:
    sender: str
    amount: int
    nonce: int
    target: str = NULL_ADDRESS

    def write(self, w: Writer) -> None:
        w.u8(_BURN_TAG).text(self.sender).u64(self.amount).text(self.target).u64(self.nonce)

    @classmethod
    def read(cls, r: Reader) -> "BurnTx":
        if r.u8() != _BURN_TAG:
            raise DecodeError("not a burn transaction")
        sender, amount, target, nonce = r.text(), r.u64(), r.text(), r.u64()
        return cls(sender=sender, amount=amount, nonce=nonce, target=target)

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @cached_property
    def id(self) -> bytes:
        return hash_bytes(self.encode())


@dataclass(frozen=True)
class TransferTx:
    """Ordinary value transfer on chain A; never bridged."""

    sender: str
    receiver: str
    amount: int
    nonce: int

    def encode(self) -> bytes:
        return (
            Writer()
            .u8(_TRANSFER_TAG)
            .text(self.sender)
            .u64(self.amount)
            .text(self.receiver)
            .u64(self.nonce)
            .getvalue()
        )

    @cached_property
    def id(self) -> bytes:
        return hash_bytes(self.encode())


Transaction = Union[BurnTx, TransferTx]


def _write_keys(w: Writer, keys: Sequence[bytes]) -> None:
    w.u32(len(keys))
    for k in keys:
        w.raw(k)


def _read_keys(r: Reader) -> tuple[bytes, ...]:
    return tuple(r.raw(32) for _ in range(r.count(32)))


@dataclass(frozen=True)
class BlockHeader:
    height: int
    epoch: int
    parent: bytes
    tx_root: bytes
    pks: tuple[bytes, ...]
    qsig: Optional[QuorumSignature] = None
    mmr_root: Optional[bytes] = None
    cp_mmr_root: Optional[bytes] = None
    next_committee: Optional[tuple[bytes, ...]] = None

    @property
    def is_checkpoint(self) -> bool:
        return self.mmr_root is not None

    @property
    def is_epoch_block(self) -> bool:
        return self.next_committee is not None

    def write(self, w: Writer, *, with_qsig: bool = True) -> None:
        w.u64(self.height).u64(self.epoch).digest(self.parent).digest(self.tx_root)
        _write_keys(w, self.pks)
        w.flag(self.mmr_root is not None)
        if self.mmr_root is not None:
            w.digest(self.mmr_root)
        w.flag(self.cp_mmr_root is not None)
        if self.cp_mmr_root is not None:
            w.digest(self.cp_mmr_root)
        w.flag(self.next_committee is not None)
        if self.next_committee is not None:
            _write_keys(w, self.next_committee)
        qsig = self.qsig if with_qsig else None
        w.flag(qsig is not None)
        if qsig is not None:
            qsig.write(w)

    @classmethod
    def read(cls, r: Reader) -> "BlockHeader":
        height, epoch, parent, tx_root = r.u64(), r.u64(), r.digest(), r.digest()
        pks = _read_keys(r)
        mmr_root = r.digest() if r.flag() else None
        cp_mmr_root = r.digest() if r.flag() else None
        next_committee = _read_keys(r) if r.flag() else None
        qsig = QuorumSignature.read(r) if r.flag() else None
        return cls(height, epoch, parent, tx_root, pks, qsig, mmr_root, cp_mmr_root, next_committee)

    def encode(self, *, with_qsig: bool = True) -> bytes:
        w = Writer()
        self.write(w, with_qsig=with_qsig)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "BlockHeader":
        r = Reader(data)
        h = cls.read(r)
        r.done()
        return h

    def signing_payload(self) -> bytes:
        """What the quorum signs: the header hash with the signature field absent."""
        return hash_bytes(self.encode(with_qsig=False))

    @cached_property
    def digest(self) -> bytes:
        # off-chain convenience; the contract hashes explicitly so gas is counted
        return hash_bytes(self.encode())


def sign_header(
    header: BlockHeader, committee: Sequence[KeyPair], signers: Optional[Iterable[int]] = None
) -> BlockHeader:
    """Return ``header`` carrying a quorum signature by ``signers`` (default: all)."""
    payload = header.signing_payload()
    indices = range(len(committee)) if signers is None else signers
    qsig = aggregate(((i, sign(committee[i].secret, payload)) for i in indices), len(committee))
    return replace(header, qsig=qsig)


@dataclass(frozen=True)
class ChainParams:
    delta: int = 4
    epoch_length: int = 8
    committee_size: int = 4
    threshold: Fraction = DEFAULT_THRESHOLD
    confirmation_depth: int = 0
    rotation_seed: bytes = b"horizon-rotation"

    def validate(self) -> None:
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.epoch_length < 1 or self.epoch_length % self.delta:
            raise ValueError(
                f"epoch_length ({self.epoch_length}) must be a positive multiple of delta ({self.delta})"
            )
        if self.committee_size < 1:
            raise ValueError("committee_size must be >= 1")
        if self.confirmation_depth < 0:
            raise ValueError("confirmation_depth must be >= 0")
        check_threshold(self.threshold)

    def epoch_of(self, height: int) -> int:
        return 0 if height == 0 else (height - 1) // self.epoch_length

    def checkpoint_for(self, height: int) -> int:
        """Height of the first checkpoint whose window covers ``height`` (>= 1)."""
        return -(-height // self.delta) * self.delta


def validator_seeds(seed: int, count: int) -> list[bytes]:
    return [hash_bytes(b"validator" + seed.to_bytes(8, "big") + i.to_bytes(4, "big")) for i in range(count)]


class ChainA:
    """Append-only BFT chain with per-epoch committees drawn from a validator pool.

    The first ``committee_size`` seeds form the genesis committee.  Later
    committees are the ``committee_size`` pool members with the lowest
    ``H(rotation_seed || epoch || pk)``, kept in that rank order.
    """

    def __init__(
        self,
        params: ChainParams,
        validator_pool: Sequence[bytes],
        balances: Optional[dict[str, int]] = None,
    ) -> None:
        params.validate()
        if len(validator_pool) < params.committee_size:
            raise ValueError("validator pool smaller than committee size")
        self.params = params
        self.pool = [keygen(s) for s in validator_pool]
        self.balances: dict[str, int] = dict(balances or {})
        self.headers: list[BlockHeader] = []
        self.blocks: list[tuple[Transaction, ...]] = []
        self._trees: dict[int, MerkleTree] = {}
        self._tx_index: dict[bytes, tuple[int, int]] = {}
        self._committees: dict[int, tuple[KeyPair, ...]] = {0: tuple(self.pool[: params.committee_size])}
        self.window = Mmr()
        self.cp_mmr = Mmr()
        # checkpoint height -> window MMR it committed to
        self.windows: dict[int, Mmr] = {}
        # checkpoint height -> checkpoint-chain MMR it committed to
        self.cp_snapshots: dict[int, Mmr] = {}
        self.checkpoint_heights: list[int] = []

        genesis = BlockHeader(
            height=0,
            epoch=0,
            parent=ZERO_DIGEST,
            tx_root=EMPTY_TX_ROOT,
            pks=self._pks(0),
        )
        self._append(sign_header(genesis, self.committee(0)), ())

    # committees -------------------------------------------------------

    def committee(self, epoch: int) -> tuple[KeyPair, ...]:
        if epoch not in self._committees:
            ranked = sorted(
                self.pool,
                key=lambda kp: hash_bytes(self.params.rotation_seed + epoch.to_bytes(8, "big") + kp.public),
            )
            self._committees[epoch] = tuple(ranked[: self.params.committee_size])
        return self._committees[epoch]

    def _pks(self, epoch: int) -> tuple[bytes, ...]:
        return tuple(kp.public for kp in self.committee(epoch))

    # views ------------------------------------------------------------

    @property
    def tip(self) -> BlockHeader:
        return self.headers[-1]

    @property
    def height(self) -> int:
        return len(self.headers) - 1

    @property
    def latest_checkpoint(self) -> int:
        return self.checkpoint_heights[-1] if self.checkpoint_heights else 0

    def epoch_blocks(self, upto_epoch: int) -> list[BlockHeader]:
        """Epoch block headers for epochs ``0 .. upto_epoch - 1``."""
        return [self.headers[(e + 1) * self.params.epoch_length] for e in range(upto_epoch)]

    def tx_tree(self, height: int) -> MerkleTree:
        return self._trees[height]

    def find_tx(self, tx_id: bytes) -> Optional[tuple[int, int]]:
        return self._tx_index.get(tx_id)

    def confirm_depth(self, height: int) -> bool:
        return height <= self.height and self.height - height >= self.params.confirmation_depth

    # block production ------------------------------------------------------

    def check_tx(self, tx: Transaction, balances: dict[str, int]) -> None:
        if tx.amount <= 0:
            raise InvalidTransaction("amount must be positive")
        if isinstance(tx, BurnTx) and tx.target != NULL_ADDRESS:
            raise InvalidTransaction("burn target must be the null address")
        if balances.get(tx.sender, 0) < tx.amount:
            raise InvalidTransaction(f"insufficient balance for {tx.sender}")
        if tx.id in self._tx_index:
            raise InvalidTransaction("transaction already included")

    def _apply(self, tx: Transaction, balances: dict[str, int]) -> None:
        balances[tx.sender] -= tx.amount
        if isinstance(tx, TransferTx):
            balances[tx.receiver] = balances.get(tx.receiver, 0) + tx.amount

    def select_valid(self, txs: Iterable[Transaction]) -> tuple[list[Transaction], list[Transaction]]:
        """Split a mempool into a valid block body and dropped transactions."""
        balances = dict(self.balances)
        valid: list[Transaction] = []
        dropped: list[Transaction] = []
        seen: set[bytes] = set()
        for tx in txs:
            try:
                self.check_tx(tx, balances)
                if tx.id in seen:
                    raise InvalidTransaction("duplicate transaction in block")
            except InvalidTransaction:
                dropped.append(tx)
                continue
            seen.add(tx.id)
            self._apply(tx, balances)
            valid.append(tx)
        return valid, dropped

    def produce_block(self, txs: Sequence[Transaction] = ()) -> BlockHeader:
        balances = dict(self.balances)
        seen: set[bytes] = set()
        for tx in txs:
            self.check_tx(tx, balances)
            if tx.id in seen:
                raise InvalidTransaction("duplicate transaction in block")
            seen.add(tx.id)
            self._apply(tx, balances)

        p = self.params
        height = self.height + 1
        epoch = p.epoch_of(height)
        checkpoint = height % p.delta == 0
        header = BlockHeader(
            height=height,
            epoch=epoch,
            parent=self.tip.digest,
            tx_root=merkle_build([tx.id for tx in txs]).root if txs else EMPTY_TX_ROOT,
            pks=self._pks(epoch),
            mmr_root=self.window.root_or_empty() if checkpoint else None,
            cp_mmr_root=self.cp_mmr.root_or_empty() if checkpoint else None,
            next_committee=self._pks(epoch + 1) if height % p.epoch_length == 0 else None,
        )
        header = sign_header(header, self.committee(epoch))
        self.balances = balances
        self._append(header, tuple(txs))
        return header

    def _append(self, header: BlockHeader, txs: tuple[Transaction, ...]) -> None:
        h = header.height
        self.headers.append(header)
        self.blocks.append(txs)
        if txs:
            self._trees[h] = merkle_build([tx.id for tx in txs])
        for idx, tx in enumerate(txs):
            self._tx_index[tx.id] = (h, idx)
        if h == 0:
            return
        if header.is_checkpoint:
            self.windows[h] = self.window
            self.cp_snapshots[h] = self.cp_mmr
            self.window = Mmr()
            self.cp_mmr = self.cp_mmr.append(header.digest)
            self.checkpoint_heights.append(h)
        else:
            self.window = self.window.append(header.digest)


@dataclass
class LogEntry:
    ticket: int
    submitted: int
    included: int
    sender: str
    tx: Any
    receipt: Any


@dataclass
class ChainB:
    """Ordered transaction log executing one contract.

    Transactions submitted at tick ``t`` are executed, in submission order,
    when :meth:`include` runs at any later tick.
    """

    contract: Any
    log: list[LogEntry] = field(default_factory=list)
    pending: list[tuple[int, int, str, Any]] = field(default_factory=list)
    _next_ticket: int = 0
    _receipts: dict[int, Any] = field(default_factory=dict)
    on_include: Optional[Callable[[LogEntry], None]] = None

    def submit(self, sender: str, tx: Any, now: int) -> int:
        ticket = self._next_ticket
        self._next_ticket += 1
        self.pending.append((ticket, now, sender, tx))
        return ticket

    def include(self, now: int) -> list[LogEntry]:
        ready = [p for p in self.pending if p[1] < now]
        self.pending = [p for p in self.pending if p[1] >= now]
        entries = []
        for ticket, submitted, sender, tx in ready:
            receipt = self.contract.apply(tx, sender)
            entry = LogEntry(ticket, submitted, now, sender, tx, receipt)
            self.log.append(entry)
            self._receipts[ticket] = receipt
            entries.append(entry)
            if self.on_include:
                self.on_include(entry)
        return entries

    def receipt(self, ticket: int) -> Any:
        return self._receipts.get(ticket)

    @property
    def confirmed(self) -> int:
        return len(self.log)
