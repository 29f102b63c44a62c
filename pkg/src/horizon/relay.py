"""Relays that push checkpoint headers to the bridge contract.

One relay in the pool is active at a time.  The others watch the contract:
a watcher of rank ``r`` (its distance after the active relay in pool order,
skipping relays the contract marked faulty) submits checkpoints that have
been missing for ``tau * r`` ticks, and becomes the active relay when the
contract accepts one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Protocol, Sequence

from .chain import BlockHeader, sign_header
from .crypto import KeyPair
from .encoding import Reader, Writer


class RelayMode(str, Enum):
    HONEST = "honest"
    SILENT = "silent"
    BAD_SIGNATURE = "bad-signature"
    SKIP_CHECKPOINT = "skip-checkpoint"
    WRONG_ROOT = "wrong-root"


@dataclass(frozen=True)
class SyncTx:
    relay: str
    header: BlockHeader

    def write(self, w: Writer) -> None:
        w.text(self.relay)
        self.header.write(w)

    @classmethod
    def read(cls, r: Reader) -> "SyncTx":
        return cls(r.text(), BlockHeader.read(r))

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()


class ContractView(Protocol):
    last_seq: int
    relay_pool: tuple[str, ...]
    active_relay: Optional[str]
    faulty: frozenset[str]


def _flip(d: bytes) -> bytes:
    return bytes([d[0] ^ 0x01]) + d[1:]


class Relay:
    def __init__(
        self,
        name: str,
        mode: RelayMode | str = RelayMode.HONEST,
        colluding_committee: Optional[dict[int, Sequence[KeyPair]]] = None,
    ) -> None:
        self.name = name
        self.mode = RelayMode(mode)
        # epoch -> committee keys; lets a wrong-root relay re-sign (out-of-model)
        self.colluding_committee = colluding_committee
        # checkpoint height -> tick of our latest submission
        self._sent: dict[int, int] = {}

    def rank(self, view: ContractView) -> Optional[int]:
        if self.name not in view.relay_pool or self.name in view.faulty:
            return None
        pool = [r for r in view.relay_pool if r not in view.faulty]
        start = pool.index(view.active_relay) if view.active_relay in pool else 0
        return (pool.index(self.name) - start) % len(pool)

    def on_checkpoint(self, header: BlockHeader, following: Optional[BlockHeader] = None) -> Optional[SyncTx]:
        """Build the sync transaction for ``header`` according to this relay's mode.

        ``following`` is the next checkpoint, if chain A already has it; a
        skip-checkpoint relay submits that one instead.
        """
        mode = self.mode
        if mode is RelayMode.SILENT:
            return None
        if mode is RelayMode.SKIP_CHECKPOINT:
            return SyncTx(self.name, following) if following is not None else None
        if mode is RelayMode.BAD_SIGNATURE:
            qsig = replace(header.qsig, agg=_flip(header.qsig.agg))
            return SyncTx(self.name, replace(header, qsig=qsig))
        if mode is RelayMode.WRONG_ROOT:
            forged = replace(header, mmr_root=_flip(header.mmr_root))
            if self.colluding_committee is not None:
                forged = sign_header(forged, self.colluding_committee[header.epoch])
            return SyncTx(self.name, forged)
        return SyncTx(self.name, header)

    def watch_and_takeover(
        self,
        view: ContractView,
        checkpoints: Sequence[tuple[BlockHeader, int]],
        now: int,
        tau: int,
    ) -> list[SyncTx]:
        """Sync transactions to submit at tick ``now``, oldest first.

        ``checkpoints`` lists every checkpoint on chain A as
        ``(header, tick created)`` ordered by sequence number.  A rank-0 relay
        submits every missing checkpoint; a watcher of rank ``r`` only those
        missing for at least ``tau * r`` ticks.  A submission still pending
        is not repeated until ``tau`` ticks have passed.
        """
        rank = self.rank(view)
        if rank is None:
            return []
        missing = list(checkpoints[view.last_seq :])
        out = []
        for j, (header, created) in enumerate(missing):
            if now - created < tau * rank:
                break
            sent = self._sent.get(header.height)
            if sent is not None and now - sent < tau:
                continue
            following = missing[j + 1][0] if j + 1 < len(missing) else None
            tx = self.on_checkpoint(header, following)
            if tx is not None:
                self._sent[header.height] = now
                out.append(tx)
        return out
