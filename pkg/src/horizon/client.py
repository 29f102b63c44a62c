"""Client side of a cross-chain transfer: burn on A, fetch a proof of burn,
mint on B, rotating through full nodes when something goes wrong.

A :class:`TransferSession` is a sequential process.  The simulator calls
:meth:`TransferSession.step` whenever the session asked to be woken; ``step``
returns the next tick it wants to run at, or ``None`` once it is terminal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Protocol, Sequence

from .chain import BurnTx, ChainA, InvalidTransaction
from .contract import MintTx, Reject, StatelessMintTx
from .fullnode import FullNode, NotFound, NotYetCheckpointed


class Phase(str, Enum):
    INIT = "init"
    BURNED = "burned"
    PROVED = "proved"
    MINTED = "minted"
    ABORTED = "aborted"
    ABORTED_INSURED = "aborted-insured"


TERMINAL = frozenset({Phase.MINTED, Phase.ABORTED, Phase.ABORTED_INSURED})


class Environment(Protocol):
    """What a session needs from the world it runs in."""

    chain_a: ChainA
    fullnodes: Sequence[FullNode]
    variant: str

    def submit_a(self, tx: BurnTx) -> None: ...
    def dropped_a(self, tx_id: bytes) -> bool: ...
    def submit_b(self, sender: str, tx: Any) -> int: ...
    def receipt_b(self, ticket: int) -> Any: ...
    def contract_last_seq(self) -> int: ...
    def is_spent(self, burn_id: bytes) -> bool: ...
    def log(self, actor: str, kind: str, payload: bytes = b"") -> None: ...


def start_transfer(chain: ChainA, client: str, amount: int, nonce: int) -> BurnTx:
    """Build the burn for ``amount``; raises :class:`InvalidTransaction` if it cannot land."""
    if amount <= 0:
        raise InvalidTransaction("amount must be positive")
    if chain.balances.get(client, 0) < amount:
        raise InvalidTransaction(f"insufficient balance for {client}")
    return BurnTx(sender=client, amount=amount, nonce=nonce)


@dataclass
class TransferSession:
    session_id: str
    client_addr: str
    amount: int
    start_tick: int
    nonce: int
    crash_before_burn: bool = False
    max_attempts: Optional[int] = None
    max_lag_waits: int = 8

    phase: Phase = Phase.INIT
    burn: Optional[BurnTx] = None
    fullnode_cursor: int = 0
    attempts: int = 0
    tries_on_node: int = 0
    lag_waits: int = 0
    mint_tx: Any = None
    ticket: Optional[int] = None
    insurance_claim: bool = False
    history: list[tuple[int, Phase]] = field(default_factory=list)
    proof_sizes: list[tuple[int, int, int, int]] = field(default_factory=list)
    _awaiting: str = "start"

    @property
    def terminal(self) -> bool:
        return self.phase in TERMINAL

    def _enter(self, phase: Phase, now: int, env: Environment) -> None:
        self.phase = phase
        self.history.append((now, phase))
        env.log(self.session_id, f"phase:{phase.value}", self.burn.id if self.burn else b"")

    def step(self, now: int, env: Environment) -> Optional[int]:
        if not self.history:
            self.history.append((now, Phase.INIT))
        handler = getattr(self, f"_on_{self._awaiting}")
        return handler(now, env)

    # stage I -----------------------------------------------------------

    def _on_start(self, now: int, env: Environment) -> Optional[int]:
        if self.crash_before_burn:
            env.log(self.session_id, "crash")
            self._enter(Phase.ABORTED, now, env)
            return None
        try:
            self.burn = start_transfer(env.chain_a, self.client_addr, self.amount, self.nonce)
        except InvalidTransaction as exc:
            env.log(self.session_id, "burn-refused", str(exc).encode())
            self._enter(Phase.ABORTED, now, env)
            return None
        env.submit_a(self.burn)
        env.log(self.session_id, "burn-submitted", self.burn.id)
        self._awaiting = "confirmation"
        return now + 1

    def _on_confirmation(self, now: int, env: Environment) -> Optional[int]:
        found = env.chain_a.find_tx(self.burn.id)
        if found is None:
            if env.dropped_a(self.burn.id):
                env.log(self.session_id, "burn-dropped", self.burn.id)
                self.burn = None
                self._enter(Phase.ABORTED, now, env)
                return None
            return now + 1
        if not env.chain_a.confirm_depth(found[0]):
            return now + 1
        self._enter(Phase.BURNED, now, env)
        self._awaiting = "checkpoint"
        return self._on_checkpoint(now, env)

    def _on_checkpoint(self, now: int, env: Environment) -> Optional[int]:
        # ask for a proof only once the covering checkpoint exists, so a full
        # node answering "not yet" is at fault rather than early
        height = env.chain_a.find_tx(self.burn.id)[0]
        if env.chain_a.latest_checkpoint < env.chain_a.params.checkpoint_for(height):
            return now + 1
        self._awaiting = "fetch"
        return self._on_fetch(now, env)

    def _on_fetch(self, now: int, env: Environment) -> Optional[int]:
        pool = env.fullnodes
        limit = self.max_attempts if self.max_attempts is not None else 2 * len(pool)
        if self.attempts >= limit:
            return self._insure(now, env)
        node = pool[self.fullnode_cursor % len(pool)]
        self.attempts += 1
        env.log(self.session_id, f"pob-request:{node.name}", self.burn.id)
        try:
            if env.variant == "stateless":
                proof = node.handle_stateless_request(self.burn.id)
            else:
                proof = node.handle_pob_request(self.burn.id)
        except (NotFound, NotYetCheckpointed) as exc:
            env.log(self.session_id, f"pob-unavailable:{type(exc).__name__}", self.burn.id)
            proof = None
        if proof is None:
            self.tries_on_node += 1
            self._awaiting = "fetch"
            if self.tries_on_node >= 2:
                self._rotate()
                return now + 1
            return now + env.chain_a.params.delta

        tx_type = StatelessMintTx if env.variant == "stateless" else MintTx
        self.mint_tx = tx_type(self.client_addr, self.amount, self.burn, proof)
        # (pi_b bytes, pi_b digests, pi_t bytes, pi_t digests)
        self.proof_sizes.append(
            (len(proof.pi_b.encode()), proof.pi_b.digest_count, len(proof.pi_t.encode()), len(proof.pi_t.siblings))
        )
        if self.phase is not Phase.PROVED:
            self._enter(Phase.PROVED, now, env)
        return self._submit(now, env)

    def _insure(self, now: int, env: Environment) -> None:
        self.insurance_claim = True
        env.log(self.session_id, "insurance-claim", self.burn.id)
        self._enter(Phase.ABORTED_INSURED, now, env)
        return None

    def _rotate(self) -> None:
        self.fullnode_cursor += 1
        self.tries_on_node = 0

    # stage II ----------------------------------------------------------

    def _submit(self, now: int, env: Environment) -> int:
        self.ticket = env.submit_b(self.client_addr, self.mint_tx)
        env.log(self.session_id, "mint-submitted", self.burn.id)
        self._awaiting = "receipt"
        return now + 1

    def _on_receipt(self, now: int, env: Environment) -> Optional[int]:
        receipt = env.receipt_b(self.ticket)
        if receipt is None:
            return now + 1
        if receipt.accepted:
            self._enter(Phase.MINTED, now, env)
            return None
        env.log(self.session_id, f"mint-rejected:{receipt.reason.value}", self.burn.id)
        if receipt.reason is Reject.REPLAY and env.is_spent(self.burn.id):
            # credited by an earlier copy of our own mint
            self._enter(Phase.MINTED, now, env)
            return None
        if receipt.reason is Reject.UNKNOWN_CHECKPOINT and self._is_lag(env) and self.lag_waits < self.max_lag_waits:
            # the relay has not synced that checkpoint yet: same proof, later
            self.lag_waits += 1
            self._awaiting = "resubmit"
            return now + env.chain_a.params.delta
        self._rotate()
        self._awaiting = "fetch"
        return now + 1

    def _on_resubmit(self, now: int, env: Environment) -> int:
        return self._submit(now, env)

    def _is_lag(self, env: Environment) -> bool:
        if not isinstance(self.mint_tx, MintTx):
            return False
        claimed = self.mint_tx.pob.checkpoint_height // env.chain_a.params.delta
        return claimed > env.contract_last_seq()
