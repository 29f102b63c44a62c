"""Deterministic simulation of the bridge: scenarios, event loop, atomicity
verdicts and metrics.

Time is a logical tick.  Each tick runs, in order: chain A produces one block
from its mempool; chain B executes everything submitted before this tick;
relays act (stateful variant); replay adversaries act; client sessions due
this tick run.  The loop stops at quiescence (every session terminal, no
client or adversary transaction pending on chain B, every checkpoint older
than this tick synced) or at ``max_ticks``.

Scenario files are TOML, schema version 1::

    version = 1
    name = "honest"
    seed = 1
    max_ticks = 200
    variant = "stateful"        # or "stateless"
    sync_rule = "strict"        # or "monotonic"
    tau = 2                     # relay takeover timeout, ticks per rank
    replayers = 0               # adversaries resubmitting accepted mints
    out_of_model = false        # wrong-root relays collude with the committee

    [chain]
    delta = 4
    epoch_length = 8
    committee_size = 4
    validator_pool = 8
    threshold = "2/3"
    confirmation_depth = 0

    [pools]
    relays = ["honest"]
    fullnodes = ["honest", "honest"]

    [balances]
    alice = 100

    [[transfers]]
    tick = 1
    client = "alice"
    amount = 10
    crash = "none"              # or "before-burn"
"""

from __future__ import annotations

import hashlib
import heapq
import sys
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .chain import BurnTx, ChainA, ChainB, ChainParams, LogEntry, validator_seeds
from .client import Phase, TransferSession
from .contract import BridgeContract, MintTx, StatelessMintTx
from .fullnode import FullNode, FullNodeMode
from .relay import Relay, RelayMode, SyncTx

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class TransferSpec:
    tick: int
    client: str
    amount: int
    crash: str = "none"


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    seed: int = 0
    max_ticks: int = 200
    variant: str = "stateful"
    sync_rule: str = "strict"
    tau: int = 2
    replayers: int = 0
    out_of_model: bool = False
    delta: int = 4
    epoch_length: int = 8
    committee_size: int = 4
    validator_pool: int = 8
    threshold: Fraction = Fraction(2, 3)
    confirmation_depth: int = 0
    relays: tuple[str, ...] = ("honest",)
    fullnodes: tuple[str, ...] = ("honest",)
    balances: tuple[tuple[str, int], ...] = ()
    transfers: tuple[TransferSpec, ...] = ()

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    def validate(self) -> None:
        def need(cond: bool, path: str, msg: str) -> None:
            if not cond:
                raise ScenarioError(path, msg)

        need(self.variant in ("stateful", "stateless"), "variant", "must be 'stateful' or 'stateless'")
        need(self.sync_rule in ("strict", "monotonic"), "sync_rule", "must be 'strict' or 'monotonic'")
        need(self.tau >= 1, "tau", "must be >= 1")
        need(self.max_ticks >= 1, "max_ticks", "must be >= 1")
        need(self.replayers >= 0, "replayers", "must be >= 0")
        need(0 <= self.seed < 2**64, "seed", "must fit in 64 bits")
        need(self.delta >= 1, "chain.delta", "must be >= 1")
        need(
            self.epoch_length >= 1 and self.epoch_length % self.delta == 0,
            "chain.epoch_length",
            f"must be a positive multiple of delta ({self.delta})",
        )
        need(self.committee_size >= 1, "chain.committee_size", "must be >= 1")
        need(self.validator_pool >= self.committee_size, "chain.validator_pool", "must be >= committee_size")
        need(0 < self.threshold <= 1, "chain.threshold", "must be in (0, 1]")
        need(self.confirmation_depth >= 0, "chain.confirmation_depth", "must be >= 0")
        need(len(self.fullnodes) >= 1, "pools.fullnodes", "at least one full node required")
        for i, mode in enumerate(self.relays):
            need(mode in {m.value for m in RelayMode}, f"pools.relays[{i}]", f"unknown relay behavior {mode!r}")
        for i, mode in enumerate(self.fullnodes):
            need(mode in {m.value for m in FullNodeMode}, f"pools.fullnodes[{i}]", f"unknown full node behavior {mode!r}")
        if self.variant == "stateful":
            need(len(self.relays) >= 1, "pools.relays", "stateful variant needs at least one relay")
        funded = dict(self.balances)
        for i, t in enumerate(self.transfers):
            need(t.tick >= 1, f"transfers[{i}].tick", "must be >= 1")
            need(t.amount >= 0, f"transfers[{i}].amount", "must be >= 0")
            need(t.crash in ("none", "before-burn"), f"transfers[{i}].crash", "must be 'none' or 'before-burn'")
            need(t.client in funded, f"transfers[{i}].client", f"{t.client!r} is not funded in [balances]")


_TOP_KEYS = {"version", "name", "seed", "max_ticks", "variant", "sync_rule", "tau", "replayers", "out_of_model",
             "chain", "pools", "balances", "transfers"}
_CHAIN_KEYS = {"delta", "epoch_length", "committee_size", "validator_pool", "threshold", "confirmation_depth"}


def _typed(table: dict, key: str, kind: type, path: str, default: Any) -> Any:
    if key not in table:
        return default
    value = table[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    if kind is not int and not isinstance(value, kind):
        raise ScenarioError(path, f"expected {kind.__name__}, got {value!r}")
    return value


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(source, f"parse error: {exc}") from None
    for key in doc:
        if key not in _TOP_KEYS:
            raise ScenarioError(key, "unknown field")
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        raise ScenarioError("version", f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")

    chain = _typed(doc, "chain", dict, "chain", {})
    for key in chain:
        if key not in _CHAIN_KEYS:
            raise ScenarioError(f"chain.{key}", "unknown field")
    pools = _typed(doc, "pools", dict, "pools", {})
    for key in pools:
        if key not in ("relays", "fullnodes"):
            raise ScenarioError(f"pools.{key}", "unknown field")

    threshold_text = _typed(chain, "threshold", str, "chain.threshold", "2/3")
    try:
        threshold = Fraction(threshold_text)
    except (ValueError, ZeroDivisionError):
        raise ScenarioError("chain.threshold", f"not a fraction: {threshold_text!r}") from None

    balances = []
    for name, amount in _typed(doc, "balances", dict, "balances", {}).items():
        balances.append((name, _typed({name: amount}, name, int, f"balances.{name}", 0)))

    transfers = []
    for i, t in enumerate(_typed(doc, "transfers", list, "transfers", [])):
        path = f"transfers[{i}]"
        if not isinstance(t, dict):
            raise ScenarioError(path, "expected a table")
        for key in t:
            if key not in ("tick", "client", "amount", "crash"):
                raise ScenarioError(f"{path}.{key}", "unknown field")
        for key in ("tick", "client", "amount"):
            if key not in t:
                raise ScenarioError(f"{path}.{key}", "missing")
        transfers.append(
            TransferSpec(
                tick=_typed(t, "tick", int, f"{path}.tick", 0),
                client=_typed(t, "client", str, f"{path}.client", ""),
                amount=_typed(t, "amount", int, f"{path}.amount", 0),
                crash=_typed(t, "crash", str, f"{path}.crash", "none"),
            )
        )

    def strings(key: str) -> tuple[str, ...]:
        values = _typed(pools, key, list, f"pools.{key}", ["honest"])
        for i, v in enumerate(values):
            if not isinstance(v, str):
                raise ScenarioError(f"pools.{key}[{i}]", f"expected a string, got {v!r}")
        return tuple(values)

    scenario = Scenario(
        name=_typed(doc, "name", str, "name", source),
        seed=_typed(doc, "seed", int, "seed", 0),
        max_ticks=_typed(doc, "max_ticks", int, "max_ticks", 200),
        variant=_typed(doc, "variant", str, "variant", "stateful"),
        sync_rule=_typed(doc, "sync_rule", str, "sync_rule", "strict"),
        tau=_typed(doc, "tau", int, "tau", 2),
        replayers=_typed(doc, "replayers", int, "replayers", 0),
        out_of_model=_typed(doc, "out_of_model", bool, "out_of_model", False),
        delta=_typed(chain, "delta", int, "chain.delta", 4),
        epoch_length=_typed(chain, "epoch_length", int, "chain.epoch_length", 8),
        committee_size=_typed(chain, "committee_size", int, "chain.committee_size", 4),
        validator_pool=_typed(chain, "validator_pool", int, "chain.validator_pool", 8),
        threshold=threshold,
        confirmation_depth=_typed(chain, "confirmation_depth", int, "chain.confirmation_depth", 0),
        relays=strings("relays"),
        fullnodes=strings("fullnodes"),
        balances=tuple(balances),
        transfers=tuple(transfers),
    )
    scenario.validate()
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), source=path.stem)


def bundled_scenarios() -> list[Path]:
    return sorted((Path(__file__).parent / "scenarios").glob("*.toml"))


# --------------------------------------------------------------------------
# results


class Verdict(str, Enum):
    COMMITTED = "committed"
    ABORTED = "aborted"
    INSURED_LOSS = "insured-loss"
    VIOLATION = "protocol-violation"


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    actor: str
    kind: str
    payload_digest: str

    def row(self) -> str:
        return f"{self.tick}\t{self.actor}\t{self.kind}\t{self.payload_digest}"


@dataclass
class RunResult:
    scenario: Scenario
    chain_a: ChainA
    chain_b: ChainB
    contract: BridgeContract
    sessions: list[TransferSession]
    fullnodes: list[FullNode]
    trace: list[TraceEvent]
    ticks: int
    quiescent: bool
    checkpoint_ticks: dict[int, int]
    sync_ticks: dict[int, int]
    verdicts: dict[str, Verdict] = field(default_factory=dict)
    metrics: list[tuple[str, ...]] = field(default_factory=list)

    @property
    def violations(self) -> list[str]:
        return [sid for sid, v in self.verdicts.items() if v is Verdict.VIOLATION]

    def trace_text(self) -> str:
        return "".join(e.row() + "\n" for e in self.trace)

    def metrics_text(self) -> str:
        return "".join("\t".join(row) + "\n" for row in self.metrics)

    def trace_digest(self) -> str:
        return hashlib.sha256(self.trace_text().encode()).hexdigest()

    def burned_on_a(self) -> dict[bytes, BurnTx]:
        return {tx.id: tx for block in self.chain_a.blocks for tx in block if isinstance(tx, BurnTx)}

    def conservation(self) -> tuple[int, int, int]:
        """(total minted on B, total of distinct verified burns, total burned on A)."""
        burns = self.burned_on_a()
        state = self.contract.state
        minted = sum(state.balances.values())
        verified = sum(burns[h].amount for h in state.spent_burns if h in burns)
        if any(h not in burns for h in state.spent_burns):
            verified = -1
        return minted, verified, sum(b.amount for b in burns.values())

    def summary(self) -> str:
        counts = {v: 0 for v in Verdict}
        for v in self.verdicts.values():
            counts[v] += 1
        n = len(self.verdicts)
        minted, verified, burned = self.conservation()
        gas = self.gas_by_role()
        lines = [
            f"scenario: {self.scenario.name} (seed {self.scenario.seed}, {self.scenario.variant}, {self.scenario.sync_rule})",
            f"{counts[Verdict.COMMITTED]}/{n} committed",
            f"aborted: {counts[Verdict.ABORTED]}  insured-loss: {counts[Verdict.INSURED_LOSS]}  "
            f"violations: {counts[Verdict.VIOLATION]}",
            f"ticks: {self.ticks} ({'quiescent' if self.quiescent else 'max ticks reached'})",
            f"minted on B: {minted}  verified burns: {verified}  burned on A: {burned}",
            "gas by role: " + "  ".join(f"{role}={float(total):.1f}" for role, total in gas.items()),
        ]
        return "\n".join(lines) + "\n"

    def gas_by_role(self) -> dict[str, Fraction]:
        roles = {"relay": Fraction(0), "client": Fraction(0), "adversary": Fraction(0)}
        relay_names = set(self.contract.state.relay_pool)
        for row in self.contract.gas_rows:
            if row.kind == "sync" or row.sender in relay_names:
                role = "relay"
            elif row.sender.startswith("replayer"):
                role = "adversary"
            else:
                role = "client"
            roles[role] += row.weighted(self.contract.weights)
        return roles


# --------------------------------------------------------------------------
# simulation


class Simulation:
    def __init__(self, scenario: Scenario) -> None:
        scenario.validate()
        self.scenario = scenario
        params = ChainParams(
            delta=scenario.delta,
            epoch_length=scenario.epoch_length,
            committee_size=scenario.committee_size,
            threshold=scenario.threshold,
            confirmation_depth=scenario.confirmation_depth,
            rotation_seed=b"rotation" + scenario.seed.to_bytes(8, "big"),
        )
        self.variant = scenario.variant
        self.chain_a = ChainA(params, validator_seeds(scenario.seed, scenario.validator_pool), dict(scenario.balances))
        relay_names = tuple(f"relay{i}" for i in range(len(scenario.relays)))
        self.contract = BridgeContract(
            delta=scenario.delta,
            epoch_length=scenario.epoch_length,
            genesis_committee=self.chain_a.headers[0].pks,
            relay_pool=relay_names if scenario.variant == "stateful" else (),
            threshold=scenario.threshold,
            sync_rule=scenario.sync_rule,
        )
        self.chain_b = ChainB(self.contract, on_include=self._on_include)
        collusion = _CommitteeView(self.chain_a) if scenario.out_of_model else None
        self.relays = [Relay(name, mode, collusion) for name, mode in zip(relay_names, scenario.relays)]
        self.fullnodes = [FullNode(self.chain_a, mode, f"full{i}") for i, mode in enumerate(scenario.fullnodes)]
        self.trace: list[TraceEvent] = []
        self.now = 0
        self.mempool: list[BurnTx] = []
        self._dropped: set[bytes] = set()
        self.checkpoints: list[tuple[Any, int]] = []
        self.checkpoint_ticks: dict[int, int] = {}
        self.sync_ticks: dict[int, int] = {}
        self._replayed: set[int] = set()
        self._queue: list[tuple[int, int, int]] = []
        self.sessions: list[TransferSession] = []
        nonces: dict[str, int] = {}
        for i, t in enumerate(scenario.transfers):
            nonce = nonces.get(t.client, 0)
            nonces[t.client] = nonce + 1
            session = TransferSession(
                session_id=f"x{i}",
                client_addr=t.client,
                amount=t.amount,
                start_tick=t.tick,
                nonce=nonce,
                crash_before_burn=t.crash == "before-burn",
            )
            self.sessions.append(session)
            heapq.heappush(self._queue, (t.tick, i, i))
        self._seq = len(self.sessions)

    # environment used by client sessions ---------------------------------

    def log(self, actor: str, kind: str, payload: bytes = b"") -> None:
        digest = hashlib.sha256(payload).hexdigest()[:16]
        self.trace.append(TraceEvent(self.now, actor, kind, digest))

    def submit_a(self, tx: BurnTx) -> None:
        self.mempool.append(tx)

    def dropped_a(self, tx_id: bytes) -> bool:
        return tx_id in self._dropped

    def submit_b(self, sender: str, tx: Any) -> int:
        return self.chain_b.submit(sender, tx, self.now)

    def receipt_b(self, ticket: int) -> Any:
        return self.chain_b.receipt(ticket)

    def contract_last_seq(self) -> int:
        return self.contract.state.last_seq

    def is_spent(self, burn_id: bytes) -> bool:
        return burn_id in self.contract.state.spent_burns

    # loop -----------------------------------------------------------------

    def _on_include(self, entry: LogEntry) -> None:
        tx, receipt = entry.tx, entry.receipt
        outcome = "accepted" if receipt.accepted else f"rejected:{receipt.reason.value}"
        if isinstance(tx, SyncTx):
            self.log(tx.relay, f"sync-{outcome}:{tx.header.height}", tx.header.encode())
            if receipt.accepted:
                self.sync_ticks.setdefault(tx.header.height, self.now)
                if self.contract.state.active_relay == tx.relay and self._last_active != tx.relay:
                    self.log(tx.relay, "takeover")
            self._note_active()
        else:
            self.log(entry.sender, f"mint-{outcome}", tx.burn_tx.id)

    def _note_active(self) -> None:
        active = self.contract.state.active_relay
        if active != self._last_active:
            self.log("contract", f"active-relay:{active}")
            self._last_active = active

    def _produce(self) -> None:
        valid, dropped = self.chain_a.select_valid(self.mempool)
        self.mempool = []
        for tx in dropped:
            self._dropped.add(tx.id)
            self.log("chainA", "tx-dropped", tx.id)
        header = self.chain_a.produce_block(valid)
        self.log("chainA", f"block:{header.height}", header.digest)
        if header.is_checkpoint:
            self.checkpoints.append((header, self.now))
            self.checkpoint_ticks[header.height] = self.now
            self.log("chainA", f"checkpoint:{header.height}", header.digest)

    def _relays(self) -> None:
        view = self.contract.view
        for relay in self.relays:
            kind = "sync-submitted" if relay.rank(view) == 0 else "takeover-submitted"
            for tx in relay.watch_and_takeover(view, self.checkpoints, self.now, self.scenario.tau):
                self.log(relay.name, f"{kind}:{tx.header.height}", tx.header.encode())
                self.chain_b.submit(relay.name, tx, self.now)

    def _replay(self) -> None:
        for entry in self.chain_b.log:
            if entry.ticket in self._replayed or not entry.receipt.accepted:
                continue
            if not isinstance(entry.tx, (MintTx, StatelessMintTx)) or entry.sender.startswith("replayer"):
                continue
            self._replayed.add(entry.ticket)
            for k in range(self.scenario.replayers):
                name = f"replayer{k}"
                self.log(name, "replay-submitted", entry.tx.burn_tx.id)
                self.chain_b.submit(name, entry.tx, self.now)

    def _quiescent(self) -> bool:
        if not all(s.terminal for s in self.sessions) or self._queue:
            return False
        # chain A never stops, so an in-flight sync is steady state; client
        # and adversary transactions must all be settled
        if any(not isinstance(p[3], SyncTx) for p in self.chain_b.pending):
            return False
        if self.variant == "stateless":
            return True
        due = [h for h, t in self.checkpoint_ticks.items() if t < self.now]
        return not due or max(due) // self.scenario.delta <= self.contract.state.last_seq

    def run(self) -> RunResult:
        self._last_active = self.contract.state.active_relay
        quiescent = False
        for now in range(1, self.scenario.max_ticks + 1):
            self.now = now
            self._produce()
            self.chain_b.include(now)
            if self.variant == "stateful":
                self._relays()
            if self.scenario.replayers:
                self._replay()
            while self._queue and self._queue[0][0] <= now:
                _, _, idx = heapq.heappop(self._queue)
                wake = self.sessions[idx].step(now, self)
                if wake is not None:
                    heapq.heappush(self._queue, (wake, self._seq, idx))
                    self._seq += 1
            if self._quiescent():
                quiescent = True
                break
        result = RunResult(
            scenario=self.scenario,
            chain_a=self.chain_a,
            chain_b=self.chain_b,
            contract=self.contract,
            sessions=self.sessions,
            fullnodes=self.fullnodes,
            trace=self.trace,
            ticks=self.now,
            quiescent=quiescent,
            checkpoint_ticks=self.checkpoint_ticks,
            sync_ticks=self.sync_ticks,
        )
        result.verdicts = check_atomicity(result)
        result.metrics = build_metrics(result)
        return result


class _CommitteeView:
    """Epoch -> committee keys, for out-of-model collusion scenarios."""

    def __init__(self, chain: ChainA) -> None:
        self._chain = chain

    def __getitem__(self, epoch: int):
        return self._chain.committee(epoch)


def run(scenario: Scenario) -> RunResult:
    return Simulation(scenario).run()


def check_atomicity(result: RunResult) -> dict[str, Verdict]:
    """Classify every transfer by what is committed on each chain."""
    spent = result.contract.state.spent_burns
    all_faulty = not any(node.honest for node in result.fullnodes)
    claims = {e.actor for e in result.trace if e.kind == "insurance-claim"}
    verdicts = {}
    for s in result.sessions:
        burned = s.burn is not None and result.chain_a.find_tx(s.burn.id) is not None
        minted = s.burn is not None and s.burn.id in spent
        if burned and minted:
            verdict = Verdict.COMMITTED
        elif not burned and not minted:
            verdict = Verdict.ABORTED
        elif burned and all_faulty and s.phase is Phase.ABORTED_INSURED and s.session_id in claims:
            verdict = Verdict.INSURED_LOSS
        else:
            verdict = Verdict.VIOLATION
        verdicts[s.session_id] = verdict
    return verdicts


def build_metrics(result: RunResult) -> list[tuple[str, ...]]:
    rows: list[tuple[str, ...]] = [("section", "key", "fields")]
    sc = result.scenario
    rows.append(("run", "scenario", sc.name))
    rows.append(("run", "seed", str(sc.seed)))
    rows.append(("run", "ticks", str(result.ticks)))
    rows.append(("run", "quiescent", str(result.quiescent).lower()))
    rows.append(("run", "trace_digest", result.trace_digest()))
    for s in result.sessions:
        history = ",".join(f"{p.value}@{t}" for t, p in s.history)
        end = s.history[-1][0] if s.history else s.start_tick
        rows.append(
            (
                "transfer",
                s.session_id,
                s.client_addr,
                str(s.amount),
                result.verdicts[s.session_id].value,
                history,
                f"latency={end - s.start_tick}",
                f"attempts={s.attempts}",
            )
        )
        for pb_bytes, pb_digests, pt_bytes, pt_digests in s.proof_sizes:
            rows.append(
                ("proof", s.session_id, f"pi_b_bytes={pb_bytes}", f"pi_b_digests={pb_digests}",
                 f"pi_t_bytes={pt_bytes}", f"pi_t_digests={pt_digests}")
            )
    for height in sorted(result.checkpoint_ticks):
        synced = result.sync_ticks.get(height)
        rows.append(
            ("checkpoint", str(height), f"created={result.checkpoint_ticks[height]}",
             f"synced={synced if synced is not None else '-'}")
        )
    for row in result.contract.gas_report_rows()[1:]:
        rows.append(("gas",) + row)
    minted, verified, burned = result.conservation()
    rows.append(("conservation", "minted", str(minted)))
    rows.append(("conservation", "verified_burns", str(verified)))
    rows.append(("conservation", "burned_on_a", str(burned)))
    for role, total in result.gas_by_role().items():
        rows.append(("gas_total", role, f"{float(total):.1f}"))
    return rows


def write_outputs(result: RunResult, out_dir: Union[str, Path]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.tsv").write_text(result.trace_text(), encoding="utf-8")
    (out / "metrics.tsv").write_text(result.metrics_text(), encoding="utf-8")
    (out / "summary.txt").write_text(result.summary(), encoding="utf-8")
