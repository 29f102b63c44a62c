from dataclasses import replace

import pytest

from horizon.chain import InvalidTransaction
from horizon.client import Phase, TERMINAL, TransferSession, start_transfer
from horizon.contract import Receipt, Reject
from horizon.sim import Simulation, load_scenario, run, bundled_scenarios

SCEN = {p.stem: p for p in bundled_scenarios()}


def scenario(name, **kw):
    return replace(load_scenario(SCEN[name]), **kw)


def phases(session):
    return [p for _, p in session.history]


def test_start_transfer_checks_balance():
    sim = Simulation(scenario("honest"))
    assert start_transfer(sim.chain_a, "alice", 10, 0).amount == 10
    with pytest.raises(InvalidTransaction):
        start_transfer(sim.chain_a, "alice", 1000, 0)
    with pytest.raises(InvalidTransaction):
        start_transfer(sim.chain_a, "alice", 0, 0)


def test_honest_session_walks_every_phase():
    r = run(scenario("honest"))
    for s in r.sessions:
        assert phases(s) == [Phase.INIT, Phase.BURNED, Phase.PROVED, Phase.MINTED]
        assert s.attempts == 1 and s.fullnode_cursor == 0


def test_rotates_away_from_faulty_full_node():
    for name in ("fullnode-wrong-proof-first", "fullnode-stale-first", "fullnode-silent-first"):
        r = run(scenario(name))
        assert all(s.phase is Phase.MINTED for s in r.sessions)
        assert all(s.fullnode_cursor >= 1 for s in r.sessions), name


def test_relay_lag_waits_instead_of_rotating():
    r = run(scenario("relay-slow-takeover"))
    assert all(s.phase is Phase.MINTED for s in r.sessions)
    assert any(s.lag_waits > 0 for s in r.sessions)
    assert all(s.fullnode_cursor == 0 for s in r.sessions)


def test_insurance_after_exhausting_full_nodes():
    r = run(scenario("fullnodes-all-silent"))
    for s in r.sessions:
        assert s.phase is Phase.ABORTED_INSURED and s.insurance_claim
        assert s.attempts == 2 * len(r.fullnodes)


def test_crash_and_refused_burn_abort():
    r = run(scenario("crash-before-burn"))
    assert [s.phase for s in r.sessions] == [Phase.MINTED, Phase.ABORTED, Phase.MINTED]
    r = run(scenario("insufficient-balance"))
    assert [s.phase for s in r.sessions] == [Phase.MINTED, Phase.ABORTED, Phase.ABORTED, Phase.MINTED]
    # the second overdraft passed the client check but was dropped by chain A
    assert r.sessions[1].burn is None


class _Env:
    """Minimal environment returning a scripted mint receipt."""

    variant = "stateful"

    def __init__(self, sim, receipt, spent):
        self._sim, self._receipt, self._spent = sim, receipt, spent
        self.chain_a, self.fullnodes = sim.chain_a, sim.fullnodes

    def receipt_b(self, ticket):
        return self._receipt

    def is_spent(self, burn_id):
        return self._spent

    def contract_last_seq(self):
        return 0

    def log(self, *a):
        pass

    def submit_b(self, sender, tx):
        return 0


def test_replay_reject_of_own_spent_burn_counts_as_minted():
    sim = Simulation(scenario("honest"))
    s = TransferSession("x", "alice", 10, 1, 0)
    s._awaiting, s.burn = "receipt", object.__new__(type("B", (), {"id": b"\x00" * 32}))
    assert s.step(5, _Env(sim, Receipt(False, Reject.REPLAY, None), spent=True)) is None
    assert s.phase is Phase.MINTED
    t = TransferSession("y", "alice", 10, 1, 0)
    t._awaiting, t.burn = "receipt", s.burn
    assert t.step(5, _Env(sim, Receipt(False, Reject.BAD_TX_PROOF, None), spent=False)) == 6
    assert t.fullnode_cursor == 1 and t.phase not in TERMINAL
