from dataclasses import replace

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from horizon.sim import (
    Scenario,
    TransferSpec,
    ScenarioError,
    Verdict,
    bundled_scenarios,
    load_scenario,
    parse_scenario,
    run,
    write_outputs,
)

SCEN = {p.stem: p for p in bundled_scenarios()}
MINIMAL = """
version = 1
[balances]
alice = 5
[[transfers]]
tick = 1
client = "alice"
amount = 5
"""


def test_corpus_size_and_coverage():
    assert len(SCEN) >= 20
    scenarios = [load_scenario(p) for p in SCEN.values()]
    relays = {m for s in scenarios for m in s.relays}
    nodes = {m for s in scenarios for m in s.fullnodes}
    assert relays == {"honest", "silent", "bad-signature", "skip-checkpoint", "wrong-root"}
    assert nodes == {"honest", "silent", "wrong-proof", "stale-checkpoint"}
    assert {s.variant for s in scenarios} == {"stateful", "stateless"}
    assert {s.sync_rule for s in scenarios} == {"strict", "monotonic"}
    assert any(s.replayers for s in scenarios)
    assert any(len(s.relays) == 3 for s in scenarios)


def test_minimal_scenario_defaults():
    s = parse_scenario(MINIMAL)
    assert s.variant == "stateful" and s.relays == ("honest",) and s.delta == 4
    assert run(s).verdicts == {"x0": Verdict.COMMITTED}


@pytest.mark.parametrize(
    "edit, path",
    [
        ("version = 2", "version"),
        ('variant = "optimistic"', "variant"),
        ("[chain]\ndelta = 3", "chain.epoch_length"),
        ('[chain]\ndelta = "4"', "chain.delta"),
        ("[chain]\nspeed = 1", "chain.speed"),
        ('[pools]\nrelays = ["lazy"]', "pools.relays[0]"),
        ('[pools]\nfullnodes = ["honest", 3]', "pools.fullnodes[1]"),
        ('[[transfers]]\ntick = 0\nclient = "alice"\namount = 1', "transfers[1].tick"),
        ('[[transfers]]\ntick = 1\nclient = "zed"\namount = 1', "transfers[1].client"),
        ('[[transfers]]\ntick = 1\nclient = "alice"', "transfers[1].amount"),
        ('[chain]\nthreshold = "1/0"', "chain.threshold"),
        ("colour = 1", "colour"),
    ],
)
def test_invalid_scenarios_report_field_path(edit, path):
    text = MINIMAL.replace("version = 1", "") if edit.startswith("version") else MINIMAL
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(edit + "\n" + text if not edit.startswith("[") else text + "\n" + edit)
    assert exc.value.path == path


def test_toml_syntax_error():
    with pytest.raises(ScenarioError, match="parse error"):
        parse_scenario("version = = 1", source="broken")


def test_honest_baseline_end_to_end():
    r = run(load_scenario(SCEN["honest"]))
    assert r.quiescent
    assert set(r.verdicts.values()) == {Verdict.COMMITTED}
    minted, verified, burned = r.conservation()
    assert minted == verified == burned == 22
    assert r.summary().splitlines()[1] == "3/3 committed"


def test_failover_takeover_event_in_trace():
    r = run(load_scenario(SCEN["relay-silent-failover"]))
    assert set(r.verdicts.values()) == {Verdict.COMMITTED}
    assert any(e.actor == "relay1" and e.kind == "takeover" for e in r.trace)


def test_insured_loss_not_violation():
    r = run(load_scenario(SCEN["fullnodes-all-silent"]))
    assert set(r.verdicts.values()) == {Verdict.INSURED_LOSS}


def test_replayers_never_double_mint():
    r = run(load_scenario(SCEN["replay"]))
    replays = [e for e in r.trace if e.kind.startswith("mint-") and e.actor.startswith("replayer")]
    assert replays and all(e.kind == "mint-rejected:replay" for e in replays)
    assert r.conservation()[0] == r.conservation()[1]


def test_atomicity_checker_flags_monotonic_gap():
    # a skipping relay plus a slow watcher leaves permanent gaps under the
    # monotonic rule: burns in skipped windows can never be minted
    base = load_scenario(SCEN["honest"])
    r = run(replace(base, sync_rule="monotonic", tau=5, relays=("skip-checkpoint", "honest")))
    assert Verdict.VIOLATION in r.verdicts.values()
    r = run(replace(base, sync_rule="strict", tau=5, relays=("skip-checkpoint", "honest")))
    assert set(r.verdicts.values()) == {Verdict.COMMITTED}


def test_atomicity_checker_flags_colluding_committee():
    base = load_scenario(SCEN["honest"])
    r = run(replace(base, out_of_model=True, relays=("wrong-root", "honest")))
    assert set(r.verdicts.values()) == {Verdict.VIOLATION}


def test_outputs_written(tmp_path):
    r = run(load_scenario(SCEN["honest"]))
    write_outputs(r, tmp_path)
    trace = (tmp_path / "trace.tsv").read_text().splitlines()
    assert all(len(line.split("\t")) == 4 for line in trace)
    metrics = (tmp_path / "metrics.tsv").read_text()
    assert "transfer\tx0\talice\t10\tcommitted" in metrics
    assert "\npi_b_bytes" not in metrics and "pi_b_bytes=" in metrics
    assert (tmp_path / "summary.txt").read_text().splitlines()[1] == "3/3 committed"


def test_seed_changes_trace_but_not_outcome():
    s = load_scenario(SCEN["honest"])
    a, b = run(s), run(s.with_seed(99))
    assert a.trace_digest() != b.trace_digest()
    assert a.verdicts == b.verdicts


def test_max_ticks_stops_unfinished_run():
    s = replace(load_scenario(SCEN["honest"]), max_ticks=3)
    r = run(s)
    assert not r.quiescent and r.ticks == 3
    assert Verdict.VIOLATION in r.verdicts.values()

RELAY_MODES = ["honest", "silent", "bad-signature", "skip-checkpoint", "wrong-root"]
NODE_MODES = ["honest", "silent", "wrong-proof", "stale-checkpoint"]


@st.composite
def in_model_scenarios(draw):
    variant = draw(st.sampled_from(["stateful", "stateless"]))
    delta = draw(st.sampled_from([1, 2, 4]))
    relays = draw(st.lists(st.sampled_from(RELAY_MODES), min_size=0, max_size=3))
    relays = tuple(relays) + ("honest",) if variant == "stateful" else ()
    clients = ["alice", "bob", "carol"]
    transfers = draw(
        st.lists(
            st.builds(TransferSpec, st.integers(1, 20), st.sampled_from(clients), st.integers(0, 40),
                      st.sampled_from(["none", "none", "none", "before-burn"])),
            min_size=1,
            max_size=6,
        )
    )
    return Scenario(
        name="generated",
        seed=draw(st.integers(0, 2**16)),
        variant=variant,
        tau=draw(st.integers(1, 3)),
        replayers=draw(st.integers(0, 1)),
        delta=delta,
        epoch_length=delta * draw(st.sampled_from([1, 2, 4])),
        relays=relays,
        fullnodes=tuple(draw(st.lists(st.sampled_from(NODE_MODES), min_size=1, max_size=3))),
        balances=tuple((c, 60) for c in clients),
        transfers=tuple(transfers),
    )


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(in_model_scenarios())
def test_generated_scenarios_are_atomic_and_conserve(sc):
    r = run(sc)
    assert r.quiescent
    assert Verdict.VIOLATION not in r.verdicts.values()
    minted, verified, _ = r.conservation()
    assert minted == verified
    assert run(sc).trace_digest() == r.trace_digest()
