"""
Lying and silent full nodes
===========================

A client never trusts one full node.  A bad proof is rejected by the contract
and the client moves on to the next node.  If every node is faulty, the
client gives up and files an insurance claim; the burn is then an insured
loss rather than a broken transfer.
"""

# %%
from horizon.sim import bundled_scenarios, check_atomicity, load_scenario, run

scenarios = {p.stem: p for p in bundled_scenarios()}
for name in ("fullnode-wrong-proof-first", "fullnode-silent-first", "fullnodes-all-wrong-proof"):
    result = run(load_scenario(scenarios[name]))
    verdicts = check_atomicity(result)
    attempts = [s.attempts for s in result.sessions]
    print(f"{name:28s} {sorted(v.value for v in verdicts.values())} attempts={attempts}")

# %%
# A replayer copies every accepted mint and resubmits it; the burn hash is
# recorded once spent, so the copy is refused.
result = run(load_scenario(scenarios["replay"]))
print([e.kind for e in result.trace if e.kind.startswith("mint-")])
print("minted, verified, burned:", result.conservation())
