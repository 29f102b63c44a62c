"""
Relay failover
==============

The first relay in the pool goes silent.  The next relay waits ``tau`` ticks
past each checkpoint, submits the missing ones itself and takes over once the
contract accepts a sync from it.  Transfers still commit, a little later.
"""

# %%
from horizon.sim import bundled_scenarios, load_scenario, run

scenarios = {p.stem: p for p in bundled_scenarios()}
result = run(load_scenario(scenarios["relay-silent-failover"]))
print(result.summary())

# %%
for event in result.trace:
    if event.kind.startswith(("takeover", "active-relay")):
        print(event.row())

# %%
# Sync lag per checkpoint: ticks between creation on A and acceptance on B.
lags = {h: result.sync_ticks[h] - t for h, t in result.checkpoint_ticks.items() if h in result.sync_ticks}
print("worst lag", max(lags.values()), "ticks over", len(lags), "checkpoints")

# %%
# A relay that signs garbage is marked faulty on its first bad sync.
result = run(load_scenario(scenarios["relay-bad-signature"]))
print(sorted(result.contract.state.faulty))
print(result.summary())
