"""
One honest transfer
===================

Alice burns 5 coins on chain A, waits for the checkpoint that covers the
burn, asks a full node for a proof of burn and mints on chain B.  The run is
a pure function of the scenario, seed included.
"""

# %%
from horizon.sim import load_scenario, bundled_scenarios, run, check_atomicity

path = next(p for p in bundled_scenarios() if p.stem == "honest")
result = run(load_scenario(path))
print(result.summary())

# %%
# The session's phase history, with the tick each phase was entered.
session = result.sessions[0]
for tick, phase in session.history:
    print(f"{tick:3d}  {phase.value}")

# %%
# A few trace rows: blocks, checkpoints and syncs interleave with the client.
for event in result.trace:
    if event.kind.startswith(("checkpoint", "sync-accepted", "phase", "mint")):
        print(event.row())

print(check_atomicity(result))
