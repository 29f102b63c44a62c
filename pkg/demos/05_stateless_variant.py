"""
Stateless contract
==================

Without relays the contract stores only the genesis committee.  Each mint
carries the chain of committee handoffs up to the burn's epoch, so the proof
and the signature checks grow with the number of epochs.
"""

# %%
from horizon.bench import measure_mint

for epochs in (1, 2, 4):
    stateful = measure_mint("stateful", 16, epochs)
    stateless = measure_mint("stateless", 16, epochs)
    print(
        f"epochs={epochs}  stateful sigverifies={stateful.gas.sigverifies} calldata={stateful.gas.calldata}"
        f"  stateless sigverifies={stateless.gas.sigverifies} calldata={stateless.gas.calldata}"
    )

# %%
# The same transfers go through under either variant.
from horizon.sim import bundled_scenarios, load_scenario, run

scenarios = {p.stem: p for p in bundled_scenarios()}
print(run(load_scenario(scenarios["stateless-multi-epoch"])).summary())
