"""Bridge from a BFT chain to a smart-contract chain.

Chain A commits to its history with Merkle mountain ranges in periodic
checkpoint headers signed by a rotating committee.  Relays push those
checkpoints to a contract on chain B; clients burn on A and mint on B with
a short proof of burn.  :mod:`horizon.sim` runs the whole system
deterministically and checks every transfer is atomic.
"""

from .chain import BurnTx, ChainA, ChainB, ChainParams
from .client import Phase, TransferSession
from .contract import BridgeContract, MintTx, Reject, StatelessMintTx
from .fullnode import FullNode, FullNodeMode
from .relay import Relay, RelayMode, SyncTx
from .sim import Scenario, Verdict, check_atomicity, load_scenario, run

__all__ = [
    "BridgeContract",
    "BurnTx",
    "ChainA",
    "ChainB",
    "ChainParams",
    "FullNode",
    "FullNodeMode",
    "MintTx",
    "Phase",
    "Reject",
    "Relay",
    "RelayMode",
    "Scenario",
    "StatelessMintTx",
    "SyncTx",
    "TransferSession",
    "Verdict",
    "check_atomicity",
    "load_scenario",
    "run",
]
