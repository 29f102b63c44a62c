import pytest

from horizon.chain import BurnTx, ChainA, ChainParams, TransferTx, validator_seeds
from horizon.contract import BridgeContract
from horizon.relay import SyncTx


def make_chain(delta=4, epoch_length=8, blocks=19, per_block=1, seed=0, committee_size=4, pool=8):
    """Chain where block h holds ``per_block`` burns by alice (nonces continue across blocks)."""
    params = ChainParams(delta=delta, epoch_length=epoch_length, committee_size=committee_size)
    chain = ChainA(params, validator_seeds(seed, pool), {"alice": 10**6, "bob": 10**6})
    nonce = 0
    for _ in range(blocks):
        txs = []
        for _ in range(per_block):
            txs.append(BurnTx("alice", 1 + nonce % 7, nonce))
            nonce += 1
        chain.produce_block(txs)
    return chain


def make_contract(chain, relays=("relay0",), sync=True, **kw):
    contract = BridgeContract(
        delta=chain.params.delta,
        epoch_length=chain.params.epoch_length,
        genesis_committee=chain.headers[0].pks,
        relay_pool=relays,
        **kw,
    )
    if sync:
        for h in chain.checkpoint_heights:
            assert contract.apply(SyncTx(relays[0], chain.headers[h])).accepted
    return contract


@pytest.fixture(scope="module")
def chain():
    return make_chain()


__all__ = ["make_chain", "make_contract", "BurnTx", "TransferTx", "ACCEPTANCE_LINES"]


# acceptance criteria report one line each at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
