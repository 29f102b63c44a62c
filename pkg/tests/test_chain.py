import hashlib

import pytest

from horizon.chain import (
    EMPTY_TX_ROOT,
    BlockHeader,
    BurnTx,
    ChainA,
    ChainParams,
    InvalidTransaction,
    TransferTx,
    validator_seeds,
)
from horizon.commitments import Mmr, empty_mmr_root, merkle_build
from horizon.crypto import quorum_verify

from conftest import make_chain


def test_params_validation():
    with pytest.raises(ValueError):
        ChainParams(delta=3, epoch_length=8).validate()
    with pytest.raises(ValueError):
        ChainParams(delta=0).validate()
    p = ChainParams(delta=4, epoch_length=8)
    assert [p.epoch_of(h) for h in (0, 1, 8, 9, 16, 17)] == [0, 0, 0, 1, 1, 2]
    assert [p.checkpoint_for(h) for h in (1, 3, 4, 5)] == [4, 4, 4, 8]


def test_genesis_and_linkage(chain):
    g = chain.headers[0]
    assert g.height == 0 and g.tx_root == EMPTY_TX_ROOT and not g.is_checkpoint
    for prev, h in zip(chain.headers, chain.headers[1:]):
        assert h.parent == hashlib.sha256(prev.encode()).digest()
        committee = [k.public for k in chain.committee(h.epoch)]
        assert h.pks == tuple(committee)
        assert quorum_verify(h.qsig, h.pks, h.signing_payload())


def test_checkpoint_and_epoch_blocks(chain):
    assert chain.checkpoint_heights == [4, 8, 12, 16]
    for h in chain.headers[1:]:
        assert h.is_checkpoint == (h.height % 4 == 0)
        assert h.is_epoch_block == (h.height % 8 == 0)
    # epoch block of epoch e carries committee e+1, signed by committee e
    eb = chain.headers[8]
    assert eb.epoch == 0
    assert eb.next_committee == tuple(k.public for k in chain.committee(1))


def test_checkpoint_window_and_checkpoint_chain(chain):
    for i in chain.checkpoint_heights:
        window = [hashlib.sha256(chain.headers[k].encode()).digest() for k in range(i - 3, i)]
        assert chain.headers[i].mmr_root == Mmr.from_leaves(window).root()
        prior = [hashlib.sha256(chain.headers[c].encode()).digest() for c in chain.checkpoint_heights if c < i]
        expected = Mmr.from_leaves(prior).root() if prior else empty_mmr_root()
        assert chain.headers[i].cp_mmr_root == expected


def test_tx_root(chain):
    h = chain.headers[3]
    assert h.tx_root == merkle_build([tx.id for tx in chain.blocks[3]]).root


def test_committee_rotation_deterministic():
    a = make_chain(blocks=0, seed=3, pool=10)
    b = make_chain(blocks=0, seed=3, pool=10)
    assert [k.public for k in a.committee(5)] == [k.public for k in b.committee(5)]
    assert a.committee(0) == tuple(a.pool[:4])
    assert len({tuple(k.public for k in a.committee(e)) for e in range(8)}) > 1


def test_header_encoding_round_trip(chain):
    for h in chain.headers:
        assert BlockHeader.decode(h.encode()) == h


def test_invalid_transactions_leave_chain_untouched():
    c = ChainA(ChainParams(), validator_seeds(0, 8), {"alice": 10})
    with pytest.raises(InvalidTransaction):
        c.produce_block([BurnTx("alice", 5, 0), BurnTx("alice", 6, 1)])
    with pytest.raises(InvalidTransaction):
        c.produce_block([BurnTx("alice", 0, 0)])
    with pytest.raises(InvalidTransaction):
        c.produce_block([BurnTx("alice", 1, 0, target="bob")])
    assert c.height == 0 and c.balances == {"alice": 10}
    c.produce_block([BurnTx("alice", 4, 0), TransferTx("alice", "bob", 6, 1)])
    assert c.balances == {"alice": 0, "bob": 6}
    with pytest.raises(InvalidTransaction):
        c.produce_block([BurnTx("alice", 4, 0)])


def test_select_valid_drops_overdrafts_and_duplicates():
    c = ChainA(ChainParams(), validator_seeds(0, 8), {"alice": 10})
    a, b, dup = BurnTx("alice", 6, 0), BurnTx("alice", 6, 1), BurnTx("alice", 1, 2)
    valid, dropped = c.select_valid([a, b, dup, dup])
    assert valid == [a, dup] and dropped == [b, dup]


def test_find_tx_and_confirmation_depth():
    c = make_chain(blocks=5)
    c2 = ChainA(ChainParams(confirmation_depth=2), validator_seeds(0, 8), {"alice": 10})
    tx = c.blocks[3][0]
    assert c.find_tx(tx.id) == (3, 0)
    for _ in range(3):
        c2.produce_block()
    assert c2.confirm_depth(1) and not c2.confirm_depth(2)
