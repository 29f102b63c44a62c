import pytest

from horizon.commitments import MmrProof, merkle_verify, mmr_verify
from horizon.fullnode import FullNode, NotFound, NotYetCheckpointed, PoB, StatelessProof, build_pob, build_stateless_proof



def test_pob_for_every_block(chain):
    for k in range(1, 17):
        burn = chain.blocks[k][0]
        pob = build_pob(chain, burn.id)
        i = chain.params.checkpoint_for(k)
        assert pob.checkpoint_height == i and pob.header == chain.headers[k]
        assert merkle_verify(pob.pi_t, burn.id, chain.headers[k].tx_root)
        if k == i:
            assert pob.pi_b == MmrProof(0)
        else:
            assert mmr_verify(pob.pi_b, chain.headers[k].digest, chain.headers[i].mmr_root, 3)
        assert PoB.decode(pob.encode()) == pob


def test_not_found_and_not_yet_checkpointed(chain):
    with pytest.raises(NotFound):
        build_pob(chain, bytes(32))
    with pytest.raises(NotYetCheckpointed):
        build_pob(chain, chain.blocks[17][0].id)


def test_stateless_proof_shape(chain):
    burn = chain.blocks[2][0]
    p = build_stateless_proof(chain, burn.id)
    assert p.header_bcp.height == 4 and p.header_tip.height == 16
    assert p.pi_cp.leaf_index == 0
    assert mmr_verify(p.pi_cp, p.header_bcp.digest, p.header_tip.cp_mmr_root, 3)
    assert [h.height for h in p.epoch_handoff] == [8]
    assert StatelessProof.decode(p.encode()) == p
    tip_burn = chain.blocks[15][0]
    q = build_stateless_proof(chain, tip_burn.id)
    assert q.header_tip is None and q.pi_cp is None


def test_modes(chain):
    burn = chain.blocks[6][0]
    honest = build_pob(chain, burn.id)
    assert FullNode(chain, "honest").handle_pob_request(burn.id) == honest
    assert FullNode(chain, "silent").handle_pob_request(burn.id) is None
    wrong = FullNode(chain, "wrong-proof").handle_pob_request(burn.id)
    assert wrong != honest and wrong.checkpoint_height == honest.checkpoint_height
    stale = FullNode(chain, "stale-checkpoint").handle_pob_request(burn.id)
    assert stale.checkpoint_height == honest.checkpoint_height - chain.params.delta
    assert FullNode(chain, "silent").handle_stateless_request(burn.id) is None
    assert not FullNode(chain, "wrong-proof").honest
