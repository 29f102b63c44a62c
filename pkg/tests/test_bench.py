from horizon.bench import (
    build_chain,
    measure_mint,
    mint_cost_table,
    pi_b_bound,
    pi_b_sizes,
    pi_t_bound,
    pi_t_sizes,
    proof_size_table,
)


def test_bounds():
    assert [pi_b_bound(d) for d in (1, 2, 4, 16, 64, 256)] == [1, 3, 5, 9, 13, 17]
    assert [pi_t_bound(b) for b in (1, 2, 3, 8, 32)] == [0, 1, 2, 3, 5]


def test_build_chain_places_burn_before_last_checkpoint():
    chain, burn = build_chain(4, 2, 3)
    assert chain.height == 8 and all(len(b) == 3 for b in chain.blocks[1:])
    assert chain.find_tx(burn.id) == (5, 0)


def test_stateful_cost_independent_of_length():
    rows = mint_cost_table((8,), (1, 2, 6))
    assert len({r[4:9] for r in rows[1:]}) == 1


def test_stateless_cost_grows_with_epochs():
    ms = [measure_mint("stateless", 4, e) for e in (1, 2, 4)]
    assert [m.handoff for m in ms] == [0, 1, 3]
    assert ms[0].gas.sigverifies < ms[1].gas.sigverifies < ms[2].gas.sigverifies


def test_pi_b_grows_logarithmically():
    maxima = [max(c for _, c in pi_b_sizes(d)) for d in (4, 16, 64)]
    assert maxima == sorted(maxima) and maxima[-1] <= pi_b_bound(64)
    # the checkpoint block itself needs no window proof
    assert pi_b_sizes(8)[-1] == (8, 0)


def test_pi_t_sizes():
    assert [c for _, c in pi_t_sizes(5)] == [3] * 5


def test_proof_size_table_within_bounds():
    for _, _, got, bound in proof_size_table((4, 16), (1, 8))[1:]:
        assert int(got) <= int(bound)
