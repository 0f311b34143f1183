from collections import Counter
from fractions import Fraction

import pytest

from src.game_core import PLAYER_1, Edge, GameGraph, State, shift_weights
from src.multicycle import (
    CircuitWitness, MultiCycleWitness, NotStronglyConnectedError, decompose_flow,
    find_nonneg_circuit, nonneg_circuit_reachable, nonneg_multicycle, with_decrements,
    zero_circuit_exists,
)


def one_player(dim, edges, states=None):
    names = states or sorted({e[1] for e in edges} | {e[2] for e in edges})
    return GameGraph(
        dim, tuple(State(n, PLAYER_1) for n in names),
        tuple(Edge(i, s, t, w) for i, s, t, w in edges), names[0],
    )


def test_multicycle_on_shifted_fig3(fig3_11):
    stats = Counter()
    witness = nonneg_multicycle(fig3_11, stats)
    assert witness is not None
    assert dict(witness.cycles) == {('loop_a',): 1, ('loop_b',): 1}
    assert witness.total(fig3_11) == (0, 0)
    assert witness.verify(fig3_11)
    assert stats['lp_solves'] == 1


def test_multicycle_trivial_cases():
    assert nonneg_multicycle(one_player(1, [('l', 'a', 'a', (-1,))])) is None
    zero = one_player(2, [('l', 'a', 'a', (0, 0))])
    assert dict(nonneg_multicycle(zero).cycles) == {('l',): 1}


def test_multicycle_needs_strong_connectivity(fig1):
    with pytest.raises(NotStronglyConnectedError):
        nonneg_multicycle(fig1)


def test_multicycle_witness_rejects_bad_factors(fig3_11):
    assert not MultiCycleWitness(((('loop_a',), Fraction(1)),)).verify(fig3_11)
    assert not MultiCycleWitness(((('loop_a', 'ab'), Fraction(1)),)).verify(fig3_11)
    halves = MultiCycleWitness(((('loop_a',), Fraction(1, 2)), (('loop_b',), Fraction(1, 2))))
    assert halves.verify(fig3_11)
    assert halves.scaled() == ((('loop_a',), 1), (('loop_b',), 1))


def test_decompose_balanced_flow(fig3):
    cycles = decompose_flow(fig3, {'loop_a': 2, 'ab': 1, 'ba': 1, 'loop_b': 3})
    assert cycles == {('loop_a',): 2, ('ab', 'ba'): 1, ('loop_b',): 3}


def test_zero_circuit_examples():
    found, walk = zero_circuit_exists(one_player(2, [('p', 'a', 'a', (1, -1)), ('q', 'a', 'a', (-1, 1))]))
    assert found
    assert sorted(walk.edges) == ['p', 'q']
    assert walk.verify(one_player(2, [('p', 'a', 'a', (1, -1)), ('q', 'a', 'a', (-1, 1))]), zero=True)
    assert zero_circuit_exists(one_player(2, [('p', 'a', 'a', (1, 0))])) == (False, None)


def test_barrier_has_multicycle_but_no_zero_circuit(barrier):
    assert nonneg_multicycle(barrier) is not None
    found, walk = zero_circuit_exists(barrier)
    assert not found and walk is None


def test_zero_circuit_leaves_out_costly_connectors():
    # the loops cancel on their own; the connecting edges only add weight
    g = one_player(2, [
        ('p', 'a', 'a', (1, -1)), ('q', 'a', 'a', (-1, 1)),
        ('ab', 'a', 'b', (1, 1)), ('ba', 'b', 'a', (1, 1)),
    ])
    found, walk = zero_circuit_exists(g)
    assert found
    assert set(walk.edges) == {'p', 'q'}


def test_zero_circuit_walk_bound():
    g = one_player(1, [('p', 'a', 'a', (3,)), ('q', 'a', 'a', (-5,))])
    found, walk = zero_circuit_exists(g, walk_bound=7)
    assert found and walk is None
    found, walk = zero_circuit_exists(g, walk_bound=8)
    assert sorted(walk.edges) == ['p'] * 5 + ['q'] * 3


def test_with_decrements_adds_unit_loops(fig3):
    g, added = with_decrements(fig3)
    assert len(added) == 4
    assert g.edge('sa~dec0').weight == (-1, 0)
    assert g.edge('sb~dec1').weight == (0, -1)


@pytest.mark.parametrize('shift, expected', [((0, 0), True), ((1, 1), False), ((2, 2), False)])
def test_nonneg_circuit_reachable_on_fig3(fig3, shift, expected):
    assert nonneg_circuit_reachable(shift_weights(fig3, shift), 'sa') == expected


def test_nonneg_circuit_needs_three_cycles():
    # no single loop or pair is nonnegative, all three together sum to zero
    g = one_player(3, [
        ('a', 'c', 'c', (2, -1, -1)), ('b', 'c', 'c', (-1, 2, -1)), ('d', 'c', 'c', (-1, -1, 2)),
    ])
    found, walk = find_nonneg_circuit(g)
    assert found
    assert sorted(walk.edges) == ['a', 'b', 'd']
    assert walk.verify(g)


def test_nonneg_circuit_reachability_respects_start():
    g = one_player(1, [('ab', 'a', 'b', (0,)), ('bb', 'b', 'b', (-1,)), ('cc', 'c', 'c', (0,)),
                       ('ca', 'c', 'a', (0,))])
    assert not nonneg_circuit_reachable(g, 'a')
    assert nonneg_circuit_reachable(g, 'c')


def test_adding_nonnegative_loop_keeps_answer(fig3_11):
    assert not nonneg_circuit_reachable(fig3_11, 'sa')
    extended = fig3_11.with_edges(list(fig3_11.edges) + [Edge('bonus', 'sb', 'sb', (0, 1))])
    assert nonneg_circuit_reachable(extended, 'sa')
    assert nonneg_circuit_reachable(
        extended.with_edges(list(extended.edges) + [Edge('more', 'sa', 'sa', (0, 0))]), 'sa'
    )


def test_circuit_witness_checks_closure(fig3):
    assert CircuitWitness(('ab', 'ba')).verify(fig3)
    assert not CircuitWitness(('ab',)).verify(fig3)
    assert not CircuitWitness(('ab', 'loop_a')).verify(fig3)


def test_zero_circuit_found_inside_disconnected_support(barrier):
    g = barrier.with_edges(list(barrier.edges) + [Edge('z', 'u', 'u', (0, 0, 0))])
    found, walk = zero_circuit_exists(g)
    assert found
    assert walk.edges == ('z',)
