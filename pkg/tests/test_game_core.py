from fractions import Fraction

import numpy as np
import pytest

from src.game_core import (
    PLAYER_1, PLAYER_2, Edge, GameError, GameGraph, InvalidPlayError, LassoPlay, ObjectiveKind,
    ObjectiveSpec, ParseError, PlayPrefix, RestrictionError, State, attractor, energy_level,
    lasso_mean_payoff, mask_dimensions, parse_game, parse_rational, reachable_states, restrict,
    scc_decomposition, serialize_game, shift_weights,
)
from src.generators import random_game

FIG1_TEXT = """\
mwg 1
# player 2 moves at s0
dim 2
state s0 2
state s1 1
state s2 1
edge left s0 s1 -2 0
edge right s0 s2 0 0
edge loop1 s1 s1 0 0
edge ret_a s2 s0 1 -1
edge ret_b s2 s0 -1 1
init s0
"""


def test_parse_matches_fixture(fig1):
    g = parse_game(FIG1_TEXT)
    assert g == fig1
    assert g.owner('s0') == PLAYER_2
    assert [e.id for e in g.out_edges('s2')] == ['ret_a', 'ret_b']
    assert g.max_abs_weight() == 2


def test_serialize_then_parse_is_identity(fig1):
    assert parse_game(serialize_game(fig1)) == fig1


@pytest.mark.parametrize('text, line, column', [
    ('graph 1\n', 1, 1),
    ('mwg 1\ndim 2\nstate a 1\nedge e a a 1\ninit a\n', 4, 12),
    ('mwg 1\ndim 1\nstate a 1\nstate b 3\n', 4, 9),
    ('mwg 1\ndim 1\nstate a 1\nedge e a b 0\ninit a\n', 4, 1),
    ('mwg 1\ndim 1\nstate a 1\nedge e a a 1_000\ninit a\n', 4, 12),
    ('mwg 1\ndim \u0661\n', 2, 5),
    ('mwg 1\ndim 1\nstate a 1\nedge e a a 0\ninit a\ninit a\n', 6, 1),
])
def test_parse_errors_carry_position(text, line, column):
    with pytest.raises(ParseError) as info:
        parse_game(text)
    assert info.value.line == line
    assert info.value.column == column


def test_parse_rejects_sink_and_missing_init():
    with pytest.raises(ParseError, match='sink'):
        parse_game('mwg 1\ndim 1\nstate a 1\nstate b 1\nedge e a b 0\ninit a\n')
    with pytest.raises(ParseError, match='init'):
        parse_game('mwg 1\ndim 1\nstate a 1\nedge e a a 0\n')


def test_graph_invariants():
    with pytest.raises(GameError, match='duplicate edge-id'):
        GameGraph(1, (State('a', PLAYER_1),), (Edge('e', 'a', 'a', (0,)), Edge('e', 'a', 'a', (1,))))
    with pytest.raises(GameError, match='sink'):
        GameGraph(1, (State('a', PLAYER_1), State('b', PLAYER_1)), (Edge('e', 'a', 'b', (0,)),))
    with pytest.raises(GameError, match='weights'):
        GameGraph(2, (State('a', PLAYER_1),), (Edge('e', 'a', 'a', (0,)),))


def test_parse_rational():
    assert parse_rational('3/4') == Fraction(3, 4)
    assert parse_rational('-2') == -2
    with pytest.raises(GameError):
        parse_rational('1/0')
    with pytest.raises(GameError):
        parse_rational('0.5')
    with pytest.raises(GameError):
        parse_rational('\u0663/4')


def test_shift_weights_integer_and_rational(fig3):
    shifted = shift_weights(fig3, (1, 1))
    assert shifted.edge('loop_a').weight == (1, -1)
    assert shifted.edge('ab').weight == (-1, -1)
    # threshold 1/2 scales by 2 and subtracts 1
    halves = shift_weights(fig3, ('1/2', 0))
    assert halves.edge('loop_a').weight == (3, 0)
    assert halves.edge('loop_b').weight == (-1, 2)
    assert shift_weights(fig3, (0, 0)) is fig3


def test_mask_dimensions_keeps_width(barrier):
    masked = mask_dimensions(barrier, {2})
    assert masked.edge('loop_u').weight == (0, 0, 0)
    assert masked.edge('uv').weight == (0, 0, 5)


def test_restrict(fig1):
    sub = restrict(fig1, {'s0', 's2'})
    assert set(sub.state_names) == {'s0', 's2'}
    assert [e.id for e in sub.out_edges('s0')] == ['right']
    with pytest.raises(RestrictionError) as info:
        restrict(fig1, {'s0'})
    assert info.value.state == 's0'


def test_attractor(fig1):
    assert attractor(fig1, PLAYER_2, {'s1'}) == {'s0', 's1', 's2'}
    assert attractor(fig1, PLAYER_1, {'s1'}) == {'s1'}


def test_reachability_and_sccs(fig1):
    assert reachable_states(fig1, 's1') == {'s1'}
    assert reachable_states(fig1, 's2') == {'s0', 's1', 's2'}
    assert scc_decomposition(fig1) == [frozenset({'s1'}), frozenset({'s0', 's2'})]


def test_energy_level(fig1):
    prefix = PlayPrefix(('s0', 's2', 's0', 's1'), ('right', 'ret_a', 'left'))
    assert energy_level(fig1, prefix) == (-1, -1)
    with pytest.raises(InvalidPlayError):
        energy_level(fig1, PlayPrefix(('s0', 's0'), ('right',)))


def test_lasso_mean_payoff(fig3):
    assert lasso_mean_payoff(fig3, LassoPlay.from_states(fig3, ['sa'], ['sa'])) == (2, 0)
    both = LassoPlay.from_states(fig3, ['sa'], ['sa', 'sa', 'sb', 'sb'])
    assert lasso_mean_payoff(fig3, both) == (Fraction(1, 2), Fraction(1, 2))
    with pytest.raises(InvalidPlayError):
        LassoPlay.from_states(fig3, [], [])


def test_objective_defaults_and_normalization():
    assert ObjectiveSpec.for_kind(ObjectiveKind.MP_SUP, 2).sup_dims == {0, 1}
    assert ObjectiveSpec.for_kind(ObjectiveKind.ENERGY, 2).inf_dims == {0, 1}
    spec = ObjectiveSpec(ObjectiveKind.MP_INFSUP, {0}, {0, 1}).normalized()
    assert spec.sup_dims == {1}
    with pytest.raises(GameError):
        ObjectiveSpec.for_kind(ObjectiveKind.MP_INFSUP, 2)
    with pytest.raises(GameError):
        ObjectiveSpec.for_kind(ObjectiveKind.MP_INF, 2, inf={3})


@pytest.mark.parametrize('kind, inf, sup, expected', [
    (ObjectiveKind.MP_INF, {1}, None, ({1}, set())),
    (ObjectiveKind.MP_INF, None, None, ({0, 1}, set())),
    (ObjectiveKind.MP_SUP, None, {0}, (set(), {0})),
    (ObjectiveKind.MP_INFSUP, {0}, {1}, ({0}, {1})),
])
def test_objective_dimension_sets(kind, inf, sup, expected):
    spec = ObjectiveSpec.for_kind(kind, 2, inf, sup)
    assert (spec.inf_dims, spec.sup_dims) == expected


@pytest.mark.parametrize('kind, inf, sup', [
    (ObjectiveKind.MP_INF, None, {1}),
    (ObjectiveKind.MP_SUP, {0}, None),
    (ObjectiveKind.ENERGY, {0}, None),
    (ObjectiveKind.FINITE_MEMORY_MP, None, {0, 1}),
])
def test_objective_rejects_foreign_dimensions(kind, inf, sup):
    with pytest.raises(GameError):
        ObjectiveSpec.for_kind(kind, 2, inf, sup)


def random_lasso(g, rng):
    """Random walk from the initial state until it closes a loop"""
    states, edges = [g.initial], []
    while True:
        out = g.out_edges(states[-1])
        e = out[int(rng.integers(len(out)))]
        edges.append(e.id)
        if e.dst in states:
            i = states.index(e.dst)
            states.append(e.dst)
            return LassoPlay(PlayPrefix(states[:i + 1], edges[:i]), PlayPrefix(states[i:], edges[i:]))
        states.append(e.dst)


def rotated(lasso, r):
    cycle, cycle_edges = list(lasso.loop.states[:-1]), list(lasso.loop.edges)
    r %= len(cycle_edges)
    loop_states = cycle[r:] + cycle[:r]
    stem = PlayPrefix(lasso.stem.states + tuple(cycle[1:r + 1]), lasso.stem.edges + tuple(cycle_edges[:r]))
    return LassoPlay(stem, PlayPrefix(loop_states + loop_states[:1], cycle_edges[r:] + cycle_edges[:r]))


def pumped(lasso, times):
    cycle = list(lasso.loop.states[:-1])
    return LassoPlay(lasso.stem, PlayPrefix(cycle * times + cycle[:1], list(lasso.loop.edges) * times))


@pytest.mark.parametrize('seed', range(30))
def test_lasso_mean_payoff_ignores_rotation_and_pumping(seed):
    g = random_game(2 + seed % 5, 2, 3, seed=seed)
    rng = np.random.default_rng(seed)
    lasso = random_lasso(g, rng)
    expected = lasso_mean_payoff(g, lasso)
    for r in range(len(lasso.loop.edges)):
        assert lasso_mean_payoff(g, rotated(lasso, r)) == expected
    assert lasso_mean_payoff(g, pumped(lasso, 1 + int(rng.integers(4)))) == expected


THRESHOLDS = [Fraction(-1), Fraction(-1, 2), Fraction(0), Fraction(1, 3), Fraction(1)]


@pytest.mark.parametrize('seed', range(30))
def test_shifted_lasso_compares_against_threshold(seed):
    g = random_game(2 + seed % 4, 2, 2, seed=100 + seed)
    rng = np.random.default_rng(seed)
    thresholds = tuple(THRESHOLDS[int(i)] for i in rng.integers(len(THRESHOLDS), size=2))
    shifted = shift_weights(g, thresholds)
    lasso = random_lasso(g, rng)
    for before, after, t in zip(lasso_mean_payoff(g, lasso), lasso_mean_payoff(shifted, lasso), thresholds):
        assert (after >= 0) == (before >= t)
        assert after == (before - t) * t.denominator


@pytest.mark.parametrize('seed', range(40))
def test_sccs_match_mutual_reachability(seed):
    g = random_game(1 + seed % 7, 1, 1, seed=200 + seed)
    sccs = scc_decomposition(g)
    index = {s: i for i, scc in enumerate(sccs) for s in scc}
    assert sorted(index) == sorted(g.state_names)
    reach = {s: reachable_states(g, s) for s in g.state_names}
    for u in g.state_names:
        for v in g.state_names:
            assert (index[u] == index[v]) == (v in reach[u] and u in reach[v])
    # sink components first
    assert all(index[e.src] >= index[e.dst] for e in g.edges)


@pytest.mark.parametrize('seed', range(40))
def test_attractor_properties(seed):
    g = random_game(1 + seed % 7, 1, 1, seed=300 + seed)
    rng = np.random.default_rng(seed)
    target = {s for s in g.state_names if rng.random() < 0.3}
    for player in (PLAYER_1, PLAYER_2):
        attr = attractor(g, player, target)
        assert target <= attr
        assert attractor(g, player, attr) == attr
        rest = set(g.state_names) - attr
        if rest:
            assert set(restrict(g, rest).state_names) == rest
