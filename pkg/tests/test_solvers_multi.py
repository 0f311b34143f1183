import numpy as np
import pytest

from src.certificates import (
    MemorylessStrategy, MooreStrategy, score_p1_finite_strategy, verify_p2_certificate,
)
from src.game_core import (
    PLAYER_1, PLAYER_2, Edge, GameError, GameGraph, ObjectiveKind, ObjectiveSpec, PlayPrefix,
    State, shift_weights,
)
from src.generators import (
    CnfFormula, brute_force_disjoint_paths, from_3sat, from_disjoint_paths, parse_edge_list,
    random_game,
)
from src.solvers_multi import (
    EnumerationLimitError, SolverSettings, energy_region, memoryless_strategies, mp_inf_region,
    solve_energy_unknown_credit, solve_finite_memory_mp, solve_memoryless_player1, solve_mp_inf,
    solve_mp_infsup, solve_mp_sup_region, solve_one_player_mp_inf,
)

ENERGY = ObjectiveSpec.for_kind(ObjectiveKind.ENERGY, 2)


class TestEnergy:
    def test_fig1_wins_with_memory(self, fig1):
        report = solve_energy_unknown_credit(fig1, 's0')
        assert report.verdict
        assert isinstance(report.certificate, MooreStrategy)
        assert score_p1_finite_strategy(fig1, report.certificate, 's0') == report.credit
        assert report.stats['strategies'] == 2

    def test_region(self, fig1):
        assert energy_region(fig1).winning_region == {'s0', 's1', 's2'}

    def test_no_nonnegative_circuit(self, fig3_11):
        report = solve_energy_unknown_credit(fig3_11)
        assert not report.verdict
        assert verify_p2_certificate(fig3_11, report.certificate, 'sa', ENERGY)

    def test_satisfiable_clause_is_refuted(self):
        g = from_3sat(CnfFormula(1, ((1, 1, 1),)))
        report = solve_energy_unknown_credit(g)
        assert not report.verdict
        assert report.certificate == MemorylessStrategy(PLAYER_2, {'c1': 'c1_p1'})

    def test_contradiction_is_won(self):
        g = from_3sat(CnfFormula(1, ((1, 1, 1), (-1, -1, -1))))
        report = solve_energy_unknown_credit(g)
        assert report.verdict
        assert report.credit is not None

    def test_enumeration_guard(self, fig1):
        with pytest.raises(EnumerationLimitError):
            solve_energy_unknown_credit(fig1, settings=SolverSettings(max_strategies=1))
        forced = SolverSettings(max_strategies=1, force=True, extract_certificate=False)
        report = solve_energy_unknown_credit(fig1, settings=forced)
        assert report.verdict
        assert report.certificate is None

    def test_strategy_enumeration_fixes_unlisted_states(self, fig1):
        strategies = list(memoryless_strategies(fig1, PLAYER_1, {'s2'}, SolverSettings()))
        assert [s.choice for s in strategies] == [
            {'s1': 'loop1', 's2': 'ret_a'},
            {'s1': 'loop1', 's2': 'ret_b'},
        ]


class TestFiniteMemory:
    def test_fig1(self, fig1):
        report = solve_finite_memory_mp(fig1)
        assert report.verdict
        assert report.method == 'capped'
        assert report.stats['memory_states'] == report.certificate.memory

    def test_threshold_one_loses(self, fig3_11):
        assert not solve_finite_memory_mp(fig3_11).verdict


class TestMeanPayoff:
    def test_inf_at_one_one(self, fig3_11):
        assert solve_mp_inf(fig3_11).verdict
        assert solve_one_player_mp_inf(fig3_11, 'sa')
        assert mp_inf_region(fig3_11).winning_region == {'sa', 'sb'}

    def test_inf_refutation(self, fig3_22):
        report = solve_mp_inf(fig3_22)
        assert not report.verdict
        objective = ObjectiveSpec.for_kind(ObjectiveKind.MP_INF, 2)
        assert verify_p2_certificate(fig3_22, report.certificate, 'sa', objective)

    def test_one_player_only(self, fig1):
        with pytest.raises(GameError):
            solve_one_player_mp_inf(fig1, 's0')

    def test_sup_regions(self, fig3, fig1):
        assert solve_mp_sup_region(shift_weights(fig3, (2, 2))).winning_region == {'sa', 'sb'}
        report = solve_mp_sup_region(shift_weights(fig3, (3, 2)))
        assert report.winning_region == frozenset()
        assert not report.verdict
        assert solve_mp_sup_region(fig1).winning_region == {'s0', 's1', 's2'}

    def test_infsup(self, fig3_11, fig3_22):
        assert solve_mp_infsup(fig3_11, {0}, {1}).verdict
        report = solve_mp_infsup(fig3_22, {0}, {1})
        assert not report.verdict
        assert report.method == 'iterative-removal'
        objective = ObjectiveSpec(ObjectiveKind.MP_INFSUP, {0}, {1})
        assert verify_p2_certificate(fig3_22, report.certificate, 'sa', objective)

    def test_infsup_degenerate_sets(self, fig3_11, fig3_22):
        only_sup = solve_mp_infsup(fig3_22, set(), {0})
        assert only_sup.winning_region == {'sa', 'sb'}
        assert only_sup.objective.kind == ObjectiveKind.MP_INFSUP
        only_inf = solve_mp_infsup(fig3_11, {0}, set())
        assert only_inf.verdict
        assert only_inf.method == 'enumeration'
        # sup on a dimension already under inf adds nothing
        assert solve_mp_infsup(fig3_11, {0, 1}, {1}).objective.sup_dims == frozenset()
        with pytest.raises(GameError):
            solve_mp_infsup(fig3_11, {5}, set())


class TestMemorylessPlayer1:
    def test_fig1_needs_memory(self, fig1):
        assert solve_memoryless_player1(fig1) is None

    def test_fig3(self, fig3):
        strategy = solve_memoryless_player1(fig3)
        assert strategy.choice == {'sa': 'loop_a', 'sb': 'loop_b'}

    def test_disjoint_paths(self):
        graph = parse_edge_list("w x\ny z\n")
        assert brute_force_disjoint_paths(graph, 'w', 'x', 'y', 'z')
        assert solve_memoryless_player1(from_disjoint_paths(graph, 'w', 'x', 'y', 'z')) is not None

    def test_shared_vertex(self):
        graph = parse_edge_list("w y\ny x\ny z\n")
        assert not brute_force_disjoint_paths(graph, 'w', 'x', 'y', 'z')
        assert solve_memoryless_player1(from_disjoint_paths(graph, 'w', 'x', 'y', 'z')) is None


def _switching_play(steps):
    """Loop at minus until the average drops below -1, then at plus until it exceeds 1, and so on"""
    states = ['s_minus']
    total, current = 0, 's_minus'
    for t in range(1, steps + 1):
        total += 2 if current == 's_plus' else -2
        states.append(current)
        if current == 's_minus' and total < -t:
            current = 's_plus'
        elif current == 's_plus' and total > t:
            current = 's_minus'
    return states


def test_mean_payoff_sup_is_not_closed_under_combination():
    states = (State('s_plus', PLAYER_1), State('s_minus', PLAYER_1))
    edges = tuple(
        Edge(f"{a}_{b}", a, b, (2 if b == 's_plus' else -2,))
        for a in ('s_plus', 's_minus') for b in ('s_plus', 's_minus')
    )
    g = GameGraph(1, states, edges, 's_minus')

    def averages(names):
        prefix = PlayPrefix(tuple(names), tuple(f"{a}_{b}" for a, b in zip(names, names[1:])))
        prefix.validate(g)
        weights = np.array([g.edge(e).weight[0] for e in prefix.edges])
        return np.cumsum(weights) / np.arange(1, len(weights) + 1)

    pi0 = _switching_play(5000)
    pi1 = ['s_plus' if s == 's_minus' else 's_minus' for s in pi0]
    pi2 = [s for pair in zip(pi0, pi1) for s in pair]

    for play in (pi0, pi1):
        tail = averages(play)[1000:]
        assert tail.max() > 1
        assert tail.min() < -1
    combined = averages(pi2)
    assert np.abs(combined[1000:]).max() <= 4 / 1000
    assert solve_mp_sup_region(g).winning_region == {'s_plus', 's_minus'}


@pytest.mark.parametrize('seed', range(12))
def test_energy_verdicts_are_consistent(seed):
    g = random_game(4, 2, 2, seed=seed)
    region = energy_region(g).winning_region
    report = solve_energy_unknown_credit(g, 's0')
    assert report.verdict == ('s0' in region)
    if report.verdict:
        assert score_p1_finite_strategy(g, report.certificate, 's0') == report.credit
    else:
        assert verify_p2_certificate(g, report.certificate, 's0', ENERGY)
