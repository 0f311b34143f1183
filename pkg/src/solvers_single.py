"""
Single-Dimension Solvers
Energy-lifting fixpoint for one-dimensional mean-payoff/energy games and
Karp's maximum mean cycle
"""

import logging
from fractions import Fraction

from src.game_core import PLAYER_1, GameError, scc_decomposition

logger = logging.getLogger(__name__)


def _check_dim(g, dim):
    if not 0 <= dim < g.dim:
        raise GameError(f"dimension index {dim} outside 0..{g.dim - 1}")


def _lift(credit, weight, bound):
    """Credit needed before an edge of `weight` when `credit` is needed after it"""
    if credit is None:
        return None
    need = max(0, credit - weight)
    return None if need > bound else need


def energy_progress_measure(g, dim):
    """
    Least fixpoint of the lifting operator: per state the minimal credit
    player 1 needs in `dim`, or None (top) when no credit up to n*W suffices.
    """
    _check_dim(g, dim)
    bound = len(g.states) * g.max_abs_weight()
    measure = {name: 0 for name in g.state_names}
    changed = True
    rounds = 0
    while changed:
        changed = False
        rounds += 1
        for s in g.states:
            if measure[s.name] is None:
                continue
            options = [_lift(measure[e.dst], e.weight[dim], bound) for e in g.out_edges(s.name)]
            finite = [x for x in options if x is not None]
            if s.owner == PLAYER_1:
                value = min(finite) if finite else None
            else:
                value = None if len(finite) < len(options) else max(finite)
            if value != measure[s.name]:
                measure[s.name] = value
                changed = True
    logger.debug(f"lifting in dimension {dim} stabilized after {rounds} rounds")
    return measure


def solve_single_mp_sup(g, dim):
    """Player-1 winning region for mean payoff >= 0 in one dimension"""
    measure = energy_progress_measure(g, dim)
    return frozenset(name for name, value in measure.items() if value is not None)


def single_energy_strategy(g, dim):
    """Memoryless player-1 choices keeping the lifting measure, on the winning region"""
    measure = energy_progress_measure(g, dim)
    bound = len(g.states) * g.max_abs_weight()
    strategy = {}
    for s in g.states:
        if s.owner != PLAYER_1 or measure[s.name] is None:
            continue
        best = None
        for e in g.out_edges(s.name):
            need = _lift(measure[e.dst], e.weight[dim], bound)
            if need is not None and (best is None or need < best[0]):
                best = (need, e.id)
        strategy[s.name] = best[1]
    return strategy


def max_mean_cycle(g, dim):
    """
    Karp: exact maximum cycle mean in `dim` of a strongly connected graph;
    None when the graph has no cycle.
    """
    _check_dim(g, dim)
    if len(scc_decomposition(g)) != 1:
        raise GameError("max_mean_cycle needs a strongly connected graph")
    names = g.state_names
    n = len(names)
    source = names[0]
    # best[k][v]: largest weight of a walk with exactly k edges from source to v
    best = [{v: None for v in names} for _ in range(n + 1)]
    best[0][source] = 0
    for k in range(1, n + 1):
        for e in g.edges:
            prev = best[k - 1][e.src]
            if prev is None:
                continue
            value = prev + e.weight[dim]
            if best[k][e.dst] is None or value > best[k][e.dst]:
                best[k][e.dst] = value

    result = None
    for v in names:
        if best[n][v] is None:
            continue
        worst = min(
            Fraction(best[n][v] - best[k][v], n - k)
            for k in range(n) if best[k][v] is not None
        )
        if result is None or worst > result:
            result = worst
    return result
