"""
Multi-Dimension Solvers
Decision procedures for energy (unknown credit), finite-memory mean-payoff,
mean-payoff sup / inf / inf-sup objectives and memoryless player-1 strategies
"""

import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from math import prod
from typing import FrozenSet, Optional

import networkx as nx

from src.certificates import (
    ARENA_LIMIT, ArenaLimitError, CreditVector, MemorylessStrategy,
    apply_memoryless, extract_finite_strategy, has_nonneg_multicycle_reachable,
)
from src.game_core import (
    PLAYER_1, PLAYER_2, GameError, ObjectiveKind, ObjectiveSpec,
    mask_dimensions, reachable_states, restrict, scc_decomposition,
)
from src.multicycle import DEFAULT_WALK_BOUND, find_nonneg_circuit, nonneg_multicycle
from src.solvers_single import solve_single_mp_sup

logger = logging.getLogger(__name__)

MAX_STRATEGIES = 2 ** 20


class EnumerationLimitError(GameError):
    pass


class ObjectiveError(GameError):
    pass


@dataclass
class SolverSettings:
    max_strategies: int = MAX_STRATEGIES
    force: bool = False
    cap: Optional[int] = None
    arena_limit: int = ARENA_LIMIT
    extract_certificate: bool = True
    witness_walk_bound: int = DEFAULT_WALK_BOUND


@dataclass
class SolveReport:
    objective: ObjectiveSpec
    verdict: bool
    initial: Optional[str] = None
    winning_region: Optional[FrozenSet[str]] = None
    certificate: object = None
    credit: Optional[CreditVector] = None
    method: str = ''
    stats: Counter = field(default_factory=Counter)


def memoryless_strategies(g, player, states, settings, stats=None):
    """
    Every memoryless strategy of `player` that differs on `states`; other
    owned states keep their first edge. Guarded by settings.max_strategies.
    """
    states = [s for s in g.player_states(player) if s in set(states)]
    count = prod(len(g.out_edges(s)) for s in states)
    if count > settings.max_strategies and not settings.force:
        raise EnumerationLimitError(
            f"{count} candidate strategies for player {player} exceed {settings.max_strategies}; use force"
        )
    logger.debug(f"enumerating {count} memoryless strategies of player {player}")
    defaults = {s: g.out_edges(s)[0].id for s in g.player_states(player)}
    for picked in itertools.product(*[[e.id for e in g.out_edges(s)] for s in states]):
        if stats is not None:
            stats['strategies'] += 1
        choice = dict(defaults)
        choice.update(zip(states, picked))
        yield MemorylessStrategy(player, choice)


class SccVerdicts:
    """Per-SCC test results cached by the SCC's edge set"""

    def __init__(self, test):
        self.test = test
        self.cache = {}

    def good(self, sub):
        key = frozenset(e.id for e in sub.edges)
        if key not in self.cache:
            self.cache[key] = self.test(sub)
        return self.cache[key]

    def subgames(self, g):
        for scc in scc_decomposition(g):
            if len(scc) > 1 or any(e.dst == e.src for s in scc for e in g.out_edges(s)):
                yield scc, restrict(g, scc)

    def reaches_good(self, one_player, s0):
        reach = restrict(one_player, reachable_states(one_player, s0))
        return any(self.good(sub) for _, sub in self.subgames(reach))

    def good_states(self, one_player):
        """States of the one-player graph that can reach a good SCC"""
        targets = set()
        for scc, sub in self.subgames(one_player):
            if self.good(sub):
                targets |= scc
        graph = one_player.to_networkx()
        found = set(targets)
        for t in targets:
            found |= nx.ancestors(graph, t)
        return frozenset(found)


def _energy_verdicts(settings, stats):
    return SccVerdicts(lambda sub: find_nonneg_circuit(sub, settings.witness_walk_bound, stats)[0])


def _mp_inf_verdicts(dims, stats):
    return SccVerdicts(lambda sub: nonneg_multicycle(mask_dimensions(sub, dims), stats) is not None)


def _infsup_verdicts(inf_dims, sup_dims, stats):
    return SccVerdicts(lambda sub: all(
        nonneg_multicycle(mask_dimensions(sub, inf_dims | {l}), stats) is not None
        for l in sorted(sup_dims)
    ))


def _refute_from(g, s0, verdicts, settings, stats):
    """First player-2 memoryless strategy leaving no good SCC reachable from s0"""
    relevant = reachable_states(g, s0)
    for strategy in memoryless_strategies(g, PLAYER_2, relevant, settings, stats):
        if not verdicts.reaches_good(apply_memoryless(g, strategy), s0):
            return strategy
    return None


def _region(g, verdicts, settings, stats):
    region = frozenset(g.state_names)
    for strategy in memoryless_strategies(g, PLAYER_2, g.state_names, settings, stats):
        region &= verdicts.good_states(apply_memoryless(g, strategy))
        if not region:
            break
    return region


def solve_energy_unknown_credit(g, s0=None, settings=None):
    """Some credit lets player 1 keep all energies nonnegative from s0"""
    settings = settings or SolverSettings()
    s0 = s0 or g.initial
    stats = Counter()
    objective = ObjectiveSpec.for_kind(ObjectiveKind.ENERGY, g.dim)
    refutation = _refute_from(g, s0, _energy_verdicts(settings, stats), settings, stats)
    if refutation is not None:
        logger.debug(f"energy from {s0}: refuted after {stats['strategies']} strategies")
        return SolveReport(objective, False, s0, certificate=refutation, method='enumeration', stats=stats)

    report = SolveReport(objective, True, s0, method='enumeration', stats=stats)
    if settings.extract_certificate:
        try:
            found = extract_finite_strategy(g, s0, settings.cap, settings.arena_limit)
        except ArenaLimitError as e:
            logger.warning(f"no player-1 certificate: {e}")
            found = None
        if found is None:
            logger.warning("capped arena found no player-1 machine for a winning state")
        else:
            report.certificate, report.credit = found
    return report


def energy_region(g, settings=None):
    settings = settings or SolverSettings()
    stats = Counter()
    region = _region(g, _energy_verdicts(settings, stats), settings, stats)
    return SolveReport(ObjectiveSpec.for_kind(ObjectiveKind.ENERGY, g.dim), g.initial in region,
                       g.initial, region, method='enumeration', stats=stats)


def solve_finite_memory_mp(g, s0=None, settings=None):
    """Finite-memory mean payoff >= 0, decided on the capped energy arena"""
    settings = settings or SolverSettings()
    s0 = s0 or g.initial
    objective = ObjectiveSpec.for_kind(ObjectiveKind.FINITE_MEMORY_MP, g.dim)
    found = extract_finite_strategy(g, s0, settings.cap, settings.arena_limit)
    if found is None:
        return SolveReport(objective, False, s0, method='capped')
    machine, credit = found
    stats = Counter(memory_states=machine.memory)
    return SolveReport(objective, True, s0, certificate=machine, credit=credit, method='capped', stats=stats)


def solve_one_player_mp_inf(g, s0, stats=None):
    if g.player_states(PLAYER_2):
        raise GameError("one-player mean-payoff inf needs a game without player-2 states")
    return has_nonneg_multicycle_reachable(g, s0, None, stats)


def solve_mp_inf(g, s0=None, settings=None, dims=None):
    """Mean payoff inf >= 0 on `dims` (all by default) against every memoryless player 2"""
    settings = settings or SolverSettings()
    s0 = s0 or g.initial
    dims = frozenset(range(g.dim)) if dims is None else frozenset(dims)
    stats = Counter()
    objective = ObjectiveSpec(ObjectiveKind.MP_INF, dims, frozenset())
    refutation = _refute_from(g, s0, _mp_inf_verdicts(dims, stats), settings, stats)
    return SolveReport(objective, refutation is None, s0, certificate=refutation,
                       method='enumeration', stats=stats)


def mp_inf_region(g, dims=None, settings=None):
    settings = settings or SolverSettings()
    dims = frozenset(range(g.dim)) if dims is None else frozenset(dims)
    stats = Counter()
    region = _region(g, _mp_inf_verdicts(dims, stats), settings, stats)
    return SolveReport(ObjectiveSpec(ObjectiveKind.MP_INF, dims, frozenset()), g.initial in region,
                       g.initial, region, method='enumeration', stats=stats)


def solve_mp_sup_region(g, s0=None):
    """Iterated removal of single-dimension losing regions until a full pass removes nothing"""
    current = frozenset(g.state_names)
    passes = 0
    found = True
    while found and current:
        found = False
        passes += 1
        for dim in range(g.dim):
            sub = restrict(g, current)
            losing = current - solve_single_mp_sup(sub, dim)
            if losing:
                logger.debug(f"pass {passes}, dimension {dim}: removing {sorted(losing)}")
                current -= losing
                found = True
            if not current:
                break
    s0 = s0 or g.initial
    return SolveReport(ObjectiveSpec.for_kind(ObjectiveKind.MP_SUP, g.dim), s0 in current, s0,
                       current, method='iterative-removal', stats=Counter(passes=passes))


def _removal_region(g, inf_dims, sup_dims, settings, stats):
    """Iterated removal of the mean-payoff inf losing regions on I plus one sup dimension"""
    current = frozenset(g.state_names)
    found = True
    while found and current:
        found = False
        stats['passes'] += 1
        for l in sorted(sup_dims):
            sub = restrict(g, current)
            region = mp_inf_region(sub, inf_dims | {l}, settings)
            stats.update(region.stats)
            losing = current - region.winning_region
            if losing:
                logger.debug(f"sup dimension {l}: removing {sorted(losing)}")
                current -= losing
                found = True
            if not current:
                break
    return current


def solve_mp_infsup(g, inf_dims, sup_dims, s0=None, settings=None):
    """Mean payoff inf >= 0 on I and sup >= 0 on each dimension of J"""
    settings = settings or SolverSettings()
    s0 = s0 or g.initial
    spec = ObjectiveSpec(ObjectiveKind.MP_INFSUP, inf_dims, sup_dims).normalized()
    spec.validate(g.dim)
    inf_dims, sup_dims = spec.inf_dims, spec.sup_dims
    if inf_dims & sup_dims:
        raise ObjectiveError("inf and sup dimensions overlap after normalization")

    if not inf_dims:
        report = solve_mp_sup_region(mask_dimensions(g, sup_dims), s0)
        report.objective = spec
        return report

    stats = Counter()
    if sup_dims:
        region = _removal_region(g, inf_dims, sup_dims, settings, stats)
        verdicts = _infsup_verdicts(inf_dims, sup_dims, stats)
        method = 'iterative-removal'
    else:
        region = mp_inf_region(g, inf_dims, settings).winning_region
        verdicts = _mp_inf_verdicts(inf_dims, stats)
        method = 'enumeration'

    report = SolveReport(spec, s0 in region, s0, region, method=method, stats=stats)
    if not report.verdict and settings.extract_certificate:
        refutation = _refute_from(g, s0, verdicts, settings, stats)
        if refutation is None:
            raise GameError("no memoryless player-2 refutation found for a losing state")
        report.certificate = refutation
    return report


def _lightest_digraph(g, dim):
    graph = nx.DiGraph()
    graph.add_nodes_from(g.state_names)
    for e in g.edges:
        w = e.weight[dim]
        if not graph.has_edge(e.src, e.dst) or w < graph[e.src][e.dst]['w']:
            graph.add_edge(e.src, e.dst, w=w)
    return graph


def solve_memoryless_player1(g, s0=None, settings=None) -> Optional[MemorylessStrategy]:
    """A memoryless player-1 strategy under which every reachable cycle is nonnegative"""
    settings = settings or SolverSettings()
    s0 = s0 or g.initial
    relevant = reachable_states(g, s0)
    for strategy in memoryless_strategies(g, PLAYER_1, relevant, settings):
        fixed = apply_memoryless(g, strategy)
        reach = restrict(fixed, reachable_states(fixed, s0))
        if not any(nx.negative_edge_cycle(_lightest_digraph(reach, i), weight='w') for i in range(g.dim)):
            return strategy
    return None
