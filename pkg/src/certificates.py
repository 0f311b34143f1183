"""
Strategy Certificates
Strategy objects, product graphs, certificate verification and scoring,
finite-memory extraction and finite-horizon simulators
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, gcd
from typing import Dict, Mapping, Optional, Tuple

import networkx as nx
import numpy as np

from src.game_core import (
    PLAYER_1, PLAYER_2, Edge, GameError, GameGraph, ObjectiveKind, ParseError, PlayPrefix, State,
    decode_text, mask_dimensions, opponent, reachable_states, restrict, scc_decomposition,
)
from src.multicycle import find_nonneg_circuit, nonneg_multicycle
from src.solvers_single import solve_single_mp_sup

logger = logging.getLogger(__name__)

ARENA_LIMIT = 200_000
CAP_FACTOR = 2


class StrategyError(GameError):
    pass


class ArenaLimitError(GameError):
    pass


class UnsupportedObjectiveError(GameError):
    pass


class SimulationError(GameError):
    pass


@dataclass(frozen=True)
class MemorylessStrategy:
    owner: int
    choice: Mapping[str, str] = field(default_factory=dict)

    def validate(self, g):
        for name in g.player_states(self.owner):
            if name not in self.choice:
                raise StrategyError(f"no choice for state {name}")
        for name, edge_id in self.choice.items():
            if not g.has_state(name) or g.owner(name) != self.owner:
                raise StrategyError(f"state {name} does not belong to player {self.owner}")
            if not g.has_edge(edge_id) or g.edge(edge_id).src != name:
                raise StrategyError(f"edge {edge_id} does not leave {name}")


@dataclass(frozen=True)
class MooreStrategy:
    """
    Memory states 0..memory-1. At (m, s) the owner takes next_move[(m, s)];
    on entering state t the memory becomes update[(m, t)].
    """
    owner: int
    memory: int
    initial: int
    next_move: Mapping[Tuple[int, str], str]
    update: Mapping[Tuple[int, str], int]

    @classmethod
    def from_memoryless(cls, g, strategy):
        strategy.validate(g)
        return cls(
            strategy.owner, 1, 0,
            {(0, s): e for s, e in strategy.choice.items()},
            {(0, s): 0 for s in g.state_names},
        )

    def validate(self, g):
        if self.memory < 1 or not 0 <= self.initial < self.memory:
            raise StrategyError(f"bad memory size {self.memory} / initial {self.initial}")
        owned = g.player_states(self.owner)
        for m in range(self.memory):
            for s in owned:
                edge_id = self.next_move.get((m, s))
                if edge_id is None:
                    raise StrategyError(f"next move undefined at memory {m}, state {s}")
                if not g.has_edge(edge_id) or g.edge(edge_id).src != s:
                    raise StrategyError(f"edge {edge_id} does not leave {s}")
            for s in g.state_names:
                target = self.update.get((m, s))
                if target is None or not 0 <= target < self.memory:
                    raise StrategyError(f"update undefined or out of range at memory {m}, state {s}")


def as_moore(g, strategy):
    if isinstance(strategy, MemorylessStrategy):
        return MooreStrategy.from_memoryless(g, strategy)
    if not isinstance(strategy, MooreStrategy):
        raise StrategyError(f"not a strategy: {strategy!r}")
    strategy.validate(g)
    return strategy


@dataclass(frozen=True)
class CreditVector:
    values: Tuple[int, ...]

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        if any(v < 0 for v in values):
            raise GameError(f"credit must be nonnegative, got {values}")
        object.__setattr__(self, 'values', values)

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def dominates(self, other):
        return all(a >= b for a, b in zip(self.values, other.values))


def apply_memoryless(g, strategy):
    """G_lambda: only the chosen edges remain at the owner's states; every state goes to the opponent"""
    strategy.validate(g)
    edges = [
        e for e in g.edges
        if g.owner(e.src) != strategy.owner or strategy.choice[e.src] == e.id
    ]
    owners = {name: opponent(strategy.owner) for name in g.state_names}
    return g.with_edges(edges, owners)


@dataclass(frozen=True)
class ProductGraph:
    graph: object
    origin: Dict[str, Tuple[int, str]]
    edge_origin: Dict[str, str]
    initial: str


def product_graph(g, strategy, s0):
    """Reachable memory x state product; the owner's moves are fixed"""
    machine = as_moore(g, strategy)
    if not g.has_state(s0):
        raise GameError(f"unknown state {s0}")
    start = (machine.initial, s0)
    seen = {start}
    queue = deque([start])
    edges = []
    while queue:
        m, s = queue.popleft()
        if g.owner(s) == machine.owner:
            moves = [g.edge(machine.next_move[(m, s)])]
        else:
            moves = g.out_edges(s)
        for e in moves:
            nxt = (machine.update[(m, e.dst)], e.dst)
            edges.append(Edge(f"{e.id}@{m}", f"{s}@{m}", f"{nxt[1]}@{nxt[0]}", e.weight))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)

    nodes = sorted(seen, key=lambda node: (node[0], g.state_names.index(node[1])))
    states = tuple(State(f"{s}@{m}", opponent(machine.owner)) for m, s in nodes)
    product = GameGraph(g.dim, states, tuple(edges), f"{s0}@{machine.initial}")
    origin = {f"{s}@{m}": (m, s) for m, s in nodes}
    edge_origin = {e.id: e.id.rsplit('@', 1)[0] for e in edges}
    return ProductGraph(product, origin, edge_origin, product.initial)


def _scc_subgames(g):
    for scc in scc_decomposition(g):
        if len(scc) > 1 or any(e.dst == e.src for s in scc for e in g.out_edges(s)):
            yield restrict(g, scc)


def has_nonneg_multicycle_reachable(g, s0, dims=None, stats=None):
    """Some SCC reachable from s0 carries a nonnegative multi-cycle on `dims`"""
    reach = restrict(g, reachable_states(g, s0))
    if dims is not None:
        reach = mask_dimensions(reach, dims)
    return any(nonneg_multicycle(sub, stats) is not None for sub in _scc_subgames(reach))


def verify_p2_certificate(g, strategy, s0, objective, stats=None):
    """True iff the player-2 memoryless strategy refutes the objective from s0"""
    kind = objective.kind
    if kind == ObjectiveKind.MP_SUP:
        raise UnsupportedObjectiveError(
            "mp-sup refutations are checked through single-dimension regions, not here"
        )
    if strategy.owner != PLAYER_2:
        raise StrategyError("a refutation certificate must be a player-2 strategy")
    one_player = apply_memoryless(g, strategy)
    reach = restrict(one_player, reachable_states(one_player, s0))

    if kind in (ObjectiveKind.ENERGY, ObjectiveKind.FINITE_MEMORY_MP):
        found, _ = find_nonneg_circuit(reach, stats=stats)
        return not found

    spec = objective.normalized()
    inf_dims = spec.inf_dims
    if kind == ObjectiveKind.MP_INF or not spec.sup_dims:
        return not has_nonneg_multicycle_reachable(reach, s0, inf_dims, stats)

    # a single SCC has to carry every Inf(I + {l}) at once
    for sub in _scc_subgames(reach):
        if all(
            nonneg_multicycle(mask_dimensions(sub, inf_dims | {l}), stats) is not None
            for l in sorted(spec.sup_dims)
        ):
            return False
    return True


def _per_dimension_graph(product, dim):
    """Simple digraph keeping, per node pair, the lightest edge in `dim`"""
    graph = nx.DiGraph()
    graph.add_nodes_from(product.graph.state_names)
    for e in product.graph.edges:
        w = e.weight[dim]
        if not graph.has_edge(e.src, e.dst) or w < graph[e.src][e.dst]['w']:
            graph.add_edge(e.src, e.dst, w=w, edge=e.id)
    return graph


def _min_prefix(product, dim):
    """(distances, paths) from the product's initial node, or None on a reachable negative cycle"""
    graph = _per_dimension_graph(product, dim)
    try:
        return nx.single_source_bellman_ford(graph, product.initial, weight='w')
    except nx.NetworkXUnbounded:
        return None


def score_p1_finite_strategy(g, strategy, s0) -> Optional[CreditVector]:
    """
    Minimal credit under which the player-1 finite-memory strategy keeps
    every energy nonnegative, or None when some reachable cycle is negative.
    """
    machine = as_moore(g, strategy)
    if machine.owner != PLAYER_1:
        raise StrategyError("scoring needs a player-1 strategy")
    product = product_graph(g, machine, s0)
    credit = []
    for dim in range(g.dim):
        found = _min_prefix(product, dim)
        if found is None:
            return None
        distances, _ = found
        credit.append(max(0, -min(distances.values())))
    return CreditVector(tuple(credit))


def min_prefix_walks(g, strategy, s0):
    """
    Per dimension the play prefix consistent with the strategy that reaches
    the lowest energy; with one unit less credit it goes negative.
    """
    machine = as_moore(g, strategy)
    product = product_graph(g, machine, s0)
    walks = []
    for dim in range(g.dim):
        found = _min_prefix(product, dim)
        if found is None:
            raise StrategyError(f"negative cycle in dimension {dim}")
        distances, paths = found
        target = min(distances, key=lambda node: (distances[node], len(paths[node])))
        nodes = paths[target]
        graph = _per_dimension_graph(product, dim)
        edge_ids = [product.edge_origin[graph[u][v]['edge']] for u, v in zip(nodes, nodes[1:])]
        walks.append(PlayPrefix(tuple(product.origin[n][1] for n in nodes), tuple(edge_ids)))
    return walks


def _capped(values, cap):
    return tuple(min(cap, v) for v in values)


def _arena_moves(g, name, credit, cap):
    """
    (edge-id, successor state, next credit or None if negative) per move.
    Player-2 edges towards the same successor are merged into their
    componentwise minimum so a state-reading memory stays a lower bound.
    """
    if g.owner(name) == PLAYER_1:
        options = [(e.id, e.dst, e.weight) for e in g.out_edges(name)]
    else:
        merged = {}
        for e in g.out_edges(name):
            if e.dst in merged:
                first, w = merged[e.dst]
                merged[e.dst] = (first, tuple(min(a, b) for a, b in zip(w, e.weight)))
            else:
                merged[e.dst] = (e.id, e.weight)
        options = [(edge_id, dst, w) for dst, (edge_id, w) in merged.items()]
    moves = []
    for edge_id, dst, w in options:
        after = tuple(c + x for c, x in zip(credit, w))
        moves.append((edge_id, dst, None if min(after) < 0 else _capped(after, cap)))
    return moves


def extract_finite_strategy(g, s0, cap=None, arena_limit=ARENA_LIMIT, initial_credit=None):
    """
    Capped safety game on S x {0..cap}^k. When player 1 wins from s0 the
    arena strategy becomes a Moore machine whose memory is (state, energy);
    returns (machine, minimal credit) or None.
    """
    n, k, w_max = len(g.states), g.dim, g.max_abs_weight()
    cap = CAP_FACTOR * n * w_max if cap is None else cap
    if n * (cap + 1) ** k > arena_limit:
        raise ArenaLimitError(f"arena of {n}x{cap + 1}^{k} nodes exceeds limit {arena_limit}")
    if initial_credit is None:
        initial_credit = (min(cap, n * w_max),) * k
    start = (s0, _capped(tuple(initial_credit), cap))

    succ = {}
    queue = deque([start])
    succ[start] = None
    order = [start]
    while queue:
        node = queue.popleft()
        moves = _arena_moves(g, node[0], node[1], cap)
        succ[node] = moves
        for _, dst, credit in moves:
            if credit is not None and (dst, credit) not in succ:
                succ[(dst, credit)] = None
                order.append((dst, credit))
                queue.append((dst, credit))

    preds = {node: [] for node in order}
    losing = set()
    alive = {}
    for node in order:
        moves = succ[node]
        safe = [(dst, credit) for _, dst, credit in moves if credit is not None]
        if g.owner(node[0]) == PLAYER_1:
            alive[node] = len(safe)
            if not safe:
                losing.add(node)
        elif len(safe) < len(moves):
            losing.add(node)
        for target in safe:
            preds[target].append(node)

    queue = deque(losing)
    while queue:
        node = queue.popleft()
        for p in preds[node]:
            if p in losing:
                continue
            if g.owner(p[0]) == PLAYER_1:
                alive[p] -= 1
                if alive[p] == 0:
                    losing.add(p)
                    queue.append(p)
            else:
                losing.add(p)
                queue.append(p)
    logger.debug(f"capped arena: {len(order)} nodes, {len(losing)} losing, cap {cap}")
    if start in losing:
        return None

    def chosen(node):
        return next(
            (edge_id, dst, credit) for edge_id, dst, credit in succ[node]
            if credit is not None and (dst, credit) not in losing
        )

    memory = {start: 0}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        moves = [chosen(node)] if g.owner(node[0]) == PLAYER_1 else succ[node]
        for _, dst, credit in moves:
            if (dst, credit) not in memory:
                memory[(dst, credit)] = len(memory)
                queue.append((dst, credit))

    next_move, update = {}, {}
    for node, m in memory.items():
        moves = [chosen(node)] if g.owner(node[0]) == PLAYER_1 else succ[node]
        targets = {dst: memory[(dst, credit)] for _, dst, credit in moves}
        for s in g.state_names:
            update[(m, s)] = targets.get(s, m)
        for s in g.player_states(PLAYER_1):
            next_move[(m, s)] = chosen(node)[0] if s == node[0] else g.out_edges(s)[0].id
    machine = MooreStrategy(PLAYER_1, len(memory), 0, next_move, update)
    credit = score_p1_finite_strategy(g, machine, s0)
    if credit is None:
        raise GameError("capped arena strategy failed scoring")
    return machine, credit


@dataclass(frozen=True)
class EpsilonSchedule:
    """Finite-memory round: each cycle Z*m_j times, joined by connector paths"""
    alpha: Fraction
    z: int
    plan: Tuple[Tuple[Tuple[str, ...], int], ...]
    warmup: int
    start: str

    @property
    def round_length(self):
        return sum(len(edges) * reps for edges, reps in self.plan)

    def round_edges(self):
        walk = []
        for edges, reps in self.plan:
            walk.extend(edges * reps)
        return walk


def pump_schedule_from_witness(scc, witness, alpha):
    alpha = Fraction(alpha)
    if alpha <= 0:
        raise GameError("alpha must be positive")
    if not witness.verify(scc):
        raise GameError("witness does not belong to this SCC")
    n, w_max = len(scc.states), scc.max_abs_weight()
    z = max(1, ceil((n + 2) * w_max / alpha))

    scaled = witness.scaled()
    divisor = 0
    for _, m in scaled:
        divisor = gcd(divisor, m)
    cycles = [(cycle, m // divisor) for cycle, m in scaled]

    graph = nx.DiGraph(scc.to_networkx())
    plan = []
    for j, (cycle, m) in enumerate(cycles):
        plan.append((tuple(cycle), z * m))
        here = scc.edge(cycle[0]).src
        there = scc.edge(cycles[(j + 1) % len(cycles)][0][0]).src
        hops = nx.shortest_path(graph, here, there)
        connector = tuple(
            next(e.id for e in scc.out_edges(u) if e.dst == v) for u, v in zip(hops, hops[1:])
        )
        if connector:
            plan.append((connector, 1))

    round_length = sum(len(edges) * reps for edges, reps in plan)
    warmup = ceil(2 * round_length * n * w_max / alpha)
    return EpsilonSchedule(alpha, z, tuple(plan), warmup, scc.edge(cycles[0][0][0]).src)


def pump_schedule(g, s0, alpha, stats=None):
    """(scc, schedule) for the first reachable SCC with a nonnegative multi-cycle, or None"""
    if g.player_states(PLAYER_2):
        raise SimulationError("pumping schedules need a one-player game")
    reach = restrict(g, reachable_states(g, s0))
    for scc in _scc_subgames(reach):
        witness = nonneg_multicycle(scc, stats)
        if witness is not None:
            return scc, pump_schedule_from_witness(scc, witness, alpha)
    return None


def simulate_schedule(g, schedule, horizon):
    """
    Plays the schedule for `horizon` steps; from step `warmup` on every
    running average must stay >= -2*alpha.
    """
    if horizon < max(schedule.warmup, 1):
        raise SimulationError(f"horizon {horizon} below warmup {schedule.warmup}")
    walk = schedule.round_edges()
    PlayPrefix(
        tuple([schedule.start] + [g.edge(e).dst for e in walk]), tuple(walk)
    ).validate(g)

    round_weights = np.array([g.edge(e).weight for e in walk], dtype=np.int64)
    steps = np.arange(1, horizon + 1, dtype=np.int64)
    sums = np.cumsum(round_weights[(steps - 1) % len(walk)], axis=0)

    num, den = schedule.alpha.numerator, schedule.alpha.denominator
    tail = steps >= max(schedule.warmup, 1)
    # sum/t >= -2*num/den  <=>  sum*den >= -2*num*t
    below = (sums[tail] * den) < (-2 * num * steps[tail])[:, None]
    averages = sums[tail] / steps[tail][:, None]
    lowest = averages.argmin(axis=0)
    tail_sums, tail_steps = sums[tail], steps[tail]

    stats = {
        'steps': int(horizon),
        'warmup': schedule.warmup,
        'alpha': schedule.alpha,
        'bound': -2 * schedule.alpha,
        'min_average': tuple(
            Fraction(int(tail_sums[lowest[i], i]), int(tail_steps[lowest[i]])) for i in range(g.dim)
        ),
        'final_average': tuple(Fraction(int(x), horizon) for x in sums[-1]),
        'violations': int(below.any(axis=1).sum()),
    }
    stats['ok'] = stats['violations'] == 0
    logger.info(f"schedule simulated for {horizon} steps, min averages {stats['min_average']}")
    return stats


class InterleavingSimulator:
    """
    Round-robin over dimensions: in phase i follow strategy i until the
    phase is at least Z = ceil(L*W/alpha) steps deep and its own average in
    dimension i is >= -alpha; alpha halves after every round.
    """

    def __init__(self, g, strategies, start=None, alpha=1, max_steps=10**6, phase_timeout=None):
        self.g = g
        self.strategies = [s.choice if isinstance(s, MemorylessStrategy) else dict(s) for s in strategies]
        if len(self.strategies) != g.dim:
            raise StrategyError(f"{len(self.strategies)} strategies for dimension {g.dim}")
        if g.player_states(PLAYER_2):
            raise StrategyError("interleaving runs on one-player games")
        self._check_strategies()

        self.state = start or g.initial
        self.alpha = Fraction(alpha)
        self.max_steps = max_steps
        self.phase_timeout = phase_timeout
        self.w_max = g.max_abs_weight()

        self.steps = 0
        self.totals = [0] * g.dim
        self.phase = 0
        self.records = []
        self.timed_out = False

    def _check_strategies(self):
        everything = frozenset(self.g.state_names)
        for dim, choice in enumerate(self.strategies):
            fixed = apply_memoryless(self.g, MemorylessStrategy(PLAYER_1, choice))
            if solve_single_mp_sup(fixed, dim) != everything:
                raise StrategyError(f"strategy {dim} does not win mean-payoff sup in dimension {dim} everywhere")

    def step(self, dim):
        """Play one edge of strategy `dim`"""
        e = self.g.edge(self.strategies[dim][self.state])
        self.state = e.dst
        self.steps += 1
        for i, w in enumerate(e.weight):
            self.totals[i] += w
        return e

    def run_phase(self):
        dim = self.phase % self.g.dim
        alpha = self.alpha
        z = ceil(Fraction(self.steps * self.w_max) / alpha)
        depth, phase_sum = 0, 0
        high_water = [None] * self.g.dim
        limit = self.phase_timeout

        while True:
            if self.steps >= self.max_steps or (limit is not None and depth >= limit):
                self.timed_out = True
                self.records.append({'phase': self.phase, 'dimension': dim, 'alpha': alpha,
                                     'z': z, 'steps': depth, 'timeout': True})
                logger.warning(f"phase {self.phase} timed out after {depth} steps")
                return False
            e = self.step(dim)
            depth += 1
            phase_sum += e.weight[dim]
            for i, total in enumerate(self.totals):
                average = Fraction(total, self.steps)
                if high_water[i] is None or average > high_water[i]:
                    high_water[i] = average
            if depth >= max(z, 1) and phase_sum >= -alpha * depth:
                break

        boundary = Fraction(self.totals[dim], self.steps)
        record = {
            'phase': self.phase, 'dimension': dim, 'alpha': alpha, 'z': z, 'steps': depth,
            'boundary_average': boundary, 'high_water': tuple(high_water),
            'bound_met': boundary >= -2 * alpha, 'timeout': False,
        }
        self.records.append(record)
        logger.debug(f"phase {self.phase} (dim {dim}) done after {depth} steps, average {boundary}")
        self.phase += 1
        if self.phase % self.g.dim == 0:
            self.alpha /= 2
        return True

    def run(self, phases):
        for _ in range(phases):
            if not self.run_phase():
                break
        return self.get_statistics()

    def get_statistics(self):
        completed = [r for r in self.records if not r['timeout']]
        return {
            'phases': list(self.records),
            'completed': len(completed),
            'steps': self.steps,
            'alpha': self.alpha,
            'timed_out': self.timed_out,
            'ok': all(r['bound_met'] for r in completed),
        }


def simulate_interleaved_sup(g, strategies, phases, start=None, max_steps=10**6, phase_timeout=None):
    simulator = InterleavingSimulator(g, strategies, start=start, max_steps=max_steps,
                                      phase_timeout=phase_timeout)
    return simulator.run(phases)


# certificate text format

def format_certificate(strategy, credit=None, g=None):
    """Player-1 memoryless strategies are written as one-state machines, which needs `g`"""
    lines = []
    if isinstance(strategy, MemorylessStrategy) and strategy.owner == PLAYER_2:
        lines.append('cert p2-memoryless')
        lines += [f'choose {s} {e}' for s, e in strategy.choice.items()]
    else:
        if isinstance(strategy, MemorylessStrategy):
            if g is None:
                raise StrategyError("writing a player-1 memoryless strategy needs its game")
            strategy = MooreStrategy.from_memoryless(g, strategy)
        lines += ['cert p1-moore', f'memory {strategy.memory}', f'initmem {strategy.initial}']
        lines += [f'next {m} {s} {e}' for (m, s), e in strategy.next_move.items()]
        lines += [f'update {m} {s} {t}' for (m, s), t in strategy.update.items()]
    if credit is not None:
        lines.append('credit ' + ' '.join(str(c) for c in credit))
    return '\n'.join(lines) + '\n'


def parse_certificate(text):
    """Returns (strategy, credit or None); tables are checked against a game by `validate`"""
    text = decode_text(text)
    kind = None
    choice, next_move, update = {}, {}, {}
    memory, initial, credit = None, None, None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split('#', 1)[0].split()
        if not tokens:
            continue
        keyword, args = tokens[0], tokens[1:]
        try:
            if kind is None:
                if keyword != 'cert' or len(args) != 1 or args[0] not in ('p2-memoryless', 'p1-moore'):
                    raise ParseError("expected `cert p2-memoryless` or `cert p1-moore`", lineno, 1)
                kind = args[0]
            elif keyword == 'choose' and kind == 'p2-memoryless' and len(args) == 2:
                choice[args[0]] = args[1]
            elif keyword == 'memory' and kind == 'p1-moore' and len(args) == 1:
                memory = int(args[0])
            elif keyword == 'initmem' and kind == 'p1-moore' and len(args) == 1:
                initial = int(args[0])
            elif keyword == 'next' and kind == 'p1-moore' and len(args) == 3:
                next_move[(int(args[0]), args[1])] = args[2]
            elif keyword == 'update' and kind == 'p1-moore' and len(args) == 3:
                update[(int(args[0]), args[1])] = int(args[2])
            elif keyword == 'credit':
                credit = CreditVector(tuple(int(a) for a in args))
            else:
                raise ParseError(f"unexpected line `{raw.strip()}`", lineno, 1)
        except ValueError as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(f"malformed number: {e}", lineno, 1) from None
    if kind is None:
        raise ParseError("empty certificate")
    if kind == 'p2-memoryless':
        return MemorylessStrategy(PLAYER_2, choice), credit
    if memory is None or initial is None:
        raise ParseError("p1-moore certificate needs `memory` and `initmem`")
    return MooreStrategy(PLAYER_1, memory, initial, next_move, update), credit
