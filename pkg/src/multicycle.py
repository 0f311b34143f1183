"""
Multi-Cycles and Circuits
Nonnegative multi-cycles, zero circuits and reachable nonnegative circuits
of multi-weighted graphs (ownership is ignored here)
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Optional, Tuple

import networkx as nx

from src.game_core import Edge, GameError, reachable_states, restrict, weight_sum
from src.lp_exact import LinearConstraintSystem, Relation, solve_feasibility, support_points

logger = logging.getLogger(__name__)

DEFAULT_WALK_BOUND = 10_000
QUICK_CYCLE_LIMIT = 64


class NotStronglyConnectedError(GameError):
    pass


@dataclass(frozen=True)
class MultiCycleWitness:
    """Simple cycles (edge-id sequences) with positive rational factors"""
    cycles: Tuple[Tuple[Tuple[str, ...], Fraction], ...]

    def total(self, g):
        total = [Fraction(0)] * g.dim
        for cycle, factor in self.cycles:
            for i, w in enumerate(weight_sum(g, cycle)):
                total[i] += factor * w
        return tuple(total)

    def scaled(self):
        """Integer multiplicities: factors times the lcm of their denominators"""
        scale = lcm(*(f.denominator for _, f in self.cycles)) if self.cycles else 1
        return tuple((cycle, int(f * scale)) for cycle, f in self.cycles)

    def verify(self, g):
        if not self.cycles or any(f <= 0 for _, f in self.cycles):
            return False
        vertices = set()
        for cycle, _ in self.cycles:
            if not _is_simple_cycle(g, cycle):
                return False
            vertices.update(g.edge(e).src for e in cycle)
        if not any(vertices <= scc for scc in _sccs(g)):
            return False
        if any(x < 0 for x in self.total(g)):
            return False
        scaled_total = [0] * g.dim
        for cycle, m in self.scaled():
            for i, w in enumerate(weight_sum(g, cycle)):
                scaled_total[i] += m * w
        return all(x >= 0 for x in scaled_total)


@dataclass(frozen=True)
class CircuitWitness:
    """Closed walk as an edge-id sequence; not necessarily simple"""
    edges: Tuple[str, ...]

    def verify(self, g, zero=False):
        if not self.edges:
            return False
        for edge_id in self.edges:
            if not g.has_edge(edge_id):
                return False
        walk = [g.edge(e) for e in self.edges]
        for a, b in zip(walk, walk[1:]):
            if a.dst != b.src:
                return False
        if walk[-1].dst != walk[0].src:
            return False
        total = weight_sum(g, self.edges)
        if zero:
            return all(x == 0 for x in total)
        return all(x >= 0 for x in total)


def _is_simple_cycle(g, cycle):
    if not cycle or not all(g.has_edge(e) for e in cycle):
        return False
    walk = [g.edge(e) for e in cycle]
    if any(a.dst != b.src for a, b in zip(walk, walk[1:])) or walk[-1].dst != walk[0].src:
        return False
    sources = [e.src for e in walk]
    return len(set(sources)) == len(sources)


def _sccs(g):
    return [set(c) for c in nx.strongly_connected_components(nx.DiGraph(g.to_networkx()))]


def _edge_graph(g, edge_ids):
    graph = nx.MultiDiGraph()
    for edge_id in edge_ids:
        e = g.edge(edge_id)
        graph.add_edge(e.src, e.dst, key=edge_id)
    return graph


def _strongly_connected(g, edge_ids):
    return bool(edge_ids) and nx.is_strongly_connected(_edge_graph(g, edge_ids))


def _component_edge_sets(g, edge_ids):
    """Edge sets internal to each SCC of the subgraph formed by `edge_ids`"""
    order = {e: i for i, e in enumerate(edge_ids)}
    groups = []
    for comp in nx.strongly_connected_components(_edge_graph(g, edge_ids)):
        internal = [e for e in edge_ids if g.edge(e).src in comp and g.edge(e).dst in comp]
        if internal:
            groups.append(internal)
    return sorted(groups, key=lambda es: order[es[0]])


def flow_system(g, edge_ids, relation):
    """
    Circulation LP over `edge_ids`: conservation at every vertex, x_e >= 0,
    sum x_e * w_i(e) (relation) 0 per dimension, sum x_e >= 1.
    """
    lcs = LinearConstraintSystem()
    for edge_id in edge_ids:
        lcs.add_variable(edge_id, nonnegative=True)
    balance = {}
    for edge_id in edge_ids:
        e = g.edge(edge_id)
        balance.setdefault(e.src, {})
        balance.setdefault(e.dst, {})
        balance[e.src][edge_id] = balance[e.src].get(edge_id, 0) + 1
        balance[e.dst][edge_id] = balance[e.dst].get(edge_id, 0) - 1
    for vertex in g.state_names:
        if vertex in balance:
            lcs.add_constraint(balance[vertex], Relation.EQ, 0)
    for i in range(g.dim):
        lcs.add_constraint({e: g.edge(e).weight[i] for e in edge_ids}, relation, 0)
    lcs.add_constraint({e: 1 for e in edge_ids}, Relation.GE, 1)
    return lcs


def _integer_flow(point):
    """Scale a rational flow to the smallest proportional integer flow"""
    positive = {e: x for e, x in point.items() if x > 0}
    scale = lcm(*(x.denominator for x in positive.values()))
    flow = {e: int(x * scale) for e, x in positive.items()}
    divisor = 0
    for m in flow.values():
        divisor = gcd(divisor, m)
    return {e: m // divisor for e, m in flow.items()}


def decompose_flow(g, flow):
    """Greedy split of a balanced integer flow into simple cycles with multiplicities"""
    remaining = {e.id: flow[e.id] for e in g.edges if flow.get(e.id, 0) > 0}
    cycles = {}
    while remaining:
        vertex = g.edge(next(iter(remaining))).src
        path, position = [], {}
        while vertex not in position:
            position[vertex] = len(path)
            step = next(e for e in g.out_edges(vertex) if remaining.get(e.id, 0) > 0)
            path.append(step.id)
            vertex = step.dst
        cycle = tuple(path[position[vertex]:])
        m = min(remaining[e] for e in cycle)
        for e in cycle:
            remaining[e] -= m
            if remaining[e] == 0:
                del remaining[e]
        cycles[cycle] = cycles.get(cycle, 0) + m
    return cycles


def nonneg_multicycle(g, stats=None) -> Optional[MultiCycleWitness]:
    """Witness for a nonnegative multi-cycle of a strongly connected graph"""
    if not g.states or len(_sccs(g)) != 1:
        raise NotStronglyConnectedError("nonneg_multicycle needs a strongly connected graph")
    edge_ids = [e.id for e in g.edges]
    result = solve_feasibility(flow_system(g, edge_ids, Relation.GE), stats)
    if not result.feasible:
        return None
    cycles = decompose_flow(g, _integer_flow(result.assignment))
    witness = MultiCycleWitness(tuple((c, Fraction(m)) for c, m in cycles.items()))
    if not witness.verify(g):
        raise GameError("multi-cycle witness failed re-check")
    return witness


def _zero_support_point(g, edge_ids, stats):
    """
    A point of the equality circulation LP whose support is strongly
    connected, searching SCC by SCC and recursing into disconnected supports.
    """
    for component in _component_edge_sets(g, edge_ids):
        lcs = flow_system(g, component, Relation.EQ)
        result = solve_feasibility(lcs, stats)
        if not result.feasible:
            continue
        positive = [e for e in component if result.assignment[e] > 0]
        if _strongly_connected(g, positive):
            return {e: result.assignment[e] for e in positive}
        points = support_points(lcs, stats)
        support = [e for e in component if e in points]
        if _strongly_connected(g, support):
            distinct = list({id(p): p for p in points.values()}.values())
            return {e: sum(p[e] for p in distinct) / len(distinct) for e in support}
        found = _zero_support_point(g, support, stats)
        if found is not None:
            return found
    return None


def _eulerian_walk(g, flow, walk_bound):
    if sum(flow.values()) > walk_bound:
        return None
    multigraph = nx.MultiDiGraph()
    for edge_id, m in flow.items():
        e = g.edge(edge_id)
        for _ in range(m):
            multigraph.add_edge(e.src, e.dst, edge_id=edge_id)
    start = g.edge(next(iter(flow))).src
    walk = tuple(
        multigraph.edges[u, v, k]['edge_id']
        for u, v, k in nx.eulerian_circuit(multigraph, source=start, keys=True)
    )
    return CircuitWitness(walk)


def zero_circuit_exists(g, walk_bound=DEFAULT_WALK_BOUND, stats=None):
    """
    (found, witness): whether some connected closed walk sums to zero in
    every dimension; the walk is returned when not longer than `walk_bound`.
    """
    point = _zero_support_point(g, [e.id for e in g.edges], stats)
    if point is None:
        return False, None
    witness = _eulerian_walk(g, _integer_flow(point), walk_bound)
    if witness is not None and not witness.verify(g, zero=True):
        raise GameError("zero circuit witness failed re-check")
    return True, witness


def with_decrements(g):
    """Adds the k self-loops -e_i at every state; returns (graph, added edge-ids)"""
    taken = {e.id for e in g.edges}
    extra = []
    for name in g.state_names:
        for i in range(g.dim):
            edge_id = f"{name}~dec{i}"
            while edge_id in taken:
                edge_id += '~'
            taken.add(edge_id)
            extra.append(Edge(edge_id, name, name, tuple(-1 if j == i else 0 for j in range(g.dim))))
    return g.with_edges(list(g.edges) + extra), frozenset(e.id for e in extra)


def _quick_nonneg_circuit(g, limit=QUICK_CYCLE_LIMIT):
    """Nonnegative simple cycle, or pair of simple cycles through a common state"""
    cycles = []
    digraph = nx.DiGraph(g.to_networkx())
    for nodes in itertools.islice(nx.simple_cycles(digraph), limit):
        hops = list(zip(nodes, nodes[1:] + nodes[:1]))
        choices = [[e.id for e in g.out_edges(u) if e.dst == v] for u, v in hops]
        for picked in itertools.islice(itertools.product(*choices), 4):
            cycles.append((tuple(nodes), picked))
            if all(x >= 0 for x in weight_sum(g, picked)):
                return CircuitWitness(picked)
    for (nodes_a, a), (nodes_b, b) in itertools.combinations(cycles, 2):
        shared = next((v for v in nodes_a if v in nodes_b), None)
        if shared is None:
            continue
        ia, ib = nodes_a.index(shared), nodes_b.index(shared)
        walk = a[ia:] + a[:ia] + b[ib:] + b[:ib]
        if all(x >= 0 for x in weight_sum(g, walk)):
            return CircuitWitness(walk)
    return None


def find_nonneg_circuit(g, walk_bound=DEFAULT_WALK_BOUND, stats=None):
    """(found, witness) for a circuit of componentwise nonnegative weight anywhere in g"""
    quick = _quick_nonneg_circuit(g)
    if quick is not None:
        return True, quick
    decremented, added = with_decrements(g)
    found, walk = zero_circuit_exists(decremented, walk_bound, stats)
    if not found:
        return False, None
    if walk is not None:
        walk = CircuitWitness(tuple(e for e in walk.edges if e not in added))
        if not walk.verify(g):
            raise GameError("nonnegative circuit witness failed re-check")
    return True, walk


def nonneg_circuit_reachable(g, s0, stats=None):
    """Whether a circuit with nonnegative total weight is reachable from s0"""
    found, _ = find_nonneg_circuit(restrict(g, reachable_states(g, s0)), stats=stats)
    return found
