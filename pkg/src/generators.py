"""
Instance Generators
Reductions from 3SAT and disjoint paths, the worked fixtures, seeded random
instances and brute-force oracles for checking the solvers against
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Tuple

import networkx as nx
import numpy as np

from src.game_core import (
    NAME_PATTERN, PLAYER_1, PLAYER_2, Edge, GameError, GameGraph, ParseError, State, decode_text,
)

logger = logging.getLogger(__name__)

MAX_SAT_VARIABLES = 20
MAX_PATH_VERTICES = 12
FIXTURES = ('fig1', 'fig3', 'barrier')


class InstanceTooLargeError(GameError):
    pass


@dataclass(frozen=True)
class CnfFormula:
    """3-CNF over variables 1..n; literals are signed variable indices"""
    variables: int
    clauses: Tuple[Tuple[int, int, int], ...]

    def __post_init__(self):
        if self.variables < 1:
            raise GameError(f"formula needs at least one variable, got {self.variables}")
        clauses = tuple(tuple(int(lit) for lit in c) for c in self.clauses)
        for c in clauses:
            if len(c) != 3:
                raise GameError(f"clause {c} has {len(c)} literals, expected 3")
            for lit in c:
                if not 1 <= abs(lit) <= self.variables:
                    raise GameError(f"literal {lit} outside variables 1..{self.variables}")
        object.__setattr__(self, 'clauses', clauses)

    def satisfied_by(self, assignment):
        """`assignment[i-1]` is the truth value of variable i"""
        return all(
            any(assignment[abs(lit) - 1] == (lit > 0) for lit in clause)
            for clause in self.clauses
        )


def parse_dimacs(text):
    """
    DIMACS CNF: `c` comment lines, a `p cnf n m` header, then 0-terminated
    clauses that may span lines. Clauses shorter than three literals are
    padded by repeating their last literal.
    """
    text = decode_text(text)
    variables = expected = None
    clauses, current = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('c'):
            continue
        if line.startswith('%'):
            break
        if line.startswith('p'):
            parts = line.split()
            if len(parts) != 4 or parts[1] != 'cnf':
                raise ParseError("header must read `p cnf <variables> <clauses>`", lineno, 1)
            try:
                variables, expected = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError("non-integer count in header", lineno, 1) from None
            continue
        if variables is None:
            raise ParseError("clause before the `p cnf` header", lineno, 1)
        for token in line.split():
            try:
                lit = int(token)
            except ValueError:
                raise ParseError(f"bad literal {token!r}", lineno, raw.find(token) + 1) from None
            if lit != 0:
                current.append(lit)
                continue
            if not current:
                raise ParseError("empty clause", lineno, raw.find(token) + 1)
            if len(current) > 3:
                raise ParseError(f"clause with {len(current)} literals is not 3-CNF", lineno, 1)
            clauses.append(tuple(current + [current[-1]] * (3 - len(current))))
            current = []
    if variables is None:
        raise ParseError("missing `p cnf` header", 1, 1)
    if current:
        raise ParseError("last clause is not terminated by 0", len(text.splitlines()), 1)
    if expected != len(clauses):
        logger.warning(f"header announces {expected} clauses, found {len(clauses)}")
    return CnfFormula(variables, tuple(clauses))


def literal_dimension(lit):
    """0-based dimension of a literal: 2(i-1) for x_i, 2(i-1)+1 for not x_i"""
    return 2 * (abs(lit) - 1) + (0 if lit > 0 else 1)


def _literal_state(lit):
    return f"p{lit}" if lit > 0 else f"n{-lit}"


def from_3sat(formula):
    """
    Player 1 picks a clause, player 2 picks one of its literals, and the
    return edge of literal l pays +1 on l and -1 on its complement.
    """
    k = 2 * formula.variables
    literals = sorted({lit for c in formula.clauses for lit in c}, key=literal_dimension)

    states = [State('init', PLAYER_1)]
    states += [State(f"c{j}", PLAYER_2) for j in range(1, len(formula.clauses) + 1)]
    states += [State(_literal_state(lit), PLAYER_1) for lit in literals]

    zero = (0,) * k
    edges = []
    for j, clause in enumerate(formula.clauses, start=1):
        edges.append(Edge(f"pick{j}", 'init', f"c{j}", zero))
        for lit in dict.fromkeys(clause):
            edges.append(Edge(f"c{j}_{_literal_state(lit)}", f"c{j}", _literal_state(lit), zero))
    for lit in literals:
        weight = [0] * k
        weight[literal_dimension(lit)] = 1
        weight[literal_dimension(-lit)] = -1
        edges.append(Edge(f"ret_{_literal_state(lit)}", _literal_state(lit), 'init', tuple(weight)))

    logger.debug(f"3SAT game: {len(states)} states, {len(edges)} edges, dimension {k}")
    return GameGraph(k, tuple(states), tuple(edges), 'init')


def parse_edge_list(text):
    """Digraph from `u v` lines; `#` starts a comment"""
    text = decode_text(text)
    graph = nx.DiGraph()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (1, 2):
            raise ParseError("expected `u v` or a lone vertex", lineno, 1)
        for token in parts:
            if not NAME_PATTERN.match(token):
                raise ParseError(f"bad vertex name {token!r}", lineno, raw.find(token) + 1)
        if len(parts) == 1:
            graph.add_node(parts[0])
        else:
            graph.add_edge(parts[0], parts[1])
    return graph


def from_disjoint_paths(graph, w, x, y, z, unit_weights=False):
    """
    One-player 2-dimensional game: original edges weigh (-1,-1), the added
    edge x->y weighs (n,-1) and z->w weighs (-1,n). With `unit_weights` the
    two added edges become chains of n edges with weights in {-1,0,1}.
    """
    terminals = (w, x, y, z)
    for t in terminals:
        if t not in graph:
            raise GameError(f"terminal {t} is not a vertex")
    if len(set(terminals)) != 4:
        raise GameError("terminals must be four distinct vertices")
    n = graph.number_of_nodes()
    states = [State(str(v), PLAYER_1) for v in graph.nodes]
    edges = [Edge(f"e{i}", str(u), str(v), (-1, -1)) for i, (u, v) in enumerate(graph.edges)]

    taken = set(graph.nodes)
    for name, src, dst, first in (('xy', x, y, (n, -1)), ('zw', z, w, (-1, n))):
        if not unit_weights:
            edges.append(Edge(name, src, dst, first))
            continue
        step = (1, 0) if name == 'xy' else (0, 1)
        head = (1, -1) if name == 'xy' else (-1, 1)
        chain = [src] + [f"{name}_{i}" for i in range(1, n)] + [dst]
        for inner in chain[1:-1]:
            if inner in taken:
                raise GameError(f"chain vertex {inner} clashes with an input vertex")
            taken.add(inner)
            states.append(State(inner, PLAYER_1))
        for i, (a, b) in enumerate(zip(chain, chain[1:])):
            edges.append(Edge(f"{name}{i}", a, b, head if i == 0 else step))

    has_out = {e.src for e in edges}
    for i, s in enumerate(st for st in states if st.name not in has_out):
        edges.append(Edge(f"loop{i}", s.name, s.name, (-1, -1)))
    return GameGraph(2, tuple(states), tuple(edges), w)


def fixture(name):
    if name == 'fig1':
        # player 2 at s0 goes left into a zero loop or right to player 1,
        # who returns with (1,-1) or (-1,1)
        states = (State('s0', PLAYER_2), State('s1', PLAYER_1), State('s2', PLAYER_1))
        edges = (
            Edge('left', 's0', 's1', (-2, 0)),
            Edge('right', 's0', 's2', (0, 0)),
            Edge('loop1', 's1', 's1', (0, 0)),
            Edge('ret_a', 's2', 's0', (1, -1)),
            Edge('ret_b', 's2', 's0', (-1, 1)),
        )
        return GameGraph(2, states, edges, 's0')
    if name == 'fig3':
        states = (State('sa', PLAYER_1), State('sb', PLAYER_1))
        edges = (
            Edge('loop_a', 'sa', 'sa', (2, 0)),
            Edge('loop_b', 'sb', 'sb', (0, 2)),
            Edge('ab', 'sa', 'sb', (0, 0)),
            Edge('ba', 'sb', 'sa', (0, 0)),
        )
        return GameGraph(2, states, edges, 'sa')
    if name == 'barrier':
        # zero multi-cycle from the two loops, but the only way between them costs 5 in dimension 3
        states = (State('u', PLAYER_1), State('v', PLAYER_1))
        edges = (
            Edge('uv', 'u', 'v', (0, 0, 5)),
            Edge('vu', 'v', 'u', (0, 0, 5)),
            Edge('loop_u', 'u', 'u', (1, -1, 0)),
            Edge('loop_v', 'v', 'v', (-1, 1, 0)),
        )
        return GameGraph(3, states, edges, 'u')
    raise GameError(f"unknown fixture {name!r}, expected one of {', '.join(FIXTURES)}")


def random_game(n, k, max_weight, p2_fraction=0.5, seed=None):
    """Seeded game on states s0..s{n-1}: 1 to 3 distinct successors each, weights in [-W, W]"""
    if n < 1 or k < 1 or max_weight < 0:
        raise GameError(f"random_game needs n, k >= 1 and W >= 0, got {n}, {k}, {max_weight}")
    rng = np.random.default_rng(seed)
    names = [f"s{i}" for i in range(n)]
    states = tuple(
        State(name, PLAYER_2 if rng.random() < p2_fraction else PLAYER_1) for name in names
    )
    edges = []
    for i in range(n):
        degree = int(rng.integers(1, min(3, n) + 1))
        for j in sorted(rng.choice(n, size=degree, replace=False)):
            weight = tuple(int(x) for x in rng.integers(-max_weight, max_weight + 1, size=k))
            edges.append(Edge(f"e{len(edges)}", names[i], names[int(j)], weight))
    return GameGraph(k, states, tuple(edges), 's0')


def random_cnf(n, m, seed=None):
    rng = np.random.default_rng(seed)
    clauses = []
    for _ in range(m):
        variables = rng.integers(1, n + 1, size=3)
        signs = rng.integers(0, 2, size=3)
        clauses.append(tuple(int(v) if s else -int(v) for v, s in zip(variables, signs)))
    return CnfFormula(n, tuple(clauses))


def random_digraph(n, p=0.3, seed=None):
    """Seeded digraph on v0..v{n-1} without self-loops; each arc kept with probability p"""
    rng = np.random.default_rng(seed)
    graph = nx.DiGraph()
    graph.add_nodes_from(f"v{i}" for i in range(n))
    for u, v in itertools.permutations(range(n), 2):
        if rng.random() < p:
            graph.add_edge(f"v{u}", f"v{v}")
    return graph


def brute_force_sat(formula):
    if formula.variables > MAX_SAT_VARIABLES:
        raise InstanceTooLargeError(f"{formula.variables} variables exceed {MAX_SAT_VARIABLES}")
    return any(
        formula.satisfied_by(assignment)
        for assignment in itertools.product((False, True), repeat=formula.variables)
    )


def brute_force_disjoint_paths(graph, w, x, y, z):
    """Vertex-disjoint simple paths w->x and y->z"""
    if graph.number_of_nodes() > MAX_PATH_VERTICES:
        raise InstanceTooLargeError(f"{graph.number_of_nodes()} vertices exceed {MAX_PATH_VERTICES}")
    for path in nx.all_simple_paths(graph, w, x):
        rest = graph.subgraph(set(graph.nodes) - set(path))
        if y in rest and z in rest and nx.has_path(rest, y, z):
            return True
    return False
