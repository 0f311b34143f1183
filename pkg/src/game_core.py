"""
Game Core
Multi-weighted two-player game graphs, the .mwg text format, threshold
normalization, attractors, SCCs and play evaluation
"""

import logging
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, FrozenSet, Optional, Tuple, Union

import networkx as nx

logger = logging.getLogger(__name__)

PLAYER_1 = 1
PLAYER_2 = 2

NAME_PATTERN = re.compile(r'^[A-Za-z0-9_]+$')
INT_PATTERN = re.compile(r'^[+-]?[0-9]+$')
RATIONAL_PATTERN = re.compile(r'^([+-]?[0-9]+)(?:/([+-]?[0-9]+))?$')

WeightVector = Tuple[int, ...]


class GameError(ValueError):
    """Root of all domain errors"""


class ParseError(GameError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)


class InvalidPlayError(GameError):
    pass


class RestrictionError(GameError):
    def __init__(self, state):
        self.state = state
        super().__init__(f"state {state} has no outgoing edge inside the restriction")


def opponent(player):
    return PLAYER_2 if player == PLAYER_1 else PLAYER_1


@dataclass(frozen=True)
class State:
    name: str
    owner: int


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str
    weight: WeightVector


@dataclass(frozen=True)
class GameGraph:
    """
    Finite two-player arena with k-dimensional integer edge weights.
    Immutable; states and edges keep their declaration order.
    """
    dim: int
    states: Tuple[State, ...]
    edges: Tuple[Edge, ...]
    initial: Optional[str] = None
    _owner: Dict[str, int] = field(init=False, compare=False, repr=False)
    _out: Dict[str, Tuple[Edge, ...]] = field(init=False, compare=False, repr=False)
    _by_id: Dict[str, Edge] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.dim, int) or self.dim < 1:
            raise GameError(f"dimension must be a positive integer, got {self.dim!r}")
        states = tuple(State(s.name, int(s.owner)) for s in self.states)
        edges = tuple(
            Edge(e.id, e.src, e.dst, tuple(int(x) for x in e.weight)) for e in self.edges
        )

        owner = {}
        for s in states:
            if s.name in owner:
                raise GameError(f"duplicate state {s.name}")
            if s.owner not in (PLAYER_1, PLAYER_2):
                raise GameError(f"state {s.name} has owner {s.owner}, expected 1 or 2")
            owner[s.name] = s.owner

        out = {name: [] for name in owner}
        by_id = {}
        for e in edges:
            if e.id in by_id:
                raise GameError(f"duplicate edge-id {e.id}")
            for end in (e.src, e.dst):
                if end not in owner:
                    raise GameError(f"edge {e.id} references unknown state {end}")
            if len(e.weight) != self.dim:
                raise GameError(
                    f"edge {e.id} has {len(e.weight)} weights, dimension is {self.dim}"
                )
            by_id[e.id] = e
            out[e.src].append(e)

        for name, succ in out.items():
            if not succ:
                raise GameError(f"sink state {name} has no outgoing edge")
        if self.initial is not None and self.initial not in owner:
            raise GameError(f"initial state {self.initial} is not declared")

        object.__setattr__(self, 'states', states)
        object.__setattr__(self, 'edges', edges)
        object.__setattr__(self, '_owner', owner)
        object.__setattr__(self, '_out', {k: tuple(v) for k, v in out.items()})
        object.__setattr__(self, '_by_id', by_id)

    @property
    def state_names(self):
        return tuple(s.name for s in self.states)

    def has_state(self, name):
        return name in self._owner

    def owner(self, name):
        try:
            return self._owner[name]
        except KeyError:
            raise GameError(f"unknown state {name}") from None

    def out_edges(self, name):
        try:
            return self._out[name]
        except KeyError:
            raise GameError(f"unknown state {name}") from None

    def edge(self, edge_id):
        try:
            return self._by_id[edge_id]
        except KeyError:
            raise GameError(f"unknown edge {edge_id}") from None

    def has_edge(self, edge_id):
        return edge_id in self._by_id

    def player_states(self, player):
        return tuple(s.name for s in self.states if s.owner == player)

    def max_abs_weight(self):
        """W: the largest absolute weight over all edges and dimensions"""
        return max((abs(x) for e in self.edges for x in e.weight), default=0)

    def with_edges(self, edges, owners=None, initial=None):
        """Same state set with a new edge list (and optionally new owners)"""
        owners = owners or {}
        states = tuple(State(s.name, owners.get(s.name, s.owner)) for s in self.states)
        return GameGraph(self.dim, states, tuple(edges), initial or self.initial)

    def to_networkx(self):
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.state_names)
        for e in self.edges:
            graph.add_edge(e.src, e.dst, key=e.id, weight=e.weight)
        return graph


@dataclass(frozen=True)
class PlayPrefix:
    states: Tuple[str, ...]
    edges: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'states', tuple(self.states))
        object.__setattr__(self, 'edges', tuple(self.edges))

    def validate(self, g):
        if not self.states:
            raise InvalidPlayError("a play prefix needs at least one state")
        if len(self.edges) != len(self.states) - 1:
            raise InvalidPlayError(
                f"{len(self.states)} states need {len(self.states) - 1} edges, got {len(self.edges)}"
            )
        for name in self.states:
            if not g.has_state(name):
                raise InvalidPlayError(f"unknown state {name}")
        for i, edge_id in enumerate(self.edges):
            if not g.has_edge(edge_id):
                raise InvalidPlayError(f"unknown edge {edge_id}")
            e = g.edge(edge_id)
            if e.src != self.states[i] or e.dst != self.states[i + 1]:
                raise InvalidPlayError(
                    f"edge {edge_id} does not lead from {self.states[i]} to {self.states[i + 1]}"
                )


@dataclass(frozen=True)
class LassoPlay:
    """Ultimately periodic play stem . loop^omega"""
    stem: PlayPrefix
    loop: PlayPrefix

    def validate(self, g):
        self.stem.validate(g)
        self.loop.validate(g)
        if not self.loop.edges:
            raise InvalidPlayError("the loop of a lasso must contain an edge")
        if self.loop.states[0] != self.loop.states[-1]:
            raise InvalidPlayError("the loop of a lasso must be closed")
        if self.stem.states[-1] != self.loop.states[0]:
            raise InvalidPlayError("the stem must end where the loop starts")

    @classmethod
    def from_states(cls, g, stem_states, loop_states):
        """
        Build a lasso from visited states only; the loop closes back to its
        first state. Between parallel edges the first declared one is taken.
        """
        stem_states = list(stem_states)
        loop_states = list(loop_states)
        if not loop_states:
            raise InvalidPlayError("the loop of a lasso needs at least one state")
        if not stem_states or stem_states[-1] != loop_states[0]:
            stem_states.append(loop_states[0])
        loop_states.append(loop_states[0])
        return cls(_prefix_from_states(g, stem_states), _prefix_from_states(g, loop_states))


def _prefix_from_states(g, names):
    edges = []
    for src, dst in zip(names, names[1:]):
        candidates = [e for e in g.out_edges(src) if e.dst == dst]
        if not candidates:
            raise InvalidPlayError(f"no edge from {src} to {dst}")
        if len(candidates) > 1:
            logger.debug(f"parallel edges {src}->{dst}, taking {candidates[0].id}")
        edges.append(candidates[0].id)
    return PlayPrefix(tuple(names), tuple(edges))


class ObjectiveKind(Enum):
    ENERGY = 'energy'
    FINITE_MEMORY_MP = 'mp-fin'
    MP_SUP = 'mp-sup'
    MP_INF = 'mp-inf'
    MP_INFSUP = 'mp-infsup'


@dataclass(frozen=True)
class ObjectiveSpec:
    """
    Objective with 0-based dimension sets I (inf) and J (sup) and one
    rational threshold per dimension.
    """
    kind: ObjectiveKind
    inf_dims: FrozenSet[int] = frozenset()
    sup_dims: FrozenSet[int] = frozenset()
    thresholds: Tuple[Fraction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'inf_dims', frozenset(self.inf_dims))
        object.__setattr__(self, 'sup_dims', frozenset(self.sup_dims))
        object.__setattr__(self, 'thresholds', tuple(Fraction(t) for t in self.thresholds))

    @classmethod
    def for_kind(cls, kind, dim, inf=None, sup=None, thresholds=None):
        every = frozenset(range(dim))
        if kind == ObjectiveKind.MP_INFSUP:
            if inf is None or sup is None:
                raise GameError("mp-infsup needs explicit inf and sup dimensions")
        elif kind == ObjectiveKind.MP_SUP:
            if inf:
                raise GameError("mp-sup takes no inf dimensions")
            inf, sup = frozenset(), every if sup is None else sup
        elif kind == ObjectiveKind.MP_INF:
            if sup:
                raise GameError("mp-inf takes no sup dimensions")
            inf, sup = every if inf is None else inf, frozenset()
        else:
            if inf is not None or sup is not None:
                raise GameError(f"{kind.value} ranges over every dimension")
            inf, sup = every, frozenset()
        spec = cls(kind, inf, sup,
                   thresholds if thresholds is not None else (0,) * dim)
        spec.validate(dim)
        return spec

    def normalized(self):
        """J := J \\ I, since liminf >= 0 already implies limsup >= 0"""
        return ObjectiveSpec(self.kind, self.inf_dims, self.sup_dims - self.inf_dims, self.thresholds)

    def validate(self, dim):
        for d in self.inf_dims | self.sup_dims:
            if not 0 <= d < dim:
                raise GameError(f"dimension index {d} outside 0..{dim - 1}")
        if self.thresholds and len(self.thresholds) != dim:
            raise GameError(f"{len(self.thresholds)} thresholds given for dimension {dim}")


def parse_rational(text):
    """Parse `a` or `a/b` into an exact Fraction"""
    match = RATIONAL_PATTERN.match(text.strip())
    if not match:
        raise GameError(f"malformed rational {text!r}")
    numerator = int(match.group(1))
    denominator = int(match.group(2)) if match.group(2) is not None else 1
    if denominator == 0:
        raise GameError(f"zero denominator in {text!r}")
    return Fraction(numerator, denominator)


def _threshold_pair(t):
    if isinstance(t, tuple):
        a, b = t
        if b == 0:
            raise GameError("zero denominator in threshold")
        t = Fraction(a, b)
    elif isinstance(t, str):
        t = parse_rational(t)
    else:
        t = Fraction(t)
    return t.numerator, t.denominator


def shift_weights(g, thresholds):
    """
    Normalize a threshold vector to 0: per dimension weight w becomes
    b*w - a for threshold a/b (b > 0).
    """
    if len(thresholds) != g.dim:
        raise GameError(f"{len(thresholds)} thresholds given for dimension {g.dim}")
    pairs = [_threshold_pair(t) for t in thresholds]
    if all(a == 0 for a, _ in pairs):
        return g
    edges = [
        Edge(e.id, e.src, e.dst, tuple(b * w - a for w, (a, b) in zip(e.weight, pairs)))
        for e in g.edges
    ]
    return g.with_edges(edges)


def mask_dimensions(g, keep):
    """Zero every dimension outside `keep`; vectors stay full width"""
    keep = frozenset(keep)
    edges = [
        Edge(e.id, e.src, e.dst, tuple(w if i in keep else 0 for i, w in enumerate(e.weight)))
        for e in g.edges
    ]
    return g.with_edges(edges)


def restrict(g, subset):
    """Subgame induced by `subset`; each kept state needs a successor inside it"""
    keep = set(subset)
    for name in keep:
        if not g.has_state(name):
            raise GameError(f"unknown state {name}")
    for s in g.states:
        if s.name in keep and not any(e.dst in keep for e in g.out_edges(s.name)):
            raise RestrictionError(s.name)
    states = tuple(s for s in g.states if s.name in keep)
    edges = tuple(e for e in g.edges if e.src in keep and e.dst in keep)
    initial = g.initial if g.initial in keep else (states[0].name if states else None)
    return GameGraph(g.dim, states, edges, initial)


def attractor(g, player, target):
    """States from which `player` can force a visit to `target`"""
    attr = set(target)
    for name in attr:
        if not g.has_state(name):
            raise GameError(f"unknown state {name}")

    preds = {name: [] for name in g.state_names}
    for e in g.edges:
        preds[e.dst].append(e.src)
    # opponent states join once every outgoing edge leads into the attractor
    remaining = {name: len(g.out_edges(name)) for name in g.state_names}

    queue = deque(attr)
    while queue:
        t = queue.popleft()
        for s in preds[t]:
            if s in attr:
                continue
            if g.owner(s) == player:
                attr.add(s)
                queue.append(s)
            else:
                remaining[s] -= 1
                if remaining[s] == 0:
                    attr.add(s)
                    queue.append(s)
    return frozenset(attr)


def reachable_states(g, source):
    if not g.has_state(source):
        raise GameError(f"unknown state {source}")
    graph = g.to_networkx()
    return frozenset(nx.descendants(graph, source) | {source})


def scc_decomposition(g):
    """Maximal SCCs in reverse topological order (sink components first)"""
    if not g.states:
        return []
    order = {name: i for i, name in enumerate(g.state_names)}
    condensed = nx.condensation(nx.DiGraph(g.to_networkx()))
    topo = list(nx.lexicographical_topological_sort(
        condensed, key=lambda c: min(order[s] for s in condensed.nodes[c]['members'])
    ))
    return [frozenset(condensed.nodes[c]['members']) for c in reversed(topo)]


def weight_sum(g, edge_ids):
    total = [0] * g.dim
    for edge_id in edge_ids:
        for i, w in enumerate(g.edge(edge_id).weight):
            total[i] += w
    return tuple(total)


def energy_level(g, prefix):
    """EL(prefix): componentwise sum of traversed weights"""
    prefix.validate(g)
    return weight_sum(g, prefix.edges)


def lasso_mean_payoff(g, lasso):
    """Exact per-dimension average of the loop; the stem does not count"""
    lasso.validate(g)
    total = weight_sum(g, lasso.loop.edges)
    length = len(lasso.loop.edges)
    return tuple(Fraction(x, length) for x in total)


# .mwg text format

def decode_text(text: Union[bytes, str]) -> str:
    """UTF-8 bytes to text; undecodable input is a ParseError"""
    if isinstance(text, bytes):
        try:
            return text.decode('utf-8')
        except UnicodeDecodeError as e:
            raise ParseError(f"not UTF-8: {e}") from None
    return text


def parse_game(text: Union[bytes, str]) -> GameGraph:
    text = decode_text(text)

    dim = None
    header_seen = False
    states = []
    state_lines = {}
    edges = []
    initial = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in re.finditer(r'\S+', line)]
        if not tokens:
            continue
        keyword, kcol = tokens[0]
        args = tokens[1:]

        if not header_seen:
            if keyword != 'mwg' or len(args) != 1 or args[0][0] != '1':
                raise ParseError("expected header `mwg 1`", lineno, kcol)
            header_seen = True
            continue

        if keyword == 'dim':
            if dim is not None:
                raise ParseError("dimension declared twice", lineno, kcol)
            if len(args) != 1:
                raise ParseError("expected `dim <k>`", lineno, kcol)
            dim = _parse_int(args[0], lineno)
            if dim < 1:
                raise ParseError("dimension must be positive", lineno, args[0][1])
        elif keyword == 'state':
            if len(args) != 2:
                raise ParseError("expected `state <name> <1|2>`", lineno, kcol)
            name = _parse_name(args[0], lineno)
            if args[1][0] not in ('1', '2'):
                raise ParseError("owner must be 1 or 2", lineno, args[1][1])
            if name in state_lines:
                raise ParseError(f"duplicate state {name}", lineno, args[0][1])
            state_lines[name] = lineno
            states.append(State(name, int(args[1][0])))
        elif keyword == 'edge':
            if dim is None:
                raise ParseError("`dim` must precede edges", lineno, kcol)
            if len(args) < 3:
                raise ParseError("expected `edge <id> <src> <dst> <w1> ... <wk>`", lineno, kcol)
            edge_id, src, dst = (_parse_name(tok, lineno) for tok in args[:3])
            weights = args[3:]
            if len(weights) != dim:
                col = weights[0][1] if weights else args[-1][1]
                raise ParseError(
                    f"dimension mismatch: edge {edge_id} has {len(weights)} weights, expected {dim}",
                    lineno, col,
                )
            if any(e.id == edge_id for e, _ in edges):
                raise ParseError(f"duplicate edge-id {edge_id}", lineno, args[0][1])
            edges.append((Edge(edge_id, src, dst, tuple(_parse_int(w, lineno) for w in weights)), lineno))
        elif keyword == 'init':
            if len(args) != 1:
                raise ParseError("expected `init <name>`", lineno, kcol)
            if initial is not None:
                raise ParseError("initial state declared twice", lineno, kcol)
            initial = (_parse_name(args[0], lineno), lineno)
        else:
            raise ParseError(f"unknown keyword {keyword}", lineno, kcol)

    if not header_seen:
        raise ParseError("empty input, expected header `mwg 1`", 1, 1)
    if dim is None:
        raise ParseError("missing `dim` line")

    has_out = set()
    for e, lineno in edges:
        for end in (e.src, e.dst):
            if end not in state_lines:
                raise ParseError(f"edge {e.id} references unknown state {end}", lineno, 1)
        has_out.add(e.src)
    for s in states:
        if s.name not in has_out:
            raise ParseError(f"sink state {s.name} has no outgoing edge", state_lines[s.name], 1)
    if initial is None:
        raise ParseError("missing `init` line")
    if initial[0] not in state_lines:
        raise ParseError(f"initial state {initial[0]} is not declared", initial[1], 1)

    return GameGraph(dim, tuple(states), tuple(e for e, _ in edges), initial[0])


def _parse_int(token, lineno):
    text, col = token
    if not INT_PATTERN.fullmatch(text):
        raise ParseError(f"expected a decimal integer, got {text!r}", lineno, col)
    return int(text)


def _parse_name(token, lineno):
    text, col = token
    if not NAME_PATTERN.match(text):
        raise ParseError(f"malformed name {text!r}", lineno, col)
    return text


def serialize_game(g: GameGraph) -> bytes:
    for name in list(g.state_names) + [e.id for e in g.edges]:
        if not NAME_PATTERN.match(name):
            raise GameError(f"name {name!r} cannot be written in .mwg format")
    lines = ['mwg 1', f'dim {g.dim}']
    lines += [f'state {s.name} {s.owner}' for s in g.states]
    lines += [
        f"edge {e.id} {e.src} {e.dst} {' '.join(str(w) for w in e.weight)}" for e in g.edges
    ]
    if g.initial is not None:
        lines.append(f'init {g.initial}')
    return ('\n'.join(lines) + '\n').encode('utf-8')
