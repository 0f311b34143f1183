"""
Exact Linear Feasibility
Simplex with Bland's rule over Fractions; feasible answers carry an
assignment, infeasible ones a Farkas certificate, and both are re-checked
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction as Frac
from typing import Dict, List, Mapping

from src.game_core import GameError

logger = logging.getLogger(__name__)


class LPError(GameError):
    pass


class CertificateCheckError(LPError):
    """An assignment or Farkas certificate failed its own re-check"""


class Relation(Enum):
    LE = '<='
    EQ = '='
    GE = '>='


class Verdict(Enum):
    FEASIBLE = 'feasible'
    INFEASIBLE = 'infeasible'


@dataclass
class Constraint:
    coefficients: Dict[str, Frac]
    relation: Relation
    rhs: Frac

    def lhs(self, assignment):
        return sum((c * assignment[v] for v, c in self.coefficients.items()), Frac(0))

    def holds(self, assignment):
        value = self.lhs(assignment)
        if self.relation == Relation.LE:
            return value <= self.rhs
        if self.relation == Relation.GE:
            return value >= self.rhs
        return value == self.rhs


class LinearConstraintSystem:
    """
    Ordered variables and constraints. Variables are free unless declared
    nonnegative; a nonnegativity bound takes part in Farkas certificates
    with its own multiplier.
    """

    def __init__(self):
        self.variables: List[str] = []
        self.constraints: List[Constraint] = []
        self._nonnegative = set()

    def add_variable(self, name, nonnegative=False):
        if name in self._index():
            raise LPError(f"variable {name} declared twice")
        self.variables.append(name)
        if nonnegative:
            self._nonnegative.add(name)
        return name

    def is_nonnegative(self, name):
        return name in self._nonnegative

    def add_constraint(self, coefficients: Mapping[str, object], relation, rhs=0):
        known = self._index()
        coeffs = {}
        for v, c in coefficients.items():
            if v not in known:
                raise LPError(f"constraint references undeclared variable {v}")
            c = Frac(c)
            if c:
                coeffs[v] = coeffs.get(v, Frac(0)) + c
        self.constraints.append(Constraint(coeffs, Relation(relation), Frac(rhs)))
        return len(self.constraints) - 1

    def copy(self):
        other = LinearConstraintSystem()
        other.variables = list(self.variables)
        other.constraints = list(self.constraints)
        other._nonnegative = set(self._nonnegative)
        return other

    def _index(self):
        return set(self.variables)


@dataclass
class FeasibilityResult:
    verdict: Verdict
    assignment: Dict[str, Frac] = field(default_factory=dict)
    farkas: Dict[int, Frac] = field(default_factory=dict)
    bound_multipliers: Dict[str, Frac] = field(default_factory=dict)

    @property
    def feasible(self):
        return self.verdict == Verdict.FEASIBLE

    def verify(self, lcs):
        if self.feasible:
            return self._verify_assignment(lcs)
        return self._verify_farkas(lcs)

    def _verify_assignment(self, lcs):
        if set(self.assignment) != set(lcs.variables):
            return False
        for v in lcs.variables:
            if lcs.is_nonnegative(v) and self.assignment[v] < 0:
                return False
        return all(c.holds(self.assignment) for c in lcs.constraints)

    def _verify_farkas(self, lcs):
        """
        Each row scaled by its multiplier reads `y*a.x >= y*b`; together with
        the bound rows `mu*x >= 0` they must sum to `0 >= positive`.
        """
        combined = {v: Frac(0) for v in lcs.variables}
        bound = Frac(0)
        for i, c in enumerate(lcs.constraints):
            y = self.farkas.get(i, Frac(0))
            if c.relation == Relation.GE and y < 0:
                return False
            if c.relation == Relation.LE and y > 0:
                return False
            for v, a in c.coefficients.items():
                combined[v] += y * a
            bound += y * c.rhs
        for v, mu in self.bound_multipliers.items():
            if not lcs.is_nonnegative(v) or mu < 0:
                return False
            combined[v] += mu
        return all(x == 0 for x in combined.values()) and bound > 0


class SimplexTableau:
    """
    Dense tableau for `A z = b, z >= 0, b >= 0` with one artificial column
    per row. Free variables are split as z+ - z-, inequalities get a slack.
    The objective row holds reduced costs d and the value z with
    objective = z + sum(d_j z_j) over nonbasic columns.
    """

    def __init__(self, lcs):
        self.lcs = lcs
        # (kind, variable or row index, sign)
        self.columns = []
        for v in lcs.variables:
            self.columns.append(('var', v, 1))
            if not lcs.is_nonnegative(v):
                self.columns.append(('var', v, -1))
        slack_of = {}
        for i, c in enumerate(lcs.constraints):
            if c.relation != Relation.EQ:
                slack_of[i] = len(self.columns)
                self.columns.append(('slack', i, 1))
        self.n_real = len(self.columns)
        m = len(lcs.constraints)
        self.columns += [('artificial', i, 1) for i in range(m)]
        n = len(self.columns)

        position = {}
        for j, (kind, v, sign) in enumerate(self.columns):
            if kind == 'var':
                position.setdefault(v, []).append((j, sign))

        self.rows = []
        self.rhs = []
        self.sigma = []
        for i, c in enumerate(lcs.constraints):
            row = [Frac(0)] * n
            for v, a in c.coefficients.items():
                for j, sign in position[v]:
                    row[j] = a * sign
            if i in slack_of:
                row[slack_of[i]] = Frac(-1) if c.relation == Relation.GE else Frac(1)
            b = c.rhs
            s = -1 if b < 0 else 1
            if s < 0:
                row = [-x for x in row]
                b = -b
            row[self.n_real + i] = Frac(1)
            self.rows.append(row)
            self.rhs.append(b)
            self.sigma.append(s)
        self.basis = [self.n_real + i for i in range(m)]
        self.cost = [Frac(0)] * n
        self.value = Frac(0)
        self.pivots = 0

    def _set_costs(self, costs):
        """Reduced costs for column costs `costs` under the current basis"""
        self.cost = list(costs)
        self.value = Frac(0)
        for i, col in enumerate(self.basis):
            cb = costs[col]
            if cb:
                self.cost = [d - cb * a for d, a in zip(self.cost, self.rows[i])]
                self.value += cb * self.rhs[i]

    def _pivot(self, r, j):
        piv = self.rows[r][j]
        self.rows[r] = [x / piv for x in self.rows[r]]
        self.rhs[r] = self.rhs[r] / piv
        pivot_row = self.rows[r]
        for i, row in enumerate(self.rows):
            if i != r and row[j]:
                f = row[j]
                self.rows[i] = [a - f * b for a, b in zip(row, pivot_row)]
                self.rhs[i] -= f * self.rhs[r]
        f = self.cost[j]
        if f:
            self.cost = [a - f * b for a, b in zip(self.cost, pivot_row)]
            self.value += f * self.rhs[r]
        self.basis[r] = j
        self.pivots += 1

    def _run(self, allowed):
        """Minimize with Bland's rule; returns 'optimal' or 'unbounded'"""
        while True:
            entering = next(
                (j for j in range(len(self.columns)) if allowed(j) and self.cost[j] < 0), None
            )
            if entering is None:
                return 'optimal'
            leaving, best = None, None
            for i, row in enumerate(self.rows):
                a = row[entering]
                if a > 0:
                    ratio = self.rhs[i] / a
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[leaving]):
                        leaving, best = i, ratio
            if leaving is None:
                return 'unbounded'
            self._pivot(leaving, entering)

    def phase_one(self):
        """Minimize the sum of artificials; feasible iff the optimum is 0"""
        costs = [Frac(0)] * self.n_real + [Frac(1)] * len(self.rows)
        self._set_costs(costs)
        self._run(lambda j: True)
        return self.value == 0

    def farkas(self):
        """
        Phase-one duals y_i = 1 - d(artificial_i), mapped back through the
        row sign flips; bound multipliers cover nonnegative variables.
        """
        y = [self.sigma[i] * (1 - self.cost[self.n_real + i]) for i in range(len(self.rows))]
        multipliers = {i: v for i, v in enumerate(y) if v}
        bounds = {}
        for v in self.lcs.variables:
            if self.lcs.is_nonnegative(v):
                combined = sum(
                    (y[i] * c.coefficients.get(v, 0) for i, c in enumerate(self.lcs.constraints)),
                    Frac(0),
                )
                if combined:
                    bounds[v] = -combined
        return multipliers, bounds

    def drive_out_artificials(self):
        for r, col in enumerate(self.basis):
            if col >= self.n_real:
                j = next((j for j in range(self.n_real) if self.rows[r][j] != 0), None)
                if j is not None:
                    self._pivot(r, j)

    def minimize(self, costs):
        """Phase two over real columns; artificials never re-enter"""
        self.drive_out_artificials()
        self._set_costs(list(costs) + [Frac(0)] * len(self.rows))
        return self._run(lambda j: j < self.n_real)

    def assignment(self):
        values = [Frac(0)] * len(self.columns)
        for i, col in enumerate(self.basis):
            values[col] = self.rhs[i]
        result = {v: Frac(0) for v in self.lcs.variables}
        for j, (kind, v, sign) in enumerate(self.columns):
            if kind == 'var':
                result[v] += sign * values[j]
        return result


def _count(stats):
    if stats is not None:
        stats['lp_solves'] += 1


def solve_feasibility(lcs, stats=None):
    """Exact feasibility verdict with a self-checked witness"""
    _count(stats)
    if not lcs.constraints:
        return FeasibilityResult(Verdict.FEASIBLE, {v: Frac(0) for v in lcs.variables})

    tableau = SimplexTableau(lcs)
    if tableau.phase_one():
        result = FeasibilityResult(Verdict.FEASIBLE, tableau.assignment())
    else:
        multipliers, bounds = tableau.farkas()
        result = FeasibilityResult(Verdict.INFEASIBLE, farkas=multipliers, bound_multipliers=bounds)
    logger.debug(f"LP {len(lcs.variables)} vars x {len(lcs.constraints)} rows: "
                 f"{result.verdict.value} after {tableau.pivots} pivots")
    if not result.verify(lcs):
        raise CertificateCheckError(f"{result.verdict.value} certificate failed re-check")
    return result


def _probe(lcs, variable, stats=None):
    """A feasible point maximizing `variable` subject to variable <= 1"""
    _count(stats)
    probe = lcs.copy()
    probe.add_constraint({variable: 1}, Relation.LE, 1)
    tableau = SimplexTableau(probe)
    if not tableau.phase_one():
        return None
    costs = [
        Frac(-sign) if kind == 'var' and v == variable else Frac(0)
        for kind, v, sign in tableau.columns[:tableau.n_real]
    ]
    tableau.minimize(costs)
    point = tableau.assignment()
    if not FeasibilityResult(Verdict.FEASIBLE, point).verify(probe):
        raise CertificateCheckError(f"probe point for {variable} failed re-check")
    return point


def support_points(lcs, stats=None) -> Dict[str, Dict[str, Frac]]:
    """
    For every variable positive in some feasible solution, one such
    solution. Variables already positive in an earlier point are not probed.
    """
    base = solve_feasibility(lcs, stats)
    if not base.feasible:
        raise LPError("support of an infeasible system")
    points = {}

    def absorb(point):
        for v in lcs.variables:
            if v not in points and point[v] > 0:
                points[v] = point

    absorb(base.assignment)
    for v in lcs.variables:
        if v in points:
            continue
        point = _probe(lcs, v, stats)
        if point is not None and point[v] > 0:
            absorb(point)
    for v, point in points.items():
        if point[v] <= 0 or not FeasibilityResult(Verdict.FEASIBLE, point).verify(lcs):
            raise CertificateCheckError(f"support point for {v} failed re-check")
    return points


def support_edges(lcs, stats=None):
    """Variables that are positive in at least one feasible solution"""
    return frozenset(support_points(lcs, stats))
