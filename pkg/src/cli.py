"""
Command Line Interface
solve / verify / generate / eval / simulate over .mwg game files.
The first stdout line is the verdict; diagnostics go through logging.
"""

import argparse
import logging
import sys
from pathlib import Path

from src.certificates import (
    ArenaLimitError, MemorylessStrategy, format_certificate, parse_certificate,
    pump_schedule, score_p1_finite_strategy, simulate_interleaved_sup, simulate_schedule,
    verify_p2_certificate,
)
from src.game_core import (
    PLAYER_2, GameError, LassoPlay, ObjectiveKind, ObjectiveSpec, lasso_mean_payoff,
    mask_dimensions, parse_game, parse_rational, serialize_game, shift_weights,
)
from src.generators import (
    FIXTURES, fixture, from_3sat, from_disjoint_paths, parse_dimacs, parse_edge_list,
    random_cnf, random_digraph, random_game,
)
from src.solvers_multi import (
    EnumerationLimitError, ObjectiveError, SolverSettings, solve_energy_unknown_credit,
    solve_finite_memory_mp, solve_mp_inf, solve_mp_infsup, solve_mp_sup_region,
)
from src.solvers_single import single_energy_strategy

logger = logging.getLogger(__name__)

EXIT_YES = 0
EXIT_NO = 1
EXIT_USAGE = 2
OBJECTIVES = [kind.value for kind in ObjectiveKind]


class UsageError(GameError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so run() owns the exit code"""

    def error(self, message):
        raise UsageError(message)


def _dims(text):
    """Comma list of 1-based dimensions to a 0-based frozenset"""
    if text is None:
        return None
    if not text.strip():
        return frozenset()
    try:
        return frozenset(int(t) - 1 for t in text.split(','))
    except ValueError:
        raise UsageError(f"malformed dimension list {text!r}") from None


def _thresholds(text, dim):
    if text is None:
        return (0,) * dim
    values = tuple(parse_rational(t) for t in text.split(','))
    if len(values) != dim:
        raise ObjectiveError(f"{len(values)} thresholds given for dimension {dim}")
    return values


def _objective(args, dim):
    kind = ObjectiveKind(args.obj)
    inf, sup = _dims(args.inf), _dims(args.sup)
    if kind == ObjectiveKind.MP_INFSUP and (inf is None or sup is None):
        raise ObjectiveError("--obj mp-infsup needs both --inf and --sup")
    allowed = {ObjectiveKind.MP_INF: ('inf',), ObjectiveKind.MP_SUP: ('sup',),
               ObjectiveKind.MP_INFSUP: ('inf', 'sup')}.get(kind, ())
    for flag, given in (('inf', inf), ('sup', sup)):
        if given is not None and flag not in allowed:
            raise UsageError(f"--{flag} does not apply to --obj {kind.value}")
    return ObjectiveSpec.for_kind(kind, dim, inf, sup, _thresholds(args.threshold, dim))


def _settings(args):
    return SolverSettings(
        max_strategies=args.max_strategies, force=args.force, cap=args.cap,
        arena_limit=args.arena_limit,
    )


def _load_game(path):
    return parse_game(Path(path).read_bytes())


def _emit(lines, out):
    for line in lines:
        out.write(f"{line}\n")


def _add_objective_flags(p):
    p.add_argument('--obj', required=True, choices=OBJECTIVES)
    p.add_argument('--inf', help='1-based inf dimensions, e.g. 1,2')
    p.add_argument('--sup', help='1-based sup dimensions')
    p.add_argument('--threshold', help='per-dimension rationals a or a/b, comma separated')
    p.add_argument('--from', dest='start', help='initial state (defaults to the game init)')


def build_parser():
    parser = _Parser(prog='mwg', description='Multi-dimensional mean-payoff and energy games')
    parser.add_argument('-v', '--verbose', action='store_true')
    verbs = parser.add_subparsers(dest='verb', required=True, parser_class=_Parser)

    solve = verbs.add_parser('solve')
    solve.add_argument('game')
    _add_objective_flags(solve)
    solve.add_argument('--cert', help='write the certificate here')
    solve.add_argument('--method', choices=['auto', 'enum', 'capped'], default='auto')
    solve.add_argument('--force', action='store_true', help='ignore the strategy enumeration guard')
    solve.add_argument('--max-strategies', type=int, default=SolverSettings.max_strategies)
    solve.add_argument('--cap', type=int, default=None)
    solve.add_argument('--arena-limit', type=int, default=SolverSettings.arena_limit)

    verify = verbs.add_parser('verify')
    verify.add_argument('--game', required=True)
    verify.add_argument('--cert', required=True)
    _add_objective_flags(verify)

    generate = verbs.add_parser('generate')
    generate.add_argument('-o', '--output')
    families = generate.add_subparsers(dest='family', required=True, parser_class=_Parser)
    sat = families.add_parser('3sat')
    sat.add_argument('dimacs', nargs='?')
    sat.add_argument('--random', nargs=2, type=int, metavar=('N', 'M'))
    sat.add_argument('--seed', type=int)
    paths = families.add_parser('disjoint-paths')
    paths.add_argument('edges', nargs='?')
    paths.add_argument('--terminals', nargs=4, metavar=('W', 'X', 'Y', 'Z'))
    paths.add_argument('--random', type=int, metavar='N')
    paths.add_argument('--p', type=float, default=0.3)
    paths.add_argument('--seed', type=int)
    paths.add_argument('--unit', action='store_true', help='expand the n-weight edges into unit chains')
    fix = families.add_parser('fixture')
    fix.add_argument('name', choices=FIXTURES)
    rand = families.add_parser('random')
    rand.add_argument('--states', type=int, default=5)
    rand.add_argument('--dim', type=int, default=2)
    rand.add_argument('--max-weight', type=int, default=2)
    rand.add_argument('--p2', type=float, default=0.5)
    rand.add_argument('--seed', type=int)

    evaluate = verbs.add_parser('eval')
    evaluate.add_argument('game')
    evaluate.add_argument('--lasso', required=True, help='"stem states / loop states"')

    simulate = verbs.add_parser('simulate')
    modes = simulate.add_subparsers(dest='mode', required=True, parser_class=_Parser)
    pump = modes.add_parser('pump')
    pump.add_argument('game')
    pump.add_argument('--threshold')
    pump.add_argument('--from', dest='start')
    pump.add_argument('--alpha', default='1/2')
    pump.add_argument('--horizon', type=int, default=10_000)
    inter = modes.add_parser('interleave')
    inter.add_argument('game')
    inter.add_argument('--threshold')
    inter.add_argument('--from', dest='start')
    inter.add_argument('--phases', type=int, default=6)
    inter.add_argument('--max-steps', type=int, default=10 ** 6)
    return parser


def _solve_energy(g, s0, kind, args, settings):
    objective = ObjectiveSpec.for_kind(kind, g.dim)
    if args.method == 'enum':
        report = solve_energy_unknown_credit(g, s0, settings)
    elif args.method == 'capped':
        report = solve_finite_memory_mp(g, s0, settings)
    else:
        try:
            report = solve_finite_memory_mp(g, s0, settings)
        except ArenaLimitError as e:
            logger.info(f"capped arena too large ({e}), enumerating")
            return _with_objective(solve_energy_unknown_credit(g, s0, settings), objective)
        if not report.verdict:
            try:
                confirmed = solve_energy_unknown_credit(g, s0, settings)
            except EnumerationLimitError as e:
                logger.warning(f"capped arena said NO and enumeration was skipped: {e}")
                return _with_objective(report, objective)
            if confirmed.verdict:
                logger.warning("capped arena said NO but enumeration found a win; the cap is too small")
            report = confirmed
    return _with_objective(report, objective)


def _with_objective(report, objective):
    report.objective = objective
    return report


def _solve(args, out):
    g = _load_game(args.game)
    objective = _objective(args, g.dim)
    g = shift_weights(g, objective.thresholds)
    s0 = args.start or g.initial
    if not g.has_state(s0):
        raise GameError(f"unknown state {s0}")
    settings = _settings(args)
    kind = objective.kind
    if args.method == 'capped' and kind not in (ObjectiveKind.ENERGY, ObjectiveKind.FINITE_MEMORY_MP):
        raise ObjectiveError(f"--method capped only decides energy and mp-fin, not {kind.value}")

    if kind in (ObjectiveKind.ENERGY, ObjectiveKind.FINITE_MEMORY_MP):
        report = _solve_energy(g, s0, kind, args, settings)
    elif kind == ObjectiveKind.MP_SUP:
        report = solve_mp_sup_region(mask_dimensions(g, objective.sup_dims), s0)
    elif kind == ObjectiveKind.MP_INF:
        report = solve_mp_inf(g, s0, settings, objective.inf_dims)
    else:
        report = solve_mp_infsup(g, objective.inf_dims, objective.sup_dims, s0, settings)

    logger.info(f"{kind.value} from {s0}: {'YES' if report.verdict else 'NO'} via {report.method}")
    lines = ['YES' if report.verdict else 'NO', f"method {report.method}"]
    if report.winning_region is not None:
        lines.append('region ' + ' '.join(s for s in g.state_names if s in report.winning_region))
    if report.credit is not None:
        lines.append('credit ' + ' '.join(str(c) for c in report.credit))
    lines += [f"stat {key} {value}" for key, value in sorted(report.stats.items())]
    _emit(lines, out)

    if args.cert:
        if report.certificate is None:
            logger.warning(f"no finite certificate for a {'YES' if report.verdict else 'NO'} "
                           f"answer to {kind.value}; nothing written")
        else:
            text = format_certificate(report.certificate, report.credit, g)
            Path(args.cert).write_text(text)
            logger.info(f"certificate written to {args.cert}")
    return EXIT_YES if report.verdict else EXIT_NO


def _verify(args, out):
    g = _load_game(args.game)
    objective = _objective(args, g.dim)
    g = shift_weights(g, objective.thresholds)
    s0 = args.start or g.initial
    strategy, credit = parse_certificate(Path(args.cert).read_bytes())

    if isinstance(strategy, MemorylessStrategy) and strategy.owner == PLAYER_2:
        valid = verify_p2_certificate(g, strategy, s0, objective)
        _emit(['VALID' if valid else 'INVALID'], out)
        return EXIT_YES if valid else EXIT_NO

    # a player-1 machine wins when no consistent cycle is negative on the relevant dimensions
    relevant = objective.inf_dims | objective.sup_dims
    if objective.kind in (ObjectiveKind.ENERGY, ObjectiveKind.FINITE_MEMORY_MP):
        relevant = frozenset(range(g.dim))
    needed = score_p1_finite_strategy(mask_dimensions(g, relevant), strategy, s0)
    valid = needed is not None and (credit is None or credit.dominates(needed))
    lines = ['VALID' if valid else 'INVALID']
    if needed is not None:
        lines.append('credit ' + ' '.join(str(c) for c in needed))
    _emit(lines, out)
    return EXIT_YES if valid else EXIT_NO


def _generate(args, out):
    family = args.family
    if family == '3sat':
        if args.random:
            formula = random_cnf(args.random[0], args.random[1], args.seed)
        elif args.dimacs:
            formula = parse_dimacs(Path(args.dimacs).read_bytes())
        else:
            raise UsageError("generate 3sat needs a DIMACS file or --random N M")
        g = from_3sat(formula)
    elif family == 'disjoint-paths':
        if args.random:
            graph = random_digraph(args.random, args.p, args.seed)
            terminals = args.terminals or ('v0', 'v1', 'v2', 'v3')
        elif args.edges:
            graph = parse_edge_list(Path(args.edges).read_bytes())
            terminals = args.terminals
        else:
            raise UsageError("generate disjoint-paths needs an edge list or --random N")
        if not terminals:
            raise UsageError("generate disjoint-paths needs --terminals W X Y Z")
        g = from_disjoint_paths(graph, *terminals, unit_weights=args.unit)
    elif family == 'fixture':
        g = fixture(args.name)
    else:
        g = random_game(args.states, args.dim, args.max_weight, args.p2, args.seed)

    data = serialize_game(g)
    if args.output:
        Path(args.output).write_bytes(data)
        logger.info(f"{family} game with {len(g.states)} states written to {args.output}")
    else:
        out.write(data.decode('utf-8'))
    return EXIT_YES


def _eval(args, out):
    g = _load_game(args.game)
    if args.lasso.count('/') != 1:
        raise UsageError('--lasso must look like "stem states / loop states"')
    stem, loop = (part.split() for part in args.lasso.split('/'))
    lasso = LassoPlay.from_states(g, stem, loop)
    _emit([' '.join(str(x) for x in lasso_mean_payoff(g, lasso))], out)
    return EXIT_YES


def _simulate(args, out):
    g = _load_game(args.game)
    g = shift_weights(g, _thresholds(args.threshold, g.dim))
    s0 = args.start or g.initial

    if args.mode == 'pump':
        found = pump_schedule(g, s0, parse_rational(args.alpha))
        if found is None:
            _emit(['INVALID'], out)
            logger.warning(f"no reachable nonnegative multi-cycle from {s0}")
            return EXIT_NO
        scc, schedule = found
        stats = simulate_schedule(scc, schedule, args.horizon)
        lines = [
            'VALID' if stats['ok'] else 'INVALID',
            f"z {schedule.z}",
            f"round {schedule.round_length}",
            f"warmup {schedule.warmup}",
            'min_average ' + ' '.join(str(x) for x in stats['min_average']),
            f"violations {stats['violations']}",
        ]
        _emit(lines, out)
        return EXIT_YES if stats['ok'] else EXIT_NO

    strategies = [single_energy_strategy(g, dim) for dim in range(g.dim)]
    stats = simulate_interleaved_sup(g, strategies, args.phases, start=s0, max_steps=args.max_steps)
    ok = stats['ok'] and stats['completed'] == args.phases
    lines = ['VALID' if ok else 'INVALID', f"steps {stats['steps']}"]
    for record in stats['phases']:
        if record['timeout']:
            lines.append(f"phase {record['phase']} timeout")
        else:
            lines.append(f"phase {record['phase']} dim {record['dimension'] + 1} "
                         f"steps {record['steps']} average {record['boundary_average']}")
    _emit(lines, out)
    return EXIT_YES if ok else EXIT_NO


COMMANDS = {
    'solve': _solve,
    'verify': _verify,
    'generate': _generate,
    'eval': _eval,
    'simulate': _simulate,
}


def run(argv, out=None):
    """Runs one command; returns the exit code"""
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        return COMMANDS[args.verb](args, out)
    except (GameError, OSError) as e:
        logger.error(str(e))
        return EXIT_USAGE
