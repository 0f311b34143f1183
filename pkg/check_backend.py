"""
Quick solver check - Run this to verify the worked fixtures still give their known answers
"""

import sys
import time
from fractions import Fraction
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent))

from src.certificates import pump_schedule, simulate_interleaved_sup, simulate_schedule
from src.game_core import shift_weights
from src.generators import fixture
from src.multicycle import zero_circuit_exists
from src.solvers_multi import (
    solve_energy_unknown_credit, solve_finite_memory_mp, solve_mp_inf, solve_mp_infsup,
    solve_mp_sup_region,
)
from src.solvers_single import single_energy_strategy


def fig3_at(*threshold):
    return shift_weights(fixture('fig3'), threshold)


def pumping_ok(alpha):
    scc, schedule = pump_schedule(fig3_at(1, 1), 'sa', alpha)
    return simulate_schedule(scc, schedule, 10_000)['ok']


def interleaving_ok():
    g = fig3_at(2, 2)
    strategies = [single_energy_strategy(g, dim) for dim in range(g.dim)]
    stats = simulate_interleaved_sup(g, strategies, 6)
    return stats['ok'] and stats['completed'] == 6


CHECKS = [
    ('fig1 energy', lambda: solve_energy_unknown_credit(fixture('fig1')).verdict, True),
    ('fig3 mp-fin at 1,1', lambda: solve_finite_memory_mp(fig3_at(1, 1)).verdict, False),
    ('fig3 mp-inf at 1,1', lambda: solve_mp_inf(fig3_at(1, 1)).verdict, True),
    ('fig3 mp-sup at 2,2', lambda: solve_mp_sup_region(fig3_at(2, 2)).verdict, True),
    ('fig3 mp-sup at 3,2', lambda: solve_mp_sup_region(fig3_at(3, 2)).verdict, False),
    ('fig3 mp-infsup at 1,1', lambda: solve_mp_infsup(fig3_at(1, 1), {0}, {1}).verdict, True),
    ('barrier zero circuit', lambda: zero_circuit_exists(fixture('barrier'))[0], False),
    ('pumping, alpha 1/2', lambda: pumping_ok(Fraction(1, 2)), True),
    ('pumping, alpha 1/4', lambda: pumping_ok(Fraction(1, 4)), True),
    ('interleaving, 6 phases', interleaving_ok, True),
]

print("=" * 80)
print("🧪 SOLVER TEST - Verifying Fixture Answers")
print("=" * 80)
print()

failures = 0
try:
    for i, (label, check, expected) in enumerate(CHECKS, start=1):
        start = time.perf_counter()
        answer = check()
        elapsed = time.perf_counter() - start
        ok = answer == expected
        failures += not ok
        print(f"{i:2d}. {label}")
        print(f"   - Answer: {answer} (expected {expected})")
        print(f"   - Time: {elapsed * 1000:.1f} ms")
        print(f"   {'✅' if ok else '❌'}\n")

    if failures:
        print(f"❌ {failures} FIXTURE ANSWER(S) WRONG")
    else:
        print("✅ SOLVERS ARE WORKING!")
        print("\nNext steps:")
        print("  1. Run: python main.py generate -o fig1.mwg fixture fig1")
        print("  2. Run: python main.py solve --obj energy fig1.mwg --cert fig1.cert")
        print("  3. Run: python main.py verify --game fig1.mwg --cert fig1.cert --obj energy")

except Exception as e:
    print(f"\n❌ ERROR: {e}")
    print("\nSolvers have issues. Fix these first:")
    print("  1. Make sure all src/*.py files exist")
    print("  2. Install packages: pip install -r requirements.txt")
    print("  3. Run: python test_setup.py")

print("\n" + "=" * 80)
