"""
=============================================================================
RATING SCALE AS A QUBO - PROOF OF CONCEPT
=============================================================================
This script walks through the whole pipeline on small instances:
1. Shows how fast the number of candidate rating scales grows
2. Compares the approximate monotonicity penalty with the true constraint
3. Times the constrained brute-force search and extrapolates it
4. Solves a rating-scale QUBO and validates the decoded grades
Pass --full to also run the 150-counterpart, 9-grade preset (a few minutes).
=============================================================================
"""

import sys

from rating_scales.config import configure_logging
from rating_scales.models import ComposeOptions, GradeRow, PenaltyWeights, SolverOptions
from rating_scales.tools.baseline import baseline_config, brute_force_search, count_configurations, fit_power_law, published_rows
from rating_scales.tools.dataset import from_default_positions, generate
from rating_scales.tools.experiments import CONFUSION_INSTANCES, PRESET_CASES, extrapolate_runtime, monotonicity_confusion, run_preset_experiment
from rating_scales.tools.scale import grade_table
from rating_scales.tools.solvers import solve_and_validate


def print_section(title: str):
    print("\n" + "=" * 70)
    print(f"  {title}")
    print("=" * 70)


def print_grades(rows):
    print(f"  {'Grade':>5} {'Cardinality':>11} {'Defaults':>8} {'Default rate':>12}")
    for r in rows:
        print(f"  {r.grade:>5} {r.cardinality:>11} {r.defaults:>8} {r.default_rate:>12.6f}")


def main():
    configure_logging("WARNING")
    print("""
╔══════════════════════════════════════════════════════════════════════════╗
║              CREDIT RATING SCALE DEFINITION AS A QUBO                    ║
║                                                                          ║
║  Grades: contiguous groups of score-ordered counterparts                 ║
║  Checks: monotone default rates, concentration, grade size bounds        ║
║  Solver: exact Gray-code scan or simulated annealing                     ║
╚══════════════════════════════════════════════════════════════════════════╝
    """)

    # =========================================================================
    # SECTION 1: Search space
    # =========================================================================
    print_section("1. HOW MANY RATING SCALES ARE THERE?")
    for n, m in [(8, 3), (20, 5), (70, 6), (150, 9), (2000, 9)]:
        print(f"  n={n:>5}  m={m}  ->  {count_configurations(n, m):,} configurations")

    # =========================================================================
    # SECTION 2: Monotonicity approximation
    # =========================================================================
    print_section("2. APPROXIMATE MONOTONICITY VS THE TRUE CONSTRAINT")
    for name in ("n13", "n14", "n14-matrix"):
        n, m, positions = CONFUSION_INSTANCES[name]
        matrix, rows = monotonicity_confusion(from_default_positions(n, positions), m)
        best = [r.partition.cardinalities for r in rows if r.label.value == "TP"]
        print(f"""
  n={n}, m={m}, defaults at {positions}
                    Predicted Neg  Predicted Pos
  Actual Negative   {matrix.tn:>13}  {matrix.fp:>13}
  Actual Positive   {matrix.fn:>13}  {matrix.tp:>13}
  Minimum-cost scale: {best}""")

    # =========================================================================
    # SECTION 3: Brute force
    # =========================================================================
    print_section("3. CONSTRAINED BRUTE FORCE AND ITS GROWTH")
    for n, m in [(12, 3), (17, 4), (20, 5)]:
        ds = generate(n, 0.15, seed=1)
        _, row = brute_force_search(ds, m, baseline_config(check_concentration=False, check_cardinality=False))
        print(f"  n={n:>3} m={m}: {row.valid_count:>5} of {row.configurations:>6} monotone, {row.elapsed:.4f}s")

    a, b = fit_power_law(published_rows())
    print(f"\n  Published timings fit: time = {a:.3g} * C(n-1, m-1)^{b:.3f}")
    for n, m in [(2000, 9), (20000, 9)]:
        e = extrapolate_runtime(a, b, n, m)
        print(f"  n={n:>6} m={m}: ~10^{e['log10_days']:.1f} days")

    # =========================================================================
    # SECTION 4: QUBO solve
    # =========================================================================
    print_section("4. SOLVING A SMALL RATING-SCALE QUBO")
    ds = from_default_positions(6, [5, 6])
    weights = PenaltyWeights(mu01=1000, mu02=200, mu03=20, mu04=20, mu1=1)
    options = SolverOptions(compose=ComposeOptions(thresholds=False, concentration=False))
    result = solve_and_validate(ds, 2, weights, options)
    print(f"  Solver: {result.solver}, {result.dimension} variables, energy {result.best_energy:.1f}")
    if result.decoded is not None:
        print_grades(grade_table(ds, result.decoded))
        print(f"  Monotone default rates: {result.validity.monotonicity}")

    if "--full" in sys.argv:
        print_section("5. 150 COUNTERPARTS, 9 GRADES, PRESET WEIGHTS")
        n, m, positions, preset = PRESET_CASES["nine-grades"]
        report = run_preset_experiment(n, m, positions, preset)
        if report["status"] == "success":
            print_grades([GradeRow(**g) for g in report["grades"]])
            print(f"  Thresholds [{report['lambda1']}, {report['lambda2']}], valid: {report['valid']}")
        else:
            print("  Error:", report.get("error_message"))

    print("\n" + "=" * 70)
    print("  DEMO COMPLETE - Run with: python demo_rating_scale_proof.py [--full]")
    print("=" * 70 + "\n")


if __name__ == "__main__":
    main()
