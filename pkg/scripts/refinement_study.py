"""Nested-grid refinement study: value and stopped-law distances per level.

Usage: python scripts/refinement_study.py [problem.yaml] [levels]
"""

import sys
import time
from pathlib import Path

from woagame.cli_io import parse_problem
from woagame.solver import refine_and_solve
from woagame.verify import refinement_diagnostics

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def main(argv):
    path = argv[0] if argv else PROBLEMS / "sym.yaml"
    doc = parse_problem(path)
    levels = int(argv[1]) if len(argv) > 1 else doc.grid["levels"]
    model = doc.build_model()
    t0 = time.perf_counter()
    rep = refine_and_solve(model, doc.build_payoffs(), doc.schedule(model, levels),
                           doc.solver_options())
    secs = time.perf_counter() - t0
    print(f"{'level':>5}{'interior':>10}{'residual':>11}{'value dist':>12}{'law dist':>10}")
    for k, lv in enumerate(rep.levels):
        res = "failed" if lv.result is None else f"{lv.result.residual_max:.2e}"
        vd = "" if lv.value_distance is None else f"{lv.value_distance:.4f}"
        wd = "" if lv.law_distance is None else f"{lv.law_distance:.4f}"
        print(f"{k:>5}{lv.grid.n_interior:>10}{res:>11}{vd:>12}{wd:>10}")
    diag = refinement_diagnostics(rep)
    for c in diag.checks:
        print(f"  {c.name}: {c.status}")
    print(f"total {secs:.1f}s")
    return 0 if diag.overall else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
