"""Solve and certify every corpus problem, printing residuals and timings.

Usage: python scripts/run_corpus.py [problem.yaml ...]
"""

import sys
import time
from pathlib import Path

from woagame.cli_io import parse_problem
from woagame.engine import Game
from woagame.solver import solve_grid_equilibrium
from woagame.verify import certify_equilibrium

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def main(paths):
    paths = paths or sorted(PROBLEMS.glob("*.yaml"))
    print(f"{'problem':<12}{'points':>7}{'residual':>11}{'iters':>7}{'solve s':>9}{'certified':>11}")
    ok = True
    for path in paths:
        doc = parse_problem(path)
        model = doc.build_model()
        t0 = time.perf_counter()
        game = Game(model, doc.build_payoffs(), doc.build_grid(model))
        res = solve_grid_equilibrium(game, doc.solver_options())
        secs = time.perf_counter() - t0
        cert = certify_equilibrium(game, res.profile, doc.solver["residual_tolerance"])
        ok &= cert.overall
        print(f"{doc.name:<12}{len(game.grid):>7}{res.residual_max:>11.2e}{res.iterations_used:>7}"
              f"{secs:>9.2f}{str(cert.overall):>11}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
