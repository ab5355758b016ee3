import os
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from woagame.cli_io import parse_problem
from woagame.engine import Game
from woagame.model import PayoffSpec, brownian, build_grid
from woagame.solver import solve_grid_equilibrium

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=8, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=300, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "problems"
CORPUS = ("sym", "asym", "ou", "gbm", "trivial")


def dip(x):
    return 1 + 0.5 * np.sin(np.pi * x) - 0.6 * np.exp(-(((x - 0.5) / 0.01) ** 2))


def sym_payoffs(r=0.1):
    return PayoffSpec(dip, lambda x: dip(x) + 0.5 * np.sin(np.pi * x),
                      dip, lambda x: dip(x) + 0.5 * np.sin(np.pi * x), r, r)


def wave(x):
    return 1 + 0.5 * np.sin(2 * np.pi * x) ** 2


def asym_payoffs():
    return PayoffSpec(wave, lambda x: wave(x) + 0.5 * np.sin(np.pi * x),
                      wave, lambda x: wave(x) + 0.3 * np.sin(np.pi * x), 0.05, 0.1)


def bump_payoffs(r1=0.05, r2=0.1):
    g = lambda x: 1 + 0.5 * np.sin(np.pi * x)
    return PayoffSpec(g, lambda x: g(x) + 0.5 * np.sin(np.pi * x),
                      g, lambda x: g(x) + 0.3 * np.sin(np.pi * x), r1, r2)


@pytest.fixture(scope="session")
def bm():
    return brownian(0.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def sym_game(bm):
    return Game(bm, sym_payoffs(), build_grid(bm, 15))


@pytest.fixture(scope="session")
def sym_solution(sym_game):
    return solve_grid_equilibrium(sym_game)


@pytest.fixture(scope="session")
def asym_game(bm):
    return Game(bm, asym_payoffs(), build_grid(bm, 9))


@pytest.fixture(scope="session")
def asym_solution(asym_game):
    return solve_grid_equilibrium(asym_game)


@pytest.fixture(scope="session")
def corpus():
    """Parsed corpus problems keyed by name."""
    return {name: parse_problem(PROBLEMS / f"{name}.yaml") for name in CORPUS}
