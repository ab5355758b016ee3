"""Command line, problem files, result documents and plot tables.

Problem files are YAML mappings::

    name: sym                 # free text
    seed: 7                   # the only source of randomness
    model:    {family: BM, interval: [0, 1], params: {sigma: 1.0}}
    payoffs:  {g1: "1 + 0.5*sin(pi*x)", f1: ..., g2: ..., f2: ..., r1: 0.1, r2: 0.1}
    grid:     {placement: uniform, n_interior: 15, levels: 5, n0: 1}
    solver:   {max_outer_iterations: 400, ...}      # SolverOptions fields
    simulation: {n_paths: 100000, dt: 1.0e-4, ...}  # SimConfig fields
    strategies: {units1: [...], units2: [...]}      # optional, for simulate

The state variable is ``x`` in the units of the model interval; rates are
given in unit form ``u = lambda / (1 + lambda)``.  The solver and simulation
seeds are the two 32-bit words of ``SeedSequence(seed).generate_state(2)``.

Result documents are JSON with sorted keys and shortest round-trip float
formatting; wall-clock timings go to a separate ``timings.json`` so the
result itself is byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .engine import Game, best_response, payoff_values
from .errors import (AssumptionError, ExpressionError, IoError, ModelError, NotConverged,
                     SchemaError, WoaError)
from .expr import compile_expression
from .model import (DiffusionModel, Grid, PayoffSpec, build_grid, build_model,
                    uniform_schedule, validate_assumptions)
from .montecarlo import SimConfig
from .oracle import enumerate_best_responses, one_point_equilibrium
from .solver import (CAUSES, EquilibriumResult, SolverOptions, refine_and_solve,
                     solve_grid_equilibrium, stopped_distribution)
from .stopping import StrategyProfile
from .verify import (VerificationReport, certify_equilibrium, cross_validate,
                     refinement_diagnostics)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_ASSUMPTION, EXIT_NOT_CONVERGED, EXIT_VERIFY = 0, 1, 2, 3, 4, 5
COMMANDS = ("solve", "refine", "verify", "simulate", "oracle")

# section -> key -> (kind, required)
_SOLVER_KEYS = {f.name: (f.type if isinstance(f.type, str) else f.type.__name__, False)
                for f in fields(SolverOptions) if f.name != "rng_seed"}
_SCHEMA = {
    "model": {"family": ("str", True), "interval": ("interval", True), "params": ("dict", False)},
    "payoffs": {"g1": ("expr", True), "f1": ("expr", True), "g2": ("expr", True),
                "f2": ("expr", True), "r1": ("float", True), "r2": ("float", True)},
    "grid": {"placement": ("placement", False), "n_interior": ("int", False),
             "levels": ("int", False), "n0": ("int", False)},
    "solver": _SOLVER_KEYS,
    "simulation": {"n_paths": ("int", False), "dt": ("float", False),
                   "band_epsilon": ("float", False), "mode": ("str", False),
                   "horizon": ("float", False)},
    "strategies": {"units1": ("floats", True), "units2": ("floats", True)},
}
_TOP = {"name": ("str", False), "seed": ("int", False)}
_DEFAULTS = {
    "grid": {"placement": "uniform", "n_interior": 15, "levels": 5, "n0": 1},
    "solver": {k: getattr(SolverOptions(), k) for k in _SOLVER_KEYS},
    "simulation": {"n_paths": 100_000, "dt": 1e-4, "band_epsilon": 1e-2,
                   "mode": "embedded_chain", "horizon": 50.0},
}
_FAMILIES = ("BM", "OU", "GBM", "tabulated")


# problem documents -----------------------------------------------------------


@dataclass
class ProblemDocument:
    """Validated problem with defaults filled in (plain data only)."""

    name: str
    seed: int
    model: dict
    payoffs: dict
    grid: dict
    solver: dict
    simulation: dict
    strategies: dict | None = None
    path: str | None = field(default=None, compare=False)

    def canonical(self) -> dict:
        out = {"name": self.name, "seed": self.seed, "model": self.model, "payoffs": self.payoffs,
               "grid": self.grid, "solver": self.solver, "simulation": self.simulation}
        if self.strategies is not None:
            out["strategies"] = self.strategies
        return out

    @property
    def sha256(self) -> str:
        return hashlib.sha256(emit_problem(self).encode()).hexdigest()

    def seeds(self) -> tuple[int, int]:
        s = np.random.SeedSequence(self.seed).generate_state(2)
        return int(s[0]), int(s[1])

    def build_model(self) -> DiffusionModel:
        return build_model(self.model)

    def build_payoffs(self) -> PayoffSpec:
        p = self.payoffs
        fns = {k: compile_expression(p[k]) for k in ("g1", "f1", "g2", "f2")}
        return PayoffSpec(fns["g1"], fns["f1"], fns["g2"], fns["f2"], float(p["r1"]),
                          float(p["r2"]), {k: p[k] for k in fns})

    def solver_options(self) -> SolverOptions:
        return SolverOptions(rng_seed=self.seeds()[0], **self.solver)

    def sim_config(self, n_paths: int | None = None) -> SimConfig:
        cfg = dict(self.simulation)
        if n_paths is not None:
            cfg["n_paths"] = n_paths
        return SimConfig(rng_seed=self.seeds()[1], **cfg)

    def build_grid(self, model: DiffusionModel) -> Grid:
        pl = self.grid["placement"]
        return build_grid(model, self.grid["n_interior"], pl)

    def schedule(self, model: DiffusionModel, levels: int | None = None) -> list[Grid]:
        if self.grid["placement"] != "uniform":
            raise SchemaError("refinement needs uniform placement", self.path)
        return uniform_schedule(model, levels or self.grid["levels"], self.grid["n0"])


def _line_map(node, prefix=(), out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = prefix + (k.value,)
            out[key] = k.start_mark.line + 1
            _line_map(v, key, out)
    return out


def _coerce(kind: str, value, where: str, path, line):
    def bad(msg):
        return SchemaError(f"{where}: {msg}", path, line)

    if kind == "str":
        if not isinstance(value, str):
            raise bad("expected text")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("expected an integer")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise bad("expected true or false")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad("expected a number")
        return float(value)
    if kind == "dict":
        if not isinstance(value, dict):
            raise bad("expected a mapping")
        return value
    if kind == "interval":
        if not (isinstance(value, list) and len(value) == 2):
            raise bad("expected [lower, upper]")
        return [_coerce("float", v, where, path, line) for v in value]
    if kind == "floats":
        if not isinstance(value, list):
            raise bad("expected a list of numbers")
        return [_coerce("float", v, where, path, line) for v in value]
    if kind == "expr":
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            raise bad("expected an expression")
        src = value if isinstance(value, str) else repr(float(value))
        compile_expression(src)  # raises ExpressionError
        return src
    if kind == "placement":
        if isinstance(value, str):
            if value not in ("uniform", "chebyshev"):
                raise bad(f"unknown placement {value!r}")
            return value
        return _coerce("floats", value, where, path, line)
    raise AssertionError(kind)


def _validate(data, lines, path) -> ProblemDocument:
    if not isinstance(data, dict):
        raise SchemaError("problem file must be a mapping", path, 1)
    top = {}
    for key, value in data.items():
        line = lines.get((key,))
        if key in _TOP:
            top[key] = _coerce(_TOP[key][0], value, key, path, line)
        elif key in _SCHEMA:
            if not isinstance(value, dict):
                raise SchemaError(f"{key}: expected a mapping", path, line)
            sec = {}
            for k, v in value.items():
                kl = lines.get((key, k), line)
                if k not in _SCHEMA[key]:
                    raise SchemaError(f"{key}.{k}: unknown key", path, kl)
                sec[k] = _coerce(_SCHEMA[key][k][0], v, f"{key}.{k}", path, kl)
            for k, (_, required) in _SCHEMA[key].items():
                if required and k not in sec:
                    raise SchemaError(f"{key}.{k}: missing required key", path, line)
            top[key] = sec
        else:
            raise SchemaError(f"{key}: unknown key", path, line)
    for key in ("model", "payoffs"):
        if key not in top:
            raise SchemaError(f"{key}: missing required section", path, None)
    if top["model"]["family"] not in _FAMILIES:
        raise SchemaError(f"model.family: unknown family {top['model']['family']!r}", path,
                          lines.get(("model", "family")))
    top["model"].setdefault("params", {})
    merged = {k: {**_DEFAULTS[k], **top.get(k, {})} for k in _DEFAULTS}
    return ProblemDocument(top.get("name", "problem"), top.get("seed", 0), top["model"],
                           top["payoffs"], merged["grid"], merged["solver"],
                           merged["simulation"], top.get("strategies"), path)


def parse_text(text: str, path: str | None = None, check: bool = True) -> ProblemDocument:
    """Parse problem text; ``check`` also runs the model and payoff checks."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SchemaError(f"malformed YAML: {getattr(exc, 'problem', exc)}", path,
                          mark.line + 1 if mark else None) from exc
    doc = _validate(data, _line_map(node) if node is not None else {}, path)
    if check:
        try:
            model = doc.build_model()
        except KeyError as exc:
            raise SchemaError(f"model.params: missing parameter {exc}", path,
                              _line_map(node).get(("model",))) from exc
        payoffs = doc.build_payoffs()
        xs = np.linspace(model.lower_bound, model.upper_bound, 1001)
        for k in ("g1", "f1", "g2", "f2"):
            if not np.all(np.isfinite(getattr(payoffs, k)(xs))):
                raise ExpressionError("not finite everywhere on the interval", doc.payoffs[k])
        validate_assumptions(model, payoffs).raise_if_failed()
    return doc


def parse_problem(path) -> ProblemDocument:
    """Read and validate a problem file.

    Raises
    ------
    SchemaError
        Malformed YAML, unknown or missing keys, wrong types (with line).
    ExpressionError
        Unparsable or non-finite payoff expressions.
    AssumptionError
        Payoffs violating the standing assumptions.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read problem file: {exc.strerror}", str(path)) from exc
    return parse_text(text, str(path))


def emit_problem(doc: ProblemDocument) -> str:
    """Canonical YAML text; ``parse_text(emit_problem(d)) == d``."""
    return yaml.safe_dump(doc.canonical(), sort_keys=True, default_flow_style=None, width=100)


# result documents ------------------------------------------------------------


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, float).ravel()]


def equilibrium_record(game: Game, res: EquilibriumResult, cert: VerificationReport) -> dict:
    pts = game.grid.points
    law = stopped_distribution(game, res.profile, game.grid.n_interior // 2 + 1)
    return {
        "grid": _floats(pts),
        "units1": _floats(res.profile.units1),
        "units2": _floats(res.profile.units2),
        "w1": _floats(res.values.w1),
        "w2": _floats(res.values.w2),
        "residual_max": float(res.residual_max),
        "residuals1": _floats(res.per_point_residuals[0]),
        "residuals2": _floats(res.per_point_residuals[1]),
        "residual_history": _floats(res.residual_history),
        "iterations": int(res.iterations_used),
        "method_trace": list(res.method_trace),
        "converged": bool(res.converged),
        "stopped_law": {"start": float(pts[game.grid.n_interior // 2 + 1]),
                        "probs": _floats(law.probs),
                        **{c: _floats(law.by_cause[c]) for c in CAUSES}},
        "certificate": cert.to_dict(),
    }


def _result_header(doc: ProblemDocument, command: str, tolerance: float) -> dict:
    return {"schema_version": SCHEMA_VERSION, "tool": {"name": "woagame", "version": __version__},
            "command": command, "problem": {"name": doc.name, "sha256": doc.sha256},
            "seed": doc.seed, "tolerance": tolerance}


def dump_result(result: dict) -> str:
    return json.dumps(result, sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_result(result: dict, out_dir, timings: dict | None = None) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        target = out / "result.json"
        target.write_text(dump_result(result))
        if timings is not None:
            (out / "timings.json").write_text(json.dumps(timings, sort_keys=True, indent=1) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write results to {out}: {exc.strerror}") from exc
    return target


def load_result(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SchemaError(f"cannot read result file: {exc.strerror}", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed result JSON: {exc.msg}", str(path), exc.lineno) from exc
    if not isinstance(data, dict) or data.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError("unsupported result schema version", str(path))
    return data


def emit_plot_data(result: dict, out_dir) -> list[Path]:
    """Write delimited tables for every equilibrium in a result document.

    Per equilibrium: ``rates``, ``values``, ``residuals`` (per solver
    iteration) and ``stopped_law``.  A single equilibrium gets plain names;
    refinement levels get a ``_L{k}`` suffix.
    """
    eqs = result.get("equilibria") or []
    if not eqs:
        log.warning("result holds no equilibria; no plot tables written")
        return []
    out = Path(out_dir)
    written = []

    def table(name, header, rows):
        path = out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([[repr(float(v)) if not isinstance(v, int) else v for v in row]
                         for row in rows])
        written.append(path)

    try:
        out.mkdir(parents=True, exist_ok=True)
        for k, eq in enumerate(eqs):
            sfx = "" if len(eqs) == 1 else f"_L{k}"
            x = eq["grid"]
            table(f"rates{sfx}.csv", ["x", "u1", "u2"],
                  zip(x[1:-1], eq["units1"], eq["units2"]))
            table(f"values{sfx}.csv", ["x", "w1", "w2"], zip(x, eq["w1"], eq["w2"]))
            table(f"residuals{sfx}.csv", ["iteration", "residual"],
                  enumerate(eq["residual_history"]))
            law = eq["stopped_law"]
            table(f"stopped_law{sfx}.csv", ["x", "prob", *CAUSES],
                  zip(x, law["probs"], *(law[c] for c in CAUSES)))
    except OSError as exc:
        raise IoError(f"cannot write plot tables to {out}: {exc.strerror}") from exc
    return written


# commands --------------------------------------------------------------------


def _problem(args) -> ProblemDocument:
    doc = parse_problem(args.problem)
    if getattr(args, "seed", None) is not None:
        doc.seed = int(args.seed)
    return doc


def _cmd_solve(args, timings) -> tuple[dict, bool]:
    doc = _problem(args)
    tol = args.tol if args.tol is not None else doc.solver["residual_tolerance"]
    model, payoffs = doc.build_model(), doc.build_payoffs()
    t0 = time.perf_counter()
    game = Game(model, payoffs, doc.build_grid(model))
    res = solve_grid_equilibrium(game, doc.solver_options())
    timings["solve"] = time.perf_counter() - t0
    cert = certify_equilibrium(game, res.profile, tol)
    timings["certify"] = time.perf_counter() - t0 - timings["solve"]
    result = _result_header(doc, "solve", tol)
    result["equilibria"] = [equilibrium_record(game, res, cert)]
    result["verification"] = cert.to_dict()
    return result, cert.overall


def _cmd_refine(args, timings) -> tuple[dict, bool]:
    doc = _problem(args)
    tol = args.tol if args.tol is not None else 1e-2
    model, payoffs = doc.build_model(), doc.build_payoffs()
    t0 = time.perf_counter()
    report = refine_and_solve(model, payoffs, doc.schedule(model, args.levels), doc.solver_options())
    timings["refine"] = time.perf_counter() - t0
    overall = VerificationReport()
    records = []
    cert_tol = doc.solver["residual_tolerance"]
    for k, level in enumerate(report.levels):
        if level.result is None:
            continue
        game = Game(model, payoffs, level.grid, validate=False)
        cert = certify_equilibrium(game, level.result.profile, cert_tol)
        overall.add(f"level{k}_certified", cert.overall, level.result.residual_max, cert_tol)
        records.append(equilibrium_record(game, level.result, cert))
    overall.extend(refinement_diagnostics(report, tol))
    result = _result_header(doc, "refine", tol)
    result["equilibria"] = records
    result["refinement"] = {"sizes": [lv.size for lv in report.levels],
                            "value_distances": [d for d in report.value_distances],
                            "law_distances": [d for d in report.law_distances],
                            "errors": [lv.error for lv in report.levels]}
    result["verification"] = overall.to_dict()
    if any(lv.error for lv in report.levels):
        raise NotConverged("a refinement level did not converge", math.inf, [], None)
    return result, overall.overall


def _profile_from_record(model, eq: dict) -> tuple[Grid, StrategyProfile]:
    grid = build_grid(model, placement=eq["grid"])
    return grid, StrategyProfile(grid, np.array(eq["units1"]), np.array(eq["units2"]))


def _cmd_verify(args, timings) -> tuple[dict, bool]:
    doc = _problem(args)
    stored = load_result(args.result or Path(args.out) / "result.json")
    tol = args.tol if args.tol is not None else float(stored.get("tolerance", 1e-8))
    model, payoffs = doc.build_model(), doc.build_payoffs()
    rep = VerificationReport()
    rep.add("problem_hash", stored.get("problem", {}).get("sha256") == doc.sha256,
            witness=stored.get("problem", {}).get("sha256"))
    eqs = stored.get("equilibria") or []
    rep.add("has_equilibria", bool(eqs), len(eqs))
    cert_tol = doc.solver["residual_tolerance"] if stored.get("command") == "refine" else tol
    t0 = time.perf_counter()
    for k, eq in enumerate(eqs):
        try:
            grid, profile = _profile_from_record(model, eq)
        except (WoaError, KeyError, ValueError) as exc:
            rep.add(f"eq{k}_readable", False, witness=str(exc))
            continue
        game = Game(model, payoffs, grid)
        vals = payoff_values(game, profile)
        stored_w = [np.asarray(eq.get(f"w{i}", []), float) for i in (1, 2)]
        ok_shape = all(w.shape == vals.w(i).shape for i, w in zip((1, 2), stored_w))
        diff = max(float(np.max(np.abs(w - vals.w(i)))) for i, w in zip((1, 2), stored_w)) \
            if ok_shape else math.inf
        rep.add(f"eq{k}_stored_values", diff <= 1e-9, diff, 1e-9)
        cert = certify_equilibrium(game, profile, cert_tol)
        for c in cert.checks:
            rep.add(f"eq{k}_{c.name}", c.status != "fail", c.measured, c.threshold, c.witness)
    timings["verify"] = time.perf_counter() - t0
    result = _result_header(doc, "verify", tol)
    result["verification"] = rep.to_dict()
    return result, rep.overall


def _cmd_simulate(args, timings) -> tuple[dict, bool]:
    doc = _problem(args)
    model, payoffs = doc.build_model(), doc.build_payoffs()
    t0 = time.perf_counter()
    if args.result:
        eq = load_result(args.result)["equilibria"][-1]
        grid, profile = _profile_from_record(model, eq)
        game = Game(model, payoffs, grid)
    else:
        game = Game(model, payoffs, doc.build_grid(model))
        if doc.strategies is not None:
            profile = StrategyProfile(game.grid, np.array(doc.strategies["units1"]),
                                      np.array(doc.strategies["units2"]))
        else:
            profile = solve_grid_equilibrium(game, doc.solver_options()).profile
    cfg = doc.sim_config(args.paths)
    rep = cross_validate(game, profile, cfg)
    timings["simulate"] = time.perf_counter() - t0
    result = _result_header(doc, "simulate", None)
    result["simulation"] = {"n_paths": cfg.n_paths, "rng_seed": cfg.rng_seed, "mode": cfg.mode}
    result["profile"] = {"grid": _floats(game.grid.points), "units1": _floats(profile.units1),
                         "units2": _floats(profile.units2)}
    result["verification"] = rep.to_dict()
    return result, rep.overall


def _cmd_oracle(args, timings) -> tuple[dict, bool]:
    doc = _problem(args)
    model, payoffs = doc.build_model(), doc.build_payoffs()
    grid = doc.build_grid(model)
    t0 = time.perf_counter()
    rep = VerificationReport()
    result = _result_header(doc, "oracle", 1e-8)
    game = Game(model, payoffs, grid)
    res = solve_grid_equilibrium(game, doc.solver_options())
    if grid.n_interior == 1:
        sol = one_point_equilibrium(model, payoffs, float(grid.interior[0]))
        result["one_point"] = {"x": sol.point, "units1": sol.units1, "units2": sol.units2,
                               "regime": sol.regime}
        err = max(abs(sol.units1 - res.profile.units1[0]), abs(sol.units2 - res.profile.units2[0]))
        rep.add("one_point_rates", err <= 1e-8, err, 1e-8)
    enum = {}
    for i in (1, 2):
        opp = res.profile.units(3 - i)
        en = enumerate_best_responses(game, opp, i)
        br = best_response(game, opp, i)
        gap = float(np.max(np.abs(en.value - br.value)))
        rep.add(f"enumeration_value{i}", gap <= 1e-10, gap, 1e-10)
        enum[f"player{i}"] = {"value": _floats(en.value),
                              "optimal_sets": sorted(sorted(s) for s in en.optimal_sets)}
    result["enumeration"] = enum
    timings["oracle"] = time.perf_counter() - t0
    result["verification"] = rep.to_dict()
    print(json.dumps({k: result[k] for k in ("one_point", "enumeration") if k in result},
                     sort_keys=True, indent=1))
    return result, rep.overall


_HANDLERS = {"solve": _cmd_solve, "refine": _cmd_refine, "verify": _cmd_verify,
             "simulate": _cmd_simulate, "oracle": _cmd_oracle}


def run(command: str, args: argparse.Namespace) -> int:
    """Execute one command; returns the process exit code.

    0 when every report passes, 2 for unreadable input, 3 for failed
    assumptions, 4 when the solver does not converge, 5 when verification
    fails and 1 for any other library error.
    """
    if command not in _HANDLERS:
        log.error("unknown command %r", command)
        return EXIT_PARSE
    timings: dict = {"command": command}
    try:
        result, ok = _HANDLERS[command](args, timings)
    except (SchemaError, ExpressionError) as exc:
        log.error("%s", exc)
        return EXIT_PARSE
    except (AssumptionError, ModelError) as exc:
        log.error("%s", exc)
        return EXIT_ASSUMPTION
    except NotConverged as exc:
        log.error("%s", exc)
        return EXIT_NOT_CONVERGED
    except WoaError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR
    if command != "verify":
        write_result(result, args.out, timings)
        if command in ("solve", "refine"):
            emit_plot_data(result, Path(args.out) / "plots")
    else:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "verification.json").write_text(dump_result(result))
    log.info("%s: %s", command, "pass" if ok else "fail")
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="woagame", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("problem", help="problem file (YAML)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, help="override the document seed")
    p.add_argument("--tol", type=float, help="certification / refinement tolerance")
    p.add_argument("--levels", type=int, help="refinement levels")
    p.add_argument("--paths", type=int, help="Monte Carlo paths")
    p.add_argument("--result", help="stored result file (verify, simulate)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
