import csv
import json
import logging
import shutil

import numpy as np
import pytest

from woagame.cli_io import (EXIT_ASSUMPTION, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_PARSE,
                            EXIT_VERIFY, emit_plot_data, emit_problem, main, parse_problem,
                            parse_text)
from woagame.errors import AssumptionError, ExpressionError, SchemaError

from conftest import CORPUS, PROBLEMS

MINIMAL = """\
model: {family: BM, interval: [0, 1]}
payoffs:
  g1: "1 + 0.5*sin(pi*x)"
  f1: "1 + sin(pi*x)"
  g2: "1 + 0.5*sin(pi*x)"
  f2: "1 + sin(pi*x)"
  r1: 0.1
  r2: 0.1
"""


def _write(tmp_path, text, name="p.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _read_csv(path):
    with path.open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], float)


def test_minimal_file_gets_defaults():
    doc = parse_text(MINIMAL)
    assert doc.grid == {"placement": "uniform", "n_interior": 15, "levels": 5, "n0": 1}
    assert doc.simulation["n_paths"] == 100_000 and doc.seed == 0
    assert doc.solver_options().residual_tolerance == 1e-8


def test_assumption_violation_is_reported():
    with pytest.raises(AssumptionError):
        parse_text(MINIMAL.replace('g1: "1 + 0.5*sin(pi*x)"', 'g1: "x^2 - 1"'))


def test_missing_key_reports_line():
    with pytest.raises(SchemaError) as exc:
        parse_text(MINIMAL.replace("  r1: 0.1\n", ""), "p.yaml")
    assert exc.value.line == 2 and "payoffs.r1" in str(exc.value)


def test_wrong_type_and_unknown_key_report_lines():
    with pytest.raises(SchemaError) as exc:
        parse_text(MINIMAL + "grid: {n_interior: many}\n")
    assert exc.value.line == 9
    with pytest.raises(SchemaError) as exc:
        parse_text(MINIMAL + "solver:\n  damping: 0.5\n  dampnig: 0.5\n")
    assert exc.value.line == 11


def test_bad_expressions_are_rejected():
    with pytest.raises(ExpressionError):
        parse_text(MINIMAL.replace("1 + sin(pi*x)", "1 + sin(pi*x"))
    with pytest.raises(ExpressionError):
        parse_text(MINIMAL.replace('f1: "1 + sin(pi*x)"', 'f1: "1 + log(x)"'))


@pytest.mark.parametrize("name", CORPUS + ("one_point",))
def test_round_trip(name):
    doc = parse_problem(PROBLEMS / f"{name}.yaml")
    again = parse_text(emit_problem(doc))
    assert again == doc and emit_problem(again) == emit_problem(doc)
    assert again.sha256 == doc.sha256


def test_seed_override_changes_hash_and_seeds(tmp_path):
    doc = parse_text(MINIMAL)
    other = parse_text(MINIMAL + "seed: 3\n")
    assert doc.sha256 != other.sha256 and doc.seeds() != other.seeds()


def test_solve_writes_result_and_plots(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", str(PROBLEMS / "trivial.yaml"), "--out", str(out)]) == EXIT_OK
    result = json.loads((out / "result.json").read_text())
    assert result["schema_version"] == 1 and result["verification"]["overall"] == "pass"
    assert "solve" in json.loads((out / "timings.json").read_text())
    names = sorted(p.name for p in (out / "plots").iterdir())
    assert names == ["rates.csv", "residuals.csv", "stopped_law.csv", "values.csv"]


def test_symmetric_problem_has_symmetric_tables(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", str(PROBLEMS / "sym.yaml"), "--out", str(out)]) == EXIT_OK
    _, rates = _read_csv(out / "plots" / "rates.csv")
    _, values = _read_csv(out / "plots" / "values.csv")
    np.testing.assert_allclose(rates[:, 1], rates[:, 2], atol=1e-12)
    np.testing.assert_allclose(values[:, 1], values[:, 2], atol=1e-12)
    np.testing.assert_allclose(values[:, 1], values[::-1, 1], atol=1e-12)


def test_solve_is_byte_reproducible(tmp_path):
    for k in (1, 2):
        assert main(["solve", str(PROBLEMS / "asym.yaml"), "--out", str(tmp_path / f"o{k}")]) == 0
    a, b = ((tmp_path / f"o{k}" / "result.json").read_bytes() for k in (1, 2))
    assert a == b


def test_verify_accepts_good_and_rejects_tampered(tmp_path):
    out = tmp_path / "out"
    problem = str(PROBLEMS / "asym.yaml")
    assert main(["solve", problem, "--out", str(out)]) == EXIT_OK
    assert main(["verify", problem, "--out", str(out)]) == EXIT_OK
    result = json.loads((out / "result.json").read_text())
    u = result["equilibria"][0]["units1"]
    k = int(np.argmax(np.array(u) > 0))
    u[k] = 0.5 * u[k] if u[k] > 0 else 0.5
    (out / "result.json").write_text(json.dumps(result))
    assert main(["verify", problem, "--out", str(out)]) == EXIT_VERIFY
    report = json.loads((out / "verification.json").read_text())["verification"]
    failed = {c["name"] for c in report["checks"] if c["status"] == "fail"}
    assert "eq0_stored_values" in failed and "eq0_residual" in failed


def test_verify_rejects_other_problem(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", str(PROBLEMS / "trivial.yaml"), "--out", str(out)]) == EXIT_OK
    shutil.copy(PROBLEMS / "trivial.yaml", tmp_path / "t.yaml")
    assert main(["verify", str(tmp_path / "t.yaml"), "--out", str(out), "--seed", "99"]) == EXIT_VERIFY


def test_refine_writes_level_tables(tmp_path):
    out = tmp_path / "out"
    assert main(["refine", str(PROBLEMS / "trivial.yaml"), "--out", str(out), "--levels", "3"]) == 0
    names = {p.name for p in (out / "plots").iterdir()}
    assert {"rates_L0.csv", "rates_L2.csv", "stopped_law_L1.csv"} <= names and len(names) == 12


def test_empty_result_writes_nothing(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        assert emit_plot_data({"equilibria": []}, tmp_path / "plots") == []
    assert not (tmp_path / "plots").exists() and "no plot tables" in caplog.text


def test_oracle_command(tmp_path, capsys):
    assert main(["oracle", str(PROBLEMS / "one_point.yaml"), "--out", str(tmp_path)]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["one_point"]["regime"] == "mixed"


def test_simulate_command(tmp_path):
    out = tmp_path / "out"
    problem = str(PROBLEMS / "asym.yaml")
    assert main(["simulate", problem, "--out", str(out), "--paths", "20000"]) == EXIT_OK
    result = json.loads((out / "result.json").read_text())
    assert result["simulation"]["n_paths"] == 20000


def test_exit_codes(tmp_path):
    out = str(tmp_path / "out")
    assert main(["solve", str(_write(tmp_path, "model: [1, 2]\n")), "--out", out]) == EXIT_PARSE
    assert main(["solve", str(tmp_path / "missing.yaml"), "--out", out]) == EXIT_PARSE
    bad = MINIMAL.replace('g1: "1 + 0.5*sin(pi*x)"', 'g1: "2 + sin(pi*x)"')
    assert main(["solve", str(_write(tmp_path, bad)), "--out", out]) == EXIT_ASSUMPTION
    starved = (PROBLEMS / "sym.yaml").read_text() + \
        "solver: {max_outer_iterations: 1, restart_seeds: 0, newton_enabled: false}\n"
    assert main(["solve", str(_write(tmp_path, starved)), "--out", out]) == EXIT_NOT_CONVERGED
