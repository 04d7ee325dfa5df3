import csv
import json

import pytest

from liftedgbp.cli import EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK, main
from liftedgbp.exact import exact_marginal
from liftedgbp.model import GroundAtom, ground, load_model, shatter


def run(tmp_path, *flags):
    out = tmp_path / "report.json"
    code = main(["run", *flags, "--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_compare_friends_smokers(tmp_path):
    code, rep = run(tmp_path, "--model", "friends_smokers", "--mode", "compare", "--n", "3", "--iters", "50")
    assert code == EXIT_OK
    assert rep["maxDiscrepancy"] <= 1e-9 and rep["schemaVersion"] == 1
    assert rep["marginals"]["smokes"] == pytest.approx(rep["groundMarginals"]["smokes"], abs=1e-9)


def test_chain_does_not_converge(tmp_path):
    code, rep = run(tmp_path, "--model", "chain", "--mode", "lifted", "--n", "5")
    assert code == EXIT_NOT_CONVERGED
    assert rep["converged"] is False and rep["iterations"] == 500


def test_exact_query(tmp_path):
    code, rep = run(tmp_path, "--model", "friends_smokers", "--mode", "exact", "--n", "3",
                    "--query", "friends(1,2)")
    assert code == EXIT_OK
    from liftedgbp.benchmarks import load_benchmark
    mrf = ground(shatter(load_benchmark("friends_smokers")).with_domain_size(3))
    want = exact_marginal(mrf, [GroundAtom("friends", (1, 2))]).natural()
    assert rep["marginals"]["friends(1,2)"] == pytest.approx(want, abs=1e-9)


def test_ground_mode_writes_trace_and_beliefs(tmp_path):
    trace, beliefs = tmp_path / "t.csv", tmp_path / "b.json"
    code, rep = run(tmp_path, "--model", "pq", "--mode", "ground", "--n", "3",
                    "--trace", str(trace), "--beliefs", str(beliefs))
    assert code == EXIT_OK
    rows = list(csv.reader(trace.open()))
    assert rows[0] == ["iteration", "max_residual"] and len(rows) == rep["iterations"] + 1
    regions = json.loads(beliefs.read_text())["regions"]
    assert all(abs(r["total"] - 1.0) < 1e-10 for r in regions)


def test_reports_are_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    for out in (a, b):
        main(["run", "--model", "transitive", "--n", "4", "--iters", "40", "--out", str(out)])
    assert a.read_bytes() == b.read_bytes()


def test_model_file_path(tmp_path):
    path = tmp_path / "m.prm"
    path.write_text("domain d = 3\npredicate p(d)\nparfactor p(X), p(Y) where X != Y values [2, 1, 1, 2]\n")
    code, rep = run(tmp_path, "--model", str(path), "--mode", "lifted", "--query", "p(2)")
    assert code == EXIT_OK and list(rep["marginals"]) == ["p(2)"]
    assert load_model(path).domain_sizes() == {"d": 3}


@pytest.mark.parametrize("flags", [
    ["--model", "missing.prm"],
    ["--model", "pq", "--query", "nope"],
    ["--model", "pq", "--query", "p(9)"],
    ["--model", "chain", "--n", "3"],
    ["--model", "pq", "--mode", "compare", "--closure", "intersection"],
    ["--model", "pq", "--damping", "0"],
])
def test_input_errors_exit_1(tmp_path, flags, capsys):
    code, _ = run(tmp_path, *flags)
    assert code == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_export_graphs(tmp_path):
    assert main(["export-graph", "--model", "pq", "--kind", "both", "--n", "2", "--out-dir", str(tmp_path)]) == 0
    lifted = json.loads((tmp_path / "lifted.json").read_text())
    assert len(lifted["regions"]) == 3 and [e["kappa"] for e in lifted["edges"]] == ["N-1", "N-1"]
    ground_json = json.loads((tmp_path / "ground.json").read_text())
    outer = [r for r in ground_json["regions"] if r["outer"]]
    assert len(outer) == 2 and len(ground_json["regions"]) == 6
    assert (tmp_path / "lifted.dot").read_text().startswith("digraph")
    assert (tmp_path / "local_par.json").exists()

    pp = tmp_path / "pp"
    main(["export-graph", "--model", "pp", "--out-dir", str(pp)])
    d = json.loads((pp / "lifted.json").read_text())
    assert len(d["regions"]) == 2 and len(d["edges"]) == 1
