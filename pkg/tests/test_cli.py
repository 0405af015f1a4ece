import json
from fractions import Fraction

import pytest

from robustmatch import LeaveDistribution, serialize_instance
from robustmatch.cli import main
from robustmatch.fixtures import gale_shapley_3x3


@pytest.fixture(scope="module")
def gs3_file(tmp_path_factory):
    instance, leave = gale_shapley_3x3()
    path = tmp_path_factory.mktemp("docs") / "gs3.json"
    path.write_text(serialize_instance(instance, leave))
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_solve_stable_nu_one(gs3_file, capsys):
    code, out, err = run_cli(capsys, "solve", "--input", gs3_file, "--nu", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["mode"] == "stable"
    assert doc["nu"] == "1/1"
    assert doc["matching"] == [["m1", "w2"], ["m2", "w3"], ["m3", "w1"]]
    assert doc["psi"] == "30/1"
    assert doc["psi_by_leaver"] == {"phi": "6/1", "m1": "24/1"}
    assert doc["closed_subset"] == [
        {"index": 0, "pairs": [["m1", "w1"], ["m2", "w2"], ["m3", "w3"]]}
    ]
    assert "solved in" in err


def test_solve_stable_nu_zero(gs3_file, capsys):
    code, out, _ = run_cli(capsys, "solve", "--input", gs3_file, "--nu", "0")
    assert code == 0
    doc = json.loads(out)
    assert doc["matching"] == [["m1", "w1"], ["m2", "w2"], ["m3", "w3"]]
    assert doc["psi"] == "9/4"
    assert doc["closed_subset"] == []


def test_solve_accepts_decimal_nu(gs3_file, capsys):
    code, out, _ = run_cli(capsys, "solve", "--input", gs3_file, "--nu", "0.5")
    assert code == 0
    assert json.loads(out)["nu"] == "1/2"


def test_solve_relaxed_mode(gs3_file, capsys):
    code, out, _ = run_cli(
        capsys, "solve", "--input", gs3_file, "--nu", "0", "--mode", "relaxed"
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["mode"] == "relaxed"
    assert doc["closed_subset"] is None
    num, den = doc["psi"].split("/")
    assert Fraction(int(num), int(den)) <= Fraction(9, 4)


def test_reports_are_byte_identical(gs3_file, capsys):
    _, first, _ = run_cli(capsys, "solve", "--input", gs3_file, "--nu", "3/4")
    _, second, _ = run_cli(capsys, "solve", "--input", gs3_file, "--nu", "3/4")
    assert first == second


def test_decimal_flag(gs3_file, capsys):
    code, out, _ = run_cli(
        capsys, "solve", "--input", gs3_file, "--nu", "0", "--decimal"
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["psi"] == 2.25


def test_evaluate_reads_matching_from_stdin(gs3_file, capsys, monkeypatch):
    import io

    matching = [["m1", "w3"], ["m2", "w1"], ["m3", "w2"]]
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(matching)))
    code, out, _ = run_cli(capsys, "evaluate", "--input", gs3_file, "--nu", "0")
    assert code == 0
    doc = json.loads(out)
    assert doc["psi"] == "81/4"
    assert doc["stable"] is True
    assert doc["expected_blocking_pairs"] == "3/2"


def test_evaluate_rejects_garbage_matching(gs3_file, capsys, monkeypatch):
    import io

    monkeypatch.setattr("sys.stdin", io.StringIO('{"not": "pairs"}'))
    code, _, err = run_cli(capsys, "evaluate", "--input", gs3_file, "--nu", "0")
    assert code == 1 and "error" in err


def test_enumerate_stable(gs3_file, capsys):
    code, out, _ = run_cli(capsys, "enumerate", "--input", gs3_file, "--what", "stable")
    assert code == 0
    doc = json.loads(out)
    assert doc["count"] == 3
    assert doc["matchings"][0]["closed_subset"] == []


def test_enumerate_rotations_and_edges(gs3_file, capsys):
    code, out, _ = run_cli(
        capsys, "enumerate", "--input", gs3_file, "--what", "rotations"
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["count"] == 2
    assert doc["rotations"][0]["pairs"] == [["m1", "w1"], ["m2", "w2"], ["m3", "w3"]]

    code, out, _ = run_cli(capsys, "enumerate", "--input", gs3_file, "--what", "edges")
    assert code == 0
    assert json.loads(out)["edges"] == [[0, 1]]


def test_enumerate_all_matchings(gs3_file, capsys):
    code, out, _ = run_cli(
        capsys, "enumerate", "--input", gs3_file, "--what", "all-matchings"
    )
    assert code == 0
    assert json.loads(out)["count"] == 34


def test_generate_round_trips(tmp_path, capsys):
    out_path = tmp_path / "random.json"
    code, _, _ = run_cli(
        capsys, "generate", "--n", "4", "--seed", "11", "--output", str(out_path)
    )
    assert code == 0
    code, out, _ = run_cli(
        capsys, "enumerate", "--input", str(out_path), "--what", "stable"
    )
    assert code == 0
    assert json.loads(out)["count"] >= 1


def test_compare_table(gs3_file, capsys):
    code, out, _ = run_cli(capsys, "compare", "--input", gs3_file, "--nu", "1")
    assert code == 0
    doc = json.loads(out)
    names = [row["policy"] for row in doc["rows"]]
    assert names == ["men-optimal", "women-optimal", "min-sumsq", "robust", "relaxed"]
    values = {row["policy"]: Fraction(*map(int, row["psi"].split("/"))) for row in doc["rows"]}
    stable_rows = [values[n] for n in ("men-optimal", "women-optimal", "min-sumsq")]
    assert all(values["robust"] <= v for v in stable_rows)
    assert values["relaxed"] <= values["robust"]
    assert all(row["stable"] for row in doc["rows"][:4])


def test_oracle_subcommands(gs3_file, capsys):
    code, out, _ = run_cli(capsys, "oracle", "--input", gs3_file, "--what", "stable")
    assert code == 0
    assert json.loads(out)["count"] == 3

    code, out, _ = run_cli(capsys, "oracle", "--input", gs3_file, "--what", "poset")
    assert code == 0
    assert json.loads(out)["precedes"] == [[0, 1]]

    code, out, _ = run_cli(
        capsys, "oracle", "--input", gs3_file, "--what", "brute", "--nu", "1"
    )
    assert code == 0
    assert json.loads(out)["psi"] == "30/1"


def test_nu_from_document(tmp_path, capsys):
    instance, leave = gale_shapley_3x3()
    path = tmp_path / "with_nu.json"
    path.write_text(serialize_instance(instance, leave, nu=Fraction(1)))
    code, out, _ = run_cli(capsys, "solve", "--input", str(path))
    assert code == 0
    assert json.loads(out)["psi"] == "30/1"


def test_missing_nu_is_an_input_error(gs3_file, capsys):
    code, _, err = run_cli(capsys, "solve", "--input", gs3_file)
    assert code == 1 and "nu" in err


@pytest.mark.parametrize(
    "argv",
    [
        ("solve", "--input", "no-such-file.json", "--nu", "1"),
        ("solve", "--input", "x.json", "--nu", "1", "--frobnicate"),
        ("solve", "--nu", "1"),
        ("nonsense",),
        (),
    ],
)
def test_input_errors_exit_one(argv, capsys):
    code, _, err = run_cli(capsys, *argv)
    assert code == 1
    assert "error" in err


def test_invalid_document_exits_one(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"men": ["m1"], "women": []}')
    code, _, err = run_cli(capsys, "solve", "--input", str(path), "--nu", "1")
    assert code == 1 and "error" in err


def test_oracle_bound_exits_one(tmp_path, capsys):
    from robustmatch import random_instance

    path = tmp_path / "big.json"
    path.write_text(serialize_instance(random_instance(8, 1), LeaveDistribution(1, {})))
    code, _, err = run_cli(
        capsys, "enumerate", "--input", str(path), "--what", "all-matchings"
    )
    assert code == 1 and "oracle bound" in err


def test_internal_invariant_violation_exits_two(gs3_file, capsys, monkeypatch):
    from robustmatch.errors import InternalError

    def broken(*args, **kwargs):
        raise InternalError("instrumented failure")

    monkeypatch.setattr("robustmatch.cli.solve_robust", broken)
    code, _, err = run_cli(capsys, "solve", "--input", gs3_file, "--nu", "1")
    assert code == 2 and "internal error" in err


def test_solve_writes_output_file(gs3_file, tmp_path, capsys):
    out_path = tmp_path / "report.json"
    code, out, _ = run_cli(
        capsys, "solve", "--input", gs3_file, "--nu", "1", "--output", str(out_path)
    )
    assert code == 0 and out == ""
    assert json.loads(out_path.read_text())["psi"] == "30/1"
