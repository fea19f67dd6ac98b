import json

import pytest

from conatsim import cli

from conftest import e2


def run_json(capsys, *argv):
    code = cli.run(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out else None), out.err


def test_ccaecc_example(capsys):
    code, doc, _ = run_json(capsys, "ccaecc", "--n", "3", "--r", "1", "--eta", "1", "--kind", "pq",
                            "--trials", "20000")
    assert code == 0
    assert doc["epsilons_measured"] == pytest.approx([0.270671, 0.270671, 0.541341], abs=1e-6)
    assert doc["pass"] is True
    assert doc["config"]["subcommand"] == "ccaecc" and doc["config"]["trials"] == 20000


def test_superdense_example(capsys):
    code, doc, _ = run_json(capsys, "superdense", "--topology", "star3.json", "--r", "1", "--engine", "symbolic")
    assert code == 0
    assert doc["channels"]["PQ"]["epsilons_measured"] == pytest.approx([0.270671, 0.270671, 0.541341], abs=1e-6)
    assert doc["channels"]["MQ"]["epsilons_measured"] == pytest.approx([0.270671, 0.270671, 0.0], abs=1e-6)


def test_sweep_example(capsys):
    code, doc, _ = run_json(capsys, "sweep", "--param", "r", "--from", "0", "--to", "0", "--steps", "1",
                            "--over", "ccaecc", "--n", "3", "--eta", "1", "--engine", "symbolic")
    assert code == 0
    (row,) = doc["rows"]
    assert row["result"]["epsilons_measured"] == [2.0, 2.0, 4.0]


def test_sweep_rows_in_grid_order(capsys):
    code, doc, _ = run_json(capsys, "sweep", "--param", "r", "--from", "0", "--to", "2", "--steps", "5",
                            "--workers", "3", "--over", "ccaecc", "--engine", "symbolic")
    assert code == 0
    assert [row["index"] for row in doc["rows"]] == list(range(5))
    for row in doc["rows"]:
        assert row["result"]["epsilons_measured"][0] == pytest.approx(2 * e2(row["value"]), abs=1e-11)


def test_sweep_topologies(capsys):
    vals = {}
    for name in ("chain3.json", "star3.json"):
        code, doc, _ = run_json(capsys, "sweep", "--param", "r", "--from", "0.5", "--to", "1.5", "--steps", "3",
                                "--over", "superdense", "--topology", name, "--engine", "symbolic")
        assert code == 0
        vals[name] = [row["result"]["channels"]["PQ"]["epsilons_measured"] for row in doc["rows"]]
    for chain, star in zip(vals["chain3.json"], vals["star3.json"]):
        assert star[1] < chain[1]


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "out.csv"
    code = cli.run(["ccaecc", "--r", "0.5", "--eta", "0.9", "--engine", "symbolic", "--format", "csv",
                    "--output", str(path)])
    assert code == 0
    text = path.read_text()
    assert text.startswith("# config=")
    config = json.loads(text.splitlines()[0][len("# config="):])
    assert config["r"] == 0.5
    rows = cli.read_csv(text)
    assert list(rows[0]) == cli.CSV_HEADER
    assert [r["quantity"] for r in rows] == ["eps1", "eps2", "eps3"]
    assert float(rows[2]["measured"]) == pytest.approx(4 * e2(0.5) + 2 * 0.1 / 0.9, abs=1e-11)
    assert all(r["pass"] == "true" for r in rows)


def test_json_output_file_is_byte_identical(tmp_path):
    argv = ["verify", "--n", "3", "--r", "0.7", "--eta", "0.8", "--trials", "5000", "--seed", "9"]
    path = tmp_path / "out.json"
    assert cli.run(argv + ["--output", str(path)]) == 0
    first = path.read_bytes()
    assert cli.run(argv + ["--output", str(path)]) == 0
    assert path.read_bytes() == first


@pytest.mark.parametrize("argv, code", [
    (["ccaecc", "--n", "1"], 1),
    (["ccaecc", "--eta", "0"], 1),
    (["ccaecc", "--bogus"], 1),
    (["nope"], 1),
    (["superdense", "--topology", "missing.json"], 2),
    (["verify", "--method", "superdense"], 1),
    (["sweep", "--param", "n", "--from", "2", "--to", "3", "--steps", "2", "--over", "superdense",
      "--topology", "star3.json"], 1),
])
def test_error_exit_codes(capsys, argv, code):
    assert cli.run(argv) == code
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["code"] == code and err["message"]


def test_cyclic_topology_exit_code(tmp_path, capsys):
    path = tmp_path / "cycle.json"
    path.write_text(json.dumps({"parties": ["A", "B", "C"], "sender": "A",
                                "edges": [["A", "B"], ["B", "C"], ["C", "A"]]}))
    assert cli.run(["superdense", "--topology", str(path)]) == 2
    assert "cycle" in capsys.readouterr().err


def test_verification_failure_exit_code(capsys):
    code, doc, _ = run_json(capsys, "verify", "--n", "3", "--gain", "1", "--engine", "symbolic")
    assert code == 3 and doc["pass"] is False


def test_verify_superdense_uses_topology_r(capsys):
    code, doc, _ = run_json(capsys, "verify", "--method", "superdense", "--topology", "chain3.json",
                            "--engine", "symbolic")
    assert code == 0
    assert doc["channels"]["MQ"]["epsilons_measured"] == pytest.approx([2 * e2(1), 4 * e2(1), 0.0], abs=1e-11)


@pytest.mark.parametrize("argv", [
    ["ghz", "--parties", "4", "--r", "1"],
    ["ghz", "--parties", "3", "--r", "0.5", "--kind", "mq"],
    ["epr", "--r", "0.5"],
])
def test_resource_commands(capsys, argv):
    code, doc, _ = run_json(capsys, *argv)
    assert code == 0 and doc["pass"] is True
    assert doc["commutators"]["ok"]


def test_teleport_command(capsys):
    code, doc, _ = run_json(capsys, "teleport", "--receiver", "B", "--r", "0", "--engine", "symbolic")
    assert code == 0
    assert doc["reports"]["PQ"]["fidelity"] == pytest.approx(2 / 24 ** 0.5, abs=1e-11)
    code, doc, _ = run_json(capsys, "teleport", "--receiver", "B", "--r", "0", "--drop-controller", "C",
                            "--engine", "symbolic")
    assert doc["reports"]["PQ"]["withheld"] == ["C"]


def test_two_mode_teleport_command(capsys):
    code, doc, _ = run_json(capsys, "teleport", "--receiver", "C", "--topology", "star3.json", "--r", "1",
                            "--engine", "symbolic")
    assert code == 0 and set(doc["reports"]) == {"PQ", "MQ"}


def test_qss_command(capsys):
    code, doc, _ = run_json(capsys, "qss", "--coalition", "A,C", "--reconstructor", "B", "--secret", "1,2",
                            "--trials", "5000")
    assert code == 0
    rep = doc["reports"]["PQ"]
    assert rep["coalition"] == ["A", "C"] and rep["secret"] == [1.0, 2.0]


def test_floats_rounded_to_twelve_digits(capsys):
    _, doc, _ = run_json(capsys, "ccaecc", "--r", "1", "--engine", "symbolic")
    assert doc["epsilons_measured"][0] == float(f"{2 * e2(1):.12g}")
