import json
from importlib.resources import files

import pytest

from horngauge.cli import main

DATA = files("horngauge") / "data"
REF, PURE = str(DATA / "ref.json"), str(DATA / "pure_h.json")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verdict(capsys):
    code, out, _ = run(capsys, "verdict", "--input", REF)
    assert code == 0
    assert json.loads(out) == {"status": "not_metrically_conical", "bound": "8/3"}


def test_decompose_pure(capsys):
    code, out, _ = run(capsys, "decompose", "--input", PURE)
    doc = json.loads(out)
    assert code == 0 and doc["theta"] == []
    assert doc["alpha_table"]["alpha"] == [480, 360, 300]
    assert doc["alpha_table"]["identity_2k"] == [14400] * 3


def test_growth_csv(capsys, tmp_path):
    g = tmp_path / "g.csv"
    code, out, _ = run(
        capsys, "growth", "--input", REF, "--r-min", "1e-3", "--r-max", "1e-1", "--nr", "24", "--ntheta", "512", "--out", str(g), "--threads", "1"
    )
    assert code == 0
    rows = g.read_text().splitlines()
    assert len(rows) == 1 + 24
    assert json.loads(out)["exponent"] >= 8 / 3 - 0.15


def test_loop_csv_and_flow_check(capsys, tmp_path):
    code, out, _ = run(capsys, "loop", "--input", REF, "--out", str(tmp_path / "l.csv"))
    assert code == 0 and json.loads(out)["turns"] in (1, 2)
    code, out, _ = run(capsys, "flow-check", "--input", REF, "--n-samples", "10", "--traj-out", str(tmp_path / "t.csv"))
    assert code == 0 and json.loads(out)["passes"]
    assert (tmp_path / "t.csv").read_text().startswith("u,re_x")


def test_eta_and_contacts(capsys):
    code, out, _ = run(capsys, "eta", "--input", REF)
    assert code == 0 and json.loads(out)["passes"]
    code, out, _ = run(capsys, "contacts", "--input", REF, "--nr", "12", "--ntheta", "64")
    assert code == 0 and json.loads(out)["min_contact_order"] >= 5 / 3 - 0.1


def test_probe(capsys):
    code, out, _ = run(capsys, "probe", "--input", REF, "--n-samples", "20")
    assert code == 0 and json.loads(out)["status"] == "NO_FLAG"


def test_input_error_names_field(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"vars": ["x", "y", "z"], "weights": [15, "10", 6], "terms": [{"c": [1, 0], "e": [2, 0, 0]}]}))
    code, _, err = run(capsys, "decompose", "--input", str(bad))
    assert code == 2 and "weights/1" in err


def test_missing_input_and_same_output(capsys, tmp_path):
    assert run(capsys, "verdict", "--input", str(tmp_path / "nope.json"))[0] == 2
    assert run(capsys, "verdict", "--input", REF, "--out", REF)[0] == 2


def test_numeric_failure_names_stage(capsys, tmp_path):
    doc = {"vars": ["x", "y", "z"], "weights": [15, 10, 6], "degree": 30, "terms": [{"c": [1, 0], "e": [0, 3, 0]}, {"c": [1, 0], "e": [0, 0, 5]}]}
    p = tmp_path / "noloop.json"
    p.write_text(json.dumps(doc))
    code, _, err = run(capsys, "growth", "--input", str(p))
    assert code == 3 and "'loop'" in err


def test_threads_env(monkeypatch):
    from horngauge.pipeline import default_threads

    monkeypatch.setenv("HORNGAUGE_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.delenv("HORNGAUGE_THREADS")
    assert default_threads() >= 1


def test_bad_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["report"])
    assert exc.value.code == 2
    assert run(capsys, "flow-check", "--input", REF, "--rel-tol", "-1")[0] == 2
