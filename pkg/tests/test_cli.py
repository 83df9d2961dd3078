import csv
import io
import json
from fractions import Fraction

import pytest

from rqcsim import cli, report_io
from rqcsim.parallel import DEFAULT_SEED


# --- serialisation -----------------------------------------------------------


def test_fraction_json_and_csv():
    rep = report_io.make_report("x", {"p": Fraction(3, 4)}, ["name", "p"], [{"name": "a", "p": Fraction(3, 4)}])
    data = json.loads(report_io.dumps_json(rep))
    assert data["summary"]["p"] == {"fraction": "3/4", "value": 0.75}
    assert data["schema_version"] == report_io.SCHEMA_VERSION
    rows = list(csv.reader(io.StringIO(report_io.dumps_csv(rep))))
    assert rows == [["name", "p", "p_float"], ["a", "3/4", "0.75"]]


def test_empty_report_is_header_only_csv():
    rep = report_io.make_report("empty", {}, ["a", "b"], [])
    assert report_io.dumps_csv(rep) == "a,b\r\n"


def test_csv_quoting_and_floats():
    rep = report_io.make_report("q", {}, ["text", "v", "flag"], [{"text": 'say "hi", ok', "v": 0.1, "flag": True}])
    text = report_io.dumps_csv(rep)
    assert text.splitlines()[1] == '"say ""hi"", ok",0.1,true'
    assert list(csv.reader(io.StringIO(text)))[1][0] == 'say "hi", ok'


def test_json_round_trip():
    rep = report_io.make_report(
        "rt",
        {"u": Fraction(11, 20), "n": 5, "x": 1.25, "nested": {"f": Fraction(1, 3), "l": [1, Fraction(2, 7)]}},
        ["a"],
        [{"a": Fraction(5, 6)}, {"a": None}],
    )
    assert report_io.loads_json(report_io.dumps_json(rep)) == rep


def test_non_finite_floats_do_not_break_json():
    text = report_io.dumps_json(report_io.make_report("inf", {"x": float("inf")}))
    assert json.loads(text)["summary"]["x"] == "inf"


def test_emit_to_file(tmp_path):
    path = tmp_path / "r.json"
    report_io.emit(report_io.make_report("f", {"a": 1}), "json", path)
    assert json.loads(path.read_text())["summary"] == {"a": 1}
    with pytest.raises(ValueError):
        report_io.emit({}, "xml", path)


# --- command line --------------------------------------------------------------


def run(capsys, *argv):
    code = cli.parse_and_dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_walk_csv_with_summary(capsys, tmp_path):
    out_path = tmp_path / "walk.csv"
    code, _, _ = run(capsys, "walk", "--target-n", "20", "--trials", "2000", "--seed", "7", "--format", "csv", "-o", str(out_path))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out_path.read_text())))
    assert list(rows[0]) == ["trial", "absorbed", "steps"]
    assert len(rows) == 2000
    summary = json.loads((tmp_path / "walk.summary.json").read_text())["summary"]
    assert summary["absorb_right_exact"]["fraction"] == "21/40"
    assert summary["expected_steps_formula"]["fraction"] == "76/1"
    assert summary["right_absorptions"] == sum(r["absorbed"] == "rightN" for r in rows)


def test_walk_csv_to_stdout_puts_summary_on_stderr(capsys):
    code, out, err = run(capsys, "walk", "--target-n", "5", "--trials", "10", "--format", "csv")
    assert code == 0
    assert out.startswith("trial,absorbed,steps")
    assert json.loads(err)["kind"] == "walk-summary"


def test_same_arguments_give_identical_output(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "localize", "--n", "3", "--m", "200", "--trials", "300", "--seed", "4", "-o", str(a), "--threads", "1")
    run(capsys, "localize", "--n", "3", "--m", "200", "--trials", "300", "--seed", "4", "-o", str(b), "--threads", "3")
    assert a.read_bytes() == b.read_bytes()


def test_default_seed_is_constant(capsys):
    _, out, _ = run(capsys, "end-to-end", "--n", "2", "--m", "10")
    assert json.loads(out)["summary"]["seed"] == DEFAULT_SEED


def test_localize_summary(capsys):
    code, out, _ = run(capsys, "localize", "--n", "2", "--m", "100", "--trials", "200")
    data = json.loads(out)
    assert code == 0
    assert len(data["rows"]) == 200
    assert data["summary"]["coverage_2sigma"] >= 0.75


def test_tiny_exact_command(capsys):
    code, out, _ = run(capsys, "tiny-exact", "--n", "1", "--m", "1", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {r["outcomes"] for r in rows} == {"s", "t"}
    assert all(float(r["distance"]) < 1e-10 for r in rows)


def test_growth_quantum_command(capsys):
    code, out, _ = run(capsys, "growth-quantum", "--k", "1,2", "--measurements", "5,10")
    data = json.loads(out)
    assert code == 0
    assert len(data["rows"]) == 4
    assert set(data["summary"]["singlet_discard_distance"]) == {"2"}


def test_sweep_command(capsys):
    code, out, _ = run(capsys, "sweep", "--n", "4,8,16,32", "--eps", "0.2,0.1,0.05", "--trials", "0")
    data = json.loads(out)
    assert code == 0
    assert len(data["rows"]) == 12
    assert data["summary"]["mean_slope_vs_inv_eps"] == pytest.approx(6.0, abs=1e-9)
    # required M grows like (N - 1)^3, so over N = 4..32 the log-log fit of log(N - 1)
    # against log N gives 3 x 1.1207... rather than the asymptotic 3
    assert data["summary"]["mean_slope_vs_N"] == pytest.approx(3.3621711307644198, abs=1e-9)


def test_verify_exit_codes(capsys, monkeypatch):
    code, _, err = run(capsys, "verify", "--only", "qsim.pure", "--format", "csv")
    assert code == 0 and "[PASS]" in err
    broken = [("broken.check", lambda quick: (False, "forced failure"))]
    monkeypatch.setattr(cli.verify, "CHECKS", broken)
    code, _, err = run(capsys, "verify")
    assert code == 1 and "[FAIL] broken.check" in err


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "walk")[0] == 2
    assert run(capsys, "nonsense")[0] == 2
    assert run(capsys, "walk", "--target-n", "5", "--bogus")[0] == 2
    code, _, err = run(capsys, "localize", "--n", "2", "--m", "0")
    assert code == 2 and "positive" in err
    code, _, err = run(capsys, "tiny-exact", "--n", "5", "--m", "1")
    assert code == 2 and "tiny_exact_localization" in err


def test_io_error_exit_2(capsys, tmp_path):
    code, _, err = run(capsys, "end-to-end", "--n", "2", "--m", "5", "-o", str(tmp_path / "missing" / "x.json"))
    assert code == 2 and "cannot write" in err


def test_threads_env_fallback(capsys, monkeypatch):
    monkeypatch.setenv("RQC_SIM_THREADS", "2")
    code, out, _ = run(capsys, "walk", "--target-n", "5", "--trials", "100")
    assert code == 0 and json.loads(out)["summary"]["trials"] == 100
