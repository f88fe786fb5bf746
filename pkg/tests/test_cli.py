import json
import subprocess
import sys
from fractions import Fraction

import pytest

from kpcalc import cli, suites
from kpcalc.suites import Check


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def symbols(tmp_path):
    def write(name, terms):
        path = tmp_path / name
        path.write_text(json.dumps({"terms": [{"x": m, "p": n, "c": c} for m, n, c in terms]}))
        return str(path)

    return {"x": write("x.json", [(1, 0, "1")]), "p": write("p.json", [(0, 1, "1")]),
            "bad": write("bad.json", [(1, 0, 0.5)]), "write": write}


def test_verify_suite_passes(capsys):
    code, out, _ = run(capsys, "verify", "hirota")
    assert code == 0
    assert out.splitlines()[0].startswith("verify suite=hirota q=3/2 kappa=1/2 depth=6")
    assert out.strip().endswith("6/6 checks passed")


def test_verify_is_deterministic(capsys):
    first = run(capsys, "verify", "jacobi", "--seed", "3", "--output", "json")
    second = run(capsys, "verify", "jacobi", "--seed", "3", "--output", "json")
    assert first == second
    data = json.loads(first[1])
    assert data["passed"] and data["config"]["seed"] == 3
    assert {c["suite"] for c in data["checks"]} == {"jacobi"}


def test_verify_failure_exit_code(capsys, monkeypatch):
    def failing(name, cfg):
        return [Check(name, "forced", False, "forced failure", "test")]

    monkeypatch.setattr(cli, "run_suite", failing)
    code, out, _ = run(capsys, "verify", "qexp")
    assert code == 1 and "FAIL  qexp/forced" in out


@pytest.mark.parametrize("argv", [
    ["verify", "nosuch"],
    ["verify", "qexp", "--depth", "11"],
    ["verify", "qexp", "--q", "1"],
    ["verify", "qexp", "--q", "0.5"],
    ["verify", "qexp", "--lambda-order", "7"],
    ["flow", "kp", "4"],
    ["flow", "kp", "two"],
    ["flow", "sato", "1"],
    [],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err


def test_environment_and_flag_precedence(capsys, monkeypatch):
    monkeypatch.setenv("KPCALC_Q", "2")
    monkeypatch.setenv("KPCALC_DEPTH", "5")
    _, out, _ = run(capsys, "verify", "qexp")
    assert "q=2 " in out and "depth=5" in out
    _, out, _ = run(capsys, "verify", "qexp", "--q", "5/3")
    assert "q=5/3 " in out and "depth=5" in out
    monkeypatch.setenv("KPCALC_DEPTH", "zero")
    code, _, _ = run(capsys, "verify", "qexp")
    assert code == 2


def test_flow_kp(capsys):
    code, out, _ = run(capsys, "flow", "kp", "2", "--depth", "5")
    assert code == 0
    assert out.splitlines() == [
        "KP flow 2: L = xi + sum u[i] xi^(1-i), kappa = 1, depth 5",
        "d_t2 u[2] = u[2,2] + 2*u[3,1]",
        "d_t2 u[3] = u[3,2] + 2*u[4,1] + 2*u[2,0]*u[2,1]",
    ]


@pytest.mark.parametrize("kind", ["moyal", "dkp", "qkp"])
def test_flow_kinds(capsys, kind):
    code, out, _ = run(capsys, "flow", kind, "2", "--depth", "5", "--output", "json")
    data = json.loads(out)
    assert code == 0 and data["kind"] == kind and data["lines"]


def test_flow_qkp_from_file(capsys, tmp_path):
    from kpcalc import psdo, qpsdo
    from kpcalc.coeffring import XLaurent
    L = qpsdo.q_lax({1: XLaurent.parse("x")}, Fraction(2), depth=4)
    path = tmp_path / "lax.json"
    path.write_text(json.dumps(psdo.series_to_json(L)))
    code, out, _ = run(capsys, "flow", "qkp", "1", "--lax", str(path))
    assert code == 0 and "q = 2" in out.splitlines()[0]
    wrong = tmp_path / "classical.json"
    wrong.write_text(json.dumps(psdo.series_to_json(psdo.lax_kp(4))))
    assert run(capsys, "flow", "qkp", "1", "--lax", str(wrong))[0] == 2


def test_star_outputs(capsys, symbols):
    code, out, _ = run(capsys, "star", "qplane", symbols["p"], symbols["x"])
    assert code == 0
    assert json.loads(out) == {"terms": [{"x": 1, "p": 1, "c": "2/3"}]}
    code, out, _ = run(capsys, "star", "circ", symbols["p"], symbols["x"], "--output", "text")
    assert out.strip() == "x*p + 1/2"
    code, out, _ = run(capsys, "star", "qweyl", symbols["x"], symbols["p"], "--q", "4", "--output", "text")
    assert out.strip() == "1/2*x*p"


def test_star_errors(capsys, symbols, tmp_path):
    assert run(capsys, "star", "qweyl", symbols["x"], symbols["p"])[0] == 2
    assert run(capsys, "star", "moyal", symbols["bad"], symbols["p"])[0] == 2
    assert run(capsys, "star", "moyal", str(tmp_path / "missing.json"), symbols["p"])[0] == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    code, _, err = run(capsys, "star", "moyal", str(broken), symbols["p"])
    assert code == 2 and "line 1" in err


def test_star_json_round_trip(capsys, symbols, tmp_path):
    f = symbols["write"]("f.json", [(2, 1, "3/4"), (0, -1, "-2")])
    _, out, _ = run(capsys, "star", "moyal", f, symbols["x"])
    result = tmp_path / "result.json"
    result.write_text(out)
    code, again, _ = run(capsys, "star", "qplane", str(result), symbols["write"]("one.json", [(0, 0, "1")]))
    assert code == 0 and json.loads(again) == json.loads(out)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kpcalc", "verify", "qexp"], capture_output=True, text=True)
    assert proc.returncode == 0 and "checks passed" in proc.stdout


def test_suite_errors_become_failed_checks(monkeypatch):
    def boom(cfg, mk):
        raise RuntimeError("boom")

    monkeypatch.setitem(suites.SUITE_FUNCS, "qexp", boom)
    checks = suites.run_suite("qexp", suites.RunConfig())
    assert len(checks) == 1 and not checks[0].passed and "boom" in checks[0].detail
