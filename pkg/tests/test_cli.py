import io
import shutil
import subprocess
import sys

import pytest

from ahmc.cli import EXIT_FAILS, EXIT_HOLDS, EXIT_UNKNOWN, EXIT_USAGE, main

from conftest import requires_z3

TOY = """\
mdp
state s0
state s1 a
action s0 go : s0 1/2, s1 1/2
action s1 go : s1 1
"""

EXISTS1 = "exists sched sg . exists state s(sg) . exists stutter t(s) . "


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


@pytest.fixture
def toy(tmp_path):
    path = tmp_path / "toy.mdp"
    path.write_text(TOY)
    return str(path)


def test_validate_ok(toy):
    code, text = run("validate", "--model", toy)
    assert code == EXIT_HOLDS and text.startswith("ok: 2 states")


def test_validate_broken(tmp_path):
    bad = tmp_path / "bad.mdp"
    bad.write_text("mdp\nstate s0\naction s0 go : s0 0.9\n")
    code, text = run("validate", "--model", str(bad))
    assert code == EXIT_FAILS and "(s0, go)" in text


def test_unparsable_model(tmp_path):
    bad = tmp_path / "bad.mdp"
    bad.write_text("nonsense\n")
    assert run("validate", "--model", str(bad))[0] == EXIT_USAGE


def test_missing_file():
    assert run("validate", "--model", "/nonexistent/x.mdp")[0] == EXIT_USAGE


def test_argparse_errors_use_usage_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["check", "--model", "x"])
    assert exc.value.code == EXIT_USAGE


def test_bad_formula(toy):
    assert run("check", "--model", toy, "--formula", EXISTS1 + "a(", "-m", "1", "--oracle")[0] == EXIT_USAGE


def test_bad_memory(toy):
    assert run("check", "--model", toy, "--formula", EXISTS1 + "true", "-m", "0", "--oracle")[0] == EXIT_USAGE


def test_multiple_scheduler_quantifiers(toy):
    f = "exists sched a . exists sched b . exists state s(a) . exists stutter t(s) . true"
    assert run("check", "--model", toy, "--formula", f, "-m", "1")[0] == EXIT_USAGE


def test_oracle_check(toy):
    code, text = run("check", "--model", toy, "--formula", EXISTS1 + "P(F a(t)) = 1", "-m", "2",
                     "--oracle", "--stats")
    assert code == EXIT_HOLDS
    assert text.splitlines()[0] == "holds"
    assert "evaluations=" in text
    code, _ = run("check", "--model", toy, "--formula", EXISTS1 + "P(F a(t)) < 1", "-m", "2", "--oracle")
    assert code == EXIT_FAILS


def test_formula_file_with_comments(toy, tmp_path):
    ff = tmp_path / "f.txt"
    ff.write_text("# reachability\n" + EXISTS1 + "\nP(F a(t)) = 1  # always\n")
    assert run("check", "--model", toy, "--formula", str(ff), "-m", "1", "--oracle")[0] == EXIT_HOLDS


def test_fixture_command(tmp_path):
    code, text = run("fixture", "CE", "0", "1", "--out", str(tmp_path))
    assert code == EXIT_HOLDS and "7 states, 9 transitions" in text
    assert (tmp_path / "model.mdp").exists() and (tmp_path / "formula.txt").exists()
    assert run("fixture", "CE", "1", "--out", str(tmp_path))[0] == EXIT_USAGE
    assert run("fixture", "CE", "1", "1", "--out", str(tmp_path))[0] == EXIT_USAGE
    assert run("fixture", "ACDB", "3", "--out", str(tmp_path))[0] == EXIT_USAGE


@requires_z3
@pytest.mark.parametrize("body", ["P(F a(t)) = 1", "P(X a(t)) = 1/3", "P(X a(t)) > 0 & !(a(t))"])
def test_smt_and_oracle_exit_codes_agree(toy, body):
    smt = run("check", "--model", toy, "--formula", EXISTS1 + body, "-m", "2", "--timeout", "60")[0]
    oracle = run("check", "--model", toy, "--formula", EXISTS1 + body, "-m", "2", "--oracle")[0]
    assert smt == oracle


@requires_z3
def test_smt_check_stats_and_dump(toy, tmp_path):
    dump = tmp_path / "q.smt2"
    code, text = run("check", "--model", toy, "--formula", EXISTS1 + "P(F a(t)) = 1", "-m", "2", "--stats",
                     "--dump-smt", str(dump), "--no-opt")
    assert code == EXIT_HOLDS
    assert "witness scheduler:" in text
    keys = {line.split("=", 1)[0] for line in text.splitlines() if "=" in line and not line.startswith(" ")}
    assert {"variables", "assertions", "subformulas", "encode_time", "solve_time", "solver_verdict"} <= keys
    assert dump.read_text().startswith("(set-option")


@requires_z3
def test_timeout_exit_code(tmp_path):
    run("fixture", "TL", "1", "--out", str(tmp_path))
    code, text = run("check", "--model", str(tmp_path / "model.mdp"), "--formula", str(tmp_path / "formula.txt"),
                     "-m", "2", "--timeout", "1")
    assert code == EXIT_UNKNOWN and text.strip() == "timeout"


@requires_z3
def test_console_script_pipeline(tmp_path):
    """The installed entry point: write the CE fixture and check it."""
    exe = shutil.which("ahmc")
    cmd = [exe] if exe else [sys.executable, "-m", "ahmc.cli"]
    subprocess.run(cmd + ["fixture", "CE", "0", "1", "--out", str(tmp_path)], check=True, capture_output=True)
    proc = subprocess.run(cmd + ["check", "--model", str(tmp_path / "model.mdp"), "--formula",
                                 str(tmp_path / "formula.txt"), "--memory", "2", "--timeout", "600"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert proc.stdout.startswith("holds")
