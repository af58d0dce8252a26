import io
import json
import os
import subprocess
import sys

import pytest

from permccs.cli import Config, main
from permccs.corpus import DATA_DIR, encode_array
from permccs.corpus import build_quicksort
from permccs.systems import show_system


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), stream=out)
    return code, out.getvalue()


def test_run_program_with_context():
    code, out = run("run", "prg.proc", "--with", "c1!(2) | c2!(5)")
    assert code == 0 and out.strip() == "c1!(2, 4) | c4!()"


def test_run_nil():
    code, out = run("run", "nil.proc")
    assert code == 0 and out.strip() == "0"


def test_run_race_is_nondeterministic():
    code, out = run("run", "race.proc", "--json")
    assert code == 10
    assert len(json.loads(out)["results"]) >= 2


def test_run_parse_error(tmp_path):
    bad = tmp_path / "bad.proc"
    bad.write_text("c!(1) |")
    assert run("run", str(bad))[0] == 2


def test_run_budget(monkeypatch):
    monkeypatch.setenv("PERMCCS_BUDGET", "4")
    assert run("run", "race.proc")[0] == 3
    assert run("run", "race.proc", "--budget", "100000")[0] == 10


def test_run_trace_lists_steps():
    code, out = run("run", "prg_main.proc", "--trace")
    assert code == 0 and "-- trace to c1!(2, 4) | c4!()" in out


def test_certify_narrative():
    code, out = run("certify", "narrative_program_signals.sys")
    assert code == 0
    assert "result: c1!(2, 4) | c4!()" in out and "cTgh" in out


def test_certify_json_has_permission_snapshots():
    code, out = run("certify", "narrative_program_signals.sys", "--json")
    doc = json.loads(out)
    assert code == 0 and doc["status"] == "certified"
    assert all({"rule", "path", "system", "perms"} <= set(st) for st in doc["trace"])


def test_certify_violation():
    code, out = run("certify", "violation.sys")
    assert code == 4 and "violation: <>{ c!(1) }" in out


def test_certify_quicksort(tmp_path):
    from permccs.corpus import quicksort_source
    f = tmp_path / "q.sys"
    f.write_text(quicksort_source(4) + "\n" + show_system(encode_array([2, 4, 1, 3]),
                                                           build_quicksort(4)))
    code, out = run("certify", str(f))
    assert code == 0 and "result: a1!(1) | a2!(2) | a3!(3) | a4!(4) | r!()" in out


def test_certify_shipped_quicksort():
    assert run("certify", "qsort4.sys")[0] == 0


def test_satisfy_sat():
    code, out = run("satisfy", "sat_split_inputs.sys", "sat_split_inputs.frm", "sat_split_inputs.env")
    assert code == 0 and out.startswith("Sat")


def test_satisfy_unsat():
    code, out = run("satisfy", "unsat_signal_lacks_obligation.sys", "unsat_signal_lacks_obligation.frm", "unsat_signal_lacks_obligation.env")
    assert code == 1 and out.startswith("Unsat") and "env obligation" in out


def test_satisfy_emp_on_unit():
    assert run("satisfy", "nil.sys", "emp.frm", "empty.env") == (0, "Sat\nwitness: <>{ 0 }\n")


def test_prove_example():
    code, out = run("prove", "prg_small_input.proof")
    assert code == 0 and out.startswith("accepted")


def test_prove_mutated_reports_path(tmp_path):
    text = open(os.path.join(DATA_DIR, "prg_small_input.proof")).read()
    bad = tmp_path / "bad.proof"
    bad.write_text(text.replace('(include "prg.proc")', f'(include "{DATA_DIR}/prg.proc")')
                   .replace(':post "c3 |-> x" :sys "<c1!, c3!>', ':post "c3 |-> 7" :sys "<c1!, c3!>'))
    code, out = run("prove", str(bad), "--json")
    doc = json.loads(out)
    assert code == 11 and not doc["accepted"]
    assert doc["errors"] and all(e["path"].startswith("root.") for e in doc["errors"])


def test_prove_inert_script():
    assert run("prove", "lnil.proof")[0] == 0


def test_prove_semantic_flag():
    code, out = run("prove", "lnil.proof", "--semantic")
    assert code == 0 and "semantic check: valid" in out


@pytest.mark.parametrize("suite", ["locality", "merging"])
def test_oracle_suites_pass(suite):
    code, out = run("oracle", suite, "--count", "100")
    assert code == 0 and f"{suite}: pass" in out


def test_oracle_confluence_seed_7():
    code, out = run("oracle", "confluence", "--seed", "7")
    assert code == 0, out


def test_json_byte_identical_across_processes():
    cmd = [sys.executable, "-m", "permccs.cli", "oracle", "violation", "--seed", "5",
           "--count", "40", "--json"]
    a = subprocess.run(cmd, capture_output=True, check=False).stdout
    b = subprocess.run(cmd, capture_output=True, check=False).stdout
    assert a == b and json.loads(a)["suites"][0]["seed"] == 5


def test_flags_before_subcommand():
    code, out = run("--json", "run", "nil.proc")
    assert code == 0 and json.loads(out)["results"] == ["0"]


def test_config_rejects_nonpositive_bounds():
    with pytest.raises(ValueError):
        Config(budget=0)
    assert run("run", "nil.proc", "--split-cap", "0")[0] == 2


def test_missing_file():
    assert run("run", "no-such-file.proc")[0] == 2
