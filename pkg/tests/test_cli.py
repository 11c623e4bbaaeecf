import json

import pytest

from dtprs.cli import main
from dtprs.examples import example_names

CHAIN = """system chain {
  alphabet: a, b, c;
  dtd { root: a, b, c; }
  bounds { depth: 1; simple-path: 4; }
  init { [a]; }
  rule a2b { locator: [a{ren=b}]; }
  rule b2c { locator: [b{ren=c}]; }
}"""

GROW = """system grow {
  alphabet: a, b;
  dtd { root: a; }
  bounds { depth: 2; simple-path: 4; }
  init { [a]; }
  rule r { locator: [a{append=F}]; forest F: [b]($X, $X); }
}"""


@pytest.fixture
def chain(tmp_path):
    path = tmp_path / "chain.dtprs"
    path.write_text(CHAIN, encoding="utf-8")
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def records(out):
    return [json.loads(line) for line in out.splitlines()]


def test_validate(capsys, chain):
    code, out, _ = run(capsys, "validate", "--spec", "playcom.dtprs")
    assert code == 0 and out.startswith("system playcom: positive-eligible")
    code, out, _ = run(capsys, "validate", "--spec", chain, "--format", "json-lines")
    (rec,) = records(out)
    assert code == 0 and rec["classification"] == "positive-eligible" and rec["path_bound"] == 4


def test_validate_generated_pcp_is_forward_only(capsys, tmp_path):
    code, out, _ = run(capsys, "gen", "pcp", "--pairs", "ab:a b:bb", "--out", str(tmp_path))
    assert code == 0 and (tmp_path / "pcp.dtprs").exists() and (tmp_path / "success.dtp").exists()
    code, out, _ = run(capsys, "validate", "--spec", str(tmp_path / "pcp.dtprs"))
    assert code == 1 and "forward-only" in out
    code, out, _ = run(capsys, "bmc", "--spec", str(tmp_path / "pcp.dtprs"),
                       "--pattern", str(tmp_path / "success.dtp"), "--bound", "3")
    assert code == 1 and out.startswith("REACHABLE")


def test_gen_pcp_to_stdout_and_examples(capsys, tmp_path):
    code, out, _ = run(capsys, "gen", "pcp", "--pairs", "ab:a,b:bb")
    assert code == 0 and "\nsystem pcp {" in out
    code, out, _ = run(capsys, "gen", "examples", "--out", str(tmp_path / "ex"))
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "ex").iterdir()) == sorted(example_names())
    assert run(capsys, "gen", "pcp")[0] == 3
    assert run(capsys, "gen", "pcp", "--pairs", "ab")[0] == 3


def test_bmc_exit_codes(capsys, chain):
    code, out, _ = run(capsys, "bmc", "--spec", chain, "--pattern", "[c]", "--bound", "2")
    assert code == 1 and out.splitlines()[0].startswith("REACHABLE")
    assert "--b2c-->" in out
    code, out, _ = run(capsys, "bmc", "--spec", chain, "--pattern", "[c]", "--bound", "1")
    assert code == 2 and out.startswith("INCONCLUSIVE")
    code, out, _ = run(capsys, "bmc", "--spec", chain, "--pattern", "[a]([b])")
    assert code == 0 and out.startswith("UNREACHABLE")


def test_bmc_json_lines(capsys, chain):
    code, out, _ = run(capsys, "bmc", "--spec", chain, "--pattern", "[c]", "--bound", "2",
                       "--format", "json-lines")
    recs = records(out)
    assert code == 1 and [r.get("step") for r in recs] == [0, 1, 2, None]
    assert recs[0] == {"step": 0, "tree": "[a]"}
    assert set(recs[1]) == {"step", "rule", "matching", "pattern", "valuation", "tree"}
    assert recs[-1]["verdict"] == "REACHABLE" and "loop_start" not in recs[-1]


def test_reach(capsys, chain):
    code, out, _ = run(capsys, "reach", "--spec", chain, "--pattern", "[c]")
    assert code == 1 and out.startswith("REACHABLE")
    code, out, _ = run(capsys, "reach", "--spec", chain, "--pattern", "[a]([b])")
    assert code == 0 and out.startswith("UNREACHABLE")
    code, out, _ = run(capsys, "reach", "--spec", chain, "--pattern", "[c]", "--init", "[b]")
    assert code == 1 and out.count("-->") == 1


def test_terminate(capsys):
    code, out, _ = run(capsys, "terminate", "--spec", "delete-only.dtprs")
    assert code == 0 and out.startswith("TERMINATES")
    code, out, _ = run(capsys, "terminate", "--spec", "looping.dtprs", "--format", "json-lines")
    recs = records(out)
    assert code == 1 and recs[-1]["verdict"] == "NONTERMINATING" and recs[-1]["loop_start"] == 0


def test_simulate_and_succ(capsys, chain):
    code, out, _ = run(capsys, "simulate", "--spec", chain, "--steps", "5")
    assert code == 0 and out.count("-->") == 2 and "no enabled rule" in out
    code, out, _ = run(capsys, "simulate", "--spec", "playcom.dtprs", "--steps", "3",
                       "--policy", "random", "--seed", "4", "--format", "json-lines")
    assert code == 0 and len(records(out)) == 4
    code, out, _ = run(capsys, "succ", "--spec", chain, "--tree", "[b]", "--format", "json-lines")
    (rec,) = records(out)
    assert code == 0 and rec["rule"] == "b2c" and rec["tree"] == "[c]"


def test_embed_and_decompose(capsys):
    code, out, _ = run(capsys, "embed", "--tree", "[a](@5)", "--tree", "[a]([b], @9)")
    assert code == 0 and out.strip() == "embeds: 0->0, 1->2"
    code, out, _ = run(capsys, "embed", "--tree", "[a](@1, @1)", "--tree", "[a](@1, @2)")
    assert code == 1 and out.strip() == "no embedding"
    assert run(capsys, "embed", "--tree", "[a]")[0] == 3
    code, out, _ = run(capsys, "decompose", "--tree", "fig3.dtree", "--format", "json-lines")
    (rec,) = records(out)
    assert code == 0 and rec["width"] <= rec["longest_simple_path"] <= rec["bound"]
    assert len(rec["bags"]) == rec["vertices"]


def test_error_exit_codes(capsys, tmp_path):
    assert run(capsys, "bmc", "--pattern", "[a]")[0] == 3
    assert run(capsys, "validate", "--spec", "missing.dtprs")[0] == 3
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 3
    capsys.readouterr()
    bad = tmp_path / "bad.dtprs"
    bad.write_text("system s { rule }", encoding="utf-8")
    code, _, err = run(capsys, "validate", "--spec", str(bad))
    assert code == 4 and err.startswith("parse error: 1:")
    grow = tmp_path / "grow.dtprs"
    grow.write_text(GROW, encoding="utf-8")
    code, _, err = run(capsys, "succ", "--spec", str(grow), "--tree", "[a]([b](@0, @0))")
    assert code == 5 and "bound violation" in err
    code, _, err = run(capsys, "terminate", "--spec", str(grow), "--tree", "[b]")
    assert code == 6
