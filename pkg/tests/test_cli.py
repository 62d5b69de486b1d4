import json
import subprocess
import sys

import pytest

from txnet.cli import EXIT_LOAD, EXIT_MISMATCH, EXIT_OK, main
from txnet.corpus import load_fixture
from txnet.files import txs_to_doc


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_fixture(capsys):
    code, out, _ = run(capsys, "run", "--fixture", "three-transactions")
    assert code == EXIT_OK and "cA.x = 1" in out and "B.balance = 1" in out


def test_run_json(capsys):
    code, out, _ = run(capsys, "run", "--fixture", "three-transactions", "--format", "json")
    doc = json.loads(out)
    assert doc["state"]["cA"]["x"] == 1 and len(doc["digest"]) == 64


def test_analyze(capsys):
    code, out, _ = run(capsys, "analyze", "--fixture", "erc721-block", "--format", "json")
    assert json.loads(out)["relation"] == [[1, 2], [2, 4], [3, 4]]


def test_net_outputs(capsys):
    _, dot, _ = run(capsys, "net", "--fixture", "petri-1")
    assert dot.startswith("digraph")
    _, js, _ = run(capsys, "net", "--fixture", "petri-1", "--format", "json")
    assert json.loads(js)["order_places"] == [[1, 3]]


def test_exec_par(capsys):
    code, out, _ = run(capsys, "exec-par", "--fixture", "erc721-block", "--workers", "2")
    assert code == EXIT_OK and "schedule {T1,T2} {T3,T4}" in out


def test_validate_and_digest(capsys):
    _, out, _ = run(capsys, "run", "--fixture", "erc721-block", "--format", "json")
    digest = json.loads(out)["digest"]
    assert run(capsys, "validate", "--fixture", "erc721-block", "--digest", digest)[0] == EXIT_OK
    assert run(capsys, "validate", "--fixture", "erc721-block", "--digest", "0" * 64)[0] == EXIT_MISMATCH


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", "--fixture", "three-transactions", "1", "2", "--format", "json")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["verdict"] == "not-swappable" and doc["universe"] == 9
    assert run(capsys, "oracle", "--fixture", "three-transactions", "1", "1")[0] == EXIT_MISMATCH
    assert run(capsys, "oracle", "--fixture", "three-transactions", "1", "9")[0] == EXIT_LOAD


def test_fixtures_listing(capsys):
    _, out, _ = run(capsys, "fixtures", "--format", "json")
    assert "petri-1" in {d["name"] for d in json.loads(out)}


def test_bench_small(capsys):
    code, out, _ = run(capsys, "bench", "--sizes", "0,20", "--workers", "1,2", "--repeat", "1", "--format", "json")
    rows = json.loads(out)
    assert code == EXIT_OK and len(rows) == 2 and all(r["digest_match"] for r in rows)


@pytest.fixture
def files(tmp_path):
    fx = load_fixture("three-transactions")
    for p in fx.path.iterdir():
        (tmp_path / p.name).write_text(p.read_text())
    swapped = [fx.tx(2), fx.tx(1), fx.tx(3)]
    (tmp_path / "swapped.json").write_text(json.dumps(txs_to_doc(swapped)))
    return tmp_path


def test_file_inputs_and_transposition(capsys, files):
    g, b, sw = str(files / "genesis.json"), str(files / "block.json"), str(files / "swapped.json")
    _, out, _ = run(capsys, "run", "--genesis", g, "--txs", b, "--format", "json")
    miner = json.loads(out)["digest"]
    assert run(capsys, "validate", "--genesis", g, "--txs", b, "--digest", miner)[0] == EXIT_OK
    assert run(capsys, "validate", "--genesis", g, "--txs", sw, "--digest", miner)[0] == EXIT_MISMATCH


def test_reorder_flag(capsys):
    code, out, _ = run(capsys, "exec-par", "--fixture", "erc721-block", "--reorder", "greedy-parallel",
                       "--format", "json")
    assert code == EXIT_OK and len(json.loads(out)["report"]["schedule"][0]) >= 2


@pytest.mark.parametrize("argv", [
    ["run"],
    ["run", "--fixture", "nope"],
    ["run", "--genesis", "/nonexistent.json"],
    ["exec-par", "--fixture", "petri-1", "--workers", "0"],
])
def test_load_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_LOAD and err.startswith("error:")


def test_bad_tx_file(capsys, files):
    (files / "bad.json").write_text(json.dumps([{"sender": "Z", "callee": "cA", "function": "f0"}]))
    code, _, err = run(capsys, "run", "--genesis", str(files / "genesis.json"), "--txs", str(files / "bad.json"))
    assert code == EXIT_LOAD and "bad.json[0]" in err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "txnet.cli", "fixtures"], capture_output=True, text=True)
    assert r.returncode == 0 and "erc721-block" in r.stdout
