import pytest
from hypothesis import given, strategies as st

from _support import random_pair_case
from txnet.analysis import (
    EMPTY, KeyApprox, analyze_function, bernstein_disjoint, conflict_pairs, exact,
    rw_report, strongly_swappable, swap_relation, top_contract, tx_rw_sets,
)
from txnet.equivalence import check_safe_read_approx, check_safe_write_approx, oracle_swappable
from txnet.files import build_genesis
from txnet.semantics import Transaction
from txnet.state import Address, balance_key, qkey

SRC = """
contract cA {
  fun set(p) { m[p] := 1 }
  fun dyn() { m[x] := 1 }
  fun pay(to) { send(1, to) }
  fun payk() { send(1, k) }
  fun who() { seen[sender] := value }
}
"""


@pytest.fixture(scope="module")
def g():
    return build_genesis({"A": 2, "B": 0, "cA": 3}, [("cA", SRC)])


def tx(g, f, *args, value=0, sender="A"):
    return Transaction(g.address(sender), g.address("cA"), f, value, args)


def test_key_approx_algebra():
    A, C = Address("A"), Address("C", "contract")
    x = qkey(C, "x")
    assert x in top_contract(C) and x not in exact([qkey(C, "y")])
    assert balance_key(A) in KeyApprox(all_balances=True)
    assert qkey(C, "balance", 1) not in KeyApprox(all_balances=True)
    assert exact([x]) <= top_contract(C)
    assert not top_contract(C) <= exact([x])
    assert KeyApprox(all_balances=True).intersects(top_contract(C))
    assert not EMPTY.intersects(top_contract(C))
    assert str(exact([x]) | top_contract(C)) == "{C.x, C.*}"


def test_static_indices_instantiate(g):
    cA, B = g.address("cA"), g.address("B")
    rw = tx_rw_sets(tx(g, "set", B), g.contracts)
    assert rw.writes == exact([qkey(cA, "m", B)]) and rw.reads == EMPTY


def test_dynamic_index_widens_to_store(g):
    cA = g.address("cA")
    rw = tx_rw_sets(tx(g, "dyn"), g.contracts)
    assert rw.writes.contracts == {cA}
    assert qkey(cA, "x") in rw.reads


def test_send_keys(g):
    cA, B = g.address("cA"), g.address("B")
    rw = tx_rw_sets(tx(g, "pay", B), g.contracts)
    assert rw.writes == exact([balance_key(cA), balance_key(B)])
    assert balance_key(cA) in rw.reads
    assert tx_rw_sets(tx(g, "payk"), g.contracts).writes.all_balances
    # a non-address recipient makes the send fail; only the sender's side remains
    assert tx_rw_sets(tx(g, "pay", 3), g.contracts).writes == exact([balance_key(cA)])


def test_value_and_sender(g):
    A, cA = g.address("A"), g.address("cA")
    rw = tx_rw_sets(tx(g, "who", value=1), g.contracts)
    assert qkey(cA, "seen", A) in rw.writes
    assert {balance_key(A), balance_key(cA)} <= rw.writes.exact
    assert balance_key(A) in rw.reads


def test_unknown_function_is_top(g):
    cA = g.address("cA")
    for t in [tx(g, "nope"), tx(g, "set")]:
        rw = tx_rw_sets(t, g.contracts)
        assert rw.reads == rw.writes == top_contract(cA)


def test_templates_are_cached(g):
    c = g.contracts[g.address("cA")]
    assert analyze_function(c, "set") is analyze_function(c, "set")


def test_swap_relation(g):
    B = g.address("B")
    b = [tx(g, "set", 1), tx(g, "set", 2), tx(g, "set", 1), tx(g, "dyn"), tx(g, "pay", B)]
    rel = swap_relation(b, g.contracts)
    assert (1, 2) in rel and (1, 3) not in rel
    # the widened store of cA includes cA.balance, which pay writes
    assert not any(4 in p for p in rel)
    assert {(1, 5), (2, 5), (3, 5)} <= rel
    assert strongly_swappable(b[0], b[1], g.contracts)
    with pytest.raises(ValueError):
        strongly_swappable(b[0], b[0], g.contracts)


def test_identical_transactions_unrelated(g):
    t = tx(g, "set", 1)
    assert swap_relation([t, tx(g, "set", 2), t], g.contracts) == {(1, 2), (2, 3)}


def test_rw_report_shape(g):
    rep = rw_report([tx(g, "set", 1), tx(g, "dyn")], g.contracts)
    assert rep["relation"] == []
    assert rep["transactions"][1]["writes"]["whole_stores"] == ["cA"]


@given(st.integers(0, 100_000))
def test_inverted_index_agrees_with_pairwise(seed):
    import random

    from txnet.workloads import random_deployment, random_transaction
    rng = random.Random(seed)
    gg = random_deployment(rng)
    b = [random_transaction(rng, gg) for _ in range(6)]
    rw = [tx_rw_sets(t, gg.contracts) for t in b]
    brute = {(i + 1, j + 1) for i in range(6) for j in range(i + 1, 6)
             if not bernstein_disjoint(rw[i], rw[j])}
    assert conflict_pairs(rw) == brute


@given(st.integers(0, 100_000))
def test_rw_sets_are_safe(seed):
    g, t, _, universe = random_pair_case(seed)
    rw = tx_rw_sets(t, g.contracts)
    assert check_safe_write_approx(rw.writes, t, universe, g.contracts)
    assert check_safe_read_approx(rw.reads, t, universe, g.contracts)


@given(st.integers(0, 100_000))
def test_strong_implies_swappable(seed):
    g, t, u, universe = random_pair_case(seed)
    if strongly_swappable(t, u, g.contracts):
        assert oracle_swappable(t, u, universe, g.contracts)
