import random
import time

import pytest
from hypothesis import given, settings, strategies as st

from vdatalog.datalog import Fact, LiftedFact
from vdatalog.engine import EvalOptions, LiftedEDB, audit_fixpoint, infer, lifted_infer, restrict
from vdatalog.frontend import parse_program
from vdatalog.oracle import GeneratorSpec, enumerate_configs, generate_spl_program
from vdatalog.pc import BDD, TextPCs, UnassignedFeature

from conftest import (PATH_RULES, POINTSTO_RULES, PRODUCT_FACTS, PRODUCT_RESULT,
                      all_configs, brute_force_infer, expected_lifted)

EXPECTED_DERIVED = {
    ("VarPointsTo", ("o1", "A")): "True",
    ("VarPointsTo", ("o2", "B")): "True",
    ("VarPointsTo", ("o3", "A")): "FA",
    ("VarPointsTo", ("o3", "B")): "!FA",
    ("HeapPointsTo", ("B", "f", "A")): "FB",
    ("HeapPointsTo", ("B", "f", "B")): "!FB",
    ("VarPointsTo", ("r", "A")): "!FA && FB",
    ("VarPointsTo", ("r", "B")): "!FA && !FB",
}


@pytest.fixture
def run(pointsto, pcs):
    program, facts = pointsto
    result, stats = lifted_infer(program.rules, LiftedEDB(pcs, facts))
    return program, facts, result, stats


# infer

def test_infer_product_example():
    program = parse_program(POINTSTO_RULES)
    out = infer(program.rules, PRODUCT_FACTS)
    assert out == set(PRODUCT_FACTS) | PRODUCT_RESULT
    assert out == brute_force_infer(program.rules, PRODUCT_FACTS)


def test_infer_empty_edb():
    assert infer(parse_program(POINTSTO_RULES).rules, []) == set()


def test_infer_transitive_closure():
    rules = parse_program(PATH_RULES).rules
    edges = [Fact.of("edge", a, b) for a, b in [("1", "2"), ("2", "3"), ("3", "4")]]
    paths = {f for f in infer(rules, edges) if f.pred == "path"}
    assert len(paths) == 6
    assert Fact.of("path", "1", "4") in paths


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abcde"), st.sampled_from("abcde")), max_size=12))
def test_infer_matches_brute_force(edges):
    rules = parse_program(PATH_RULES + '.decl loop(a: symbol)\nloop(x) :- path(x, x).\n'
                          'path(y, x) :- path(x, y), edge(y, "a").\n').rules
    facts = [Fact.of("edge", a, b) for a, b in edges]
    assert infer(rules, facts) == brute_force_infer(rules, facts)
    assert infer(rules, facts, naive=True) == infer(rules, facts)


# lifted_infer

def test_running_example_golden(run, pcs):
    program, facts, result, stats = run
    inputs = {f for f, _ in facts}
    derived = {f: pc for f, pc in result if f not in inputs}
    assert len(derived) == 8
    for (pred, args), text in EXPECTED_DERIVED.items():
        assert derived[Fact.of(pred, *args)] == pcs.parse(text)
    assert stats.facts_final == len(result) == 15


def test_running_example_matches_per_product_oracle(run, pcs):
    program, facts, result, _ = run
    table = expected_lifted(program.rules, facts, ["FA", "FB"], pcs.evaluate)
    assert set(table) == {f for f, _ in result}
    for fact, pc in result:
        holding = {tuple(sorted(rho.items())) for rho in all_configs(["FA", "FB"]) if pcs.evaluate(pc, rho)}
        assert holding == table[fact]


def test_running_example_is_fast(pointsto, pcs):
    program, facts = pointsto
    started = time.perf_counter()
    lifted_infer(program.rules, LiftedEDB(pcs, facts))
    assert time.perf_counter() - started < 1.0


def test_unsatisfiable_inputs_dropped(pcs, caplog):
    program = parse_program(PATH_RULES, pcs)
    facts = [LiftedFact(Fact.of("edge", "1", "2"), pcs.parse("FA && !FA"))]
    result, stats = lifted_infer(program.rules, LiftedEDB(pcs, facts))
    assert len(result) == 0
    assert stats.inputs_dropped == 1
    assert "unsatisfiable" in caplog.text


def test_lifted_path_example(pcs):
    program = parse_program(PATH_RULES, pcs)
    facts = [LiftedFact(Fact.of("edge", "1", "2"), pcs.var("FA")),
             LiftedFact(Fact.of("edge", "2", "3"), pcs.var("FB"))]
    result, _ = lifted_infer(program.rules, LiftedEDB(pcs, facts))
    assert result.get(Fact.of("path", "1", "3")) == pcs.parse("FA && FB")
    assert result.get(Fact.of("path", "1", "2")) == pcs.var("FA")
    assert result.get(Fact.of("path", "2", "3")) == pcs.var("FB")
    assert len(result.items("path")) == 3


def test_case_three_merge(pcs):
    program = parse_program(".decl a(x: symbol)\n.decl b(x: symbol)\n.decl p(x: symbol)\n"
                            "p(x) :- a(x).\np(x) :- b(x).\n"
                            'a("1") @ FA.\nb("1") @ !FA && FB.\n', pcs)
    result, stats = lifted_infer(program.rules, LiftedEDB(pcs, program.inline_facts))
    assert result.get(Fact.of("p", "1")) == pcs.parse("FA || FB")


def test_sat_pruning_counts(pcs):
    program = parse_program(".decl a(x: symbol)\n.decl b(x: symbol)\n.decl p(x: symbol)\n"
                            "p(x) :- a(x), b(x).\n"
                            'a("1") @ FA.\nb("1") @ !FA.\n', pcs)
    result, stats = lifted_infer(program.rules, LiftedEDB(pcs, program.inline_facts))
    assert Fact.of("p", "1") not in result
    assert stats.sat_failures >= 1


# restrict

def test_restrict_product_golden(run):
    _, facts, result, _ = run
    rho = {"FA": False, "FB": True}
    assert {f for f in restrict(result, rho) if f.pred in ("VarPointsTo", "HeapPointsTo")} == PRODUCT_RESULT
    assert restrict(LiftedEDB(result.pcs, facts), rho) == set(PRODUCT_FACTS)


def test_restrict_both_features_on(run):
    result = run[2]
    out = restrict(result, {"FA": True, "FB": True})
    assert Fact.of("VarPointsTo", "o3", "A") in out
    assert Fact.of("VarPointsTo", "o3", "B") not in out


def test_restrict_all_true(pcs):
    facts = [LiftedFact(Fact.of("p", c), pcs.true) for c in "xyz"]
    assert restrict(LiftedEDB(pcs, facts), {"FA": True, "FB": False}) == {f for f, _ in facts}


def test_restrict_needs_total_configuration(run):
    with pytest.raises(UnassignedFeature):
        restrict(run[2], {"FA": True})


# audit_fixpoint

def test_audit_accepts_result(run):
    program, _, result, _ = run
    assert audit_fixpoint(program.rules, result)


def test_audit_rejects_deleted_fact(run):
    program, _, result, _ = run
    broken = result.copy()
    broken.discard(Fact.of("VarPointsTo", "r", "A"))
    assert not audit_fixpoint(program.rules, broken)


def test_audit_rejects_narrowed_pc(run, pcs):
    program, _, result, _ = run
    broken = result.copy()
    broken.set_pc(Fact.of("VarPointsTo", "o3", "A"), pcs.parse("FA && FB"))
    assert not audit_fixpoint(program.rules, broken)


def test_audit_is_closure_only(run, pcs):
    program, _, result, _ = run
    widened = result.copy()
    widened.set_pc(Fact.of("VarPointsTo", "o3", "A"), pcs.true)
    assert audit_fixpoint(program.rules, widened)


# properties over generated programs

def _spec(seed, **kw):
    rng = random.Random(seed)
    base = dict(num_features=rng.randint(0, 4), num_predicates=rng.randint(1, 4),
                num_rules=rng.randint(1, 5), num_facts=rng.randint(1, 25), seed=seed)
    base.update(kw)
    return GeneratorSpec(**base)


def _generated(seed, pcs=None, **kw):
    pcs = pcs if pcs is not None else BDD()
    program, fm = generate_spl_program(_spec(seed, **kw), pcs)
    return pcs, program, fm


@pytest.mark.parametrize("seed", range(40))
def test_generated_matches_independent_oracle(seed):
    pcs, program, _ = _generated(seed)
    result, _ = lifted_infer(program.rules, LiftedEDB(pcs, program.inline_facts))
    table = expected_lifted(program.rules, program.inline_facts, pcs.features, pcs.evaluate)
    configs = all_configs(pcs.features)
    for fact, pc in result:
        holding = {tuple(sorted(r.items())) for r in configs if pcs.evaluate(pc, r)}
        assert holding == table.get(fact, set())
    missing = set(table) - {f for f, _ in result}
    assert not missing


@pytest.mark.parametrize("seed", range(40))
def test_generated_invariants(seed):
    pcs, program, _ = _generated(seed)
    edb = LiftedEDB(pcs, program.inline_facts)
    before = sorted(edb)
    result, stats = lifted_infer(program.rules, edb)
    assert sorted(edb) == before  # input untouched
    # monotonicity of inputs
    for fact, pc in edb:
        if pc != pcs.false:
            assert pcs.implies(pc, result.get(fact))
    # uniqueness and SAT soundness
    facts = [f for f, _ in result]
    assert len(facts) == len(set(facts)) == stats.facts_final
    assert all(pc != pcs.false for _, pc in result)
    assert audit_fixpoint(program.rules, result)
    # termination ceiling: each round adds a fact or a satisfying configuration to some PC
    assert stats.rounds <= len(result) * (2 ** len(pcs.features) + 1) + 1


@pytest.mark.parametrize("seed", range(25))
def test_generated_determinism(seed):

    def once():
        pcs = BDD()
        p, _ = generate_spl_program(_spec(seed), pcs)
        result, _ = lifted_infer(p.rules, LiftedEDB(pcs, p.inline_facts))
        return [(str(f), pcs.to_text(pc)) for f, pc in result]
    assert once() == once()


@pytest.mark.parametrize("seed", range(30))
def test_naive_and_semi_naive_agree(seed):
    pcs, program, _ = _generated(seed)
    edb = LiftedEDB(pcs, program.inline_facts)
    semi, s1 = lifted_infer(program.rules, edb)
    naive, s2 = lifted_infer(program.rules, edb, EvalOptions(naive=True))
    assert semi.as_dict() == naive.as_dict()


@pytest.mark.parametrize("seed", range(30))
def test_modes_agree_on_valid_configurations(seed):
    pcs, program, fm = _generated(seed, fm_density=1.0)
    edb = LiftedEDB(pcs, program.inline_facts)
    sat, _ = lifted_infer(program.rules, edb)
    with_fm, _ = lifted_infer(program.rules, edb, EvalOptions(fm=pcs.parse(fm)))
    stored, _ = lifted_infer(program.rules, edb, EvalOptions(fm=pcs.parse(fm), fm_store=True))
    text = TextPCs()
    tprog, _ = generate_spl_program(_spec(seed, fm_density=1.0), text)
    nosat, _ = lifted_infer(tprog.rules, LiftedEDB(text, tprog.inline_facts), EvalOptions(sat=False))
    features = list(pcs.features)
    for rho in enumerate_configs(features, fm):
        expected = restrict(sat, rho)
        assert restrict(with_fm, rho) == expected
        assert restrict(stored, rho) == expected
        assert restrict(nosat, rho, features) == expected
    fm_pc = pcs.parse(fm)
    assert all(pcs.conj(pc, fm_pc) != pcs.false for _, pc in with_fm)
    assert len(with_fm) <= len(sat)


def test_zero_features_is_plain_inference():
    pcs, program, _ = _generated(3, num_features=0)
    result, _ = lifted_infer(program.rules, LiftedEDB(pcs, program.inline_facts))
    assert all(pc == pcs.true for _, pc in result)
    assert {f for f, _ in result} == infer(program.rules, [f for f, _ in program.inline_facts])


def test_max_rounds_guard(pcs):
    program = parse_program(PATH_RULES, pcs)
    facts = [LiftedFact(Fact.of("edge", str(i), str(i + 1)), pcs.true) for i in range(10)]
    with pytest.raises(RuntimeError):
        lifted_infer(program.rules, LiftedEDB(pcs, facts), EvalOptions(max_rounds=2))
