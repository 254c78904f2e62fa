import itertools
import re
from importlib import resources
from pathlib import Path

import pytest

from vdatalog.datalog import Fact, match_atom, substitute
from vdatalog.frontend import load_facts_dir, parse_program
from vdatalog.pc import BDD

EXAMPLE_DIR = Path(resources.files("vdatalog") / "data" / "pointsto")
GOLDEN_DIR = Path(__file__).parent / "golden"

POINTSTO_RULES = (EXAMPLE_DIR / "program.dl").read_text()

# The annotated facts of the running example, inline form.
ANNOTATED_FACTS = """
New("o1", "A") @ True.
New("o2", "B") @ True.
Assign("o3", "o1") @ FA.
Assign("o3", "o2") @ !FA.
Store("o2", "f", "o1") @ FB.
Store("o2", "f", "o2") @ !FB.
Load("r", "o3", "f") @ True.
"""

# Facts of the single product with FA off and FB on.
PRODUCT_FACTS = [
    Fact.of("New", "o1", "A"),
    Fact.of("New", "o2", "B"),
    Fact.of("Assign", "o3", "o2"),
    Fact.of("Store", "o2", "f", "o1"),
    Fact.of("Load", "r", "o3", "f"),
]

PRODUCT_RESULT = {
    Fact.of("VarPointsTo", "o1", "A"),
    Fact.of("VarPointsTo", "o2", "B"),
    Fact.of("VarPointsTo", "o3", "B"),
    Fact.of("HeapPointsTo", "B", "f", "A"),
    Fact.of("VarPointsTo", "r", "A"),
}

PATH_RULES = """
.decl edge(a: symbol, b: symbol)
.decl path(a: symbol, b: symbol)
path(x, y) :- edge(x, y).
path(x, z) :- edge(x, y), path(y, z).
"""


@pytest.fixture
def pcs():
    return BDD(["FA", "FB"])


@pytest.fixture
def pointsto(pcs):
    """Rules plus annotated input facts of the running example."""
    program = parse_program(POINTSTO_RULES + ANNOTATED_FACTS, pcs)
    return program, list(program.inline_facts)


@pytest.fixture
def pointsto_from_files(pcs):
    program = parse_program(POINTSTO_RULES, pcs)
    return program, load_facts_dir(program, EXAMPLE_DIR / "facts", pcs)


# -- independent oracles ----------------------------------------------------

def brute_force_infer(rules, facts):
    """Naive forward chaining straight from match_atom; no indexes, no deltas."""
    known = set(facts)
    while True:
        new = set()
        for rule in rules:
            gammas = [{}]
            for premise in rule.body:
                gammas = [g2 for g in gammas for f in known
                          if (g2 := match_atom(premise, f, g)) is not None]
            for g in gammas:
                fact = substitute(g, rule.head).to_fact()
                if fact not in known:
                    new.add(fact)
        if not new:
            return known
        known |= new


def all_configs(features):
    return [dict(zip(features, bits)) for bits in itertools.product((False, True), repeat=len(features))]


def py_formula(text):
    """Translate formula syntax into a Python boolean expression."""
    text = text.replace("&&", " and ").replace("||", " or ")
    text = text.replace("&", " and ").replace("|", " or ").replace("!", " not ")
    return "(" + text.strip() + ")"


def truth_table(text, features):
    code = compile(py_formula(text), "<formula>", "eval")
    return tuple(bool(eval(code, {"True": True, "False": False}, dict(rho)))
                 for rho in all_configs(features))


def expected_lifted(rules, lifted_facts, features, evaluate):
    """Per-fact set of configurations under which plain inference derives it."""
    table = {}
    for rho in all_configs(features):
        product = {f for f, pc in lifted_facts if evaluate(pc, rho)}
        for fact in brute_force_infer(rules, product):
            table.setdefault(fact, set()).add(tuple(sorted(rho.items())))
    return table


def words(text):
    return re.findall(r"[A-Za-z_]\w*", text)
