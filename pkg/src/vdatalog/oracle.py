"""Brute-force cross-check of lifted evaluation against every product.

:func:`verify_commutation` runs lifted inference once and then, for each
valid configuration, projects the *input* facts onto that configuration,
runs plain inference on the projection and compares the outcome with the
projection of the lifted result.  The per-product side never touches the
PC algebra beyond evaluating input PCs under a configuration.

:func:`generate_spl_source` produces random positive programs with
annotated facts for property tests and benchmarks.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field, asdict

from .datalog import Fact
from .engine import EvalOptions, EvalStats, LiftedEDB, infer, lifted_infer
from .frontend import Program, fact_lines, parse_program
from .pc import BDD, eval_formula, format_formula, formula_features, parse_formula

MAX_ENUMERATED_FEATURES = 20


class TooManyFeatures(ValueError):
    pass


def enumerate_configs(features, fm="True", limit: int = MAX_ENUMERATED_FEATURES) -> list[dict]:
    """All assignments to ``features`` satisfying ``fm``, in lexicographic order.

    ``fm`` is formula text (or an already parsed tree) and is evaluated
    directly, without BDDs.  Features mentioned by ``fm`` but missing from
    ``features`` are an error.
    """
    features = list(features)
    if len(features) > limit:
        raise TooManyFeatures(
            f"{len(features)} features exceed the enumeration limit of {limit}")
    tree = parse_formula(fm) if isinstance(fm, str) else fm
    configs = []
    for values in itertools.product((False, True), repeat=len(features)):
        rho = dict(zip(features, values))
        if eval_formula(tree, rho):
            configs.append(rho)
    return configs


def db_bytes(facts, pcs=None) -> int:
    """Size of the TSV serialization of ``facts``, one file per predicate."""
    by_pred: dict[str, list] = {}
    for item in facts:
        if isinstance(item, Fact):
            item = (item, None)
        by_pred.setdefault(item[0].pred, []).append(item)
    return sum(len("".join(fact_lines(items, pcs)).encode("utf-8")) for items in by_pred.values())


@dataclass
class Mismatch:
    configuration: dict
    only_lifted: list
    only_product: list


@dataclass
class VerificationReport:
    configurations_checked: int = 0
    mismatches: list = field(default_factory=list)
    features: list = field(default_factory=list)
    lifted_stats: EvalStats = field(default_factory=EvalStats)
    lifted_time: float = 0.0
    lifted_bytes: int = 0
    product_time: float = 0.0
    product_bytes: int = 0
    product_facts: int = 0

    @property
    def verified(self) -> bool:
        return not self.mismatches

    @property
    def speedup(self) -> float:
        return self.product_time / self.lifted_time if self.lifted_time > 0 else float("inf")

    @property
    def space_savings(self) -> float:
        return self.product_bytes / self.lifted_bytes if self.lifted_bytes else float("inf")

    def summary(self) -> str:
        return f"{self.configurations_checked} configurations, {len(self.mismatches)} mismatches"

    def as_dict(self) -> dict:
        return {
            "configurations_checked": self.configurations_checked,
            "mismatch_count": len(self.mismatches),
            "verified": self.verified,
            "features": list(self.features),
            "lifted": self.lifted_stats.as_dict(),
            "lifted_time": self.lifted_time,
            "lifted_bytes": self.lifted_bytes,
            "product_time_total": self.product_time,
            "product_bytes_total": self.product_bytes,
            "product_facts_total": self.product_facts,
            "speedup": self.speedup,
            "space_savings": self.space_savings,
            "mismatches": [
                {
                    "configuration": m.configuration,
                    "only_lifted": [str(f) for f in m.only_lifted],
                    "only_product": [str(f) for f in m.only_product],
                }
                for m in self.mismatches
            ],
        }


def verify_commutation(rules, facts, pcs, fm="True", opts: EvalOptions | None = None,
                       limit: int = MAX_ENUMERATED_FEATURES) -> VerificationReport:
    """Compare the lifted result with plain inference on every valid product.

    ``facts`` are the input :class:`LiftedFact` values in the algebra
    ``pcs``; ``fm`` is the feature-model formula text.  Only configurations
    satisfying ``fm`` are checked.
    """
    opts = opts or EvalOptions()
    rules = list(rules)
    facts = list(facts)
    fm_tree = parse_formula(fm)
    for name in formula_features(fm_tree):
        pcs.declare(name)
    features = list(pcs.features)
    configs = enumerate_configs(features, fm_tree, limit)

    report = VerificationReport(features=features)
    edb = LiftedEDB(pcs, facts)
    result, stats = lifted_infer(rules, edb, opts)
    report.lifted_stats = stats
    report.lifted_time = stats.wall_time
    report.lifted_bytes = db_bytes(result, pcs)
    stats.db_bytes = report.lifted_bytes

    # Facts grouped by PC so each distinct PC is evaluated once per product.
    input_groups = _group_by_pc(facts)
    result_groups = _group_by_pc(result)
    for rho in configs:
        product_input = _holding(pcs, input_groups, rho)
        started = time.perf_counter()
        product = infer(rules, product_input)
        report.product_time += time.perf_counter() - started
        report.product_bytes += db_bytes(product)
        report.product_facts += len(product)
        lifted = _holding(pcs, result_groups, rho)
        if lifted != product:
            report.mismatches.append(Mismatch(
                dict(rho), sorted(lifted - product), sorted(product - lifted)))
        report.configurations_checked += 1
    return report


def _group_by_pc(facts):
    groups: dict = {}
    for fact, pc in facts:
        groups.setdefault(pc, []).append(fact)
    return groups


def _holding(pcs, groups, rho):
    out = set()
    for pc, members in groups.items():
        if pcs.evaluate(pc, rho):
            out.update(members)
    return out


# -- random programs --------------------------------------------------------

@dataclass
class GeneratorSpec:
    num_features: int = 4
    num_predicates: int = 3
    num_rules: int = 4
    num_facts: int = 30
    constant_pool_size: int = 5
    max_body_atoms: int = 3
    max_arity: int = 2
    pc_density: float = 0.6
    fm_density: float = 0.5  # chance of a non-trivial feature model
    seed: int = 0

    def __post_init__(self):
        for name in ("num_predicates", "num_rules", "num_facts", "constant_pool_size",
                     "max_body_atoms", "max_arity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.num_features < 0:
            raise ValueError("num_features must not be negative")
        for name in ("pc_density", "fm_density"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def as_dict(self):
        return asdict(self)


def _random_formula(rng, features, depth):
    if depth <= 0 or rng.random() < 0.35:
        f = ("var", rng.choice(features))
        return ("not", f) if rng.random() < 0.4 else f
    op = rng.random()
    if op < 0.2:
        return ("not", _random_formula(rng, features, depth - 1))
    tag = "and" if op < 0.6 else "or"
    return (tag, _random_formula(rng, features, depth - 1), _random_formula(rng, features, depth - 1))


def _satisfiable(tree, features):
    return any(
        eval_formula(tree, dict(zip(features, values)))
        for values in itertools.product((False, True), repeat=len(features))
    )


def generate_spl_source(spec: GeneratorSpec) -> tuple[str, str]:
    """Random program text with annotated inline facts, plus a feature model.

    The same spec (seed included) always yields the same text.
    """
    rng = random.Random(spec.seed)
    features = [f"F{i}" for i in range(spec.num_features)]
    preds = [(f"p{i}", rng.randint(1, spec.max_arity)) for i in range(spec.num_predicates)]
    consts = [f"c{i}" for i in range(spec.constant_pool_size)]
    var_pool = ["x", "y", "z", "w"]

    lines = [f".decl {name}({', '.join(f'a{j}: symbol' for j in range(arity))})"
             for name, arity in preds]

    for _ in range(spec.num_rules):
        head_name, head_arity = rng.choice(preds)
        body = []
        body_vars = []
        for _ in range(rng.randint(1, spec.max_body_atoms)):
            name, arity = rng.choice(preds)
            args = []
            for _ in range(arity):
                if rng.random() < 0.85:
                    v = rng.choice(var_pool)
                    args.append(v)
                    if v not in body_vars:
                        body_vars.append(v)
                else:
                    args.append(f'"{rng.choice(consts)}"')
            body.append(f"{name}({', '.join(args)})")
        head_args = []
        for _ in range(head_arity):
            if body_vars and rng.random() < 0.9:
                head_args.append(rng.choice(body_vars))
            else:
                head_args.append(f'"{rng.choice(consts)}"')
        lines.append(f"{head_name}({', '.join(head_args)}) :- {', '.join(body)}.")

    for _ in range(spec.num_facts):
        name, arity = rng.choice(preds)
        args = ", ".join(f'"{rng.choice(consts)}"' for _ in range(arity))
        fact = f"{name}({args})"
        if features and rng.random() < spec.pc_density:
            fact += " @ " + format_formula(_random_formula(rng, features, 3))
        lines.append(fact + ".")

    fm = "True"
    if features and rng.random() < spec.fm_density:
        while True:
            tree = _random_formula(rng, features, 3)
            if _satisfiable(tree, features):
                fm = format_formula(tree)
                break
    return "\n".join(lines) + "\n", fm


def generate_spl_program(spec: GeneratorSpec, pcs=None) -> tuple[Program, str]:
    """Parsed form of :func:`generate_spl_source`; PCs live in ``pcs``."""
    source, fm = generate_spl_source(spec)
    if pcs is None:
        pcs = BDD()
    return parse_program(source, pcs), fm


def random_spec(rng: random.Random, max_features=6, max_predicates=5, max_rules=6,
                max_facts=50) -> GeneratorSpec:
    """A random generator spec within the given bounds."""
    return GeneratorSpec(
        num_features=rng.randint(0, max_features),
        num_predicates=rng.randint(1, max_predicates),
        num_rules=rng.randint(1, max_rules),
        num_facts=rng.randint(1, max_facts),
        constant_pool_size=rng.randint(2, 6),
        max_body_atoms=rng.randint(1, 3),
        max_arity=rng.randint(1, 3),
        pc_density=rng.random(),
        fm_density=0.5,
        seed=rng.randrange(2**31),
    )
