"""Lifted vs. brute-force benchmarks on synthetic product lines.

The default family is a reachability analysis over a graph whose backbone
is present in every product, with each feature ``Fk`` guarding a detour
(taken when ``Fk`` is on) and an alternative detour (taken when it is
off).  Instance ``n`` has ``2**n`` products.
"""

from __future__ import annotations

import gc
import time
from contextlib import contextmanager
from dataclasses import dataclass, asdict

from .datalog import Fact, LiftedFact
from .engine import EvalOptions, LiftedEDB, infer, lifted_infer
from .frontend import parse_program
from .oracle import GeneratorSpec, enumerate_configs, generate_spl_program, verify_commutation
from .pc import BDD

DEFAULT_FEATURES = range(2, 13)

REACHABILITY = """\
.decl edge(src: symbol, dst: symbol)
.decl path(src: symbol, dst: symbol)
.input edge
.output path
path(x, y) :- edge(x, y).
path(x, z) :- edge(x, y), path(y, z).
"""


def reachability_instance(n: int, backbone: int = 40):
    """Rules, lifted facts and PC store for the ``n``-feature family member."""
    pcs = BDD([f"F{k}" for k in range(n)])
    program = parse_program(REACHABILITY, pcs)
    facts = []
    for i in range(backbone):
        facts.append(LiftedFact(Fact.of("edge", f"n{i}", f"n{i + 1}"), pcs.true))
    stride = max(1, backbone // max(n, 1))
    for k in range(n):
        here = (k * stride) % backbone
        on, off = pcs.var(f"F{k}"), pcs.neg(pcs.var(f"F{k}"))
        facts.append(LiftedFact(Fact.of("edge", f"n{here}", f"a{k}"), on))
        facts.append(LiftedFact(Fact.of("edge", f"a{k}", f"n{min(here + 2, backbone)}"), pcs.true))
        facts.append(LiftedFact(Fact.of("edge", f"n{here}", f"b{k}"), off))
        facts.append(LiftedFact(Fact.of("edge", f"b{k}", f"t{k}"), pcs.true))
    return program.rules, facts, pcs


@dataclass
class BenchRow:
    name: str
    features: int
    configurations: int
    lifted_time: float
    product_time: float
    speedup: float
    lifted_bytes: int
    product_bytes: int
    space_savings: float
    lifted_facts: int
    product_facts: int
    mismatches: int

    def as_dict(self):
        return asdict(self)


@contextmanager
def _quiet_gc():
    enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def _repeats(configurations: int) -> int:
    # Small instances are timed several times to keep the ratio stable.
    if configurations <= 16:
        return 7
    if configurations <= 128:
        return 3
    return 1


LIFTED_REPEATS = 5


def measure(name, rules, facts, pcs, fm="True", opts=None) -> BenchRow:
    """Verify one instance and time lifted vs. summed per-product inference.

    Times are minima over repeated runs; the brute-force time is the sum of
    the per-product inference times.
    """
    opts = opts or EvalOptions()
    report = verify_commutation(rules, facts, pcs, fm, opts)
    lifted_time = report.lifted_time
    product_time = report.product_time
    with _quiet_gc():
        for _ in range(LIFTED_REPEATS - 1):
            _, stats = lifted_infer(rules, LiftedEDB(pcs, facts), opts)
            lifted_time = min(lifted_time, stats.wall_time)
        repeats = _repeats(report.configurations_checked)
        if repeats > 1:
            configs = enumerate_configs(report.features, fm)
            products = [{f for f, pc in facts if pcs.evaluate(pc, rho)} for rho in configs]
            for _ in range(repeats - 1):
                total = 0.0
                for product in products:
                    started = time.perf_counter()
                    infer(rules, product)
                    total += time.perf_counter() - started
                product_time = min(product_time, total)
    return BenchRow(
        name=name,
        features=len(report.features),
        configurations=report.configurations_checked,
        lifted_time=lifted_time,
        product_time=product_time,
        speedup=product_time / lifted_time if lifted_time > 0 else float("inf"),
        lifted_bytes=report.lifted_bytes,
        product_bytes=report.product_bytes,
        space_savings=report.space_savings,
        lifted_facts=report.lifted_stats.facts_final,
        product_facts=report.product_facts,
        mismatches=len(report.mismatches),
    )


def run_default_suite(features=DEFAULT_FEATURES, progress=None) -> list[BenchRow]:
    rows = []
    for n in features:
        rules, facts, pcs = reachability_instance(n)
        with _quiet_gc():
            row = measure(f"reachability-{n}", rules, facts, pcs)
        rows.append(row)
        if progress:
            progress(row)
    return rows


def run_generated(specs, progress=None) -> list[BenchRow]:
    rows = []
    for spec in specs:
        if not isinstance(spec, GeneratorSpec):
            spec = GeneratorSpec(**spec)
        pcs = BDD()
        program, fm = generate_spl_program(spec, pcs)
        with _quiet_gc():
            row = measure(f"generated-{spec.seed}", program.rules, program.inline_facts, pcs, fm)
        rows.append(row)
        if progress:
            progress(row)
    return rows


def format_row(row: BenchRow) -> str:
    return (f"{row.name:<20} n={row.features:<3} configs={row.configurations:<6} "
            f"lifted={row.lifted_time * 1000:9.2f}ms brute={row.product_time * 1000:11.2f}ms "
            f"speedup={row.speedup:9.1f}x space={row.space_savings:8.1f}x "
            f"mismatches={row.mismatches}")
