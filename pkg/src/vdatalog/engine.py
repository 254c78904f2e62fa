"""Bottom-up evaluation of positive Datalog, plain and lifted.

:func:`infer` computes the least model of a rule set over plain facts.
:func:`lifted_infer` does the same over facts annotated with presence
conditions: a rule firing on premises with PCs ``p1..pn`` proposes its head
with ``p1 & ... & pn``; unsatisfiable proposals are dropped, proposals for
an already stored fact widen its PC by disjunction, and evaluation stops
once a round neither adds a fact nor changes a PC.

Both evaluators are semi-naive by default.  For the lifted one a fact whose
PC grew counts as changed, so rules depending on it fire again with the
wider condition.  PCs never take part in indexing or matching; they are
combined only when a rule instance has been found.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, asdict
from typing import Any, Iterable, Mapping, Optional

from .datalog import Const, Fact, LiftedFact, Rule
from .pc import UnassignedFeature

log = logging.getLogger(__name__)


@dataclass
class EvalOptions:
    sat: bool = True  # False is the noSAT mode: no satisfiability filtering at all
    fm: Any = None  # feature-model PC in the store's algebra, or None
    fm_store: bool = False  # store pc & fm instead of only checking it
    naive: bool = False
    break_merge: bool = False  # test hook: ignore re-derivations of stored facts
    max_rounds: Optional[int] = None


@dataclass
class EvalStats:
    rounds: int = 0
    rule_applications: int = 0
    facts_inferred: int = 0
    pc_merges: int = 0
    facts_final: int = 0
    sat_checks: int = 0
    sat_failures: int = 0
    inputs_dropped: int = 0
    wall_time: float = 0.0
    db_bytes: int = 0

    def as_dict(self):
        return asdict(self)


class Relation:
    """Rows of one predicate with lazily built hash indexes.

    ``rows`` maps a tuple of constants to its PC (``True`` for plain
    evaluation).  An index is keyed by the tuple of bound column positions.
    """

    __slots__ = ("rows", "_indexes")

    def __init__(self):
        self.rows: dict[tuple, Any] = {}
        self._indexes: dict[tuple, dict] = {}

    def __len__(self):
        return len(self.rows)

    def lookup(self, cols: tuple, key: tuple):
        if not cols:
            return self.rows
        index = self._indexes.get(cols)
        if index is None:
            index = {}
            for row in self.rows:
                index.setdefault(tuple(row[c] for c in cols), []).append(row)
            self._indexes[cols] = index
        return index.get(key, ())

    def add(self, row: tuple, pc) -> None:
        """Insert a row that is not yet present."""
        self.rows[row] = pc
        for cols, index in self._indexes.items():
            index.setdefault(tuple(row[c] for c in cols), []).append(row)


class LiftedEDB:
    """Fact -> PC store in which every ground fact occurs at most once."""

    def __init__(self, pcs, facts: Iterable = ()):
        self.pcs = pcs
        self.relations: dict[str, Relation] = {}
        for fact, pc in facts:
            self.add(fact, pc)

    def relation(self, pred: str) -> Relation:
        rel = self.relations.get(pred)
        if rel is None:
            rel = self.relations[pred] = Relation()
        return rel

    def add(self, fact: Fact, pc) -> None:
        """Insert ``fact`` or widen its stored PC with ``pc``."""
        rel = self.relation(fact.pred)
        old = rel.rows.get(fact.args)
        if old is None:
            rel.add(fact.args, pc)
        else:
            rel.rows[fact.args] = self.pcs.disj(old, pc)

    def get(self, fact: Fact, default=None):
        rel = self.relations.get(fact.pred)
        if rel is None:
            return default
        return rel.rows.get(fact.args, default)

    def __contains__(self, fact):
        return self.get(fact) is not None

    def __len__(self):
        return sum(len(r) for r in self.relations.values())

    def __iter__(self):
        for pred, rel in self.relations.items():
            for row, pc in rel.rows.items():
                yield LiftedFact(Fact(pred, row), pc)

    def items(self, pred: str | None = None):
        if pred is None:
            return list(self)
        rel = self.relations.get(pred)
        if rel is None:
            return []
        return [LiftedFact(Fact(pred, row), pc) for row, pc in rel.rows.items()]

    def as_dict(self) -> dict:
        return {f: pc for f, pc in self}

    def counts(self) -> dict:
        return {p: len(r) for p, r in sorted(self.relations.items()) if len(r)}

    def copy(self) -> "LiftedEDB":
        return LiftedEDB(self.pcs, iter(self))

    def discard(self, fact: Fact) -> None:
        rel = self.relations.get(fact.pred)
        if rel is not None and fact.args in rel.rows:
            # Rebuild: indexes do not support deletion.
            rows = dict(rel.rows)
            del rows[fact.args]
            fresh = Relation()
            for row, pc in rows.items():
                fresh.add(row, pc)
            self.relations[fact.pred] = fresh

    def set_pc(self, fact: Fact, pc) -> None:
        rel = self.relation(fact.pred)
        if fact.args in rel.rows:
            rel.rows[fact.args] = pc
        else:
            rel.add(fact.args, pc)


# -- join planning ----------------------------------------------------------

class _Step:
    __slots__ = ("pred", "cols", "key", "binds", "checks")

    def __init__(self, pred, cols, key, binds, checks):
        self.pred = pred
        self.cols = cols  # bound column positions
        self.key = key  # per bound column: (slot, None) or (None, constant)
        self.binds = binds  # (column, slot) for first occurrences of variables
        self.checks = checks  # (column, slot) for repeats within this atom


class _Plan:
    __slots__ = ("steps", "head", "nslots", "body_index")

    def __init__(self, rule: Rule, order: list[int]):
        slots: dict[str, int] = {}
        steps = []
        for i in order:
            atom = rule.body[i]
            cols, key, binds, checks = [], [], [], []
            fresh = {}
            for c, t in enumerate(atom.args):
                if isinstance(t, Const):
                    cols.append(c)
                    key.append((None, t.value))
                elif t.name in slots:
                    cols.append(c)
                    key.append((slots[t.name], None))
                elif t.name in fresh:
                    checks.append((c, fresh[t.name]))
                else:
                    s = len(slots) + len(fresh)
                    fresh[t.name] = s
                    binds.append((c, s))
            slots.update(fresh)
            steps.append(_Step(atom.pred, tuple(cols), tuple(key), tuple(binds), tuple(checks)))
        self.steps = steps
        self.head = (rule.head.pred, tuple(
            (None, t.value) if isinstance(t, Const) else (slots[t.name], None)
            for t in rule.head.args
        ))
        self.nslots = len(slots)
        self.body_index = order


def _solutions(plan: _Plan, sources: list, conj=None, alive=None, stats=None, true=None):
    """Yield ``(head_row, pc)`` for every body match.

    ``sources[k]`` is the relation matched by step ``k``.  With ``conj`` set,
    PCs of the matched rows are conjoined and a partial match is abandoned
    as soon as ``alive`` rejects its PC.
    """
    steps = plan.steps
    n = len(steps)
    env = [None] * plan.nslots
    head_key = plan.head[1]

    def rec(k, pc):
        if k == n:
            yield tuple(env[s] if s is not None else c for s, c in head_key), pc
            return
        st = steps[k]
        rel = sources[k]
        key = tuple(env[s] if s is not None else c for s, c in st.key)
        rows = rel.lookup(st.cols, key)
        binds, checks = st.binds, st.checks
        for row in rows:
            for c, s in binds:
                env[s] = row[c]
            if checks and any(row[c] != env[s] for c, s in checks):
                continue
            if conj is None:
                yield from rec(k + 1, pc)
                continue
            pc2 = conj(pc, rel.rows[row])
            if alive is not None:
                stats.sat_checks += 1
                if not alive(pc2):
                    stats.sat_failures += 1
                    continue
            yield from rec(k + 1, pc2)

    return rec(0, true)


class _Planner:
    def __init__(self, rules: list[Rule]):
        self.rules = list(rules)
        self._cache: dict[tuple[int, int], _Plan] = {}

    def full(self, r: int) -> _Plan:
        return self._get(r, -1)

    def delta(self, r: int, i: int) -> _Plan:
        return self._get(r, i)

    def _get(self, r, i):
        plan = self._cache.get((r, i))
        if plan is None:
            n = len(self.rules[r].body)
            order = list(range(n)) if i < 0 else [i] + [j for j in range(n) if j != i]
            plan = self._cache[(r, i)] = _Plan(self.rules[r], order)
        return plan


_EMPTY = Relation()


# -- plain evaluation -------------------------------------------------------

def infer(rules: Iterable[Rule], edb: Iterable[Fact], naive: bool = False) -> set[Fact]:
    """Least fixpoint of ``rules`` over the plain facts ``edb``."""
    planner = _Planner(rules)
    store: dict[str, Relation] = {}
    delta: dict[str, Relation] = {}
    for fact in edb:
        rel = store.setdefault(fact.pred, Relation())
        if fact.args not in rel.rows:
            rel.add(fact.args, True)
            delta.setdefault(fact.pred, Relation()).add(fact.args, True)

    first = True
    while True:
        new: dict[str, dict] = {}
        for r, rule in enumerate(planner.rules):
            if first or naive:
                plans = [planner.full(r)]
            else:
                plans = [planner.delta(r, i) for i, a in enumerate(rule.body) if a.pred in delta]
            for plan in plans:
                sources = [
                    (delta if (k == 0 and not (first or naive)) else store).get(st.pred, _EMPTY)
                    for k, st in enumerate(plan.steps)
                ]
                pred = plan.head[0]
                rel = store.get(pred)
                bucket = new.setdefault(pred, {})
                for row, _ in _solutions(plan, sources):
                    if rel is None or row not in rel.rows:
                        bucket[row] = True
        first = False
        delta = {}
        for pred, rows in new.items():
            if not rows:
                continue
            rel = store.setdefault(pred, Relation())
            d = delta.setdefault(pred, Relation())
            for row in rows:
                if row not in rel.rows:
                    rel.add(row, True)
                    d.add(row, True)
        if not delta:
            break
    return {Fact(pred, row) for pred, rel in store.items() for row in rel.rows}


# -- lifted evaluation ------------------------------------------------------

class _Modes:
    """Satisfiability policy derived from :class:`EvalOptions`."""

    def __init__(self, pcs, opts: EvalOptions):
        self.pcs = pcs
        fm = opts.fm
        if fm is not None and fm == pcs.true:
            fm = None
        self.fm = fm
        if not opts.sat:
            self.alive = None
        elif fm is None:
            false = pcs.false
            self.alive = lambda pc: pc != false
        else:
            conj, false = pcs.conj, pcs.false
            self.alive = lambda pc: conj(pc, fm) != false
        self.store_fm = opts.fm_store and fm is not None

    def stored(self, pc):
        return self.pcs.conj(pc, self.fm) if self.store_fm else pc


def lifted_infer(rules: Iterable[Rule], edb: LiftedEDB, opts: EvalOptions | None = None):
    """Lifted least fixpoint; returns ``(result, stats)`` and leaves ``edb`` untouched."""
    opts = opts or EvalOptions()
    pcs = edb.pcs
    modes = _Modes(pcs, opts)
    stats = EvalStats()
    started = time.perf_counter()

    planner = _Planner(rules)
    result = LiftedEDB(pcs)
    delta: dict[str, Relation] = {}
    for fact, pc in edb:
        if modes.alive is not None:
            stats.sat_checks += 1
            if not modes.alive(pc):
                stats.sat_failures += 1
                stats.inputs_dropped += 1
                log.warning("dropping %s: its presence condition is unsatisfiable", fact)
                continue
        result.add(fact, modes.stored(pc))
    for pred, rel in result.relations.items():
        d = delta[pred] = Relation()
        for row, pc in rel.rows.items():
            d.add(row, pc)
    store = result.relations

    conj, disj = pcs.conj, pcs.disj
    first = True
    while True:
        if opts.max_rounds is not None and stats.rounds >= opts.max_rounds:
            raise RuntimeError(f"no fixpoint after {stats.rounds} rounds")
        stats.rounds += 1
        proposals: dict[str, dict] = {}
        for r, rule in enumerate(planner.rules):
            if first or opts.naive:
                plans = [planner.full(r)]
            else:
                plans = [planner.delta(r, i) for i, a in enumerate(rule.body) if a.pred in delta]
            for plan in plans:
                use_delta = not (first or opts.naive)
                sources = [
                    (delta if (k == 0 and use_delta) else store).get(st.pred, _EMPTY)
                    for k, st in enumerate(plan.steps)
                ]
                bucket = proposals.setdefault(plan.head[0], {})
                for row, pc in _solutions(plan, sources, conj, modes.alive, stats, pcs.true):
                    stats.rule_applications += 1
                    prev = bucket.get(row)
                    if prev is None:
                        bucket[row] = pc
                    elif not opts.break_merge:
                        bucket[row] = disj(prev, pc)
        first = False

        delta = {}
        for pred, rows in proposals.items():
            rel = result.relation(pred)
            d = None
            for row, pc in rows.items():
                pc = modes.stored(pc)
                old = rel.rows.get(row)
                if old is None:
                    rel.add(row, pc)
                    stats.facts_inferred += 1
                elif opts.break_merge:
                    continue
                else:
                    merged = disj(old, pc)
                    if merged == old:
                        continue
                    rel.rows[row] = merged
                    stats.pc_merges += 1
                    pc = merged
                if d is None:
                    d = delta[pred] = Relation()
                d.add(row, rel.rows[row])
        if not delta:
            break

    stats.wall_time = time.perf_counter() - started
    stats.facts_final = len(result)
    return result, stats


def restrict(edb, rho: Mapping[str, bool], features: Iterable[str] | None = None) -> set[Fact]:
    """Facts of a lifted store whose PC holds under the configuration ``rho``."""
    if isinstance(edb, LiftedEDB):
        pcs = edb.pcs
        items = edb
    else:
        pcs, items = edb
    for name in features if features is not None else pcs.features:
        if name not in rho:
            raise UnassignedFeature(name)
    return {fact for fact, pc in items if pcs.evaluate(pc, rho)}


def audit_fixpoint(rules: Iterable[Rule], edb: LiftedEDB, opts: EvalOptions | None = None) -> bool:
    """True when one more naive round would neither add a fact nor widen a PC."""
    opts = opts or EvalOptions()
    pcs = edb.pcs
    modes = _Modes(pcs, opts)
    planner = _Planner(rules)
    store = edb.relations
    scratch = EvalStats()
    for r in range(len(planner.rules)):
        plan = planner.full(r)
        sources = [store.get(st.pred, _EMPTY) for st in plan.steps]
        rel = store.get(plan.head[0])
        for row, pc in _solutions(plan, sources, pcs.conj, modes.alive, scratch, pcs.true):
            pc = modes.stored(pc)
            old = None if rel is None else rel.rows.get(row)
            if old is None or pcs.disj(old, pc) != old:
                return False
    return True
