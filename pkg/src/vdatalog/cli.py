"""Command-line driver: ``vdatalog run | verify | bench``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import bench
from .engine import EvalOptions, EvalStats, LiftedEDB, infer, lifted_infer
from .frontend import (FileAccessError, LoadError, load_facts_dir, read_feature_model,
                       read_program, write_fact_file)
from .oracle import GeneratorSpec, TooManyFeatures, verify_commutation
from .pc import BDD, TextPCs

EXIT_OK = 0
EXIT_LOAD = 1
EXIT_IO = 2
EXIT_MISMATCH = 3

log = logging.getLogger("vdatalog")


def _mode_options(args, pcs, fm_text):
    fm = None
    if args.fm is not None:
        fm = pcs.parse(fm_text)
    return EvalOptions(
        sat=not args.no_sat,
        fm=fm,
        fm_store=getattr(args, "fm_store", False),
        naive=args.naive,
        break_merge=getattr(args, "break_merge", False),
    )


def _load(args):
    """Program, inputs and options shared by ``run`` and ``verify``."""
    timings = {}
    started = time.perf_counter()
    pcs = TextPCs() if args.no_sat else BDD()
    program = read_program(args.program, pcs)
    fm_text = read_feature_model(args.fm)
    timings["parse"] = time.perf_counter() - started

    started = time.perf_counter()
    facts = list(program.inline_facts)
    facts.extend(load_facts_dir(program, args.facts, pcs))
    opts = _mode_options(args, pcs, fm_text)
    if args.no_sat and args.fm is not None:
        log.warning("--no-sat disables feature-model pruning; --fm only selects valid configurations")
    timings["load"] = time.perf_counter() - started
    return pcs, program, facts, fm_text, opts, timings


def _write_stats(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def cmd_run(args) -> int:
    pcs, program, facts, fm_text, opts, timings = _load(args)

    started = time.perf_counter()
    if not pcs.features and args.fm is None:
        # A single product: plain evaluation.
        plain = infer(program.rules, (f for f, _ in facts), naive=opts.naive)
        result = LiftedEDB(pcs, ((f, pcs.true) for f in sorted(plain)))
        stats = EvalStats(rounds=0, facts_final=len(result),
                          facts_inferred=len(plain) - len({f for f, _ in facts}))
        stats.wall_time = time.perf_counter() - started
        engine = "plain"
    else:
        result, stats = lifted_infer(program.rules, LiftedEDB(pcs, facts), opts)
        engine = "lifted"
    timings["infer"] = time.perf_counter() - started

    started = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for pred in program.output_predicates():
        written[pred] = write_fact_file(result.items(pred), out / f"{pred}.facts", pcs)
    timings["write"] = time.perf_counter() - started
    stats.db_bytes = sum(written.values())

    counts = {pred: len(result.items(pred)) for pred in program.declarations}
    if args.stats:
        _write_stats(args.stats, {
            "command": "run",
            "program": str(args.program),
            "engine": engine,
            "mode": {
                "sat": opts.sat,
                "feature_model": fm_text if args.fm is not None else None,
                "fm_store": opts.fm_store,
                "naive": opts.naive,
            },
            "features": list(pcs.features),
            "phases": timings,
            "eval": stats.as_dict(),
            "fact_counts": counts,
            "output_bytes": written,
        })
    print(f"{stats.facts_final} facts ({stats.facts_inferred} inferred) in {stats.rounds} rounds; "
          f"wrote {len(written)} relation(s) to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    pcs, program, facts, fm_text, opts, timings = _load(args)
    report = verify_commutation(program.rules, facts, pcs, fm_text, opts)
    print(report.summary())
    if args.stats:
        doc = {"command": "verify", "program": str(args.program), "phases": timings}
        doc.update(report.as_dict())
        _write_stats(args.stats, doc)
    if report.mismatches:
        first = report.mismatches[0]
        config = ", ".join(f"{k}={'on' if v else 'off'}" for k, v in first.configuration.items())
        print(f"first divergent configuration: {config}")
        for fact in first.only_lifted:
            print(f"  only in lifted result:  {fact}")
        for fact in first.only_product:
            print(f"  only in product result: {fact}")
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_bench(args) -> int:
    def progress(row):
        print(bench.format_row(row), flush=True)

    if args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise FileAccessError(f"cannot read {args.spec}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise LoadError(f"bad spec file {args.spec}: {exc}") from exc
        specs = raw if isinstance(raw, list) else [raw]
        try:
            specs = [GeneratorSpec(**s) for s in specs]
        except (TypeError, ValueError) as exc:
            raise LoadError(f"bad generator spec: {exc}") from exc
        rows = bench.run_generated(specs, progress)
        suite = str(args.spec)
    else:
        if args.suite != "default":
            raise LoadError(f"unknown suite {args.suite!r}")
        top = args.max_features
        rows = bench.run_default_suite(range(2, top + 1), progress)
        suite = "default"
    if args.out:
        _write_stats(args.out, {"command": "bench", "suite": suite,
                                "rows": [r.as_dict() for r in rows]})
    if any(r.mismatches for r in rows):
        return EXIT_MISMATCH
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vdatalog", description="Variability-aware Datalog evaluation over presence-conditioned facts.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("program", help="Datalog program (.dl)")
        p.add_argument("--facts", metavar="DIR", help="directory holding <Pred>.facts input files")
        p.add_argument("--fm", metavar="F", help="feature model: a formula or a file with one formula")
        p.add_argument("--no-sat", action="store_true", help="keep PCs textual; no satisfiability checks")
        p.add_argument("--naive", action="store_true", help="naive instead of semi-naive evaluation")
        p.add_argument("--stats", metavar="PATH", help="write a JSON statistics document")

    run = sub.add_parser("run", help="evaluate a program over annotated facts")
    common(run)
    run.add_argument("--out", metavar="DIR", required=True, help="output directory")
    run.add_argument("--fm-store", action="store_true",
                     help="store PCs conjoined with the feature model")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="check the lifted result against every product")
    common(verify)
    verify.add_argument("--break-merge", action="store_true", help=argparse.SUPPRESS)
    verify.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="lifted vs. brute-force timing")
    b.add_argument("--suite", default="default", help="built-in suite name (default: %(default)s)")
    b.add_argument("--spec", metavar="FILE", help="JSON generator spec (object or list)")
    b.add_argument("--max-features", type=int, default=12, help="largest instance of the default suite")
    b.add_argument("--out", metavar="PATH", help="write rows as JSON")
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="warning: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileAccessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (LoadError, TooManyFeatures) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
