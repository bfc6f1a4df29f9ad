"""Command-line operator surface.

Exit status: 0 on success, 1 on a domain error, 2 on a usage error.
``--output structured`` prints one canonical JSON record per line.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .bench import run_bench
from .chrono import ManualClock, SystemClock
from .dreamcycle import run_cycle
from .engine import Substrate
from .errors import StrataError
from .hooks import LayerLabel
from .knowledge import Provenance, SourceKind
from .memory import EventTrigger, TimeTrigger
from .router import FlatStore, LabelSource, RoutedQuery, route
from .storage import canonical_json

ENV_SUBSTRATE = "STRATA_SUBSTRATE"


class _Out:
    def __init__(self, mode: str, stream=None):
        self.mode = mode
        self.stream = stream or sys.stdout

    def record(self, rec: dict, human: str | None = None) -> None:
        if self.mode == "structured":
            print(canonical_json(rec), file=self.stream)
        else:
            print(human if human is not None else _human(rec), file=self.stream)

    def table(self, rows: list[dict], columns: list[str]) -> None:
        if self.mode == "structured":
            for r in rows:
                print(canonical_json(r), file=self.stream)
            return
        if not rows:
            print("(none)", file=self.stream)
            return
        cells = [[_cell(r.get(c)) for c in columns] for r in rows]
        widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
        print("  ".join(c.ljust(w) for c, w in zip(columns, widths)), file=self.stream)
        for row in cells:
            print("  ".join(v.ljust(w) for v, w in zip(row, widths)), file=self.stream)


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return "" if v is None else str(v)


def _human(rec: dict) -> str:
    return "\n".join(f"{k}: {_cell(v) if not isinstance(v, (dict, list)) else canonical_json(v)}" for k, v in rec.items())


def _clock(args):
    return ManualClock(args.clock) if args.clock is not None else SystemClock()


def _open(args) -> Substrate:
    return Substrate.open(args.substrate, clock=_clock(args))


def cmd_init(args, out):
    path = Substrate.init(args.substrate)
    out.record({"initialized": str(path)}, f"initialized substrate at {path}")


def cmd_ingest(args, out):
    with _open(args) as sub:
        asserted = args.asserted_at if args.asserted_at is not None else sub.clock.now()
        prov = Provenance(args.source, SourceKind(args.source_kind), asserted, args.author, args.note)
        cid = sub.knowledge.ingest_claim(args.statement, prov, args.entity or (), args.valid_from, args.confidence)
        out.record(sub.knowledge.get_claim(cid).to_dict(), cid)


def cmd_supersede(args, out):
    with _open(args) as sub:
        link = sub.knowledge.supersede(args.old_id, args.new_id, args.reason)
        out.record(link.to_dict(), f"{link.old_id} superseded by {link.new_id}")


def cmd_observe(args, out):
    with _open(args) as sub:
        if args.create_context and args.context not in sub.memory.contexts:
            sub.memory.create_context(args.context)
        mid = sub.memory.observe(args.content, args.context, args.valid_from, session_id=args.session)
        out.record(sub.memory.get(mid).to_dict(), mid)


def cmd_reinforce(args, out):
    with _open(args) as sub:
        r = sub.memory.reinforce(args.memory_id)
        fact = sub.memory.get(args.memory_id)
        out.record({"id": fact.id, "retrievability": r, "reinforcement_count": fact.reinforcement_count,
                    "half_life": fact.effective_half_life})


def cmd_propose(args, out):
    with _open(args) as sub:
        prov = Provenance(args.source, SourceKind(args.source_kind), sub.clock.now())
        wid = sub.wisdom.propose(args.directive, args.episode, args.session, prov, context_id=args.context)
        out.record(sub.wisdom.get(wid).to_dict(), wid)


def cmd_schedule(args, out):
    with _open(args) as sub:
        if (args.due_at is None) == (args.tag is None):
            raise StrataError("give exactly one of --due-at or --tag")
        trigger = TimeTrigger(args.due_at) if args.due_at is not None else EventTrigger(args.tag)
        iid = sub.memory.schedule_intention(args.description, trigger, args.context)
        out.record(sub.memory.intentions[iid].to_dict(), iid)


def cmd_due(args, out):
    with _open(args) as sub:
        now = args.now if args.now is not None else sub.clock.now()
        rows = [i.to_dict() for i in sub.memory.list_due(now)]
        if out.mode == "structured":
            out.table(rows, [])
        else:
            out.table([{**r, "due_at": r["trigger"]["time_based"]} for r in rows], ["id", "due_at", "description", "context_id"])
            nxt = sub.memory.next_due_time()
            print(f"next due: {nxt if nxt is not None else '-'}", file=out.stream)


def cmd_query(args, out):
    with _open(args) as sub:
        if args.layer == "flat":
            answers = FlatStore.from_substrate(sub).flat_query(args.text, args.k)
        else:
            label = None if args.layer == "auto" else LayerLabel(args.layer)
            as_of = None
            if args.as_of_system is not None or args.as_of_valid is not None:
                now = sub.clock.now()
                as_of = (args.as_of_system if args.as_of_system is not None else now,
                         args.as_of_valid if args.as_of_valid is not None else now)
            rq = RoutedQuery(args.text, label, LabelSource.ORACLE if label else None, as_of)
            answers = route(rq, sub, k=args.k, context_id=args.context)
        out.table([dataclasses.asdict(a) for a in answers], ["layer", "item_id", "score", "text"])


def cmd_preload(args, out):
    with _open(args) as sub:
        if out.mode == "structured":
            out.table([e.to_dict() for e in sub.wisdom.active_directives(args.context)], [])
        else:
            print(sub.wisdom.preload_block(args.context), file=out.stream)


def cmd_consolidate(args, out):
    with _open(args) as sub:
        report = run_cycle(sub)
        rec = report.to_dict()
        reports = Path(args.substrate) / "reports"
        reports.mkdir(exist_ok=True)
        (reports / f"cycle.{report.cycle_number}.json").write_text(canonical_json(rec) + "\n", encoding="utf-8")
        c = report.counts
        out.record(rec, f"cycle {report.cycle_number}: archived={c['archived']} candidates={c['candidates']} "
                        f"promoted={c['promoted']} tier_changes={c['tier_changes']}")


def cmd_sweep(args, out):
    with _open(args) as sub:
        archived = sub.memory.sweep(args.context)
        out.record({"archived": archived}, f"archived {len(archived)}: {' '.join(archived)}".rstrip(": "))


def cmd_snapshot(args, out):
    with _open(args) as sub:
        path = sub.compact(keep=args.keep)
        out.record({"snapshot": str(path), "seq": sub.log.last_seq}, f"wrote {path}")


def cmd_stats(args, out):
    with _open(args) as sub:
        k, m, w = sub.knowledge, sub.memory, sub.wisdom
        rec = {
            "seq": sub.log.last_seq,
            "claims": len(k.claims),
            "current_claims": len(k.current_claims()),
            "supersession_links": len(k.links),
            "conclusions": len(k.conclusions),
            "contexts": len(m.contexts),
            "memory_facts": len(m.facts),
            "archived_facts": sum(1 for f in m.facts.values() if f.archived),
            "intentions_pending": sum(1 for i in m.intentions.values() if i.status.value == "pending"),
            "wisdom_entries": len(w.entries),
            "active_directives": len(w.active_directives()),
            "under_review": len(w.review_queue()),
            "cycles": sub.cycle_count,
            "canonical_hash": sub.canonical_hash(),
        }
        out.record(rec)


def cmd_bench(args, out):
    report = run_bench(seed=args.seed, resamples=args.resamples)
    if args.out:
        base = Path(args.out)
        base.with_suffix(".txt").write_text(report.to_text() + "\n", encoding="utf-8")
        base.with_suffix(".json").write_text(canonical_json(report.to_dict()) + "\n", encoding="utf-8")
    out.record(report.to_dict(), report.to_text())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="strata", description=__doc__.splitlines()[0])
    p.add_argument("--substrate", default=os.environ.get(ENV_SUBSTRATE, "."),
                   help=f"substrate directory (default: ${ENV_SUBSTRATE} or .)")
    p.add_argument("--output", choices=["human", "structured"], default="human")
    p.add_argument("--clock", type=int, metavar="MS", help="fix the clock at MS epoch milliseconds (reproducible runs)")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("init", help="create a new substrate directory").set_defaults(fn=cmd_init)

    s = sub.add_parser("ingest", help="add a knowledge claim")
    s.add_argument("statement")
    s.add_argument("--source", required=True)
    s.add_argument("--source-kind", default="document", choices=[k.value for k in SourceKind])
    s.add_argument("--author")
    s.add_argument("--note")
    s.add_argument("--asserted-at", type=int)
    s.add_argument("--valid-from", type=int)
    s.add_argument("--confidence", type=float)
    s.add_argument("--entity", action="append")
    s.set_defaults(fn=cmd_ingest)

    s = sub.add_parser("supersede", help="mark a claim as superseded by another")
    s.add_argument("old_id")
    s.add_argument("new_id")
    s.add_argument("--reason", default="")
    s.set_defaults(fn=cmd_supersede)

    s = sub.add_parser("observe", help="record a memory in a context")
    s.add_argument("content")
    s.add_argument("--context", required=True)
    s.add_argument("--session")
    s.add_argument("--valid-from", type=int)
    s.add_argument("--create-context", action="store_true")
    s.set_defaults(fn=cmd_observe)

    s = sub.add_parser("reinforce", help="reinforce a memory")
    s.add_argument("memory_id")
    s.set_defaults(fn=cmd_reinforce)

    s = sub.add_parser("propose", help="propose a wisdom directive")
    s.add_argument("directive")
    s.add_argument("--session")
    s.add_argument("--episode")
    s.add_argument("--context")
    s.add_argument("--source", default="cli")
    s.add_argument("--source-kind", default="human", choices=[k.value for k in SourceKind])
    s.set_defaults(fn=cmd_propose)

    s = sub.add_parser("schedule", help="schedule a prospective-memory intention")
    s.add_argument("description")
    s.add_argument("--context", required=True)
    s.add_argument("--due-at", type=int)
    s.add_argument("--tag")
    s.set_defaults(fn=cmd_schedule)

    s = sub.add_parser("due", help="list intentions that are due")
    s.add_argument("--now", type=int)
    s.set_defaults(fn=cmd_due)

    s = sub.add_parser("query", help="route a query to a layer")
    s.add_argument("text")
    s.add_argument("--layer", choices=["auto", "knowledge", "memory", "wisdom", "flat"], default="auto")
    s.add_argument("--context")
    s.add_argument("-k", type=int, default=5)
    s.add_argument("--as-of-system", type=int)
    s.add_argument("--as-of-valid", type=int)
    s.set_defaults(fn=cmd_query)

    s = sub.add_parser("preload", help="print the active directive block")
    s.add_argument("--context")
    s.set_defaults(fn=cmd_preload)

    sub.add_parser("consolidate", help="run one consolidation cycle").set_defaults(fn=cmd_consolidate)

    s = sub.add_parser("sweep", help="archive decayed memories")
    s.add_argument("--context")
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("snapshot", help="write a snapshot and prune older ones")
    s.add_argument("--keep", type=int, default=1)
    s.set_defaults(fn=cmd_snapshot)

    sub.add_parser("stats", help="print substrate counters").set_defaults(fn=cmd_stats)

    s = sub.add_parser("bench", help="run the typed-vs-flat benchmark")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--resamples", type=int, default=10_000)
    s.add_argument("--out", help="write OUT.txt and OUT.json")
    s.set_defaults(fn=cmd_bench)
    return p


def main(argv=None, stream=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = _Out(args.output, stream)
    try:
        args.fn(args, out)
    except StrataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
