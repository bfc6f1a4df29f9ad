"""Acceptance criteria, one test per criterion.

Each test prints a single ``[ACCEPT n] PASS|FAIL ...`` line (visible in
``pytest -v`` output) and then asserts. Run just this file with::

    pytest tests/test_acceptance.py -v
"""

import math
import random
import socket
import time
import tracemalloc

import pytest

from conftest import NetworkBlocked
from opgen import random_ops
from strata import (
    DAY_MS,
    EventTrigger,
    KnowledgeStore,
    ManualClock,
    MemoryStore,
    Provenance,
    Substrate,
    TimeTrigger,
    retention,
)
from strata.bench import Category, generate_corpus, mcnemar_exact, run_bench
from strata.chrono import DecayParams
from strata.dreamcycle import run_cycle
from strata.errors import CycleError
from strata.hooks import HookSet
from strata.wisdom import EntryStatus, EvidenceLedger, GateConfig, Tier, WisdomStore, gate_decision

RESULTS: dict[int, bool] = {}


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str = "", runtime: float | None = None):
        RESULTS[number] = ok
        timing = f" [{runtime:.2f}s]" if runtime is not None else ""
        with capsys.disabled():
            print(f"\n[ACCEPT {number:>2}] {'PASS' if ok else 'FAIL'} {title}{timing} {detail}".rstrip())
        assert ok, f"criterion {number} failed: {detail}"

    return emit


# 1 -----------------------------------------------------------------------------------------------

def test_01_decay_algebra(report):
    start = time.perf_counter()
    rng = random.Random(1)
    worst_half = 0.0
    for _ in range(1000):
        s0, h = rng.uniform(0.01, 10), rng.uniform(1, 1e12)
        worst_half = max(worst_half, abs(retention(s0, h, h) - s0 / 2) / (s0 / 2))
    worst_mult = 0.0
    for _ in range(10_000):
        s0 = rng.uniform(0.01, 10)
        h = rng.uniform(1, 1e11)
        a, b = rng.uniform(0, 20 * h), rng.uniform(0, 20 * h)
        lhs = retention(s0, a + b, h)
        rhs = retention(retention(s0, a, h), b, h)
        worst_mult = max(worst_mult, abs(lhs - rhs) / lhs)
    runtime = time.perf_counter() - start
    ok = worst_half <= 1e-12 and worst_mult <= 1e-9 and runtime < 1.0
    report(1, "decay algebra", ok, f"half-life rel err {worst_half:.1e}, multiplicativity rel err {worst_mult:.1e}", runtime)


# 2 -----------------------------------------------------------------------------------------------

def _reaches(links, src, dst):
    stack, seen = [src], set()
    while stack:
        n = stack.pop()
        if n == dst:
            return True
        if n in seen:
            continue
        seen.add(n)
        stack.extend(new for old, new in links if old == n)
    return False


def test_02_supersession_correctness(report):
    start = time.perf_counter()
    rng = random.Random(2)
    failures = 0
    for _ in range(1000):
        store = KnowledgeStore(clock=ManualClock(0))
        statements, links = {}, []
        for step in range(rng.randint(3, 25)):
            if len(statements) < 2 or rng.random() < 0.45:
                text = f"claim {step} {rng.random():.6f}"
                statements[store.ingest_claim(text, Provenance("src"))] = text
                continue
            old, new = rng.sample(sorted(statements), 2)
            would_cycle = _reaches(links, new, old)
            try:
                store.supersede(old, new)
                accepted = True
            except CycleError:
                accepted = False
            if accepted == would_cycle:
                failures += 1
            if accepted:
                links.append((old, new))
        olds = {o for o, _ in links}
        expected = sorted(i for i in statements if i not in olds)
        if sorted(c.id for c in store.current_claims()) != expected:
            failures += 1
        if any(_reaches(links, n, o) for o, n in links):
            failures += 1
        if any(store.get_claim(i).statement != t for i, t in statements.items()):
            failures += 1
    runtime = time.perf_counter() - start
    ok = failures == 0 and runtime < 10
    report(2, "supersession correctness", ok, f"1000 sequences, {failures} failures", runtime)


# 3 -----------------------------------------------------------------------------------------------

def test_03_bitemporal_point_in_time(report):
    start = time.perf_counter()
    rng = random.Random(3)
    mem = MemoryStore(clock=ManualClock(0), decay=DecayParams(half_life=10**9))
    mem.create_context("c")
    now = 0
    for _ in range(200):
        now += rng.randrange(0, 50)
        mid = mem.observe("fact", "c", valid_from=rng.randrange(0, 10_000), now=now)
        if rng.random() < 0.5:
            vf = mem.get(mid).stamp.valid_from
            mem.invalidate(mid, vf + rng.randrange(0, 3000), now=now)
    facts = list(mem.facts.values())

    def oracle(stamp, s, v):
        return (stamp.system_created <= s
                and (stamp.system_expired is None or s < stamp.system_expired)
                and stamp.valid_from <= v
                and (stamp.valid_until is None or v < stamp.valid_until))

    mismatches = 0
    for _ in range(2500):
        s, v = rng.randrange(-10, now + 60), rng.randrange(-10, 14_000)
        s, v = max(s, 0), max(v, 0)
        got = {f.id for f in mem.candidates("c", now, (s, v))}
        want = {f.id for f in facts if oracle(f.stamp, s, v)}
        mismatches += len(got ^ want)
    runtime = time.perf_counter() - start
    ok = mismatches == 0 and runtime < 10
    report(3, "bi-temporal point-in-time", ok, f"200 facts x 2500 probes, {mismatches} mismatches", runtime)


# 4 -----------------------------------------------------------------------------------------------

def test_04_replay_determinism(report):
    start = time.perf_counter()
    agree = 0
    for seed in range(100):
        sub = Substrate(clock=ManualClock(0))
        random_ops(sub, random.Random(seed), 500)
        if Substrate.replay(sub.log.records).canonical_hash() == sub.canonical_hash():
            agree += 1
    runtime = time.perf_counter() - start
    report(4, "replay determinism", agree == 100, f"{agree}/100 runs", runtime)


# 5 -----------------------------------------------------------------------------------------------

def test_05_type_appropriate_decay(report):
    start = time.perf_counter()
    # knowledge: ranking independent of the clock
    clock = ManualClock(0)
    ks = KnowledgeStore(clock=clock)
    rng = random.Random(5)
    words = "alpha beta gamma delta lora dora clipping quality parameters".split()
    for i in range(60):
        ks.ingest_claim(" ".join(rng.choice(words) for _ in range(5)), Provenance(f"d{i}"))
    queries = ["alpha lora", "quality parameters", "gamma", "dora clipping beta"]
    before = [[(h.item_id, h.score) for h in ks.search_knowledge(q, 20)] for q in queries]
    clock.advance(365 * DAY_MS)
    after = [[(h.item_id, h.score) for h in ks.search_knowledge(q, 20)] for q in queries]
    knowledge_ok = before == after

    # memory: retrievability non-increasing without reinforcement
    mem = MemoryStore(clock=ManualClock(0))
    mem.create_context("c")
    ids = [mem.observe(f"note {i}", "c", now=i * 1000) for i in range(50)]
    memory_ok = True
    for mid in ids:
        f = mem.get(mid)
        prev = math.inf
        for t in range(f.last_reinforced, f.last_reinforced + 120 * DAY_MS, DAY_MS // 4):
            r = f.retrievability(t)
            if r > prev:
                memory_ok = False
            prev = r

    # wisdom: tier unchanged by clock advance alone
    wclock = ManualClock(0)
    ws = WisdomStore(clock=wclock)
    entries = [ws.propose(f"directive {i}", None, f"s{i}", Provenance("u")) for i in range(5)]
    for sess in ("x", "y"):
        ws.corroborate(entries[0], None, sess)
    ws.review(entries[0])
    tiers = {e: ws.get(e).tier for e in entries}
    for _ in range(20):
        wclock.advance(365 * DAY_MS)
        for e in entries:
            ws.review(e)
    wisdom_ok = {e: ws.get(e).tier for e in entries} == tiers
    runtime = time.perf_counter() - start
    ok = knowledge_ok and memory_ok and wisdom_ok
    report(5, "type-appropriate decay", ok,
           f"knowledge={'ok' if knowledge_ok else 'bad'} memory={'ok' if memory_ok else 'bad'} "
           f"wisdom={'ok' if wisdom_ok else 'bad'}", runtime)


# 6 -----------------------------------------------------------------------------------------------

def test_06_wisdom_gate_truth_table(report):
    start = time.perf_counter()
    gate = GateConfig()
    states = matches = 0
    for tier in (Tier.PREDICTION, Tier.CORE):
        for sessions in range(6):
            for contra in range(3):
                for cycles in range(13):
                    states += 1
                    ledger = EvidenceLedger({f"m{i}" for i in range(sessions)}, {f"s{i}" for i in range(sessions)},
                                            contra, cycles)
                    if contra > 0:
                        want = tier
                    elif tier is Tier.PREDICTION:
                        want = Tier.CORE if sessions >= 3 else tier
                    else:
                        want = Tier.ANCHOR if cycles >= 10 else tier
                    matches += gate_decision(tier, EntryStatus.ACTIVE, ledger, gate) is want
    ws = WisdomStore(clock=ManualClock(0))
    flooded = ws.propose("directive", "m0", "only", Provenance("u"))
    for i in range(500):
        ws.corroborate(flooded, f"m{i}", "only")
    flood_ok = ws.review(flooded).to_tier is Tier.PREDICTION
    runtime = time.perf_counter() - start
    ok = states == 468 and matches == 468 and flood_ok
    report(6, "wisdom gate truth table", ok, f"{matches}/{states} states, flood promoted={not flood_ok}", runtime)


# 7 -----------------------------------------------------------------------------------------------

def test_07_prospective_memory(report):
    start = time.perf_counter()
    rng = random.Random(7)
    checks = failures = 0
    tags = ["deploy", "merge", "release", "standup"]
    while checks < 10_000:
        clock_now = 1_000
        mem = MemoryStore(clock=ManualClock(clock_now))
        mem.create_context("c")
        model = {}  # id -> [kind, due_or_tag, status]
        for _ in range(rng.randint(5, 30)):
            roll = rng.random()
            if roll < 0.45:
                due = clock_now + rng.randint(1, 5000)
                model[mem.schedule_intention("t", TimeTrigger(due), "c", now=clock_now)] = ["time", due, "pending"]
            elif roll < 0.7:
                tag = rng.choice(tags)
                model[mem.schedule_intention("e", EventTrigger(tag), "c", now=clock_now)] = ["event", tag, "pending"]
            elif roll < 0.85:
                pending = sorted(i for i, m in model.items() if m[2] == "pending")
                if pending:
                    i = rng.choice(pending)
                    mem.mark_surfaced(i, now=clock_now)
                    model[i][2] = "surfaced"
            else:
                tag = rng.choice(tags)
                surfaced = {i.id for i in mem.trigger_event(tag, now=clock_now)}
                want = {i for i, m in model.items() if m[0] == "event" and m[1] == tag and m[2] == "pending"}
                checks += 1
                failures += surfaced != want
                for i in want:
                    model[i][2] = "surfaced"
            clock_now += rng.randint(0, 300)
            for _ in range(10):
                t = rng.randint(0, clock_now + 6000)
                got = [i.id for i in mem.list_due(t)]
                want = sorted((m[1], i) for i, m in model.items() if m[0] == "time" and m[2] == "pending" and m[1] <= t)
                checks += 1
                failures += got != [i for _, i in want]
            pending_due = [m[1] for m in model.values() if m[0] == "time" and m[2] == "pending"]
            checks += 1
            failures += mem.next_due_time() != (min(pending_due) if pending_due else None)
    runtime = time.perf_counter() - start
    report(7, "prospective memory", failures == 0, f"{checks} randomized checks, {failures} failures", runtime)


# 8 -----------------------------------------------------------------------------------------------

def test_08_dreamcycle_closure(report):
    start = time.perf_counter()
    sub = Substrate(clock=ManualClock(0))
    sub.memory.create_context("c")
    sources = [sub.memory.observe("user prefers dark mode in the editor", "c", session_id=s, now=i * DAY_MS)
               for i, s in enumerate(("s1", "s2", "s3"))]
    first = run_cycle(sub, now=3 * DAY_MS)
    entries = list(sub.wisdom.entries.values())
    observed = {r.body["fact"]["id"] for r in sub.log if r.kind == "observed"}
    one_core = len(entries) == 1 and entries[0].tier is Tier.CORE
    refs_ok = bool(entries) and entries[0].evidence.episode_refs == set(sources) <= observed
    second = run_cycle(sub, now=3 * DAY_MS)
    idempotent = second.promoted == [] and len(sub.wisdom.entries) == 1
    runtime = time.perf_counter() - start
    ok = one_core and refs_ok and idempotent and first.promoted == [entries[0].id]
    report(8, "dreamcycle closure", ok,
           f"entries={len(entries)} core={one_core} provenance={refs_ok} second-cycle promotions={len(second.promoted)}",
           runtime)


# 9 -----------------------------------------------------------------------------------------------

def test_09_bench_directionality(report):
    start = time.perf_counter()
    r = run_bench(seed=42)
    runtime = time.perf_counter() - start
    cases = generate_corpus(42)
    split = [c.category for c in cases].count(Category.CONTRADICTION)
    cats = r.accuracy["typed_oracle"]
    oracle_p = float(sum(math.comb(9, i) for i in range(2)) * 2) / 2**9
    p_cross = abs(mcnemar_exact(8, 1) - oracle_p) <= 1e-12 and abs(oracle_p - 20 / 512) <= 1e-12
    p_recomputed = r.mcnemar_p is not None and r.mcnemar_p == mcnemar_exact(r.b, r.c)
    ok = (
        r.n == 80 and split == 40 and all(len(v) == 80 for v in r.outcomes.values())
        and cats[Category.CONTRADICTION.value] == 1.0
        and r.overall["typed_oracle"] >= r.overall["flat"]
        and r.overall["typed_heuristic"] <= r.overall["typed_oracle"]
        and p_cross and p_recomputed and runtime < 60
    )
    detail = (f"oracle={r.overall['typed_oracle']:.3f} heuristic={r.overall['typed_heuristic']:.3f} "
              f"flat={r.overall['flat']:.3f} delta={r.delta:+.3f} CI=[{r.ci[0]:+.3f},{r.ci[1]:+.3f}] "
              f"p={r.mcnemar_p:.3g} (b={r.b},c={r.c})")
    report(9, "bench directionality", ok, detail, runtime)


# 10 ----------------------------------------------------------------------------------------------

def test_10_offline_invariant(report):
    blocked = []
    for attempt in (lambda: socket.create_connection(("127.0.0.1", 9)),
                    lambda: socket.getaddrinfo("example.com", 80),
                    lambda: socket.socket().connect(("127.0.0.1", 9))):
        try:
            attempt()
            blocked.append(False)
        except NetworkBlocked:
            blocked.append(True)
    hooks_null = all(v is None for v in vars(HookSet()).values()) and all(
        v is None for v in vars(Substrate(clock=ManualClock(0)).hooks).values())
    prior = [RESULTS.get(i) for i in range(1, 10)]
    ok = all(blocked) and hooks_null and all(p is True for p in prior)
    report(10, "offline invariant", ok,
           f"network guard={'on' if all(blocked) else 'OFF'} hooks null={hooks_null} "
           f"criteria 1-9 passed={sum(p is True for p in prior)}/9")


# 11 ----------------------------------------------------------------------------------------------

def test_11_footprint_informational(report):
    tracemalloc.start()
    base, _ = tracemalloc.get_traced_memory()
    mem = MemoryStore(clock=ManualClock(0))
    mem.create_context("c")
    for i in range(10_000):
        mem.observe(f"observation number {i} about topic {i % 97}", "c", now=i)
    current, _ = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    mb = (current - base) / 2**20
    # informational only: the number is reported, never gated
    report(11, "footprint (informational)", True, f"10,000 facts incl. event log: {mb:.1f} MiB traced (reference claim <5 MB)")
