"""Explicit offline consolidation pass.

One cycle: archive decayed memories, cluster what remains into recurring
patterns, propose each new pattern as a wisdom entry citing its source
memories, credit surviving wisdom entries with a cycle, review every active
entry, and reinforce the sources of anything just promoted.

Hooks are only called while planning, before the first write, so a failing
hook leaves every store untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StrataError
from .hooks import HookSet, embed_all, summarize
from .knowledge import Provenance, SourceKind
from .memory import MemoryFact
from .retrieval import tokenize
from .wisdom import GateConfig, TierDecision


@dataclass(frozen=True)
class PatternConfig:
    min_occurrences: int = 3
    min_sessions: int = 3
    jaccard_threshold: float = 0.5


@dataclass
class PatternCandidate:
    representative_content: str
    member_ids: list[str]
    distinct_sessions: list[str]
    similarity_basis: str = "lexical_overlap"

    @property
    def pattern_key(self) -> str:
        return pattern_key(self.representative_content)

    def to_dict(self) -> dict:
        return {
            "representative_content": self.representative_content,
            "member_ids": self.member_ids,
            "distinct_sessions": self.distinct_sessions,
            "similarity_basis": self.similarity_basis,
        }


def pattern_key(text: str) -> str:
    return " ".join(sorted(set(tokenize(text))))


def jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def _cosine_matrix(vectors: list[list[float]]) -> np.ndarray:
    mat = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1)
    norms[norms == 0] = 1.0
    unit = mat / norms[:, None]
    return unit @ unit.T


def detect_patterns(
    facts: list[MemoryFact],
    config: PatternConfig | None = None,
    embeddings: dict[str, list[float]] | None = None,
) -> list[PatternCandidate]:
    """Single-link clustering of live facts; clusters meeting both minima are returned.

    Facts are taken in the order given. Each fact joins every existing
    cluster holding a member at or above the similarity threshold, merging
    them, so the result is the connected components of the similarity graph.
    """
    config = config or PatternConfig()
    live = [f for f in facts if not f.archived]
    if embeddings is not None:
        sims = _cosine_matrix([embeddings[f.id] for f in live])
        basis = "embedding"
    else:
        token_sets = [set(tokenize(f.content)) for f in live]
        sims = None
        basis = "lexical_overlap"

    def sim(i: int, j: int) -> float:
        return float(sims[i, j]) if sims is not None else jaccard(token_sets[i], token_sets[j])

    clusters: list[list[int]] = []
    for i in range(len(live)):
        touching = [c for c in clusters if any(sim(i, j) >= config.jaccard_threshold for j in c)]
        merged = sorted([i, *(j for c in touching for j in c)])
        clusters = [c for c in clusters if not any(c is t for t in touching)]
        clusters.append(merged)
    clusters.sort(key=lambda c: c[0])

    out = []
    for members in clusters:
        sessions = sorted({live[j].session_id for j in members if live[j].session_id is not None})
        if len(members) < config.min_occurrences or len(sessions) < config.min_sessions:
            continue
        central = max(members, key=lambda j: (sum(sim(j, m) for m in members if m != j), -j))
        out.append(PatternCandidate(live[central].content, [live[j].id for j in members], sessions, basis))
    return out


@dataclass
class CycleReport:
    cycle_number: int
    at: int
    archived: list[str] = field(default_factory=list)
    candidates: list[PatternCandidate] = field(default_factory=list)
    promoted: list[str] = field(default_factory=list)
    wisdom_reviews: list[TierDecision] = field(default_factory=list)
    credited: list[str] = field(default_factory=list)

    @property
    def counts(self) -> dict:
        return {
            "archived": len(self.archived),
            "candidates": len(self.candidates),
            "promoted": len(self.promoted),
            "tier_changes": sum(1 for d in self.wisdom_reviews if d.promoted),
        }

    def to_dict(self) -> dict:
        return {
            "cycle_number": self.cycle_number,
            "at": self.at,
            "archived": self.archived,
            "candidates": [c.to_dict() for c in self.candidates],
            "promoted": self.promoted,
            "credited": self.credited,
            "wisdom_reviews": [
                {"entry_id": d.entry_id, "from_tier": d.from_tier.value, "to_tier": d.to_tier.value}
                for d in self.wisdom_reviews
            ],
            "counts": self.counts,
        }


@dataclass
class _Plan:
    seq: int
    doomed: list[str]
    candidates: list[PatternCandidate]
    fresh: list[tuple[PatternCandidate, str]]


def _already_consolidated(memory, cand: PatternCandidate) -> bool:
    if cand.pattern_key in memory.consolidations:
        return True
    members = set(cand.member_ids)
    return any(members <= set(c["member_ids"]) for c in memory.consolidations.values())


def _plan(substrate, hooks: HookSet | None, config: PatternConfig, now: int) -> _Plan:
    memory = substrate.memory
    seq = substrate.log.last_seq
    doomed = memory.sweep_candidates(None, now)
    gone = set(doomed)
    # facts touched after ``now`` are invisible to this cycle, so every later write is valid at ``now``
    snapshot = [
        f for i, f in sorted(memory.facts.items())
        if not f.archived and i not in gone and f.last_reinforced <= now
    ]
    embeddings = embed_all({f.id: f.content for f in snapshot}, hooks) if snapshot else None
    candidates = detect_patterns(snapshot, config, embeddings)
    fresh = []
    for cand in candidates:
        if _already_consolidated(memory, cand):
            continue
        directive = cand.representative_content
        if hooks is not None and hooks.summary_generator is not None:
            directive = summarize([memory.facts[i].content for i in cand.member_ids], hooks) or directive
        fresh.append((cand, directive))
    return _Plan(seq, doomed, candidates, fresh)


def run_cycle(
    substrate,
    hooks: HookSet | None = None,
    gate: GateConfig | None = None,
    now: int | None = None,
    config: PatternConfig | None = None,
    max_replans: int = 3,
) -> CycleReport:
    hooks = hooks if hooks is not None else substrate.hooks
    gate = gate or substrate.config.gate
    config = config or PatternConfig()
    memory, wisdom = substrate.memory, substrate.wisdom
    now = memory._now(now)

    for _ in range(max_replans):
        plan = _plan(substrate, hooks, config, now)
        with substrate.log.lock:
            if substrate.log.last_seq != plan.seq:
                continue  # a writer slipped in while hooks ran
            cycle = substrate.cycle_count + 1
            report = CycleReport(cycle, now, candidates=plan.candidates)
            for mid in plan.doomed:
                memory._emit("archived", id=mid, at=now)
            report.archived = list(plan.doomed)

            new_entries = []
            for cand, directive in plan.fresh:
                first = memory.facts[cand.member_ids[0]]
                prov = Provenance(f"dreamcycle:{cycle}", SourceKind.AGENT, first.stamp.system_created,
                                  evidence_note="members: " + ",".join(cand.member_ids))
                wid = wisdom.propose(directive, first.id, first.session_id, prov, now, context_id=first.context_id)
                for mid in cand.member_ids[1:]:
                    wisdom.corroborate(wid, mid, memory.facts[mid].session_id, now)
                new_entries.append((cand, wid))
            report.promoted = [wid for _, wid in new_entries]

            report.credited = wisdom.close_cycle(cycle, now, exclude=set(report.promoted))
            active = sorted(e.id for e in wisdom.active_directives())
            report.wisdom_reviews = [wisdom.review(i, gate, now) for i in active]

            for cand, wid in new_entries:
                for mid in cand.member_ids:
                    memory.reinforce(mid, now)
                memory.record_consolidation(cand.pattern_key, cand.member_ids, wid, now)

            substrate.record_cycle(cycle=cycle, at=now, **report.counts)
            return report
    raise StrataError("consolidation could not obtain a quiet log; retry later")
