"""Desk-scale typed-vs-flat routing benchmark.

A seeded generator builds conversations containing two failure shapes:

* contradiction chains: a claim about a person is later superseded by a new
  value, and the question asks for the current value;
* temporal sequences: a run of dated events, and the question asks for the
  first or the last one.

Each question is answered under three conditions. ``typed_oracle`` routes
with the ground-truth layer label, ``typed_heuristic`` uses the keyword
router, and ``flat`` sends the question to one undifferentiated lexical
corpus. The answer is the top-1 result's text; it is correct when it
contains the gold answer (case-insensitive). There is no model in the loop.

The gap between conditions is produced by construction of the corpus; the
report says so in its header. Only the direction is meaningful.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .chrono import DAY_MS, HOUR_MS, ManualClock
from .engine import Substrate
from .errors import ValidationError
from .hooks import HookSet, LayerLabel
from .knowledge import Provenance, SourceKind
from .router import FlatStore, LabelSource, RoutedQuery, route

BASE_TIME = 1_767_225_600_000  # 2026-01-01T00:00:00Z

FIRST_NAMES = [
    "Alice", "Bruno", "Chiara", "Dmitri", "Elif", "Farid", "Greta", "Hiro", "Ines", "Jonas",
    "Kalinda", "Lars", "Mireille", "Nikhil", "Oona", "Pavel", "Quentin", "Rosa", "Soren", "Tamsin",
]
SURNAMES = [
    "Abbott", "Brennan", "Castell", "Dunmore", "Eklund", "Fairley", "Garrow", "Holt", "Ivers", "Jaskolski",
    "Kettering", "Lindqvist", "Marlow", "Nakagawa", "Orsini", "Pemberton", "Quarles", "Rydell", "Stroud", "Talbot",
]

# attribute -> value pool; values never occur inside one another or inside any template
ATTRIBUTES = {
    "favorite color": ["teal", "crimson", "amber", "violet", "indigo", "ochre", "maroon", "turquoise"],
    "preferred editor": ["emacs", "vim", "vscode", "helix", "kakoune", "sublime", "nano", "zed"],
    "team": ["platform", "payments", "search", "billing", "identity", "growth", "mobile", "security"],
    "hometown": ["Lisbon", "Krakow", "Nagoya", "Tallinn", "Valencia", "Bergen", "Ghent", "Porto"],
    "phone": ["pixel", "iphone", "fairphone", "galaxy", "xperia", "oneplus", "moto", "nokia"],
}

SEQUENCES = {
    "trip": (
        "{name} took a trip to {v}",
        ["Oslo", "Lima", "Hanoi", "Quito", "Cairo", "Dublin", "Seoul", "Perth", "Riga", "Accra"],
    ),
    "course": (
        "{name} enrolled in a course on {v}",
        ["pottery", "astronomy", "welding", "calligraphy", "sailing", "beekeeping", "fencing", "origami"],
    ),
}

OLD_CLAIM = ["{name}'s {attr} is {v}", "{name} said their {attr} is {v}"]
NEW_CLAIM = [
    "{name}'s {attr} is {v}",
    "Update: {name}'s {attr} is now {v}",
    "{name} switched and the {attr} on record for {name} is now {v} as of this week",
]
CONTRADICTION_Q = [
    "What is {name}'s {attr}?",
    "What is {name}'s current {attr}?",
    "What is {name}'s {attr} now that it changed?",
]
TEMPORAL_Q = {
    ("trip", "first"): ["Where did {name} take a trip first?", "Which trip destination of {name} was earliest?"],
    ("trip", "last"): ["Where did {name} take a trip last?", "What is the most recent trip destination of {name}?"],
    ("course", "first"): ["What was the first course {name} enrolled in?", "Which course did {name} enroll in earliest?"],
    ("course", "last"): ["What was the last course {name} enrolled in?", "Which course did {name} enroll in most recently?"],
}
FILLER = [
    "{name} mentioned the weather was cold",
    "{name} asked about lunch options",
    "{name} shared a link to a podcast",
    "{name} complained about a slow build",
]


class Category(str, enum.Enum):
    CONTRADICTION = "contradiction_resolution"
    TEMPORAL = "temporal_reasoning"


class Condition(str, enum.Enum):
    TYPED_ORACLE = "typed_oracle"
    TYPED_HEURISTIC = "typed_heuristic"
    FLAT = "flat"


@dataclass(frozen=True)
class Turn:
    kind: str  # "claim" or "event"
    text: str
    at: int
    session: str
    supersedes: str | None = None  # text of the earlier claim this one replaces


@dataclass(frozen=True)
class BenchCase:
    conversation_id: str
    turns: tuple[Turn, ...]
    question: str
    category: Category
    oracle_label: LayerLabel
    gold_answer: str
    asked_at: int


@dataclass(frozen=True)
class CorpusParams:
    """Generator knobs. Defaults keep the flat condition away from 0 and 1.

    ``distractor_claims`` adds unrelated claims about the same person,
    ``filler_per_conversation`` adds unrelated observations, and
    ``turn_spacing_ms`` is the gap between consecutive turns.
    """

    n_conversations: int = 20
    questions_per: int = 4
    events_per_sequence: int = 4
    filler_per_conversation: int = 3
    turn_spacing_ms: int = 6 * HOUR_MS
    turns_per_session: int = 3
    distractor_claims: int = 1


def generate_corpus(
    seed: int, n_conversations: int = 20, questions_per: int = 4, params: CorpusParams | None = None
) -> list[BenchCase]:
    """Deterministic corpus: half contradiction cases, half temporal cases."""
    if params is None:
        params = CorpusParams(n_conversations=n_conversations, questions_per=questions_per)
    n_conv, per = params.n_conversations, params.questions_per
    if per < 2 or per % 2:
        raise ValidationError("questions_per must be a positive even number")
    n_contra = n_temporal = per // 2
    if n_contra + params.distractor_claims > len(ATTRIBUTES) or n_temporal > 2 * len(SEQUENCES):
        raise ValidationError("questions_per exceeds the available templates")
    if n_conv > len(FIRST_NAMES) * len(SURNAMES):
        raise ValidationError("too many conversations for the name pool")

    rng = random.Random(seed)
    people = rng.sample([(f, s) for f in FIRST_NAMES for s in SURNAMES], n_conv)
    cases: list[BenchCase] = []
    for ci, (first, last) in enumerate(people):
        conv = f"conv{ci:03d}"
        name = f"{first} {last}"
        raw: list[tuple[str, str, str, str | None]] = []  # kind, text, ordering group, supersedes
        questions: list[tuple[str, Category, LayerLabel, str]] = []

        attrs = rng.sample(sorted(ATTRIBUTES), n_contra + params.distractor_claims)
        for attr in attrs[:n_contra]:
            old_v, new_v = rng.sample(ATTRIBUTES[attr], 2)
            old = rng.choice(OLD_CLAIM).format(name=name, attr=attr, v=old_v)
            new = rng.choice(NEW_CLAIM).format(name=name, attr=attr, v=new_v)
            raw += [("claim", old, attr, None), ("claim", new, attr, old)]
            q = rng.choice(CONTRADICTION_Q).format(name=name, attr=attr)
            questions.append((q, Category.CONTRADICTION, LayerLabel.KNOWLEDGE, new_v))
        for attr in attrs[n_contra:]:
            raw.append(("claim", OLD_CLAIM[0].format(name=name, attr=attr, v=rng.choice(ATTRIBUTES[attr])), attr, None))

        seq_names = sorted(SEQUENCES)
        asked: dict[str, list[str]] = {}
        for i in range(n_temporal):
            asked.setdefault(seq_names[i % len(seq_names)], []).append("")
        for seq_name, slots in asked.items():
            template, pool = SEQUENCES[seq_name]
            values = rng.sample(pool, params.events_per_sequence)
            raw += [("event", template.format(name=name, v=v), seq_name, None) for v in values]
            for end in rng.sample(["first", "last"], len(slots)):
                gold = values[0] if end == "first" else values[-1]
                q = rng.choice(TEMPORAL_Q[(seq_name, end)]).format(name=name)
                questions.append((q, Category.TEMPORAL, LayerLabel.MEMORY, gold))
        for j in range(params.filler_per_conversation):
            raw.append(("event", rng.choice(FILLER).format(name=name), f"filler{j}", None))

        turns = _schedule(raw, conv, rng, params)
        asked_at = turns[-1].at + DAY_MS
        cases += [BenchCase(conv, turns, q, cat, label, gold, asked_at) for q, cat, label, gold in questions]
    return cases


def _schedule(raw, conv: str, rng: random.Random, params: CorpusParams) -> tuple[Turn, ...]:
    """Interleave the groups at random while keeping each group's internal order."""
    slots = list(range(len(raw)))
    rng.shuffle(slots)
    by_group: dict[str, list[int]] = {}
    for i, item in enumerate(raw):
        by_group.setdefault(item[2], []).append(i)
    position = {}
    for members in by_group.values():
        for member, slot in zip(members, sorted(slots[m] for m in members)):
            position[member] = slot
    turns = []
    for i, (kind, text, _, sup) in enumerate(raw):
        pos = position[i]
        at = BASE_TIME + (pos + 1) * params.turn_spacing_ms
        turns.append(Turn(kind, text, at, f"{conv}-s{pos // params.turns_per_session}", sup))
    return tuple(sorted(turns, key=lambda t: t.at))


def _conversations(cases: Sequence[BenchCase]) -> dict[str, tuple[Turn, ...]]:
    convs: dict[str, tuple[Turn, ...]] = {}
    for c in cases:
        convs.setdefault(c.conversation_id, c.turns)
    return convs


def build_typed(cases: Sequence[BenchCase]) -> Substrate:
    """Layered ingest: claims into knowledge with supersession, events into per-conversation memory."""
    convs = _conversations(cases)
    clock = ManualClock(BASE_TIME)
    sub = Substrate(clock=clock)
    for conv in convs:
        sub.memory.create_context(conv, now=BASE_TIME)
    timeline = sorted((t.at, conv, t.text, t) for conv, turns in convs.items() for t in turns)
    claim_ids: dict[tuple[str, str], str] = {}
    for at, conv, _, turn in timeline:
        clock.set(at)
        if turn.kind == "claim":
            prov = Provenance(conv, SourceKind.CONVERSATION, at, evidence_note=turn.session)
            cid = sub.knowledge.ingest_claim(turn.text, prov, now=at)
            claim_ids[(conv, turn.text)] = cid
            if turn.supersedes is not None:
                sub.knowledge.supersede(claim_ids[(conv, turn.supersedes)], cid, "restated later in conversation", now=at)
        else:
            sub.memory.observe(turn.text, conv, valid_from=at, now=at, session_id=turn.session)
    return sub


def build_flat(cases: Sequence[BenchCase], seed: int = 0) -> FlatStore:
    """Every turn's text in one corpus under ids that carry no time order."""
    texts = [t.text for turns in _conversations(cases).values() for t in turns]
    labels = list(range(len(texts)))
    random.Random(seed ^ 0x5EED).shuffle(labels)
    flat = FlatStore()
    for text, label in zip(texts, labels):
        flat.add(f"f{label:05d}", text)
    return flat


def is_correct(answer_text: str | None, gold: str) -> bool:
    return bool(answer_text) and gold.lower() in answer_text.lower()


def run_condition(
    cases: Sequence[BenchCase],
    condition: Condition | str,
    substrate: Substrate | None = None,
    flat: FlatStore | None = None,
    hooks: HookSet | None = None,
) -> list[bool]:
    condition = Condition(condition)
    out = []
    if condition is Condition.FLAT:
        flat = flat or build_flat(cases)
        for case in cases:
            top = flat.flat_query(case.question, 1)
            out.append(is_correct(top[0].text if top else None, case.gold_answer))
        return out
    substrate = substrate or build_typed(cases)
    for case in cases:
        if condition is Condition.TYPED_ORACLE:
            rq = RoutedQuery(case.question, case.oracle_label, LabelSource.ORACLE)
        else:
            rq = RoutedQuery(case.question)
        answers = route(rq, substrate, hooks or HookSet(), k=1, now=case.asked_at, context_id=case.conversation_id)
        out.append(is_correct(answers[0].text if answers else None, case.gold_answer))
    return out


# -- statistics ---------------------------------------------------------------

def mcnemar_exact(b: int, c: int) -> float:
    """Two-sided exact McNemar p-value from the discordant counts."""
    if b < 0 or c < 0:
        raise ValidationError("discordant counts must be non-negative")
    n = b + c
    if n == 0:
        raise ValidationError("McNemar test undefined with no discordant pairs")
    tail = sum(math.comb(n, i) for i in range(min(b, c) + 1))
    return float(min(Fraction(1), Fraction(2 * tail, 2**n)))


class Lcg64:
    """64-bit linear congruential generator (Knuth's MMIX constants).

    ``state = (6364136223846793005 * state + 1442695040888963407) mod 2**64``;
    a draw in ``[0, n)`` is ``(state >> 33) % n`` taken after the update.
    """

    A = 6364136223846793005
    C = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def below(self, n: int) -> int:
        self.state = (self.A * self.state + self.C) & self.MASK
        return (self.state >> 33) % n


def bootstrap_ci(
    paired_outcomes: Sequence[tuple[bool, bool]],
    resamples: int = 10_000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap CI for mean(first) - mean(second) over paired cases.

    Each resample draws ``n`` case indices with replacement from :class:`Lcg64`.
    With the sorted resample statistics ``s``, the bounds are
    ``s[floor(R * (1 - level) / 2)]`` and ``s[ceil(R * (1 + level) / 2) - 1]``.
    """
    if not paired_outcomes:
        raise ValidationError("bootstrap needs at least one paired outcome")
    if resamples < 1 or not 0.0 < level < 1.0:
        raise ValidationError("need resamples >= 1 and level in (0, 1)")
    diffs = [int(bool(a)) - int(bool(b)) for a, b in paired_outcomes]
    n = len(diffs)
    rng = Lcg64(seed)
    stats = sorted(sum(diffs[rng.below(n)] for _ in range(n)) / n for _ in range(resamples))
    lo = math.floor(resamples * (1.0 - level) / 2.0)
    hi = math.ceil(resamples * (1.0 + level) / 2.0) - 1
    return stats[max(0, lo)], stats[min(resamples - 1, hi)]


@dataclass
class BenchReport:
    seed: int
    n: int
    accuracy: dict[str, dict[str, float]]
    overall: dict[str, float]
    delta: float
    ci: tuple[float, float]
    ci_level: float
    ci_resamples: int
    ci_seed: int
    mcnemar_p: float | None
    b: int
    c: int
    outcomes: dict[str, list[bool]] = field(default_factory=dict, repr=False)

    HEADER = (
        "Synthetic desk-scale corpus: the typed/flat gap is produced by how the corpus is built. "
        "Only the direction of the difference is meaningful, not its size."
    )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n": self.n,
            "accuracy": self.accuracy,
            "overall": self.overall,
            "delta": self.delta,
            "ci": list(self.ci),
            "ci_level": self.ci_level,
            "ci_resamples": self.ci_resamples,
            "ci_seed": self.ci_seed,
            "mcnemar_p": self.mcnemar_p,
            "b": self.b,
            "c": self.c,
        }

    def to_text(self) -> str:
        conds = [c.value for c in Condition]
        cats = [c.value for c in Category]
        lines = [self.HEADER, "", f"seed={self.seed}  N={self.n} per condition", ""]
        lines.append(f"{'category':<28}" + "".join(f"{c:>17}" for c in conds))
        for cat in cats:
            lines.append(f"{cat:<28}" + "".join(f"{self.accuracy[c][cat]:>17.3f}" for c in conds))
        lines.append(f"{'overall':<28}" + "".join(f"{self.overall[c]:>17.3f}" for c in conds))
        lines.append("")
        lines.append(f"delta (typed_oracle - flat) = {self.delta:+.3f}")
        lines.append(
            f"bootstrap {self.ci_level:.0%} CI = [{self.ci[0]:+.3f}, {self.ci[1]:+.3f}]"
            f"  (resamples={self.ci_resamples}, seed={self.ci_seed})"
        )
        p = "undefined (no discordant pairs)" if self.mcnemar_p is None else f"{self.mcnemar_p:.4g}"
        lines.append(f"McNemar exact p = {p}  (b={self.b}, c={self.c})")
        return "\n".join(lines)


def run_bench(
    seed: int = 42,
    n_conversations: int = 20,
    questions_per: int = 4,
    resamples: int = 10_000,
    level: float = 0.95,
    params: CorpusParams | None = None,
) -> BenchReport:
    cases = generate_corpus(seed, n_conversations, questions_per, params)
    typed = build_typed(cases)
    flat = build_flat(cases, seed)
    outcomes = {
        Condition.TYPED_ORACLE.value: run_condition(cases, Condition.TYPED_ORACLE, substrate=typed),
        Condition.TYPED_HEURISTIC.value: run_condition(cases, Condition.TYPED_HEURISTIC, substrate=typed),
        Condition.FLAT.value: run_condition(cases, Condition.FLAT, flat=flat),
    }
    accuracy = {}
    for cond, res in outcomes.items():
        accuracy[cond] = {}
        for cat in Category:
            idx = [i for i, c in enumerate(cases) if c.category is cat]
            accuracy[cond][cat.value] = sum(res[i] for i in idx) / len(idx) if idx else float("nan")
    overall = {cond: sum(res) / len(res) for cond, res in outcomes.items()}
    typed_res, flat_res = outcomes["typed_oracle"], outcomes["flat"]
    b = sum(1 for t, f in zip(typed_res, flat_res) if t and not f)
    c = sum(1 for t, f in zip(typed_res, flat_res) if f and not t)
    p = mcnemar_exact(b, c) if b + c else None
    ci = bootstrap_ci(list(zip(typed_res, flat_res)), resamples, level, seed)
    return BenchReport(
        seed, len(cases), accuracy, overall, overall["typed_oracle"] - overall["flat"], ci, level, resamples, seed,
        p, b, c, outcomes,
    )
