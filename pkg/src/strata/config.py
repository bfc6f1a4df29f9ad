"""Plain-text ``key = value`` configuration for a substrate directory.

Lines starting with ``#`` are comments. Durations are given in days.
Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .chrono import DAY_MS, DecayParams
from .errors import ValidationError
from .retrieval import FusionConfig
from .wisdom import GateConfig

DEFAULT_TEMPORAL_MARKERS = ("when", "before", "after", "first", "last", "changed")
DEFAULT_DIRECTIVE_MARKERS = ("should", "prefer", "always", "never", "how do i")


@dataclass(frozen=True)
class RouterLexicon:
    temporal: tuple[str, ...] = DEFAULT_TEMPORAL_MARKERS
    directive: tuple[str, ...] = DEFAULT_DIRECTIVE_MARKERS


@dataclass(frozen=True)
class EngineConfig:
    decay: DecayParams = field(default_factory=DecayParams)
    gate: GateConfig = field(default_factory=GateConfig)
    lexicon: RouterLexicon = field(default_factory=RouterLexicon)
    fusion: FusionConfig = field(default_factory=FusionConfig)

    def to_text(self) -> str:
        d, g = self.decay, self.gate
        return "\n".join(
            [
                "# strata substrate configuration",
                f"decay.initial_strength = {d.initial_strength!r}",
                f"decay.half_life_days = {d.half_life / DAY_MS!r}",
                f"decay.reinforcement_growth = {d.reinforcement_growth!r}",
                f"decay.half_life_cap_days = {d.half_life_cap / DAY_MS!r}",
                f"decay.recall_threshold = {d.recall_threshold!r}",
                f"gate.core_min_sessions = {g.core_min_sessions}",
                f"gate.anchor_min_cycles = {g.anchor_min_cycles}",
                f"router.temporal = {', '.join(self.lexicon.temporal)}",
                f"router.directive = {', '.join(self.lexicon.directive)}",
                f"rrf.k0 = {self.fusion.rrf_constant!r}",
                f"rrf.lists_required = {self.fusion.lists_required}",
                "",
            ]
        )

    @classmethod
    def from_text(cls, text: str) -> EngineConfig:
        raw: dict[str, str] = {}
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(f"config line {n}: expected 'key = value'")
            raw[key.strip()] = value.strip()
        known = {
            "decay.initial_strength", "decay.half_life_days", "decay.reinforcement_growth",
            "decay.half_life_cap_days", "decay.recall_threshold", "gate.core_min_sessions",
            "gate.anchor_min_cycles", "router.temporal", "router.directive", "rrf.k0", "rrf.lists_required",
        }
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
        base = cls()
        d = base.decay

        def num(key, default, conv=float):
            try:
                return conv(raw[key]) if key in raw else default
            except ValueError as exc:
                raise ValidationError(f"config {key}: {exc}") from None

        def words(key, default):
            if key not in raw:
                return default
            return tuple(w.strip().lower() for w in raw[key].split(",") if w.strip())

        decay = DecayParams(
            initial_strength=num("decay.initial_strength", d.initial_strength),
            half_life=int(round(num("decay.half_life_days", d.half_life / DAY_MS) * DAY_MS)),
            reinforcement_growth=num("decay.reinforcement_growth", d.reinforcement_growth),
            half_life_cap=int(round(num("decay.half_life_cap_days", d.half_life_cap / DAY_MS) * DAY_MS)),
            recall_threshold=num("decay.recall_threshold", d.recall_threshold),
        )
        gate = GateConfig(
            num("gate.core_min_sessions", base.gate.core_min_sessions, int),
            num("gate.anchor_min_cycles", base.gate.anchor_min_cycles, int),
        )
        lexicon = RouterLexicon(words("router.temporal", base.lexicon.temporal), words("router.directive", base.lexicon.directive))
        fusion = FusionConfig(num("rrf.k0", base.fusion.rrf_constant), num("rrf.lists_required", base.fusion.lists_required, int))
        return cls(decay, gate, lexicon, fusion)

    @classmethod
    def load(cls, path: str | Path) -> EngineConfig:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))
