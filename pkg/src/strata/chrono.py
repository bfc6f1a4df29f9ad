"""Time, bi-temporal validity and the decay algebra.

All timestamps are integer milliseconds since the Unix epoch (UTC).
Durations are integer or real milliseconds; a calendar day is exactly
``DAY_MS``. Validity windows are half-open: ``[valid_from, valid_until)``.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, replace
from typing import Protocol

from .errors import ParameterError, ValidationError

Timestamp = int

DAY_MS = 86_400_000
HOUR_MS = 3_600_000


def days(n: float) -> int:
    return int(round(n * DAY_MS))


def check_timestamp(t: int, name: str = "timestamp") -> int:
    if isinstance(t, bool) or not isinstance(t, int):
        raise ValidationError(f"{name} must be integer milliseconds, got {t!r}")
    if t < 0:
        raise ValidationError(f"{name} must be non-negative, got {t}")
    return t


@dataclass(frozen=True)
class BitemporalStamp:
    system_created: Timestamp
    valid_from: Timestamp
    system_expired: Timestamp | None = None
    valid_until: Timestamp | None = None

    def __post_init__(self):
        check_timestamp(self.system_created, "system_created")
        check_timestamp(self.valid_from, "valid_from")
        if self.system_expired is not None:
            check_timestamp(self.system_expired, "system_expired")
            if self.system_expired < self.system_created:
                raise ValidationError("system_expired precedes system_created")
        if self.valid_until is not None:
            check_timestamp(self.valid_until, "valid_until")
            if self.valid_until < self.valid_from:
                raise ValidationError("valid_until precedes valid_from")

    def with_valid_until(self, valid_until: Timestamp) -> BitemporalStamp:
        return replace(self, valid_until=valid_until)

    def to_dict(self) -> dict:
        return {
            "system_created": self.system_created,
            "system_expired": self.system_expired,
            "valid_from": self.valid_from,
            "valid_until": self.valid_until,
        }

    @classmethod
    def from_dict(cls, d: dict) -> BitemporalStamp:
        return cls(
            system_created=d["system_created"],
            valid_from=d["valid_from"],
            system_expired=d.get("system_expired"),
            valid_until=d.get("valid_until"),
        )


def visible_as_of(stamp: BitemporalStamp, system_time: Timestamp, valid_time: Timestamp) -> bool:
    """True when the record existed at ``system_time`` and held at ``valid_time``."""
    if stamp.system_created > system_time:
        return False
    if stamp.system_expired is not None and stamp.system_expired <= system_time:
        return False
    if stamp.valid_from > valid_time:
        return False
    if stamp.valid_until is not None and stamp.valid_until <= valid_time:
        return False
    return True


class Clock(Protocol):
    def now(self) -> Timestamp: ...


class SystemClock:
    """Wall clock, clamped so successive readings never go backwards."""

    def __init__(self):
        self._last = 0
        self._lock = threading.Lock()

    def now(self) -> Timestamp:
        with self._lock:
            self._last = max(self._last, time.time_ns() // 1_000_000)
            return self._last


class ManualClock:
    """Deterministic clock for tests and reproducible runs."""

    def __init__(self, start: Timestamp = 0):
        self._now = check_timestamp(start, "start")
        self._lock = threading.Lock()

    def now(self) -> Timestamp:
        with self._lock:
            return self._now

    def set(self, t: Timestamp) -> None:
        check_timestamp(t)
        with self._lock:
            if t < self._now:
                raise ValidationError(f"clock cannot move backwards ({t} < {self._now})")
            self._now = t

    def advance(self, ms: int) -> Timestamp:
        if ms < 0:
            raise ValidationError("cannot advance by a negative duration")
        with self._lock:
            self._now += int(ms)
            return self._now


@dataclass(frozen=True)
class DecayParams:
    """Forgetting-curve configuration. Durations in milliseconds."""

    initial_strength: float = 1.0
    half_life: int = 7 * DAY_MS
    reinforcement_growth: float = 2.0
    half_life_cap: int = 365 * DAY_MS
    recall_threshold: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.initial_strength <= 1.0:
            raise ParameterError("initial_strength must lie in (0, 1]")
        if self.half_life <= 0:
            raise ParameterError("half_life must be positive")
        if self.reinforcement_growth < 1.0:
            raise ParameterError("reinforcement_growth must be >= 1")
        if self.half_life_cap <= 0:
            raise ParameterError("half_life_cap must be positive")
        if not 0.0 <= self.recall_threshold < 1.0:
            raise ParameterError("recall_threshold must lie in [0, 1)")


def retention(s0: float, elapsed: float, half_life: float) -> float:
    """Strength remaining after ``elapsed``: ``s0 * 2 ** (-elapsed / half_life)``."""
    if half_life <= 0:
        raise ParameterError(f"half-life must be positive, got {half_life}")
    if elapsed < 0:
        raise ParameterError(f"elapsed time must be non-negative, got {elapsed}")
    return s0 * 2.0 ** (-elapsed / half_life)


def reinforced_half_life(half_life: float, count: int, growth: float, cap: float) -> float:
    if count < 0:
        raise ParameterError("reinforcement count must be non-negative")
    # geometric growth overflows float long before count gets large; the cap binds first
    if growth > 1.0 and count * math.log2(growth) > math.log2(cap / half_life) + 1:
        return float(cap)
    return min(half_life * growth**count, cap)
