from __future__ import annotations

from .chrono import Clock, SystemClock, check_timestamp
from .errors import LogFormatError
from .storage import EventLog, LogRecord


class EventSourcedStore:
    """Shared plumbing: every mutation is an event appended, then applied.

    Subclasses implement ``_apply_<kind>(record)`` handlers, ``canonical_state``
    and ``load_state``. Nothing mutates the projection except ``apply``.
    """

    store_tag = ""
    event_kinds: frozenset[str] = frozenset()

    def __init__(self, log: EventLog | None = None, clock: Clock | None = None):
        self.log = log if log is not None else EventLog()
        self.clock = clock if clock is not None else SystemClock()

    def _now(self, now: int | None) -> int:
        return check_timestamp(self.clock.now() if now is None else now, "now")

    def _emit(self, kind: str, **fields) -> LogRecord:
        rec = self.log.append(self.store_tag, {"kind": kind, **fields})
        self.apply(rec)
        return rec

    def apply(self, rec: LogRecord) -> None:
        if rec.store_tag != self.store_tag or rec.kind not in self.event_kinds:
            raise LogFormatError(f"{self.store_tag} store cannot apply {rec.store_tag}/{rec.body.get('kind')!r}")
        getattr(self, "_apply_" + rec.kind)(rec)
