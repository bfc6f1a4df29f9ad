"""The substrate: three stores sharing one interleaved event log.

A single log gives every write across knowledge, memory and wisdom a total
order, which replay, snapshots and the consolidation pass rely on.
"""

from __future__ import annotations

import os
from pathlib import Path

from .chrono import Clock, SystemClock
from .config import EngineConfig
from .errors import LockError, LogFormatError, NotFoundError
from .hooks import HookSet
from .knowledge import KnowledgeStore
from .memory import MemoryStore
from .storage import (
    LOG_NAME,
    EventLog,
    LogRecord,
    canonical_hash,
    list_snapshots,
    read_snapshot,
    write_snapshot,
)
from .wisdom import WisdomStore

CONFIG_NAME = "config"
LOCK_NAME = "substrate.lock"


class Substrate:
    def __init__(
        self,
        log: EventLog | None = None,
        clock: Clock | None = None,
        config: EngineConfig | None = None,
        hooks: HookSet | None = None,
        directory: Path | None = None,
    ):
        self.log = log if log is not None else EventLog()
        self.clock = clock if clock is not None else SystemClock()
        self.config = config or EngineConfig()
        self.hooks = hooks or HookSet()
        self.directory = directory
        self.knowledge = KnowledgeStore(self.log, self.clock)
        self.memory = MemoryStore(self.log, self.clock, self.config.decay)
        self.wisdom = WisdomStore(self.log, self.clock, self.config.gate)
        self.cycles: list[dict] = []
        self._lock_fh = None
        self._stores = {"knowledge": self.knowledge, "memory": self.memory, "wisdom": self.wisdom}

    # -- event plumbing -----------------------------------------------------

    def apply(self, rec: LogRecord) -> None:
        if rec.store_tag == "meta":
            if rec.kind != "cycle_completed":
                raise LogFormatError(f"unknown meta record kind {rec.kind!r}")
            self.cycles.append(dict(rec.body))
        else:
            self._stores[rec.store_tag].apply(rec)

    def record_cycle(self, **fields) -> LogRecord:
        with self.log.lock:
            rec = self.log.append("meta", {"kind": "cycle_completed", **fields})
            self.apply(rec)
        return rec

    @property
    def cycle_count(self) -> int:
        return len(self.cycles)

    # -- state --------------------------------------------------------------

    def canonical_state(self) -> dict:
        return {
            "seq": self.log.last_seq,
            "knowledge": self.knowledge.canonical_state(),
            "memory": self.memory.canonical_state(),
            "wisdom": self.wisdom.canonical_state(),
            "meta": {"cycles": self.cycles},
        }

    def load_state(self, state: dict) -> None:
        self.knowledge.load_state(state["knowledge"])
        self.memory.load_state(state["memory"])
        self.wisdom.load_state(state["wisdom"])
        self.cycles = [dict(c) for c in state["meta"]["cycles"]]

    def canonical_hash(self) -> str:
        return canonical_hash(self.canonical_state())

    @classmethod
    def replay(cls, records, config: EngineConfig | None = None, clock: Clock | None = None) -> Substrate:
        """Rebuild a fresh in-memory substrate from ``records`` alone."""
        sub = cls(EventLog(), clock, config)
        for rec in records:
            if rec.seq != sub.log.last_seq + 1:
                raise LogFormatError(f"replay expects dense sequence numbers, got {rec.seq}")
            sub.log.records.append(rec)
            sub.apply(rec)
        return sub

    def view(self, as_of_seq: int) -> Substrate:
        """Read-only copy of the state as it stood after record ``as_of_seq``."""
        return Substrate.replay(self.log.records[:as_of_seq], self.config, self.clock)

    # -- files --------------------------------------------------------------

    @classmethod
    def init(cls, directory, config: EngineConfig | None = None) -> Path:
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        if (path / LOG_NAME).exists():
            raise LogFormatError(f"{path} already holds a substrate")
        (path / CONFIG_NAME).write_text((config or EngineConfig()).to_text(), encoding="utf-8")
        EventLog(path / LOG_NAME).close()
        return path

    @classmethod
    def open(cls, directory, clock: Clock | None = None, hooks: HookSet | None = None, fsync: bool = True) -> Substrate:
        """Open a substrate directory: newest valid snapshot, then replay the tail."""
        path = Path(directory)
        if not (path / LOG_NAME).exists():
            raise NotFoundError(f"no substrate at {path}")
        lock_fh = _acquire_lock(path / LOCK_NAME)
        try:
            config = EngineConfig.load(path / CONFIG_NAME) if (path / CONFIG_NAME).exists() else EngineConfig()
            log = EventLog(path / LOG_NAME, fsync=fsync)
            sub = cls(log, clock, config, hooks, path)
            start = 0
            for seq, snap in list_snapshots(path):
                if seq > log.last_seq:
                    continue
                try:
                    _, state = read_snapshot(snap)
                except (LogFormatError, ValueError):
                    continue
                sub.load_state(state)
                start = seq
                break
            for rec in log.records[start:]:
                sub.apply(rec)
        except BaseException:
            _release_lock(lock_fh)
            raise
        sub._lock_fh = lock_fh
        return sub

    def snapshot(self) -> Path:
        if self.directory is None:
            raise LogFormatError("in-memory substrate has no directory to snapshot into")
        with self.log.lock:
            return write_snapshot(self.canonical_state(), self.log.last_seq, self.directory)

    def compact(self, keep: int = 1) -> Path:
        """Write a fresh snapshot and delete all but the newest ``keep`` snapshots."""
        newest = self.snapshot()
        for _, old in list_snapshots(self.directory)[keep:]:
            old.unlink()
        return newest

    def close(self) -> None:
        self.log.close()
        _release_lock(self._lock_fh)
        self._lock_fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _acquire_lock(path: Path):
    fh = open(path, "a+")
    try:
        import fcntl

        fcntl.flock(fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
    except ImportError:  # non-POSIX: advisory locking unavailable
        pass
    except OSError as exc:
        fh.close()
        raise LockError(f"{path.parent} is locked by another writer") from exc
    fh.seek(0)
    fh.truncate()
    fh.write(str(os.getpid()))
    fh.flush()
    return fh


def _release_lock(fh) -> None:
    if fh is not None:
        fh.close()
