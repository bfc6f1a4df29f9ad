"""Append-only event log, snapshots and canonical serialization.

Log file layout (``substrate.log``), UTF-8, one record per line::

    #strata-log v1
    <seq> <store_tag> <crc32:08x> <body_len> <body_json>

``body_json`` is the canonical encoding (sorted keys, no whitespace, UTF-8,
no NaN). ``body_len`` counts its bytes and the CRC-32 is taken over the same
bytes. ``seq`` starts at 1 and is dense. A trailing line that is not
newline-terminated or fails its length/CRC check is a torn write and is
truncated away on open; a bad record anywhere else is corruption.

Snapshot files (``substrate.snap.<seq>``) hold a header line
``#strata-snap v1 <seq> <sha256>`` followed by the canonical JSON of the full
projection state at that sequence number.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import LogFormatError

LOG_HEADER = "#strata-log v1"
SNAP_PREFIX = "#strata-snap v1"
LOG_NAME = "substrate.log"
SNAP_GLOB = "substrate.snap.*"
STORE_TAGS = ("knowledge", "memory", "wisdom", "meta")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def canonical_hash(state) -> str:
    """SHA-256 hex digest of the canonical encoding of ``state``."""
    if hasattr(state, "canonical_state"):
        state = state.canonical_state()
    return hashlib.sha256(canonical_json(state).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LogRecord:
    seq: int
    store_tag: str
    body: dict
    checksum: int

    @property
    def kind(self) -> str:
        return self.body["kind"]

    def encode(self) -> bytes:
        payload = canonical_json(self.body).encode("utf-8")
        head = f"{self.seq} {self.store_tag} {self.checksum:08x} {len(payload)} ".encode("ascii")
        return head + payload + b"\n"

    @classmethod
    def make(cls, seq: int, store_tag: str, body: dict) -> LogRecord:
        if store_tag not in STORE_TAGS:
            raise LogFormatError(f"unknown store tag {store_tag!r}")
        # round-trip through the canonical form so in-memory and replayed bodies are identical
        payload = canonical_json(body).encode("utf-8")
        return cls(seq, store_tag, json.loads(payload), zlib.crc32(payload))

    @classmethod
    def decode(cls, line: bytes) -> LogRecord:
        try:
            seq_s, tag, crc_s, len_s, payload = line.rstrip(b"\n").split(b" ", 4)
            seq, crc, length = int(seq_s), int(crc_s, 16), int(len_s)
            tag = tag.decode("ascii")
        except ValueError as exc:
            raise LogFormatError(f"malformed log line: {line[:60]!r}") from exc
        if len(payload) != length:
            raise LogFormatError(f"record {seq}: length {len(payload)} != {length}")
        if zlib.crc32(payload) != crc:
            raise LogFormatError(f"record {seq}: checksum mismatch")
        if tag not in STORE_TAGS:
            raise LogFormatError(f"record {seq}: unknown store tag {tag!r}")
        return cls(seq, tag, json.loads(payload.decode("utf-8")), crc)


class EventLog:
    """Single-writer append-only log, in memory or backed by a file.

    ``lock`` is the writer lock; stores hold it across validate-append-apply.
    """

    def __init__(self, path: str | os.PathLike | None = None, fsync: bool = True):
        self.records: list[LogRecord] = []
        self.lock = threading.RLock()
        self.path = Path(path) if path is not None else None
        self.fsync = fsync
        self.truncated_bytes = 0
        self._fh = None
        if self.path is not None:
            self._load()
            self._fh = open(self.path, "ab")

    @property
    def last_seq(self) -> int:
        return self.records[-1].seq if self.records else 0

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(list(self.records))

    def _load(self) -> None:
        if not self.path.exists() or self.path.stat().st_size == 0:
            self.path.write_bytes((LOG_HEADER + "\n").encode("ascii"))
            return
        data = self.path.read_bytes()
        lines = data.split(b"\n")
        # a file ending in "\n" leaves one empty element; anything else there is a torn tail
        tail = lines.pop()
        good_end = len(data) - len(tail)
        if not lines or lines[0].decode("utf-8", "replace") != LOG_HEADER:
            if not lines and LOG_HEADER.encode("ascii").startswith(tail):
                self.path.write_bytes((LOG_HEADER + "\n").encode("ascii"))
                return
            raise LogFormatError(f"{self.path}: missing or unsupported log header")
        offset = len(lines[0]) + 1
        for i, line in enumerate(lines[1:], start=1):
            try:
                rec = LogRecord.decode(line)
            except LogFormatError:
                if i == len(lines) - 1 and not tail:
                    # last complete-looking line can still be torn if the newline hit disk first
                    good_end = offset
                    break
                raise
            if rec.seq != self.last_seq + 1:
                raise LogFormatError(f"{self.path}: sequence gap at {rec.seq}")
            self.records.append(rec)
            offset += len(line) + 1
        if good_end != len(data):
            self.truncated_bytes = len(data) - good_end
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)

    def append(self, store_tag: str, body: dict) -> LogRecord:
        with self.lock:
            rec = LogRecord.make(self.last_seq + 1, store_tag, body)
            if self._fh is not None:
                self._fh.write(rec.encode())
                self._fh.flush()
                if self.fsync:
                    os.fsync(self._fh.fileno())
            self.records.append(rec)
            return rec

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def write_log(records: Iterable[LogRecord], path: str | os.PathLike) -> None:
    """Write records to a fresh log file (used for compaction and fixtures)."""
    with open(path, "wb") as fh:
        fh.write((LOG_HEADER + "\n").encode("ascii"))
        for rec in records:
            fh.write(rec.encode())


def write_snapshot(state: dict, seq: int, directory: str | os.PathLike) -> Path:
    body = canonical_json(state)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    path = Path(directory) / f"substrate.snap.{seq}"
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{SNAP_PREFIX} {seq} {digest}\n{body}")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return path


def read_snapshot(path: str | os.PathLike) -> tuple[int, dict]:
    text = Path(path).read_text(encoding="utf-8")
    head, _, body = text.partition("\n")
    parts = head.split(" ")
    if len(parts) != 4 or " ".join(parts[:2]) != SNAP_PREFIX:
        raise LogFormatError(f"{path}: not a strata snapshot")
    seq, digest = int(parts[2]), parts[3]
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != digest:
        raise LogFormatError(f"{path}: snapshot hash mismatch")
    return seq, json.loads(body)


def list_snapshots(directory: str | os.PathLike) -> list[tuple[int, Path]]:
    found = []
    for p in Path(directory).glob(SNAP_GLOB):
        suffix = p.name.rsplit(".", 1)[-1]
        if suffix.isdigit():
            found.append((int(suffix), p))
    return sorted(found, reverse=True)
