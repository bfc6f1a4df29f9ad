import json
import random
import shutil
import sys
from pathlib import Path

import pytest

from opgen import random_ops
from strata import ManualClock, Substrate
from strata.errors import LockError, LogFormatError, NotFoundError
from strata.knowledge import Provenance
from strata.storage import (
    LOG_HEADER,
    LOG_NAME,
    EventLog,
    LogRecord,
    canonical_hash,
    canonical_json,
    list_snapshots,
    read_snapshot,
    write_log,
)

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(FIXTURES))
import regen_golden  # noqa: E402


def test_canonical_json_is_fixed():
    assert canonical_json({"b": 1, "a": [1, "é"]}) == '{"a":[1,"é"],"b":1}'
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})
    assert canonical_hash({"a": 1}) == canonical_hash({"a": 1})


def test_record_roundtrip_and_checks():
    rec = LogRecord.make(7, "memory", {"kind": "observed", "x": 1})
    assert LogRecord.decode(rec.encode()) == rec
    line = rec.encode().replace(b'"x":1', b'"x":2')
    with pytest.raises(LogFormatError):
        LogRecord.decode(line)
    with pytest.raises(LogFormatError):
        LogRecord.make(1, "bogus", {"kind": "x"})
    with pytest.raises(LogFormatError):
        LogRecord.decode(b"not a record")


def test_one_record_append_then_replay(tmp_path):
    Substrate.init(tmp_path)
    with Substrate.open(tmp_path, clock=ManualClock(5)) as sub:
        sub.memory.create_context("c")
        expected = sub.canonical_hash()
    with Substrate.open(tmp_path, clock=ManualClock(5)) as again:
        assert again.canonical_hash() == expected
        assert again.log.last_seq == 1


def test_open_missing_and_double_init(tmp_path):
    with pytest.raises(NotFoundError):
        Substrate.open(tmp_path / "none")
    Substrate.init(tmp_path)
    with pytest.raises(LogFormatError):
        Substrate.init(tmp_path)


def _populated(tmp_path, n_ops=120, seed=3):
    Substrate.init(tmp_path)
    sub = Substrate.open(tmp_path, clock=ManualClock(0), fsync=False)
    random_ops(sub, random.Random(seed), n_ops)
    return sub


def test_truncate_mid_record_recovers_last_whole_record(tmp_path):
    sub = _populated(tmp_path)
    n = sub.log.last_seq
    sub.close()
    path = tmp_path / LOG_NAME
    data = path.read_bytes()
    last_line_start = data.rstrip(b"\n").rfind(b"\n") + 1
    cut = last_line_start + (len(data) - last_line_start) // 2
    path.write_bytes(data[:cut])
    log = EventLog(path)
    assert log.last_seq == n - 1 and log.truncated_bytes == cut - last_line_start
    expected = Substrate.replay(log.records, clock=ManualClock(0)).canonical_hash()
    log.close()
    assert path.read_bytes() == data[:last_line_start]
    with Substrate.open(tmp_path, clock=ManualClock(0)) as reopened:
        assert reopened.canonical_hash() == expected


def test_complete_line_with_bad_crc_at_tail_is_torn(tmp_path):
    sub = _populated(tmp_path, 30)
    n = sub.log.last_seq
    sub.close()
    path = tmp_path / LOG_NAME
    data = bytearray(path.read_bytes())
    data[-3] ^= 0x01
    path.write_bytes(bytes(data))
    log = EventLog(path)
    assert log.last_seq == n - 1
    log.close()


def test_corruption_in_middle_is_an_error(tmp_path):
    sub = _populated(tmp_path, 30)
    sub.close()
    path = tmp_path / LOG_NAME
    lines = path.read_bytes().split(b"\n")
    lines[2] = lines[2].replace(b'"kind"', b'"kinx"')
    path.write_bytes(b"\n".join(lines))
    with pytest.raises(LogFormatError):
        EventLog(path)


def test_every_record_boundary_prefix_opens(tmp_path):
    sub = _populated(tmp_path, 80)
    records = sub.log.records
    hashes = [Substrate.replay(records[:i], clock=ManualClock(0)).canonical_hash() for i in range(len(records) + 1)]
    sub.close()
    data = (tmp_path / LOG_NAME).read_bytes()
    boundaries = [i + 1 for i, b in enumerate(data) if b == ord("\n")]
    assert len(boundaries) == len(records) + 1
    for i, end in enumerate(boundaries):
        d = tmp_path / f"prefix{i}"
        d.mkdir()
        (d / LOG_NAME).write_bytes(data[:end])
        with Substrate.open(d, clock=ManualClock(0)) as s:
            assert s.log.last_seq == i
            assert s.canonical_hash() == hashes[i]


def test_empty_and_header_only_logs(tmp_path):
    p = tmp_path / LOG_NAME
    p.write_bytes(b"")
    assert EventLog(p).last_seq == 0
    p.write_bytes(LOG_HEADER.encode()[:5])
    assert EventLog(p).last_seq == 0
    p.write_bytes(b"#other-format\n")
    with pytest.raises(LogFormatError):
        EventLog(p)


def test_snapshot_plus_tail(tmp_path):
    sub = _populated(tmp_path, 100)
    sub.snapshot()
    random_ops(sub, random.Random(99), 60)
    expected = sub.canonical_hash()
    sub.close()
    with Substrate.open(tmp_path, clock=ManualClock(0)) as reopened:
        assert reopened.canonical_hash() == expected
    # and the snapshot matches a replay of the prefix it covers
    (seq, snap), = list_snapshots(tmp_path)
    _, state = read_snapshot(snap)
    records = EventLog(tmp_path / LOG_NAME).records
    assert canonical_json(state) == canonical_json(Substrate.replay(records[:seq]).canonical_state())


def test_corrupt_or_future_snapshot_is_skipped(tmp_path):
    sub = _populated(tmp_path, 60)
    good = sub.snapshot()
    expected = sub.canonical_hash()
    sub.close()
    bad = tmp_path / "substrate.snap.99999"
    bad.write_text(good.read_text())  # newer than the log: ignored
    newer = tmp_path / f"substrate.snap.{int(good.name.rsplit('.', 1)[1])}"
    text = good.read_text()
    newer.write_text(text[:-5] + "00000")  # same seq, corrupted body
    with Substrate.open(tmp_path, clock=ManualClock(0)) as reopened:
        assert reopened.canonical_hash() == expected


def test_compact_keeps_newest(tmp_path):
    sub = _populated(tmp_path, 40)
    sub.snapshot()
    random_ops(sub, random.Random(5), 20)
    newest = sub.compact(keep=1)
    assert [p for _, p in list_snapshots(tmp_path)] == [newest]
    sub.close()


def test_replay_500_ops_hash():
    sub = Substrate(clock=ManualClock(0))
    random_ops(sub, random.Random(500), 500)
    assert Substrate.replay(sub.log.records).canonical_hash() == sub.canonical_hash()


def test_view_as_of_seq():
    sub = Substrate(clock=ManualClock(0))
    random_ops(sub, random.Random(4), 100)
    half = sub.log.last_seq // 2
    assert sub.view(half).canonical_hash() == Substrate.replay(sub.log.records[:half]).canonical_hash()


def test_unknown_record_kind_is_format_error():
    bad = LogRecord.make(1, "memory", {"kind": "teleported"})
    with pytest.raises(LogFormatError):
        Substrate.replay([bad])
    with pytest.raises(LogFormatError):
        Substrate.replay([LogRecord.make(1, "meta", {"kind": "mystery"})])
    with pytest.raises(LogFormatError):
        Substrate.replay([LogRecord.make(2, "meta", {"kind": "cycle_completed"})])


def test_golden_fixture_hash(tmp_path):
    shutil.copy(FIXTURES / "golden.log", tmp_path / LOG_NAME)
    with Substrate.open(tmp_path, clock=ManualClock(0)) as sub:
        assert sub.canonical_hash() == (FIXTURES / "golden.sha256").read_text().strip()


def test_golden_fixture_bytes_regenerate():
    sub = regen_golden.build()
    encoded = (LOG_HEADER + "\n").encode() + b"".join(r.encode() for r in sub.log.records)
    assert encoded == (FIXTURES / "golden.log").read_bytes()


def test_writer_lock(tmp_path):
    Substrate.init(tmp_path)
    with Substrate.open(tmp_path):
        with pytest.raises(LockError):
            Substrate.open(tmp_path)
    Substrate.open(tmp_path).close()


def test_failed_write_surfaces(tmp_path):
    Substrate.init(tmp_path)
    sub = Substrate.open(tmp_path, clock=ManualClock(0))
    sub.log._fh.close()
    with pytest.raises(ValueError):
        sub.knowledge.ingest_claim("x", Provenance("doc"))
    assert sub.log.last_seq == 0 and not sub.knowledge.claims
    sub.log._fh = None
    sub.close()


def test_write_log_roundtrip(tmp_path):
    sub = Substrate(clock=ManualClock(0))
    random_ops(sub, random.Random(6), 50)
    write_log(sub.log.records, tmp_path / "x.log")
    log = EventLog(tmp_path / "x.log")
    assert [json.dumps(r.body) for r in log.records] == [json.dumps(r.body) for r in sub.log.records]
