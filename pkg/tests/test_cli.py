import io
import json
import subprocess
import sys

import pytest

from strata import DAY_MS
from strata.cli import main
from strata.knowledge import Claim
from strata.memory import Intention, MemoryFact
from strata.storage import LOG_NAME
from strata.wisdom import WisdomEntry


def run(tmp_path, *argv, clock=1_000_000, structured=False):
    buf = io.StringIO()
    head = ["--substrate", str(tmp_path), "--clock", str(clock)]
    if structured:
        head += ["--output", "structured"]
    code = main([*head, *argv], stream=buf)
    return code, buf.getvalue()


def records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_init_and_unknown_substrate(tmp_path, capsys):
    assert run(tmp_path / "none", "stats")[0] == 1
    assert "error:" in capsys.readouterr().err
    assert run(tmp_path, "init")[0] == 0
    assert run(tmp_path, "init")[0] == 1


def test_usage_error_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["--substrate", str(tmp_path), "nosuchcommand"])
    assert exc.value.code == 2


def test_structured_round_trip(tmp_path):
    run(tmp_path, "init")
    _, out = run(tmp_path, "ingest", "Project Alpha uses LoRA", "--source", "doc1", structured=True)
    claim = Claim.from_dict(records(out)[0])
    assert claim.statement == "Project Alpha uses LoRA"
    _, out = run(tmp_path, "observe", "user prefers dark mode", "--context", "c", "--create-context",
                 "--session", "s1", structured=True)
    fact = MemoryFact.from_dict(records(out)[0])
    assert fact.session_id == "s1" and fact.to_dict() == records(out)[0]
    _, out = run(tmp_path, "propose", "prefer dark mode", "--session", "s1", structured=True)
    entry = WisdomEntry.from_dict(records(out)[0])
    assert entry.to_dict() == records(out)[0]
    _, out = run(tmp_path, "schedule", "review PR", "--context", "c", "--due-at", "1000010", structured=True)
    assert Intention.from_dict(records(out)[0]).to_dict() == records(out)[0]


def test_supersede_and_query(tmp_path):
    run(tmp_path, "init")
    _, a = run(tmp_path, "ingest", "Project Alpha fine-tuning method is LoRA", "--source", "d1")
    _, b = run(tmp_path, "ingest", "Project Alpha fine-tuning method is DoRA", "--source", "d2", clock=2_000_000)
    a, b = a.strip(), b.strip()
    assert run(tmp_path, "supersede", a, b, "--reason", "switched")[0] == 0
    _, out = run(tmp_path, "query", "--layer", "knowledge", "Project Alpha method", structured=True)
    assert [r["item_id"] for r in records(out)] == [b]
    _, out = run(tmp_path, "query", "--layer", "flat", "Project Alpha method", structured=True)
    assert {r["item_id"] for r in records(out)} == {a, b}


def test_auto_query_routes_to_memory_chronologically(tmp_path):
    run(tmp_path, "init")
    run(tmp_path, "observe", "the theme changed to dark", "--context", "c", "--create-context", "--valid-from", "500")
    run(tmp_path, "observe", "the theme changed to light", "--context", "c", "--valid-from", "100")
    _, out = run(tmp_path, "query", "when did the theme change", "--context", "c", structured=True)
    rows = records(out)
    assert [r["layer"] for r in rows] == ["memory", "memory"]
    assert [r["explanation"]["valid_from"] for r in rows] == [100, 500]


def test_due_and_reinforce(tmp_path):
    run(tmp_path, "init")
    run(tmp_path, "observe", "x", "--context", "c", "--create-context")
    _, iid = run(tmp_path, "schedule", "review PR", "--context", "c", "--due-at", "1000010")
    _, out = run(tmp_path, "due", "--now", "1000009", structured=True)
    assert records(out) == []
    _, out = run(tmp_path, "due", "--now", "1000010", structured=True)
    assert [r["id"] for r in records(out)] == [iid.strip()]
    _, out = run(tmp_path, "reinforce", "m0000002", structured=True, clock=1_000_000 + DAY_MS)
    assert records(out)[0]["reinforcement_count"] == 1
    code, _ = run(tmp_path, "schedule", "both", "--context", "c", "--due-at", "5", "--tag", "x")
    assert code == 1


def test_consolidate_empty_store(tmp_path):
    run(tmp_path, "init")
    code, out = run(tmp_path, "consolidate", structured=True)
    assert code == 0
    assert records(out)[0]["counts"] == {"archived": 0, "candidates": 0, "promoted": 0, "tier_changes": 0}
    assert (tmp_path / "reports" / "cycle.1.json").exists()


def test_consolidate_promotes_and_preload(tmp_path):
    run(tmp_path, "init")
    for i, s in enumerate(("s1", "s2", "s3")):
        run(tmp_path, "observe", "always run the linter before commit", "--context", "c", "--create-context",
            "--session", s, clock=1_000_000 + i)
    _, out = run(tmp_path, "consolidate", structured=True, clock=1_000_010)
    assert records(out)[0]["counts"]["promoted"] == 1
    _, out = run(tmp_path, "preload")
    assert out.strip() == "[core] always run the linter before commit"


def test_sweep_snapshot_stats(tmp_path):
    run(tmp_path, "init")
    run(tmp_path, "observe", "old", "--context", "c", "--create-context", clock=0)
    _, out = run(tmp_path, "sweep", structured=True, clock=100 * DAY_MS)
    assert records(out)[0]["archived"] == ["m0000002"]
    _, out = run(tmp_path, "snapshot", structured=True)
    assert records(out)[0]["seq"] == 3
    _, out = run(tmp_path, "stats", structured=True)
    st = records(out)[0]
    assert st["archived_facts"] == 1 and st["seq"] == 3


def _script(d):
    outs = []
    outs.append(run(d, "init")[1])
    outs.append(run(d, "ingest", "Alpha uses LoRA", "--source", "d")[1])
    outs.append(run(d, "observe", "deploy happened", "--context", "c", "--create-context", "--session", "s")[1])
    outs.append(run(d, "propose", "prefer small commits")[1])
    outs.append(run(d, "consolidate", structured=True)[1])
    outs.append(run(d, "stats", structured=True)[1])
    return outs


def test_fixed_clock_is_bit_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    oa, ob = _script(a), _script(b)
    assert oa[1:] == ob[1:]
    assert (a / LOG_NAME).read_bytes() == (b / LOG_NAME).read_bytes()


def test_bench_command(tmp_path):
    code, out = run(tmp_path, "bench", "--seed", "42", "--resamples", "500", "--out", str(tmp_path / "report"),
                    structured=True)
    assert code == 0
    rep = records(out)[0]
    assert rep["n"] == 80
    assert json.loads((tmp_path / "report.json").read_text()) == rep
    assert "McNemar" in (tmp_path / "report.txt").read_text()


def test_env_var_and_module_entry(tmp_path):
    env_dir = tmp_path / "env"
    proc = subprocess.run([sys.executable, "-m", "strata", "init"], capture_output=True, text=True,
                          env={"STRATA_SUBSTRATE": str(env_dir), "PATH": ""}, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert (env_dir / LOG_NAME).exists()
