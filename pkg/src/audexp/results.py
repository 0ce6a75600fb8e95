"""Persist session results in open line-oriented formats and reload them.

A result directory (created by finalize, never overwritten) holds:

  events_<subject>_<stamp>.jsonl   schema header line, then one event per
                                   line in timestamp order, microseconds
                                   relative to session begin
  summary_<subject>_<stamp>.json   study/subject/seed/plan digest, event
                                   counts, and the single wall-clock anchor
  trace_<subject>_<stamp>_trialNNN.csv   per-trial slider traces

Field names are frozen in docs/result-format.md and guarded by golden
tests.  load_result(finalize(x)) reproduces x exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .engine import Event, SessionLog, SessionPlan, plan_digest

EVENTS_SCHEMA = "audexp.events/1"
SUMMARY_SCHEMA = "audexp.summary/1"


class OutDirExists(Exception):
    pass


class SchemaVersionUnsupported(Exception):
    pass


class CorruptFile(Exception):
    def __init__(self, path: str, line: int, detail: str) -> None:
        super().__init__(f"{path}:{line}: {detail}")
        self.line = line


@dataclass(frozen=True)
class ResponseRecord:
    trial: int
    question: int
    value: int
    rt_ms: float
    t_us: int


@dataclass(frozen=True)
class ContinuousTrace:
    trial: int
    samples: tuple[tuple[int, float], ...]  # (t_us, value)


@dataclass(frozen=True)
class ResultSummary:
    study: str
    subject_id: str
    seed: int
    plan_digest: str
    started_us: int
    ended_us: int
    aborted: bool
    event_counts: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class SessionResult:
    summary: ResultSummary
    responses: tuple[ResponseRecord, ...]
    traces: tuple[ContinuousTrace, ...]
    events: tuple[Event, ...]


def _relative_events(log: SessionLog) -> tuple[Event, ...]:
    t0 = log.begin_us
    return tuple(Event(e.t_us - t0, e.kind, dict(e.data)) for e in log.events)


def _derive_responses(events: tuple[Event, ...]) -> tuple[ResponseRecord, ...]:
    return tuple(
        ResponseRecord(
            trial=e.data["trial"],
            question=e.data["q"],
            value=e.data["value"],
            rt_ms=e.data["rt_ms"],
            t_us=e.t_us,
        )
        for e in events
        if e.kind == "answer_committed"
    )


def _derive_traces(events: tuple[Event, ...]) -> tuple[ContinuousTrace, ...]:
    by_trial: dict[int, list[tuple[int, float]]] = {}
    for e in events:
        if e.kind == "continuous_sample":
            by_trial.setdefault(e.data["trial"], []).append((e.t_us, e.data["value"]))
    return tuple(
        ContinuousTrace(trial, tuple(samples)) for trial, samples in sorted(by_trial.items())
    )


def build_result(log: SessionLog, plan: SessionPlan) -> SessionResult:
    """Assemble the in-memory result view of a finalized log."""
    if not log.finalized:
        raise ValueError("log has neither a session end nor an abort marker")
    events = _relative_events(log)
    counts: dict[str, int] = {}
    for e in events:
        counts[e.kind] = counts.get(e.kind, 0) + 1
    summary = ResultSummary(
        study=plan.spec.name,
        subject_id=plan.subject_id,
        seed=plan.seed,
        plan_digest=plan_digest(plan),
        started_us=0,
        ended_us=events[-1].t_us if events else 0,
        aborted=any(e.kind == "session_abort" for e in events),
        event_counts=tuple(sorted(counts.items())),
    )
    return SessionResult(
        summary=summary,
        responses=_derive_responses(events),
        traces=_derive_traces(events),
        events=events,
    )


def serialize_events(log: SessionLog, plan: SessionPlan) -> str:
    """The events file body: deterministic for a given (log, plan)."""
    header = {
        "schema": EVENTS_SCHEMA,
        "study": plan.spec.name,
        "subject_id": plan.subject_id,
        "seed": plan.seed,
        "plan_digest": plan_digest(plan),
    }
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    for e in _relative_events(log):
        obj = {"t_us": e.t_us, "kind": e.kind, **e.data}
        lines.append(json.dumps(obj, sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]", "-", name) or "anon"


def finalize(log: SessionLog, plan: SessionPlan, out_dir: str | Path) -> list[Path]:
    """Write the result directory for one finished (or aborted) session."""
    if not log.finalized:
        raise ValueError("log has neither a session end nor an abort marker")
    out = Path(out_dir)
    if out.exists():
        raise OutDirExists(f"result directory {out} already exists")
    out.mkdir(parents=True)

    anchor = datetime.now(timezone.utc)
    stamp = anchor.strftime("%Y%m%dT%H%M%SZ")
    subject = _sanitize(plan.subject_id)
    result = build_result(log, plan)
    written: list[Path] = []

    events_path = out / f"events_{subject}_{stamp}.jsonl"
    events_path.write_text(serialize_events(log, plan), encoding="utf-8", newline="\n")
    written.append(events_path)

    summary_path = out / f"summary_{subject}_{stamp}.json"
    summary_obj = {
        "schema": SUMMARY_SCHEMA,
        "study": result.summary.study,
        "subject_id": plan.subject_id,
        "seed": result.summary.seed,
        "plan_digest": result.summary.plan_digest,
        "wall_start_utc": anchor.isoformat(),
        "started_us": result.summary.started_us,
        "ended_us": result.summary.ended_us,
        "aborted": result.summary.aborted,
        "event_counts": {k: n for k, n in result.summary.event_counts},
        "n_trials": len(plan.trials),
    }
    summary_path.write_text(
        json.dumps(summary_obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
        newline="\n",
    )
    written.append(summary_path)

    for trace in result.traces:
        trace_path = out / f"trace_{subject}_{stamp}_trial{trace.trial:03d}.csv"
        rows = ["t_us,value"]
        rows.extend(f"{t},{v!r}" for t, v in trace.samples)
        trace_path.write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")
        written.append(trace_path)
    return written


def _read_events(path: Path) -> tuple[dict, tuple[Event, ...]]:
    text = path.read_text(encoding="utf-8")
    name = path.name
    if not text.endswith("\n"):
        raise CorruptFile(name, text.count("\n") + 1, "truncated final line")
    lines = text.split("\n")[:-1]
    if not lines:
        raise CorruptFile(name, 1, "empty events file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorruptFile(name, 1, f"bad header: {exc}") from exc
    if header.get("schema") != EVENTS_SCHEMA:
        raise SchemaVersionUnsupported(f"events schema {header.get('schema')!r}")
    events = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
            t_us = obj.pop("t_us")
            kind = obj.pop("kind")
        except (json.JSONDecodeError, KeyError) as exc:
            raise CorruptFile(name, lineno, f"bad event record: {exc}") from exc
        events.append(Event(t_us, kind, obj))
    return header, tuple(events)


def _read_trace(path: Path) -> ContinuousTrace:
    m = re.search(r"trial(\d+)\.csv$", path.name)
    if m is None:
        raise CorruptFile(path.name, 1, "trace file name does not carry a trial number")
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln]
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            t_str, v_str = line.split(",")
            samples.append((int(t_str), float(v_str)))
        except ValueError as exc:
            raise CorruptFile(path.name, lineno, f"bad trace row: {exc}") from exc
    return ContinuousTrace(trial=int(m.group(1)), samples=tuple(samples))


def load_result(result_dir: str | Path) -> SessionResult:
    """Reload a finalized result directory into the in-memory view."""
    out = Path(result_dir)
    summaries = sorted(out.glob("summary_*.json"))
    if len(summaries) != 1:
        raise CorruptFile(str(out), 1, f"expected one summary file, found {len(summaries)}")
    summary_obj = json.loads(summaries[0].read_text(encoding="utf-8"))
    if summary_obj.get("schema") != SUMMARY_SCHEMA:
        raise SchemaVersionUnsupported(f"summary schema {summary_obj.get('schema')!r}")

    events_files = sorted(out.glob("events_*.jsonl"))
    if len(events_files) != 1:
        raise CorruptFile(str(out), 1, f"expected one events file, found {len(events_files)}")
    _, events = _read_events(events_files[0])

    traces = tuple(sorted((_read_trace(p) for p in sorted(out.glob("trace_*.csv"))),
                          key=lambda t: t.trial))
    summary = ResultSummary(
        study=summary_obj["study"],
        subject_id=summary_obj["subject_id"],
        seed=summary_obj["seed"],
        plan_digest=summary_obj["plan_digest"],
        started_us=summary_obj["started_us"],
        ended_us=summary_obj["ended_us"],
        aborted=summary_obj["aborted"],
        event_counts=tuple(sorted(summary_obj["event_counts"].items())),
    )
    return SessionResult(
        summary=summary,
        responses=_derive_responses(events),
        traces=traces,
        events=events,
    )
