"""Compile specs into session plans and execute them as timed event loops.

A SessionPlan is a pure function of (spec, subject id, seed, stimulus
bytes): the stimulus ordering is resolved, trigger codes assigned, and
every referenced file content-hashed, so integrity can be re-checked any
time before a run.  run_session drives one of five study-type loops over
abstract subject/playback/trigger/clock ports, appending to an
append-only log whose timestamps never decrease.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

from . import ordering
from .clock import Clock
from .ordering import StimulusArray, build_array, interleave_baseline
from .rng import SplitMix64
from .specfile import (
    DisplayStyle,
    ExperimentSpec,
    Finding,
    Question,
    StudyType,
    TriggerMode,
    ValidationReport,
    parse_tree,
    serialize_spec,
    to_tree,
    validate_spec,
)
from .triggers import TriggerMessage
from .wav import Clip, probe_wav

PLAN_SCHEMA = "audexp.plan/1"

BASELINE_CODE = "BASE"


class ValidationFailed(Exception):
    def __init__(self, report: ValidationReport) -> None:
        lines = [f"{f.code} at {f.location}: {f.message}" for f in report.errors]
        super().__init__("spec failed validation:\n" + "\n".join(lines))
        self.report = report


class PlanFormatError(Exception):
    pass


class SubjectAbort(Exception):
    """Raised by a subject port when the subject side goes away."""


class PlaybackFailure(Exception):
    pass


class ScriptExhausted(Exception):
    pass


class SessionAborted(Exception):
    """Session ended early; the partial log is attached and must be persisted."""

    def __init__(self, reason: str, log: "SessionLog") -> None:
        super().__init__(reason)
        self.reason = reason
        self.log = log


# --- events and log ----------------------------------------------------------


@dataclass(frozen=True)
class Event:
    t_us: int
    kind: str
    data: dict[str, Any] = field(default_factory=dict)


class SessionLog:
    """Append-only, timestamp-ordered record of one session."""

    def __init__(self) -> None:
        self.events: list[Event] = []

    def append(self, t_us: int, kind: str, **data: Any) -> None:
        if self.events and t_us < self.events[-1].t_us:
            raise ValueError("log timestamps must be non-decreasing")
        self.events.append(Event(t_us, kind, data))

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e.kind == kind)

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    @property
    def begin_us(self) -> int:
        return self.events[0].t_us if self.events else 0

    @property
    def finalized(self) -> bool:
        return any(e.kind in ("session_end", "session_abort") for e in self.events)


# --- plans --------------------------------------------------------------------


@dataclass(frozen=True)
class TrialPlan:
    kind: str  # single | pair | baseline_then_single
    stim: tuple[int, ...]
    onset_codes: tuple[str, ...]
    questions: tuple[int, ...]
    continuous: bool = False


@dataclass(frozen=True)
class SessionPlan:
    subject_id: str
    seed: int
    spec_digest: str
    spec: ExperimentSpec
    trials: tuple[TrialPlan, ...]
    stim_hashes: tuple[tuple[str, str], ...]  # (file, sha256) by stimulus index

    @property
    def name(self) -> str:
        return self.spec.name


def spec_digest(spec: ExperimentSpec) -> str:
    return hashlib.sha256(serialize_spec(spec).encode("utf-8")).hexdigest()


def assign_codes(spec: ExperimentSpec) -> tuple[str, ...]:
    """Per-stimulus onset codes: code_map override, else BASE for the
    baseline stimulus, else "S" + zero-padded 1-based ordinal."""
    codes = []
    for i, s in enumerate(spec.stimuli):
        override = spec.trigger.code_for(s.file) if spec.trigger else None
        if override is not None:
            codes.append(override)
        elif s.baseline:
            codes.append(BASELINE_CODE)
        else:
            codes.append(f"S{i + 1:03d}")
    return tuple(codes)


def compile_plan(
    spec: ExperimentSpec, subject_id: str, seed: int, stim_root: str | Path
) -> SessionPlan:
    """Resolve a validated spec into a per-subject session plan."""
    report = validate_spec(spec, stim_root)
    if not report.ok:
        raise ValidationFailed(report)

    array = build_array(spec.randomization, spec.stimuli, spec.repetitions, seed)
    codes = assign_codes(spec)
    all_questions = tuple(range(len(spec.questions)))
    st = spec.study_type

    trials: list[TrialPlan] = []
    if st is StudyType.NEUROPHYSIOLOGICAL:
        baseline_index = next(i for i, s in enumerate(spec.stimuli) if s.baseline)
        woven = interleave_baseline(array, baseline_index)
        for k in range(0, len(woven.items), 2):
            stim = woven.items[k + 1]
            assert isinstance(stim, int)
            trials.append(
                TrialPlan(
                    kind="baseline_then_single",
                    stim=(baseline_index, stim),
                    onset_codes=(codes[baseline_index], codes[stim]),
                    questions=all_questions,
                )
            )
    elif st is StudyType.COMPARISON_RATING:
        for item in array.items:
            assert isinstance(item, tuple)
            a, b = item
            trials.append(
                TrialPlan(
                    kind="pair",
                    stim=(a, b),
                    onset_codes=(codes[a], codes[b]),
                    questions=all_questions,
                )
            )
    else:
        continuous = st is StudyType.CONTINUOUS_RATING
        for item in array.items:
            assert isinstance(item, int)
            trials.append(
                TrialPlan(
                    kind="single",
                    stim=(item,),
                    onset_codes=(codes[item],),
                    questions=all_questions,
                    continuous=continuous,
                )
            )

    root = Path(stim_root)
    hashes = tuple(
        (s.file, hashlib.sha256((root / s.file).read_bytes()).hexdigest())
        for s in spec.stimuli
    )
    return SessionPlan(
        subject_id=subject_id,
        seed=seed,
        spec_digest=spec_digest(spec),
        spec=spec,
        trials=tuple(trials),
        stim_hashes=hashes,
    )


def serialize_plan(plan: SessionPlan) -> str:
    obj = {
        "schema": PLAN_SCHEMA,
        "subject_id": plan.subject_id,
        "seed": plan.seed,
        "spec_digest": plan.spec_digest,
        "spec": to_tree(plan.spec),
        "trials": [
            {
                "kind": t.kind,
                "stim": list(t.stim),
                "onset_codes": list(t.onset_codes),
                "questions": list(t.questions),
                "continuous": t.continuous,
            }
            for t in plan.trials
        ],
        "stim_hashes": [[f, h] for f, h in plan.stim_hashes],
    }
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def plan_digest(plan: SessionPlan) -> str:
    return hashlib.sha256(serialize_plan(plan).encode("utf-8")).hexdigest()


def save_plan(plan: SessionPlan, path: str | Path) -> None:
    Path(path).write_text(serialize_plan(plan), encoding="utf-8", newline="\n")


def deserialize_plan(text: str) -> SessionPlan:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanFormatError(f"plan is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("schema") != PLAN_SCHEMA:
        raise PlanFormatError(f"unsupported plan schema {obj.get('schema')!r}")
    try:
        spec = parse_tree(obj["spec"])
        trials = tuple(
            TrialPlan(
                kind=t["kind"],
                stim=tuple(t["stim"]),
                onset_codes=tuple(t["onset_codes"]),
                questions=tuple(t["questions"]),
                continuous=t["continuous"],
            )
            for t in obj["trials"]
        )
        return SessionPlan(
            subject_id=obj["subject_id"],
            seed=obj["seed"],
            spec_digest=obj["spec_digest"],
            spec=spec,
            trials=trials,
            stim_hashes=tuple((f, h) for f, h in obj["stim_hashes"]),
        )
    except (KeyError, TypeError) as exc:
        raise PlanFormatError(f"plan is missing fields: {exc}") from exc


def load_plan(path: str | Path) -> SessionPlan:
    return deserialize_plan(Path(path).read_text(encoding="utf-8"))


def check_plan(
    plan: SessionPlan, stim_root: str | Path, spec: ExperimentSpec | None = None
) -> ValidationReport:
    """Re-verify plan integrity: files present, bytes unchanged, and (when
    a spec is supplied) the spec unchanged since compile."""
    root = Path(stim_root)
    errors: list[Finding] = []
    for i, (file, digest) in enumerate(plan.stim_hashes):
        loc = f"stimuli[{i}].file"
        path = root / file
        if not path.is_file():
            errors.append(Finding("StimulusFileMissing", f"{file}: not found under {root}", loc))
            continue
        if hashlib.sha256(path.read_bytes()).hexdigest() != digest:
            errors.append(
                Finding("HashMismatch", f"{file}: content changed since compile", loc)
            )
    if spec is not None and spec_digest(spec) != plan.spec_digest:
        errors.append(
            Finding("SpecDigestMismatch", "spec differs from the one compiled", "spec")
        )
    key = lambda f: (f.location, f.code)
    return ValidationReport(errors=tuple(sorted(errors, key=key)), warnings=())


def load_clips(plan: SessionPlan, stim_root: str | Path) -> dict[int, Clip]:
    root = Path(stim_root)
    return {
        i: Clip(index=i, path=root / s.file, info=probe_wav(root / s.file))
        for i, s in enumerate(plan.spec.stimuli)
    }


# --- ports ---------------------------------------------------------------------


class SubjectPort(Protocol):
    def apply_theme(self, display: DisplayStyle) -> None: ...

    def show_instructions(self, text: str) -> None: ...

    def show_question(
        self, prompt: str, scale_min: int, scale_max: int, anchors: tuple[str, str] | None
    ) -> tuple[int, int]:
        """Returns (committed value, commit timestamp in clock µs)."""

    def start_continuous(self, min_label: str, max_label: str, duration_us: int | None) -> None: ...

    def stop_continuous(self) -> None: ...

    def current_slider(self) -> float: ...

    def session_done(self) -> None: ...


class PlaybackPort(Protocol):
    def start(self, index: int, requested_us: int, label: str | None = None) -> int: ...

    def is_done(self, index: int) -> bool: ...

    def wait_done(self, index: int) -> int: ...

    def known_duration_us(self, index: int) -> int | None: ...


class ScriptedSubject:
    """Deterministic headless subject for simulated runs.

    Answer policies: "midpoint", ("fixed", v), ("list", [v, ...]) or
    ("uniform", seed).  Slider policies: ("constant", v) or "ramp" (rises
    linearly from 0 to 1 over each stimulus).  The configured think time
    advances the session clock before each commit.
    """

    def __init__(
        self,
        clock: Clock,
        answers: Any = "midpoint",
        slider: Any = "ramp",
        answer_delay_ms: int = 500,
    ) -> None:
        self._clock = clock
        self._answers = answers
        self._slider = slider
        self._delay_us = answer_delay_ms * 1000
        self._queue: list[int] | None = None
        self._rng: SplitMix64 | None = None
        if isinstance(answers, tuple) and answers[0] == "list":
            self._queue = list(answers[1])
        if isinstance(answers, tuple) and answers[0] == "uniform":
            self._rng = SplitMix64(answers[1])
        self._window: tuple[int, int | None] | None = None

    def apply_theme(self, display: DisplayStyle) -> None:
        pass

    def show_instructions(self, text: str) -> None:
        pass

    def show_question(
        self, prompt: str, scale_min: int, scale_max: int, anchors: tuple[str, str] | None
    ) -> tuple[int, int]:
        self._clock.wait_until(self._clock.now_us() + self._delay_us)
        if self._queue is not None:
            if not self._queue:
                raise ScriptExhausted("answer list shorter than the question sequence")
            value = self._queue.pop(0)
        elif self._rng is not None:
            value = scale_min + self._rng.below(scale_max - scale_min + 1)
        elif isinstance(self._answers, tuple) and self._answers[0] == "fixed":
            value = self._answers[1]
        else:
            value = (scale_min + scale_max) // 2
        return value, self._clock.now_us()

    def start_continuous(self, min_label: str, max_label: str, duration_us: int | None) -> None:
        self._window = (self._clock.now_us(), duration_us)

    def stop_continuous(self) -> None:
        self._window = None

    def current_slider(self) -> float:
        if isinstance(self._slider, tuple) and self._slider[0] == "constant":
            return float(self._slider[1])
        if self._window is None:
            return 0.0
        start, duration = self._window
        if not duration:
            return 1.0
        return min(1.0, max(0.0, (self._clock.now_us() - start) / duration))

    def session_done(self) -> None:
        pass


def scripted_subject(
    clock: Clock, answers: Any = "midpoint", slider: Any = "ramp", answer_delay_ms: int = 500
) -> ScriptedSubject:
    return ScriptedSubject(clock, answers, slider, answer_delay_ms)


# --- session execution -----------------------------------------------------------


def response_code(value: int) -> str:
    """Trigger code for a committed rating: RSP + last decimal digit."""
    return f"RSP{abs(value) % 10}"


class _Session:
    def __init__(
        self,
        plan: SessionPlan,
        subject: SubjectPort,
        playback: PlaybackPort,
        trigger,
        clock: Clock,
    ) -> None:
        self.plan = plan
        self.spec = plan.spec
        self.subject = subject
        self.playback = playback
        self.trigger = trigger
        self.clock = clock
        self.log = SessionLog()

    def now(self) -> int:
        return self.clock.now_us()

    def run(self) -> SessionLog:
        st = self.spec.study_type
        needs_trigger = st in (StudyType.EEG, StudyType.NEUROPHYSIOLOGICAL)
        if needs_trigger and self.trigger is None:
            raise ValueError(f"{st.value} sessions require a trigger link")
        if not needs_trigger and self.trigger is not None:
            raise ValueError(f"{st.value} sessions must not carry a trigger link")
        try:
            self._run_all()
        except (SubjectAbort, ScriptExhausted) as exc:
            raise self._abort(f"subject aborted: {exc}") from exc
        except PlaybackFailure as exc:
            raise self._abort(f"playback failed: {exc}") from exc
        except Exception as exc:
            from .triggers import TriggerError

            if isinstance(exc, TriggerError):
                raise self._abort(f"trigger link failed: {exc}") from exc
            raise
        return self.log

    def _abort(self, reason: str) -> SessionAborted:
        self.log.append(self.now(), "session_abort", reason=reason)
        return SessionAborted(reason, self.log)

    def _run_all(self) -> None:
        self.log.append(self.now(), "session_begin", subject_id=self.plan.subject_id)
        self.subject.apply_theme(self.spec.display)
        if self.trigger is not None:
            self.trigger.begin_session()
        isi_us = self.spec.isi_ms * 1000
        for trial_index, trial in enumerate(self.plan.trials):
            if trial_index > 0 and isi_us:
                self.clock.wait_until(self.now() + isi_us)
            self._run_trial(trial_index, trial)
        if self.trigger is not None:
            self.trigger.end_session()
        self.subject.session_done()
        self.log.append(self.now(), "session_end")

    def _run_trial(self, trial_index: int, trial: TrialPlan) -> None:
        if trial.kind == "baseline_then_single":
            self._play(trial.stim[0], trial.onset_codes[0], baseline=True)
            self._play(trial.stim[1], trial.onset_codes[1])
        elif trial.kind == "pair":
            for pos in (0, 1):
                index = trial.stim[pos]
                entry = self.spec.stimuli[index]
                label = entry.label or entry.title
                self._play(index, trial.onset_codes[pos], label=label)
        elif trial.continuous:
            self._play_continuous(trial_index, trial)
        else:
            self._play(trial.stim[0], trial.onset_codes[0])
        for q_index in trial.questions:
            self._ask(trial_index, q_index)

    def _play(
        self, index: int, code: str, baseline: bool = False, label: str | None = None
    ) -> int:
        onset = self.playback.start(index, self.now(), label=label)
        kind = "baseline_onset" if baseline else "stimulus_onset"
        self.log.append(onset, kind, index=index, code=code)
        self._send_trigger(code, onset)
        offset = self.playback.wait_done(index)
        self.log.append(offset, "stimulus_offset", index=index)
        return onset

    def _send_trigger(self, code: str, onset_us: int, duration_us: int = 0) -> None:
        if self.trigger is None:
            return
        self.trigger.send_event(TriggerMessage(code, onset_us, duration_us))
        self.log.append(self.now(), "trigger_sent", code=code, onset_us=onset_us)

    def _ask(self, trial_index: int, q_index: int) -> None:
        q: Question = self.spec.questions[q_index]
        shown = self.now()
        self.log.append(shown, "question_shown", trial=trial_index, q=q_index)
        value, committed = self.subject.show_question(
            q.prompt, q.scale_min, q.scale_max, q.anchor_labels
        )
        if not q.scale_min <= value <= q.scale_max:
            raise SubjectAbort(f"answer {value} outside scale {q.scale_min}..{q.scale_max}")
        self.log.append(
            committed,
            "answer_committed",
            trial=trial_index,
            q=q_index,
            value=int(value),
            rt_ms=(committed - shown) / 1000,
        )
        if self.spec.trigger is not None and self.spec.trigger.send_response_triggers:
            self._send_trigger(response_code(value), committed)

    def _play_continuous(self, trial_index: int, trial: TrialPlan) -> None:
        cfg = self.spec.continuous_task
        assert cfg is not None
        index = trial.stim[0]
        self.subject.show_instructions(cfg.instructions)
        period_us = cfg.sample_period_ms * 1000
        duration_us = self.playback.known_duration_us(index)
        onset = self.playback.start(index, self.now())
        self.log.append(onset, "stimulus_onset", index=index, code=trial.onset_codes[0])
        self.subject.start_continuous(cfg.slider_min_label, cfg.slider_max_label, duration_us)
        if duration_us is not None:
            for k in range(1, duration_us // period_us + 1):
                self.clock.wait_until(onset + k * period_us)
                self._sample(trial_index)
            offset = self.playback.wait_done(index)
        else:
            k = 1
            while not self.playback.is_done(index):
                self.clock.wait_until(onset + k * period_us)
                k += 1
                if self.playback.is_done(index):
                    break
                self._sample(trial_index)
            offset = self.playback.wait_done(index)
        self.subject.stop_continuous()
        self.log.append(offset, "stimulus_offset", index=index)

    def _sample(self, trial_index: int) -> None:
        value = min(1.0, max(0.0, float(self.subject.current_slider())))
        self.log.append(self.now(), "continuous_sample", trial=trial_index, value=value)


def run_session(
    plan: SessionPlan,
    subject: SubjectPort,
    playback: PlaybackPort,
    trigger,
    clock: Clock,
) -> SessionLog:
    """Execute one session; returns the completed log.

    Raises SessionAborted (carrying the partial log) when the subject
    disappears, playback fails, or the trigger link errors mid-session.
    """
    return _Session(plan, subject, playback, trigger, clock).run()
