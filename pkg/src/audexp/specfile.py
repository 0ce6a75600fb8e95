"""Experiment specification: parsing, validation, and the generated README.

The canonical on-disk form is a strict YAML document (schema in
docs/spec-format.md): one experiment per file, nested sections for
stimuli, questions, randomization, trigger and display.  Unknown keys are
rejected rather than ignored so typos surface immediately.  The parsed
tree (plain dicts and lists) is the canonical exchange form; parse_tree
and to_tree are exact inverses over valid specs.

Everything here is a pure function over immutable values; no I/O happens
outside validate_spec's stimulus-root checks.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import yaml

from . import ordering
from .ordering import (
    AllPairs,
    BlockedShuffle,
    FixedOrder,
    FullShuffle,
    ProbabilitySelect,
    RandomizationScheme,
)
from .wav import WavError, probe_wav

SCHEMA_VERSION = "audexp.spec/1"

DEFAULT_ISI_MS = 1000
DEFAULT_SAMPLE_PERIOD_MS = 50
MAX_SCALE_SPAN = 100


class SpecError(Exception):
    """Base class for spec document problems."""


class SpecSyntaxError(SpecError):
    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnknownStudyType(SpecError):
    pass


class MissingRequiredField(SpecError):
    def __init__(self, field_name: str) -> None:
        super().__init__(f"missing required field: {field_name}")
        self.field = field_name


class InvalidFieldValue(SpecError):
    def __init__(self, location: str, detail: str) -> None:
        super().__init__(f"{location}: {detail}")
        self.location = location


class UnknownKey(SpecError):
    def __init__(self, location: str) -> None:
        super().__init__(f"unknown key: {location}")
        self.location = location


class StimulusRootUnreadable(Exception):
    pass


class StudyType(enum.Enum):
    BEHAVIORAL_RATING = "behavioral_rating"
    COMPARISON_RATING = "comparison_rating"
    CONTINUOUS_RATING = "continuous_rating"
    EEG = "eeg"
    NEUROPHYSIOLOGICAL = "neurophysiological"


_STUDY_ALIASES = {
    "behavioralrating": StudyType.BEHAVIORAL_RATING,
    "behavioralratingstudy": StudyType.BEHAVIORAL_RATING,
    "comparisonrating": StudyType.COMPARISON_RATING,
    "comparisonbehavioralrating": StudyType.COMPARISON_RATING,
    "continuousrating": StudyType.CONTINUOUS_RATING,
    "continuousbehavioralrating": StudyType.CONTINUOUS_RATING,
    "eeg": StudyType.EEG,
    "neurophysiological": StudyType.NEUROPHYSIOLOGICAL,
}

_STUDY_LABELS = {
    StudyType.BEHAVIORAL_RATING: "Behavioral Rating",
    StudyType.COMPARISON_RATING: "Comparison Rating",
    StudyType.CONTINUOUS_RATING: "Continuous Rating",
    StudyType.EEG: "EEG",
    StudyType.NEUROPHYSIOLOGICAL: "Neurophysiological",
}


def parse_study_type(name: str) -> StudyType:
    canon = re.sub(r"[\s_\-]+", "", name.strip().lower())
    try:
        return _STUDY_ALIASES[canon]
    except KeyError:
        raise UnknownStudyType(f"unknown study type: {name!r}") from None


class TriggerMode(enum.Enum):
    TCP = "tcp"
    SIMULATED_TTL = "simulated_ttl"


@dataclass(frozen=True)
class StimulusEntry:
    file: str
    title: str
    artist: str
    stim_type: str
    condition: str
    baseline: bool = False
    label: str | None = None


@dataclass(frozen=True)
class Question:
    prompt: str
    scale_min: int
    scale_max: int
    anchor_labels: tuple[str, str] | None = None


@dataclass(frozen=True)
class ContinuousTaskConfig:
    instructions: str
    sample_period_ms: int = DEFAULT_SAMPLE_PERIOD_MS
    slider_min_label: str = "low"
    slider_max_label: str = "high"


@dataclass(frozen=True)
class TriggerConfig:
    mode: TriggerMode
    host: str = "127.0.0.1"
    port: int = 0
    code_map: tuple[tuple[str, str], ...] = ()
    send_response_triggers: bool = False

    def code_for(self, file: str) -> str | None:
        for key, code in self.code_map:
            if key == file:
                return code
        return None


@dataclass(frozen=True)
class DisplayStyle:
    background_color: str = "000000"
    font_color: str = "FFFFFF"
    font_size_pt: int = 24


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    study_type: StudyType
    stimuli: tuple[StimulusEntry, ...]
    description: str = ""
    questions: tuple[Question, ...] = ()
    continuous_task: ContinuousTaskConfig | None = None
    randomization: RandomizationScheme = FixedOrder()
    trigger: TriggerConfig | None = None
    display: DisplayStyle = DisplayStyle()
    repetitions: int = 1
    isi_ms: int = DEFAULT_ISI_MS


@dataclass(frozen=True)
class Finding:
    code: str
    message: str
    location: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[Finding, ...]
    warnings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not self.errors


# --- parsing ---------------------------------------------------------------


def parse_spec(text: str) -> ExperimentSpec:
    """Parse a spec document, applying defaults and rejecting unknown keys."""
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise SpecSyntaxError(str(getattr(exc, "problem", exc)), line) from exc
    if not isinstance(tree, dict):
        raise SpecSyntaxError("document root must be a mapping", line=1)
    return parse_tree(tree)


def parse_tree(tree: dict) -> ExperimentSpec:
    """Build an ExperimentSpec from the canonical tree form."""
    ctx = _Section(tree, "spec")
    name = ctx.req_str("name")
    study_type = parse_study_type(ctx.req_str("study_type"))
    description = ctx.opt_str("description", "")
    repetitions = ctx.opt_pos_int("repetitions", 1)
    isi_ms = ctx.opt_nonneg_int("isi_ms", DEFAULT_ISI_MS)

    raw_stimuli = ctx.req_list("stimuli")
    if not raw_stimuli:
        raise MissingRequiredField("stimuli")
    stimuli = tuple(
        _parse_stimulus(_Section(row, f"stimuli[{i}]")) for i, row in enumerate(_rows(raw_stimuli, "stimuli"))
    )

    questions: tuple[Question, ...] = ()
    if ctx.has("questions"):
        questions = tuple(
            _parse_question(_Section(row, f"questions[{i}]"))
            for i, row in enumerate(_rows(ctx.req_list("questions"), "questions"))
        )

    continuous_task = None
    if ctx.has("continuous"):
        continuous_task = _parse_continuous(_Section(ctx.req_dict("continuous"), "continuous"))

    randomization: RandomizationScheme = FixedOrder()
    if ctx.has("randomization"):
        randomization = _parse_randomization(
            _Section(ctx.req_dict("randomization"), "randomization")
        )

    trigger = None
    if ctx.has("trigger"):
        trigger = _parse_trigger(_Section(ctx.req_dict("trigger"), "trigger"))

    display = DisplayStyle()
    if ctx.has("display"):
        display = _parse_display(_Section(ctx.req_dict("display"), "display"))

    ctx.reject_unknown()

    if study_type in (StudyType.EEG, StudyType.NEUROPHYSIOLOGICAL) and trigger is None:
        raise MissingRequiredField("trigger")
    if study_type is StudyType.CONTINUOUS_RATING and continuous_task is None:
        raise MissingRequiredField("continuous")
    if (
        study_type in (StudyType.BEHAVIORAL_RATING, StudyType.COMPARISON_RATING)
        and not questions
    ):
        raise MissingRequiredField("questions")

    return ExperimentSpec(
        name=name,
        study_type=study_type,
        description=description,
        stimuli=stimuli,
        questions=questions,
        continuous_task=continuous_task,
        randomization=randomization,
        trigger=trigger,
        display=display,
        repetitions=repetitions,
        isi_ms=isi_ms,
    )


class _Section:
    """Strict mapping reader: typed getters plus unknown-key rejection."""

    def __init__(self, raw: Any, location: str) -> None:
        if not isinstance(raw, dict):
            raise InvalidFieldValue(location, "expected a mapping")
        for key in raw:
            if not isinstance(key, str):
                raise InvalidFieldValue(location, f"non-string key {key!r}")
        self.raw = raw
        self.location = location
        self.seen: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.raw

    def _get(self, key: str) -> Any:
        self.seen.add(key)
        return self.raw.get(key)

    def _loc(self, key: str) -> str:
        return f"{self.location}.{key}"

    def req_str(self, key: str) -> str:
        v = self._get(key)
        if v is None:
            raise MissingRequiredField(self._loc(key))
        if not isinstance(v, str) or not v.strip():
            raise InvalidFieldValue(self._loc(key), "expected a non-empty string")
        return v

    def opt_str(self, key: str, default: str) -> str:
        v = self._get(key)
        if v is None:
            return default
        if not isinstance(v, str):
            raise InvalidFieldValue(self._loc(key), "expected a string")
        return v

    def req_int(self, key: str) -> int:
        v = self._get(key)
        if v is None:
            raise MissingRequiredField(self._loc(key))
        if not isinstance(v, int) or isinstance(v, bool):
            raise InvalidFieldValue(self._loc(key), "expected an integer")
        return v

    def opt_pos_int(self, key: str, default: int) -> int:
        v = self._get(key)
        if v is None:
            return default
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise InvalidFieldValue(self._loc(key), "expected a positive integer")
        return v

    def opt_nonneg_int(self, key: str, default: int) -> int:
        v = self._get(key)
        if v is None:
            return default
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise InvalidFieldValue(self._loc(key), "expected a non-negative integer")
        return v

    def opt_bool(self, key: str, default: bool) -> bool:
        v = self._get(key)
        if v is None:
            return default
        if not isinstance(v, bool):
            raise InvalidFieldValue(self._loc(key), "expected true or false")
        return v

    def req_list(self, key: str) -> list:
        v = self._get(key)
        if v is None:
            raise MissingRequiredField(self._loc(key))
        if not isinstance(v, list):
            raise InvalidFieldValue(self._loc(key), "expected a list")
        return v

    def req_dict(self, key: str) -> dict:
        v = self._get(key)
        if v is None:
            raise MissingRequiredField(self._loc(key))
        if not isinstance(v, dict):
            raise InvalidFieldValue(self._loc(key), "expected a mapping")
        return v

    def str_pair(self, key: str) -> tuple[str, str] | None:
        v = self._get(key)
        if v is None:
            return None
        if (
            not isinstance(v, list)
            or len(v) != 2
            or not all(isinstance(s, str) for s in v)
        ):
            raise InvalidFieldValue(self._loc(key), "expected a pair of strings")
        return (v[0], v[1])

    def reject_unknown(self) -> None:
        unknown = sorted(set(self.raw) - self.seen)
        if unknown:
            raise UnknownKey(f"{self.location}.{unknown[0]}")


def _rows(raw: list, location: str) -> Iterator[dict]:
    for i, row in enumerate(raw):
        if not isinstance(row, dict):
            raise InvalidFieldValue(f"{location}[{i}]", "expected a mapping")
        yield row


def _parse_stimulus(sec: _Section) -> StimulusEntry:
    entry = StimulusEntry(
        file=sec.req_str("file"),
        title=sec.req_str("title"),
        artist=sec.req_str("artist"),
        stim_type=sec.opt_str("type", sec.opt_str("stim_type", "")),
        condition=sec.req_str("condition"),
        baseline=sec.opt_bool("baseline", False),
        label=sec.opt_str("label", "") or None,
    )
    if not entry.stim_type:
        raise MissingRequiredField(f"{sec.location}.type")
    sec.reject_unknown()
    return entry


def _parse_question(sec: _Section) -> Question:
    scale = sec._get("scale")
    if scale is None:
        raise MissingRequiredField(f"{sec.location}.scale")
    if (
        not isinstance(scale, list)
        or len(scale) != 2
        or not all(isinstance(x, int) and not isinstance(x, bool) for x in scale)
    ):
        raise InvalidFieldValue(f"{sec.location}.scale", "expected [min, max] integers")
    q = Question(
        prompt=sec.req_str("prompt"),
        scale_min=scale[0],
        scale_max=scale[1],
        anchor_labels=sec.str_pair("anchors"),
    )
    sec.reject_unknown()
    return q


def _parse_continuous(sec: _Section) -> ContinuousTaskConfig:
    labels = sec.str_pair("slider_labels")
    cfg = ContinuousTaskConfig(
        instructions=sec.req_str("instructions"),
        sample_period_ms=sec.opt_pos_int("sample_period_ms", DEFAULT_SAMPLE_PERIOD_MS),
        slider_min_label=labels[0] if labels else "low",
        slider_max_label=labels[1] if labels else "high",
    )
    sec.reject_unknown()
    return cfg


_BLOCK_FIELD_ALIASES = {"type": "stim_type", "stim_type": "stim_type", "condition": "condition"}


def _parse_randomization(sec: _Section) -> RandomizationScheme:
    kind = sec.req_str("kind").strip().lower()
    scheme: RandomizationScheme
    if kind == "fixed_order":
        scheme = FixedOrder()
    elif kind == "full_shuffle":
        scheme = FullShuffle()
    elif kind == "blocked_shuffle":
        raw_field = sec.req_str("block_field")
        block_field = _BLOCK_FIELD_ALIASES.get(raw_field.strip().lower())
        if block_field is None:
            raise InvalidFieldValue(
                f"{sec.location}.block_field", "expected 'type' or 'condition'"
            )
        no_adj = sec.opt_str("no_adjacent_repeat", "")
        no_adj_field = _BLOCK_FIELD_ALIASES.get(no_adj.strip().lower()) if no_adj else None
        if no_adj and no_adj_field is None:
            raise InvalidFieldValue(
                f"{sec.location}.no_adjacent_repeat", "expected 'type' or 'condition'"
            )
        scheme = BlockedShuffle(
            block_field=block_field,
            shuffle_within=sec.opt_bool("shuffle_within", True),
            shuffle_blocks=sec.opt_bool("shuffle_blocks", True),
            no_adjacent_repeat_field=no_adj_field,
        )
    elif kind == "probability_select":
        raw_weights = sec.req_list("weights")
        weights = []
        for i, w in enumerate(raw_weights):
            if isinstance(w, bool) or not isinstance(w, (int, float)):
                raise InvalidFieldValue(f"{sec.location}.weights[{i}]", "expected a number")
            weights.append(float(w))
        scheme = ProbabilitySelect(
            weights=tuple(weights),
            draws=sec.req_int("draws"),
            replacement=sec.opt_bool("replacement", True),
        )
    elif kind == "all_pairs":
        scheme = AllPairs(ordered=sec.opt_bool("ordered", False))
    else:
        raise InvalidFieldValue(f"{sec.location}.kind", f"unknown randomization kind {kind!r}")
    sec.reject_unknown()
    return scheme


def _parse_trigger(sec: _Section) -> TriggerConfig:
    raw_mode = sec.req_str("mode").strip().lower()
    if raw_mode == "tcp":
        mode = TriggerMode.TCP
    elif raw_mode in ("simulated_ttl", "ttl"):
        mode = TriggerMode.SIMULATED_TTL
    else:
        raise InvalidFieldValue(f"{sec.location}.mode", "expected 'tcp' or 'simulated_ttl'")
    code_map: tuple[tuple[str, str], ...] = ()
    if sec.has("codes"):
        raw_codes = sec.req_dict("codes")
        pairs = []
        for k, v in raw_codes.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise InvalidFieldValue(f"{sec.location}.codes", "expected file -> code strings")
            pairs.append((k, v))
        code_map = tuple(pairs)
    cfg = TriggerConfig(
        mode=mode,
        host=sec.opt_str("host", "127.0.0.1"),
        port=sec.opt_nonneg_int("port", 0),
        code_map=code_map,
        send_response_triggers=sec.opt_bool("send_response_triggers", False),
    )
    sec.reject_unknown()
    return cfg


def _parse_display(sec: _Section) -> DisplayStyle:
    style = DisplayStyle(
        background_color=sec.opt_str("background_color", "000000"),
        font_color=sec.opt_str("font_color", "FFFFFF"),
        font_size_pt=sec.opt_pos_int("font_size_pt", 24),
    )
    sec.reject_unknown()
    return style


# --- serialization ----------------------------------------------------------


def to_tree(spec: ExperimentSpec) -> dict:
    """Canonical tree form; defaults are omitted so files stay minimal."""
    tree: dict[str, Any] = {
        "name": spec.name,
        "study_type": spec.study_type.value,
    }
    if spec.description:
        tree["description"] = spec.description
    if spec.repetitions != 1:
        tree["repetitions"] = spec.repetitions
    if spec.isi_ms != DEFAULT_ISI_MS:
        tree["isi_ms"] = spec.isi_ms
    tree["stimuli"] = [_stimulus_tree(s) for s in spec.stimuli]
    if spec.questions:
        tree["questions"] = [_question_tree(q) for q in spec.questions]
    if spec.continuous_task is not None:
        tree["continuous"] = _continuous_tree(spec.continuous_task)
    if spec.randomization != FixedOrder():
        tree["randomization"] = _randomization_tree(spec.randomization)
    if spec.trigger is not None:
        tree["trigger"] = _trigger_tree(spec.trigger)
    if spec.display != DisplayStyle():
        tree["display"] = _display_tree(spec.display)
    return tree


def _stimulus_tree(s: StimulusEntry) -> dict:
    row: dict[str, Any] = {
        "file": s.file,
        "title": s.title,
        "artist": s.artist,
        "type": s.stim_type,
        "condition": s.condition,
    }
    if s.baseline:
        row["baseline"] = True
    if s.label is not None:
        row["label"] = s.label
    return row


def _question_tree(q: Question) -> dict:
    row: dict[str, Any] = {"prompt": q.prompt, "scale": [q.scale_min, q.scale_max]}
    if q.anchor_labels is not None:
        row["anchors"] = list(q.anchor_labels)
    return row


def _continuous_tree(c: ContinuousTaskConfig) -> dict:
    row: dict[str, Any] = {"instructions": c.instructions}
    if c.sample_period_ms != DEFAULT_SAMPLE_PERIOD_MS:
        row["sample_period_ms"] = c.sample_period_ms
    if (c.slider_min_label, c.slider_max_label) != ("low", "high"):
        row["slider_labels"] = [c.slider_min_label, c.slider_max_label]
    return row


def _randomization_tree(scheme: RandomizationScheme) -> dict:
    if isinstance(scheme, FixedOrder):
        return {"kind": "fixed_order"}
    if isinstance(scheme, FullShuffle):
        return {"kind": "full_shuffle"}
    if isinstance(scheme, BlockedShuffle):
        row: dict[str, Any] = {
            "kind": "blocked_shuffle",
            "block_field": "type" if scheme.block_field == "stim_type" else "condition",
        }
        if not scheme.shuffle_within:
            row["shuffle_within"] = False
        if not scheme.shuffle_blocks:
            row["shuffle_blocks"] = False
        if scheme.no_adjacent_repeat_field is not None:
            row["no_adjacent_repeat"] = (
                "type" if scheme.no_adjacent_repeat_field == "stim_type" else "condition"
            )
        return row
    if isinstance(scheme, ProbabilitySelect):
        row = {
            "kind": "probability_select",
            "weights": [w for w in scheme.weights],
            "draws": scheme.draws,
        }
        if not scheme.replacement:
            row["replacement"] = False
        return row
    if isinstance(scheme, AllPairs):
        row = {"kind": "all_pairs"}
        if scheme.ordered:
            row["ordered"] = True
        return row
    raise TypeError(f"unknown scheme {scheme!r}")


def _trigger_tree(t: TriggerConfig) -> dict:
    row: dict[str, Any] = {"mode": t.mode.value}
    if t.host != "127.0.0.1":
        row["host"] = t.host
    if t.port != 0:
        row["port"] = t.port
    if t.code_map:
        row["codes"] = {k: v for k, v in t.code_map}
    if t.send_response_triggers:
        row["send_response_triggers"] = True
    return row


def _display_tree(d: DisplayStyle) -> dict:
    row: dict[str, Any] = {}
    if d.background_color != "000000":
        row["background_color"] = d.background_color
    if d.font_color != "FFFFFF":
        row["font_color"] = d.font_color
    if d.font_size_pt != 24:
        row["font_size_pt"] = d.font_size_pt
    return row


def serialize_spec(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(to_tree(spec), sort_keys=False, allow_unicode=True)


# --- validation -------------------------------------------------------------

_HEX_COLOR = re.compile(r"^[0-9a-fA-F]{6}$")


def _printable_code(code: str) -> bool:
    return len(code) == 4 and all(0x20 <= ord(ch) <= 0x7E for ch in code)


def validate_spec(spec: ExperimentSpec, stim_root: str | Path) -> ValidationReport:
    """Check every spec invariant plus the stimulus files on disk.

    Findings are data, not exceptions; only an unreadable stimulus root
    raises.  Ordering is deterministic: by location, then code.
    """
    root = Path(stim_root)
    try:
        if not root.is_dir():
            raise StimulusRootUnreadable(f"stimulus root {root} is not a readable directory")
        list(root.iterdir())
    except OSError as exc:
        raise StimulusRootUnreadable(f"stimulus root {root}: {exc}") from exc

    errors: list[Finding] = []
    warnings: list[Finding] = []

    def err(code: str, message: str, location: str) -> None:
        errors.append(Finding(code, message, location))

    def warn(code: str, message: str, location: str) -> None:
        warnings.append(Finding(code, message, location))

    st = spec.study_type
    if st is StudyType.COMPARISON_RATING and len(spec.stimuli) < 2:
        err("TooFewStimuli", "comparison studies need at least 2 stimuli", "stimuli")
    if st in (StudyType.EEG, StudyType.NEUROPHYSIOLOGICAL) and spec.trigger is None:
        err("TriggerConfigMissing", f"{st.value} studies require a trigger section", "trigger")
    if st is StudyType.NEUROPHYSIOLOGICAL:
        n_baseline = sum(1 for s in spec.stimuli if s.baseline)
        if n_baseline != 1:
            err(
                "BaselineMissing",
                f"neurophysiological studies need exactly one baseline stimulus, found {n_baseline}",
                "stimuli",
            )
    if st is StudyType.CONTINUOUS_RATING and spec.continuous_task is None:
        err("ContinuousTaskMissing", "continuous studies require a continuous section", "continuous")
    if st in (StudyType.BEHAVIORAL_RATING, StudyType.COMPARISON_RATING) and not spec.questions:
        err("QuestionsMissing", f"{st.value} studies require at least one question", "questions")
    if spec.repetitions < 1:
        err("RepetitionsInvalid", "repetitions must be >= 1", "repetitions")
    if spec.isi_ms < 0:
        err("IsiInvalid", "isi_ms must be >= 0", "isi_ms")

    seen_files: set[str] = set()
    seen_groups: set[tuple[str, str]] = set()
    for i, s in enumerate(spec.stimuli):
        loc = f"stimuli[{i}]"
        if not s.stim_type or not s.condition:
            err("StimulusFieldEmpty", "type and condition must be non-empty", loc)
        if s.file in seen_files:
            err("DuplicateStimulusFile", f"file {s.file!r} appears more than once", f"{loc}.file")
        seen_files.add(s.file)
        group = (s.stim_type, s.condition)
        if group in seen_groups:
            warn(
                "DuplicateTypeCondition",
                f"(type, condition) pair {group!r} appears more than once",
                loc,
            )
        seen_groups.add(group)
        if s.baseline and st is not StudyType.NEUROPHYSIOLOGICAL:
            warn(
                "BaselineIgnored",
                "baseline flag has no effect outside neurophysiological studies",
                loc,
            )
        _check_stimulus_file(root, s.file, f"{loc}.file", err)

    for i, q in enumerate(spec.questions):
        loc = f"questions[{i}]"
        if q.scale_min >= q.scale_max:
            err("ScaleInvalid", "scale min must be below scale max", loc)
        elif q.scale_max - q.scale_min > MAX_SCALE_SPAN:
            err("ScaleInvalid", f"scale span must be <= {MAX_SCALE_SPAN}", loc)

    if spec.continuous_task is not None:
        p = spec.continuous_task.sample_period_ms
        if not 10 <= p <= 1000:
            err(
                "SamplePeriodOutOfRange",
                f"sample_period_ms must be within [10, 1000], got {p}",
                "continuous.sample_period_ms",
            )

    if spec.trigger is not None:
        _check_trigger(spec, err)

    _check_randomization(spec, err)

    if not _HEX_COLOR.match(spec.display.background_color):
        err("ColorInvalid", "background_color must be 6 hex digits", "display.background_color")
    if not _HEX_COLOR.match(spec.display.font_color):
        err("ColorInvalid", "font_color must be 6 hex digits", "display.font_color")

    key = lambda f: (f.location, f.code)
    return ValidationReport(
        errors=tuple(sorted(errors, key=key)),
        warnings=tuple(sorted(warnings, key=key)),
    )


def _check_stimulus_file(root: Path, file: str, loc: str, err) -> None:
    rel = Path(file)
    if rel.is_absolute() or ".." in rel.parts:
        err("StimulusPathInvalid", "stimulus paths must stay inside the stimulus root", loc)
        return
    path = root / rel
    if not path.is_file():
        err("StimulusFileMissing", f"{file}: not found under {root}", loc)
        return
    try:
        probe_wav(path)
    except WavError as exc:
        err("StimulusFileInvalid", f"{file}: {exc}", loc)


def _check_trigger(spec: ExperimentSpec, err) -> None:
    t = spec.trigger
    if t.mode is TriggerMode.TCP:
        if not t.host or not 1 <= t.port <= 65535:
            err(
                "TriggerEndpointInvalid",
                "tcp mode requires a host and a port in 1..65535",
                "trigger",
            )
    files = {s.file for s in spec.stimuli}
    seen_codes: set[str] = set()
    for key_file, code in t.code_map:
        loc = f"trigger.codes[{key_file}]"
        if key_file not in files:
            err("CodeMapUnknownFile", f"{key_file!r} is not a declared stimulus", loc)
        if not _printable_code(code):
            err("TriggerCodeInvalid", f"{code!r} is not 4 printable ASCII characters", loc)
        elif code in seen_codes:
            err("TriggerCodeDuplicate", f"code {code!r} assigned twice", loc)
        seen_codes.add(code)


def _check_randomization(spec: ExperimentSpec, err) -> None:
    scheme = spec.randomization
    n_pool = sum(1 for s in spec.stimuli if not s.baseline)
    loc = "randomization"
    if isinstance(scheme, AllPairs):
        if spec.study_type is not StudyType.COMPARISON_RATING:
            err("SchemeIncompatible", "all_pairs applies only to comparison studies", loc)
        if n_pool < 2:
            err("SchemeIncompatible", "all_pairs needs at least 2 stimuli", loc)
    elif spec.study_type is StudyType.COMPARISON_RATING:
        err(
            "SchemeIncompatible",
            "comparison studies require the all_pairs randomization",
            loc,
        )
    if isinstance(scheme, ProbabilitySelect):
        if len(scheme.weights) != len(spec.stimuli):
            err(
                "SchemeInvalid",
                f"weights has {len(scheme.weights)} entries for {len(spec.stimuli)} stimuli",
                f"{loc}.weights",
            )
        else:
            if any(w < 0 for w in scheme.weights):
                err("SchemeInvalid", "weights must be non-negative", f"{loc}.weights")
            pool_weights = [
                w for w, s in zip(scheme.weights, spec.stimuli) if not s.baseline
            ]
            if sum(pool_weights) <= 0:
                err("SchemeInvalid", "weights must sum to a positive value", f"{loc}.weights")
        if scheme.draws < 1:
            err("SchemeInvalid", "draws must be >= 1", f"{loc}.draws")
        elif not scheme.replacement and scheme.draws > n_pool:
            err(
                "SchemeInvalid",
                f"cannot draw {scheme.draws} from {n_pool} stimuli without replacement",
                f"{loc}.draws",
            )
    if isinstance(scheme, BlockedShuffle) and scheme.block_field not in ordering.BLOCK_FIELDS:
        err("SchemeInvalid", f"unknown block field {scheme.block_field!r}", f"{loc}.block_field")


# --- readme -----------------------------------------------------------------


def describe_spec(spec: ExperimentSpec) -> str:
    """Generate the study's README-FIRST text (pure function of the spec)."""
    lines: list[str] = []
    title = f"README-FIRST: {spec.name}"
    lines.append(title)
    lines.append("=" * len(title))
    lines.append("")
    lines.append(f"Study type: {_STUDY_LABELS[spec.study_type]}")
    if spec.description:
        lines.append(f"Description: {spec.description}")
    lines.append("")
    lines.append(f"This study presents {len(spec.stimuli)} stimuli "
                 f"({spec.repetitions} pass(es) through the set).")
    for i, s in enumerate(spec.stimuli, start=1):
        flags = " [baseline]" if s.baseline else ""
        lines.append(f"  {i:2d}. {s.file} - {s.title} ({s.stim_type} / {s.condition}){flags}")
    lines.append("")
    if spec.questions:
        lines.append("After each presentation the subject answers:")
        for i, q in enumerate(spec.questions, start=1):
            anchors = (
                f" (anchors: {q.anchor_labels[0]} .. {q.anchor_labels[1]})"
                if q.anchor_labels
                else ""
            )
            lines.append(f"  {i}. {q.prompt} [scale {q.scale_min}..{q.scale_max}]{anchors}")
        lines.append("")
    if spec.continuous_task is not None:
        c = spec.continuous_task
        lines.append(
            f"Continuous task: {c.instructions} "
            f"(slider sampled every {c.sample_period_ms} ms, "
            f"{c.slider_min_label} .. {c.slider_max_label})"
        )
        lines.append("")
    lines.append(f"Presentation order: {_describe_scheme(spec.randomization)}")
    if spec.trigger is not None:
        t = spec.trigger
        if t.mode is TriggerMode.TCP:
            lines.append(f"Trigger link: TCP to {t.host}:{t.port}")
        else:
            lines.append("Trigger link: simulated TTL register")
        if t.send_response_triggers:
            lines.append("Behavioral responses are also sent as triggers.")
    d = spec.display
    lines.append(
        f"Display: background #{d.background_color}, font #{d.font_color} at {d.font_size_pt} pt"
    )
    lines.append("")
    lines.append("How to run")
    lines.append("----------")
    lines.append("1. Check the spec and stimuli:   audexp validate <spec.yaml> --stim-root <dir>")
    lines.append("2. Compile a per-subject plan:   audexp compile <spec.yaml> --stim-root <dir> \\")
    lines.append("                                   --subject <id> --seed <n> --out <plan.json>")
    lines.append("3. Re-check plan integrity:      audexp check <plan.json> --stim-root <dir>")
    lines.append("4. Execute the session:          audexp run <plan.json> --stim-root <dir> --out <results>")
    lines.append("   (--simulate for a headless run; --serve --port N for a live subject)")
    lines.append("")
    return "\n".join(lines)


def _describe_scheme(scheme: RandomizationScheme) -> str:
    if isinstance(scheme, FixedOrder):
        return "fixed order as listed"
    if isinstance(scheme, FullShuffle):
        return "full shuffle of the stimulus set"
    if isinstance(scheme, BlockedShuffle):
        bits = [f"blocked shuffle by {scheme.block_field}"]
        if scheme.shuffle_blocks:
            bits.append("block order shuffled")
        if scheme.shuffle_within:
            bits.append("shuffled within blocks")
        if scheme.no_adjacent_repeat_field:
            bits.append(f"no adjacent {scheme.no_adjacent_repeat_field} repeats")
        return ", ".join(bits)
    if isinstance(scheme, ProbabilitySelect):
        mode = "with" if scheme.replacement else "without"
        return f"probability selection, {scheme.draws} draw(s) {mode} replacement"
    if isinstance(scheme, AllPairs):
        return "all stimulus pairs" + (" (ordered)" if scheme.ordered else "")
    return str(scheme)
