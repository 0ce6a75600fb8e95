"""audexp: declarative auditory-experiment compiler and session runtime.

Define a study in a YAML spec, validate it against the stimulus files,
compile it into a deterministic per-subject session plan, then execute
that plan headlessly (virtual clock, scripted subject) or live (browser
subject over WebSocket), with event triggers delivered to an acquisition
system over TCP or a simulated TTL line.
"""

from .clock import Clock, RealClock, VirtualClock
from .engine import (
    PlanFormatError,
    ScriptExhausted,
    SessionAborted,
    SessionLog,
    SessionPlan,
    SubjectAbort,
    TrialPlan,
    ValidationFailed,
    check_plan,
    compile_plan,
    load_clips,
    load_plan,
    plan_digest,
    run_session,
    save_plan,
    scripted_subject,
    serialize_plan,
    spec_digest,
)
from .ordering import (
    AllPairs,
    AllZeroWeights,
    BlockedShuffle,
    FixedOrder,
    FullShuffle,
    InfeasibleConstraint,
    ProbabilitySelect,
    SchemeIncompatible,
    StimulusArray,
    build_array,
    full_shuffle,
    interleave_baseline,
    probability_select,
)
from .results import (
    CorruptFile,
    OutDirExists,
    SchemaVersionUnsupported,
    SessionResult,
    build_result,
    finalize,
    load_result,
    serialize_events,
)
from .specfile import (
    ContinuousTaskConfig,
    DisplayStyle,
    ExperimentSpec,
    Finding,
    MissingRequiredField,
    Question,
    SpecError,
    SpecSyntaxError,
    StimulusEntry,
    StimulusRootUnreadable,
    StudyType,
    TriggerConfig,
    TriggerMode,
    UnknownKey,
    UnknownStudyType,
    ValidationReport,
    describe_spec,
    parse_spec,
    parse_tree,
    serialize_spec,
    to_tree,
    validate_spec,
)
from .triggers import (
    AcquisitionTimeline,
    AckTimeout,
    CodeInvalid,
    HandshakeTimeout,
    HandshakeVersionMismatch,
    LinkClosed,
    PortInUse,
    SimAcqServer,
    TriggerMessage,
    TtlRegister,
    TtlTriggerLink,
    connect,
    run_sim_server,
)
from .wav import (
    Clip,
    MissingDataChunk,
    MissingFmtChunk,
    NotRiff,
    NotWave,
    SimulatedPlayback,
    TruncatedData,
    UnsupportedEncoding,
    WavError,
    WavInfo,
    probe_wav,
)

__version__ = "0.1.0"
