"""Walk through the full behavioral-rating pipeline, headlessly.

Generates the 12 demo chord-progression clips, validates the study,
compiles a per-subject plan, runs it on the virtual clock with a
scripted subject, and prints what came out.
"""

import tempfile
from pathlib import Path

from audexp import (
    VirtualClock,
    SimulatedPlayback,
    compile_plan,
    describe_spec,
    load_clips,
    run_session,
    scripted_subject,
    validate_spec,
)
from audexp.fixtures import demo_spec, write_demo_stimuli
from audexp.results import build_result

work = Path(tempfile.mkdtemp(prefix="audexp-demo-"))
stim_root = work / "stim"
write_demo_stimuli(stim_root)
print(f"wrote 12 demo stimuli under {stim_root}\n")

spec = demo_spec()
report = validate_spec(spec, stim_root)
print(f"validation: {len(report.errors)} errors, {len(report.warnings)} warnings\n")

print(describe_spec(spec))

plan = compile_plan(spec, subject_id="demo-subject", seed=7, stim_root=stim_root)
print("presentation order (blocked shuffle by key):")
for k, trial in enumerate(plan.trials, start=1):
    s = spec.stimuli[trial.stim[0]]
    print(f"  trial {k:2d}: {s.title} [{s.stim_type} / {s.condition}]")

clock = VirtualClock()
playback = SimulatedPlayback.from_clips(clock, load_clips(plan, stim_root))
subject = scripted_subject(clock, answers=("uniform", 42), answer_delay_ms=800)
log = run_session(plan, subject, playback, None, clock)

result = build_result(log, plan)
print(f"\nsession finished at t={result.summary.ended_us / 1e6:.2f} s (virtual)")
print(f"events: {dict(result.summary.event_counts)}")
print("first five answers:")
for r in result.responses[:5]:
    print(f"  trial {r.trial} q{r.question}: {r.value} (rt {r.rt_ms:.0f} ms)")
