"""Continuous slider acquisition at ~20 Hz on the virtual clock."""

import tempfile
from pathlib import Path

from audexp import (
    SimulatedPlayback,
    VirtualClock,
    compile_plan,
    load_clips,
    run_session,
    scripted_subject,
)
from audexp.fixtures import make_wav
from audexp.specfile import (
    ContinuousTaskConfig,
    ExperimentSpec,
    StimulusEntry,
    StudyType,
)

work = Path(tempfile.mkdtemp(prefix="audexp-cont-"))
stim_root = work / "stim"
stim_root.mkdir()
make_wav(stim_root / "sweep.wav", sample_rate=8000, n_frames=80_000, freq=220.0)  # 10 s

spec = ExperimentSpec(
    name="continuous-demo",
    study_type=StudyType.CONTINUOUS_RATING,
    stimuli=(StimulusEntry("sweep.wav", "Ten second sweep", "synth", "tone", "only"),),
    continuous_task=ContinuousTaskConfig(
        instructions="Track the tension you feel with the slider.",
        sample_period_ms=50,
        slider_min_label="relaxed",
        slider_max_label="tense",
    ),
    isi_ms=0,
)

plan = compile_plan(spec, "demo-subject", seed=1, stim_root=stim_root)
clock = VirtualClock()
playback = SimulatedPlayback.from_clips(clock, load_clips(plan, stim_root))
subject = scripted_subject(clock, slider="ramp")  # slides 0 -> 1 over the clip
log = run_session(plan, subject, playback, None, clock)

samples = log.of_kind("continuous_sample")
print(f"10.0 s stimulus at 50 ms period -> {len(samples)} samples (20 Hz)")
print("trace (one row per 0.5 s):")
for e in samples[9::10]:
    bar = "#" * round(e.data["value"] * 40)
    print(f"  t={e.t_us / 1e6:5.2f} s  {e.data['value']:.3f}  {bar}")
