"""EEG study against the simulated acquisition server, end to end.

Starts the server in-process, runs a five-stimulus EEG session with
response triggers enabled, then prints the server's annotated timeline
next to the engine's own log so the onset coupling is visible.
"""

import tempfile
import time
from pathlib import Path

from audexp import (
    SimulatedPlayback,
    VirtualClock,
    compile_plan,
    load_clips,
    run_session,
    run_sim_server,
    scripted_subject,
)
from audexp.fixtures import demo_stimuli, write_demo_stimuli
from audexp.specfile import (
    ExperimentSpec,
    Question,
    StudyType,
    TriggerConfig,
    TriggerMode,
)
from audexp.triggers import connect

work = Path(tempfile.mkdtemp(prefix="audexp-eeg-"))
stim_root = work / "stim"
write_demo_stimuli(stim_root)

with run_sim_server() as server:
    print(f"simulated acquisition server on {server.host}:{server.port}\n")
    spec = ExperimentSpec(
        name="eeg-demo",
        study_type=StudyType.EEG,
        stimuli=demo_stimuli()[:5],
        questions=(Question("How engaging was that?", 1, 9),),
        trigger=TriggerConfig(
            mode=TriggerMode.TCP,
            host=server.host,
            port=server.port,
            send_response_triggers=True,
        ),
        isi_ms=500,
    )
    plan = compile_plan(spec, "demo-subject", seed=3, stim_root=stim_root)

    clock = VirtualClock()
    playback = SimulatedPlayback.from_clips(clock, load_clips(plan, stim_root))
    link = connect(spec.trigger, clock)
    log = run_session(plan, scripted_subject(clock), playback, link, clock)
    link.close()
    time.sleep(0.1)  # let the server log the BYE

    print("engine log (trigger events):")
    for e in log.of_kind("trigger_sent"):
        print(f"  t={e.t_us:>9} µs  {e.data['code']}  onset={e.data['onset_us']}")

    print("\nserver timeline:")
    for entry in server.dump().entries:
        detail = f"  {entry.code}  onset={entry.onset_us}" if entry.kind == "event" else ""
        print(f"  recv={entry.receive_us:>9} µs  {entry.kind}{detail}")

    onsets_logged = [e.t_us for e in log.of_kind("stimulus_onset")]
    onsets_received = [e.onset_us for e in server.dump().events if e.code.startswith("S")]
    print(f"\nonsets match the engine log exactly: {onsets_logged == onsets_received}")
