"""Generate desk-scale demo material: tiny PCM WAVs and a ready-made study.

The demo study mirrors a 12-stimulus behavioral rating design: chord
progressions in three keys (B, C, F), four harmonic conditions each
(dominant, flatII, silence, tonic), blocked-shuffled by key.  Demo
scripts and the test suite both build their fixtures from here, so no
binary assets live in the repository.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

from .ordering import BlockedShuffle
from .specfile import (
    DisplayStyle,
    ExperimentSpec,
    Question,
    StimulusEntry,
    StudyType,
)


def make_wav(
    path: str | Path,
    *,
    sample_rate: int = 8000,
    channels: int = 1,
    bits: int = 16,
    n_frames: int = 800,
    freq: float = 440.0,
    amplitude: float = 0.5,
) -> Path:
    """Write a PCM WAV sine clip byte-by-byte (16/24/32-bit)."""
    if bits not in (16, 24, 32):
        raise ValueError("bits must be 16, 24 or 32")
    peak = (1 << (bits - 1)) - 1
    frames = bytearray()
    for n in range(n_frames):
        sample = int(peak * amplitude * math.sin(2.0 * math.pi * freq * n / sample_rate))
        for _ in range(channels):
            if bits == 16:
                frames += struct.pack("<h", sample)
            elif bits == 32:
                frames += struct.pack("<i", sample)
            else:
                frames += sample.to_bytes(3, "little", signed=True)
    block_align = channels * bits // 8
    fmt = struct.pack(
        "<HHIIHH", 1, channels, sample_rate, sample_rate * block_align, block_align, bits
    )
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(frames)) + bytes(frames)
    if len(frames) % 2:
        body += b"\x00"
    out = Path(path)
    out.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    return out


_DEMO_ROWS = [
    ("SCP 01_B-dominant.wav", "Simple Chord Progression 01", "B Key", "dominant"),
    ("SCP 02_B-flatII.wav", "Simple Chord Progression 02", "B Key", "flatII"),
    ("SCP 03_B-silence.wav", "Simple Chord Progression 03", "B Key", "silence"),
    ("SCP 04_B-tonic.wav", "Simple Chord Progression 04", "B Key", "tonic"),
    ("SCP 05_C-tonic.wav", "Simple Chord Progression 05", "C Key", "dominant"),
    ("SCP 06_C-tonic.wav", "Simple Chord Progression 06", "C Key", "flatII"),
    ("SCP 07_C-tonic.wav", "Simple Chord Progression 07", "C Key", "silence"),
    ("SCP 08_C-tonic.wav", "Simple Chord Progression 08", "C Key", "tonic"),
    ("SCP 09_F-dominant.wav", "Simple Chord Progression 09", "F Key", "dominant"),
    ("SCP 10_F-flatII.wav", "Simple Chord Progression 10", "F Key", "flatII"),
    ("SCP 11_F-silence.wav", "Simple Chord Progression 11", "F Key", "silence"),
    ("SCP 12_F-tonic.wav", "Simple Chord Progression 12", "F Key", "tonic"),
]

_KEY_FREQS = {"B Key": 246.94, "C Key": 261.63, "F Key": 349.23}


def demo_stimuli() -> tuple[StimulusEntry, ...]:
    return tuple(
        StimulusEntry(file=file, title=title, artist="unknown", stim_type=key, condition=cond)
        for file, title, key, cond in _DEMO_ROWS
    )


def demo_spec(isi_ms: int = 0) -> ExperimentSpec:
    """The demoBRS behavioral rating study over the 12 demo stimuli."""
    return ExperimentSpec(
        name="demoBRS",
        study_type=StudyType.BEHAVIORAL_RATING,
        description="Rate short chord progressions in three keys.",
        stimuli=demo_stimuli(),
        questions=(
            Question(
                prompt="How pleasant was the excerpt?",
                scale_min=1,
                scale_max=9,
                anchor_labels=("very unpleasant", "very pleasant"),
            ),
            Question(
                prompt="How well did the final chord resolve?",
                scale_min=1,
                scale_max=9,
                anchor_labels=("not at all", "completely"),
            ),
        ),
        randomization=BlockedShuffle(block_field="stim_type"),
        display=DisplayStyle(background_color="101018", font_color="F2F2F2", font_size_pt=28),
        isi_ms=isi_ms,
    )


def write_demo_stimuli(
    stim_root: str | Path, *, sample_rate: int = 8000, n_frames: int = 800
) -> list[Path]:
    """Create the 12 demo WAV files under stim_root."""
    root = Path(stim_root)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for file, _title, key, _cond in _DEMO_ROWS:
        written.append(
            make_wav(
                root / file,
                sample_rate=sample_rate,
                n_frames=n_frames,
                freq=_KEY_FREQS[key],
            )
        )
    return written
