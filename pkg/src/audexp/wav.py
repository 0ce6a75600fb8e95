"""PCM WAV probing and the playback-port abstraction.

probe_wav walks the RIFF container chunk by chunk (little-endian sizes,
even-byte padding, unknown chunks skipped) and accepts only uncompressed
PCM at 16/24/32 bits.  It never raises anything but WavError subclasses
on malformed input and never modifies the file.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from .clock import Clock


class WavError(Exception):
    """Structured probe failure; message says what was wrong where."""


class NotRiff(WavError):
    pass


class NotWave(WavError):
    pass


class UnsupportedEncoding(WavError):
    def __init__(self, detail: str, format_tag: int | None = None) -> None:
        super().__init__(detail)
        self.format_tag = format_tag


class TruncatedData(WavError):
    pass


class MissingFmtChunk(WavError):
    pass


class MissingDataChunk(WavError):
    pass


ACCEPTED_BITS = (16, 24, 32)


@dataclass(frozen=True)
class WavInfo:
    channels: int
    sample_rate_hz: int
    bits_per_sample: int
    n_frames: int

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate_hz

    @property
    def duration_us(self) -> int:
        return self.n_frames * 1_000_000 // self.sample_rate_hz


def probe_wav(path: str | Path) -> WavInfo:
    """Parse the container header of a PCM WAV file."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[0:4] != b"RIFF":
        raise NotRiff("missing RIFF magic")
    if data[8:12] != b"WAVE":
        raise NotWave("RIFF form type is not WAVE")

    fmt: tuple[int, int, int, int] | None = None
    data_size: int | None = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if chunk_id == b"fmt ":
            if size < 16 or body + 16 > len(data):
                raise MissingFmtChunk("fmt chunk too short")
            format_tag, channels, rate, _byte_rate, _align, bits = struct.unpack_from(
                "<HHIIHH", data, body
            )
            if format_tag != 1:
                raise UnsupportedEncoding(
                    f"only PCM (format tag 1) is accepted, got {format_tag}", format_tag
                )
            if bits not in ACCEPTED_BITS:
                raise UnsupportedEncoding(f"unsupported bit depth {bits}", format_tag)
            if channels < 1:
                raise UnsupportedEncoding("channel count must be positive", format_tag)
            if rate < 1:
                raise UnsupportedEncoding("sample rate must be positive", format_tag)
            fmt = (channels, rate, bits, format_tag)
        elif chunk_id == b"data":
            if body + size > len(data):
                raise TruncatedData(
                    f"data chunk declares {size} bytes but only "
                    f"{len(data) - body} are present"
                )
            data_size = size
        pos = body + size + (size & 1)

    if fmt is None:
        raise MissingFmtChunk("no fmt chunk in file")
    if data_size is None:
        raise MissingDataChunk("no data chunk in file")

    channels, rate, bits, _ = fmt
    frame_size = channels * bits // 8
    if data_size % frame_size != 0:
        raise TruncatedData("data chunk is not a whole number of frames")
    return WavInfo(
        channels=channels,
        sample_rate_hz=rate,
        bits_per_sample=bits,
        n_frames=data_size // frame_size,
    )


@dataclass(frozen=True)
class Clip:
    """One playable stimulus, resolved to a file and its probed length."""

    index: int
    path: Path
    info: WavInfo

    @property
    def duration_us(self) -> int:
        return self.info.duration_us


class SimulatedPlayback:
    """Playback against the session clock; no audio device involved.

    Clips are registered by index with their duration.  start() returns
    the current (virtual) time as the actual onset, and is_done flips
    exactly when the clock reaches onset + duration.
    """

    def __init__(self, clock: Clock, durations: dict[int, int] | None = None) -> None:
        self._clock = clock
        self._durations = dict(durations or {})
        self._ends: dict[int, int] = {}

    @classmethod
    def from_clips(cls, clock: Clock, clips: dict[int, Clip]) -> "SimulatedPlayback":
        return cls(clock, {i: c.duration_us for i, c in clips.items()})

    def register(self, index: int, info: WavInfo) -> None:
        self._durations[index] = info.duration_us

    def start(self, index: int, requested_us: int, label: str | None = None) -> int:
        self._clock.wait_until(requested_us)
        onset = self._clock.now_us()
        self._ends[index] = onset + self._durations[index]
        return onset

    def is_done(self, index: int) -> bool:
        return self._clock.now_us() >= self._ends[index]

    def known_duration_us(self, index: int) -> int | None:
        return self._durations[index]

    def wait_done(self, index: int) -> int:
        """Block until the clip has finished; returns the offset time."""
        self._clock.wait_until(self._ends[index])
        return self._clock.now_us()
