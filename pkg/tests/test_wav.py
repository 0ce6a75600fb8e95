from __future__ import annotations

import hashlib
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from audexp.clock import VirtualClock
from audexp.fixtures import make_wav
from audexp.wav import (
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


def build_wav_bytes(
    *,
    magic: bytes = b"RIFF",
    form: bytes = b"WAVE",
    format_tag: int = 1,
    channels: int = 1,
    rate: int = 44100,
    bits: int = 16,
    data: bytes = b"",
    extra_chunk: bytes | None = None,
    include_fmt: bool = True,
    include_data: bool = True,
    declared_data_size: int | None = None,
) -> bytes:
    body = form
    if include_fmt:
        fmt = struct.pack(
            "<HHIIHH", format_tag, channels, rate,
            rate * channels * bits // 8, channels * bits // 8, bits,
        )
        body += b"fmt " + struct.pack("<I", len(fmt)) + fmt
    if extra_chunk is not None:
        body += b"LIST" + struct.pack("<I", len(extra_chunk)) + extra_chunk
        if len(extra_chunk) % 2:
            body += b"\x00"
    if include_data:
        size = len(data) if declared_data_size is None else declared_data_size
        body += b"data" + struct.pack("<I", size) + data
    return magic + struct.pack("<I", len(body)) + body


class TestProbe:
    def test_one_second_mono_16bit(self, tmp_path):
        path = make_wav(tmp_path / "a.wav", sample_rate=44100, n_frames=44100)
        info = probe_wav(path)
        assert info == WavInfo(channels=1, sample_rate_hz=44100, bits_per_sample=16, n_frames=44100)
        assert info.duration_s == 1.0
        assert info.duration_us == 1_000_000

    def test_byte_built_stereo_fixture(self, tmp_path):
        # 48 kHz stereo 16-bit, 8 frames -> 32 data bytes.
        data = bytes(32)
        path = tmp_path / "b.wav"
        path.write_bytes(build_wav_bytes(channels=2, rate=48000, data=data))
        info = probe_wav(path)
        assert info.n_frames == 8
        assert info.channels == 2
        assert info.duration_s == pytest.approx(8 / 48000)

    @pytest.mark.parametrize("bits", [16, 24, 32])
    def test_accepted_bit_depths(self, tmp_path, bits):
        path = make_wav(tmp_path / "c.wav", bits=bits, n_frames=100)
        info = probe_wav(path)
        assert info.bits_per_sample == bits
        assert info.n_frames == 100

    def test_rifx_magic_rejected(self, tmp_path):
        path = tmp_path / "d.wav"
        path.write_bytes(build_wav_bytes(magic=b"RIFX"))
        with pytest.raises(NotRiff):
            probe_wav(path)

    def test_non_wave_form_rejected(self, tmp_path):
        path = tmp_path / "e.wav"
        path.write_bytes(build_wav_bytes(form=b"AVI "))
        with pytest.raises(NotWave):
            probe_wav(path)

    def test_non_pcm_rejected_with_format_tag(self, tmp_path):
        path = tmp_path / "f.wav"
        path.write_bytes(build_wav_bytes(format_tag=3, data=bytes(4)))
        with pytest.raises(UnsupportedEncoding) as exc:
            probe_wav(path)
        assert exc.value.format_tag == 3

    def test_8_bit_rejected(self, tmp_path):
        path = tmp_path / "g.wav"
        path.write_bytes(build_wav_bytes(bits=8, data=bytes(4)))
        with pytest.raises(UnsupportedEncoding):
            probe_wav(path)

    def test_truncated_data_detected(self, tmp_path):
        path = tmp_path / "h.wav"
        path.write_bytes(build_wav_bytes(data=bytes(6), declared_data_size=100))
        with pytest.raises(TruncatedData):
            probe_wav(path)

    def test_partial_frame_detected(self, tmp_path):
        path = tmp_path / "i.wav"
        path.write_bytes(build_wav_bytes(channels=2, data=bytes(6)))  # 1.5 frames
        with pytest.raises(TruncatedData):
            probe_wav(path)

    def test_missing_fmt_detected(self, tmp_path):
        path = tmp_path / "j.wav"
        path.write_bytes(build_wav_bytes(include_fmt=False, data=bytes(4)))
        with pytest.raises(MissingFmtChunk):
            probe_wav(path)

    def test_missing_data_detected(self, tmp_path):
        path = tmp_path / "k.wav"
        path.write_bytes(build_wav_bytes(include_data=False))
        with pytest.raises(MissingDataChunk):
            probe_wav(path)

    def test_unknown_chunks_skipped(self, tmp_path):
        path = tmp_path / "l.wav"
        path.write_bytes(build_wav_bytes(extra_chunk=b"INFOsoftware x\x00", data=bytes(4)))
        assert probe_wav(path).n_frames == 2

    def test_odd_sized_chunk_padding_honored(self, tmp_path):
        path = tmp_path / "m.wav"
        path.write_bytes(build_wav_bytes(extra_chunk=b"xyz", data=bytes(4)))
        assert probe_wav(path).n_frames == 2

    def test_probe_is_read_only(self, tmp_path):
        path = make_wav(tmp_path / "n.wav")
        before = hashlib.sha256(path.read_bytes()).hexdigest()
        probe_wav(path)
        assert hashlib.sha256(path.read_bytes()).hexdigest() == before

    def test_duration_matches_frames_over_rate(self, tmp_path):
        for rate, frames in [(8000, 1), (22050, 12345), (48000, 7)]:
            path = make_wav(tmp_path / f"r{rate}_{frames}.wav", sample_rate=rate, n_frames=frames)
            info = probe_wav(path)
            assert info.duration_s == frames / rate

    @settings(max_examples=300, deadline=None)
    @given(blob=st.binary(max_size=256))
    def test_fuzzed_bytes_never_crash(self, blob, tmp_path_factory):
        path = tmp_path_factory.mktemp("fuzz") / "z.wav"
        path.write_bytes(blob)
        try:
            info = probe_wav(path)
            assert info.n_frames >= 0
        except WavError:
            pass

    @settings(max_examples=200, deadline=None)
    @given(blob=st.binary(max_size=200))
    def test_fuzzed_riff_interiors_never_crash(self, blob, tmp_path_factory):
        path = tmp_path_factory.mktemp("fuzz2") / "z.wav"
        path.write_bytes(b"RIFF" + struct.pack("<I", len(blob) + 4) + b"WAVE" + blob)
        try:
            probe_wav(path)
        except WavError:
            pass


class TestSimulatedPlayback:
    def test_done_exactly_at_onset_plus_duration(self):
        clock = VirtualClock(10_000_000)
        playback = SimulatedPlayback(clock, {0: 1_000_000})
        onset = playback.start(0, clock.now_us())
        assert onset == 10_000_000
        clock.wait_until(10_999_999)
        assert not playback.is_done(0)
        clock.wait_until(11_000_000)
        assert playback.is_done(0)

    def test_zero_frame_clip_done_immediately(self):
        clock = VirtualClock()
        playback = SimulatedPlayback(clock, {0: 0})
        playback.start(0, 0)
        assert playback.is_done(0)

    def test_back_to_back_onsets_abut(self):
        clock = VirtualClock()
        playback = SimulatedPlayback(clock, {0: 500_000, 1: 250_000})
        first = playback.start(0, clock.now_us())
        playback.wait_done(0)
        second = playback.start(1, clock.now_us())
        assert second == first + 500_000

    def test_onset_not_before_requested(self):
        clock = VirtualClock()
        playback = SimulatedPlayback(clock, {0: 1000})
        onset = playback.start(0, 123_456)
        assert onset == 123_456
        assert clock.now_us() == 123_456
