"""Event triggers to the acquisition system, over TCP or a simulated TTL line.

Wire format (big-endian, bit-exact; see docs/trigger-protocol.md):

    magic 0x41 0x58 ("AX") | version 0x01 | type | payload length (u32) | payload

Frame types: 0x01 HELLO, 0x02 ACK, 0x03 BEGIN, 0x04 EVENT, 0x05 END,
0x06 BYE.  EVENT payloads are 4 ASCII code bytes + onset (u64 µs) +
duration (u64 µs).  The client is stop-and-wait: every HELLO/BEGIN/
EVENT/END expects an ACK before the next frame; BYE is fire-and-forget.

The simulated acquisition server records every frame with its own receive
timestamp so tests (and the check tooling) can compare the annotated
timeline against the engine's log.
"""

from __future__ import annotations

import socket
import struct
import threading
import time
from dataclasses import dataclass

from .clock import Clock

MAGIC = b"AX"
PROTOCOL_VERSION = 1

HELLO = 0x01
ACK = 0x02
BEGIN = 0x03
EVENT = 0x04
END = 0x05
BYE = 0x06

_FRAME_TYPES = {HELLO, ACK, BEGIN, EVENT, END, BYE}

_HEADER = struct.Struct(">2sBBI")
_EVENT_PAYLOAD = struct.Struct(">4sQQ")

HANDSHAKE_TIMEOUT_S = 2.0
ACK_TIMEOUT_S = 0.5


class TriggerError(Exception):
    pass


class HandshakeVersionMismatch(TriggerError):
    pass


class HandshakeTimeout(TriggerError):
    pass


class AckTimeout(TriggerError):
    pass


class LinkClosed(TriggerError):
    pass


class CodeInvalid(TriggerError):
    pass


class FrameError(TriggerError):
    """Malformed frame on the wire."""


class PortInUse(TriggerError):
    pass


@dataclass(frozen=True)
class TriggerMessage:
    code: str
    onset_us: int
    duration_us: int = 0


def validate_code(code: str) -> None:
    if len(code) != 4 or not all(0x20 <= ord(ch) <= 0x7E for ch in code):
        raise CodeInvalid(f"trigger code must be 4 printable ASCII characters, got {code!r}")


def encode_frame(frame_type: int, payload: bytes = b"", version: int = PROTOCOL_VERSION) -> bytes:
    return _HEADER.pack(MAGIC, version, frame_type, len(payload)) + payload


def decode_frame(buf: bytes) -> tuple[int, int, bytes, bytes]:
    """Parse one frame from the front of buf: (version, type, payload, rest)."""
    if len(buf) < _HEADER.size:
        raise FrameError("short frame header")
    magic, version, frame_type, length = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FrameError(f"bad magic {magic!r}")
    if frame_type not in _FRAME_TYPES:
        raise FrameError(f"unknown frame type 0x{frame_type:02x}")
    end = _HEADER.size + length
    if len(buf) < end:
        raise FrameError("frame payload truncated")
    return version, frame_type, buf[_HEADER.size : end], buf[end:]


def encode_event(msg: TriggerMessage) -> bytes:
    validate_code(msg.code)
    payload = _EVENT_PAYLOAD.pack(msg.code.encode("ascii"), msg.onset_us, msg.duration_us)
    return encode_frame(EVENT, payload)


def decode_event(payload: bytes) -> TriggerMessage:
    if len(payload) != _EVENT_PAYLOAD.size:
        raise FrameError(f"EVENT payload must be {_EVENT_PAYLOAD.size} bytes")
    code, onset_us, duration_us = _EVENT_PAYLOAD.unpack(payload)
    return TriggerMessage(code=code.decode("ascii"), onset_us=onset_us, duration_us=duration_us)


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = b""
    while len(chunks) < n:
        try:
            chunk = sock.recv(n - len(chunks))
        except socket.timeout:
            raise
        except OSError as exc:
            raise LinkClosed(f"connection lost: {exc}") from exc
        if not chunk:
            raise LinkClosed("connection closed by peer")
        chunks += chunk
    return chunks


def _read_frame(sock: socket.socket) -> tuple[int, int, bytes]:
    header = _read_exact(sock, _HEADER.size)
    magic, version, frame_type, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FrameError(f"bad magic {magic!r}")
    if frame_type not in _FRAME_TYPES:
        raise FrameError(f"unknown frame type 0x{frame_type:02x}")
    payload = _read_exact(sock, length) if length else b""
    return version, frame_type, payload


class TcpTriggerLink:
    """Stop-and-wait client for the framed trigger protocol."""

    def __init__(self, sock: socket.socket) -> None:
        self._sock = sock
        self._last_onset_us = 0
        self._open = True

    def _rpc(self, frame: bytes, timeout_s: float, timeout_exc: type[TriggerError]) -> None:
        if not self._open:
            raise LinkClosed("link already closed")
        try:
            self._sock.sendall(frame)
            self._sock.settimeout(timeout_s)
            version, frame_type, _ = _read_frame(self._sock)
        except socket.timeout:
            raise timeout_exc(f"no ACK within {timeout_s:.1f} s") from None
        except (LinkClosed, FrameError):
            self._open = False
            raise LinkClosed("connection lost while awaiting ACK") from None
        except OSError as exc:
            self._open = False
            raise LinkClosed(f"connection lost: {exc}") from exc
        if frame_type != ACK:
            self._open = False
            raise LinkClosed(f"expected ACK, got frame type 0x{frame_type:02x}")
        if version != PROTOCOL_VERSION:
            raise HandshakeVersionMismatch(
                f"server speaks version {version}, client speaks {PROTOCOL_VERSION}"
            )

    def handshake(self) -> None:
        self._rpc(encode_frame(HELLO), HANDSHAKE_TIMEOUT_S, HandshakeTimeout)

    def begin_session(self) -> None:
        self._rpc(encode_frame(BEGIN), ACK_TIMEOUT_S, AckTimeout)

    def end_session(self) -> None:
        self._rpc(encode_frame(END), ACK_TIMEOUT_S, AckTimeout)

    def send_event(self, msg: TriggerMessage) -> None:
        validate_code(msg.code)
        if msg.onset_us < self._last_onset_us:
            raise ValueError("event onsets must be monotone non-decreasing")
        self._rpc(encode_event(msg), ACK_TIMEOUT_S, AckTimeout)
        self._last_onset_us = msg.onset_us

    def close(self) -> None:
        if self._open:
            self._open = False
            try:
                self._sock.sendall(encode_frame(BYE))
            except OSError:
                pass
            self._sock.close()


@dataclass(frozen=True)
class TtlWrite:
    value: int
    write_us: int
    pulse_width_ms: int


class TtlRegister:
    """In-process stand-in for a hardware TTL line.

    A pulse logs the value at the current clock time and the return to
    zero one pulse width later, on the same clock.
    """

    def __init__(self, clock: Clock, pulse_width_ms: int = 10) -> None:
        self._clock = clock
        self.pulse_width_ms = pulse_width_ms
        self.writes: list[TtlWrite] = []

    def pulse(self, value: int) -> None:
        if not 1 <= value <= 255:
            raise ValueError("TTL value must be in 1..255")
        now = self._clock.now_us()
        self.writes.append(TtlWrite(value, now, self.pulse_width_ms))
        self.writes.append(TtlWrite(0, now + self.pulse_width_ms * 1000, 0))


class TtlTriggerLink:
    """Trigger delivery onto a simulated TTL register.

    Codes are assigned consecutive byte values in first-use order; the
    mapping is recorded on the link for verification.
    """

    def __init__(self, clock: Clock, pulse_width_ms: int = 10) -> None:
        self.register = TtlRegister(clock, pulse_width_ms)
        self.code_bytes: dict[str, int] = {}

    def handshake(self) -> None:
        pass

    def begin_session(self) -> None:
        pass

    def end_session(self) -> None:
        pass

    def send_event(self, msg: TriggerMessage) -> None:
        validate_code(msg.code)
        value = self.code_bytes.get(msg.code)
        if value is None:
            if len(self.code_bytes) >= 255:
                raise TriggerError("more than 255 distinct TTL codes")
            value = len(self.code_bytes) + 1
            self.code_bytes[msg.code] = value
        self.register.pulse(value)

    def close(self) -> None:
        pass


def connect(config, clock: Clock):
    """Open the trigger link named by a TriggerConfig.

    TCP mode performs the HELLO/ACK handshake; a refused connection
    surfaces as the builtin ConnectionRefusedError.
    """
    from .specfile import TriggerMode

    if config.mode is TriggerMode.SIMULATED_TTL:
        return TtlTriggerLink(clock)
    sock = socket.create_connection((config.host, config.port), timeout=HANDSHAKE_TIMEOUT_S)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    link = TcpTriggerLink(sock)
    try:
        link.handshake()
    except TriggerError:
        sock.close()
        raise
    return link


@dataclass(frozen=True)
class TimelineEntry:
    kind: str  # hello | begin | event | end | bye
    receive_us: int
    code: str | None = None
    onset_us: int | None = None
    duration_us: int | None = None


@dataclass(frozen=True)
class AcquisitionTimeline:
    entries: tuple[TimelineEntry, ...]

    @property
    def events(self) -> tuple[TimelineEntry, ...]:
        return tuple(e for e in self.entries if e.kind == "event")

    def to_obj(self) -> dict:
        return {
            "schema": "audexp.acq/1",
            "entries": [
                {k: v for k, v in vars(e).items() if v is not None} for e in self.entries
            ],
        }


class SimAcqServer:
    """Simulated acquisition system: one client at a time, every frame
    stamped with a receive time on the server's own clock.

    receive_latency_ms delays the ACK (not the timestamping) to exercise
    client timeout budgets.  ack_version lets tests provoke the client's
    version check.
    """

    def __init__(
        self,
        port: int = 0,
        host: str = "127.0.0.1",
        receive_latency_ms: float = 0.0,
        ack_version: int = PROTOCOL_VERSION,
    ) -> None:
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._listener.bind((host, port))
        except OSError as exc:
            self._listener.close()
            raise PortInUse(f"cannot bind {host}:{port}: {exc}") from exc
        self._listener.listen(1)
        self._listener.settimeout(0.2)
        self.host, self.port = self._listener.getsockname()
        self.receive_latency_ms = receive_latency_ms
        self.ack_version = ack_version
        self._anchor_ns = time.monotonic_ns()
        self._entries: list[TimelineEntry] = []
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._serve, name="sim-acq", daemon=True)

    def start(self) -> "SimAcqServer":
        self._thread.start()
        return self

    def _now_us(self) -> int:
        return (time.monotonic_ns() - self._anchor_ns) // 1000

    def _record(self, entry: TimelineEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    def _serve(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with conn:
                conn.settimeout(0.2)
                self._handle(conn)
        self._listener.close()

    def _handle(self, conn: socket.socket) -> None:
        while not self._stop.is_set():
            try:
                version, frame_type, payload = _read_frame(conn)
            except socket.timeout:
                continue
            except (LinkClosed, FrameError):
                return  # close on disconnect or malformed frame
            received = self._now_us()
            if frame_type == HELLO:
                self._record(TimelineEntry("hello", received))
            elif frame_type == BEGIN:
                self._record(TimelineEntry("begin", received))
            elif frame_type == END:
                self._record(TimelineEntry("end", received))
            elif frame_type == EVENT:
                try:
                    msg = decode_event(payload)
                except FrameError:
                    return
                self._record(
                    TimelineEntry(
                        "event",
                        received,
                        code=msg.code,
                        onset_us=msg.onset_us,
                        duration_us=msg.duration_us,
                    )
                )
            elif frame_type == BYE:
                self._record(TimelineEntry("bye", received))
                return
            else:
                return  # ACK from a client makes no sense; drop them
            if self.receive_latency_ms:
                time.sleep(self.receive_latency_ms / 1000.0)
            try:
                conn.sendall(encode_frame(ACK, version=self.ack_version))
            except OSError:
                return

    def dump(self) -> AcquisitionTimeline:
        with self._lock:
            return AcquisitionTimeline(entries=tuple(self._entries))

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2.0)
        try:
            self._listener.close()
        except OSError:
            pass

    def __enter__(self) -> "SimAcqServer":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def run_sim_server(
    port: int = 0,
    receive_latency_ms: float = 0.0,
    ack_version: int = PROTOCOL_VERSION,
) -> SimAcqServer:
    """Bind, start, and return the simulated acquisition server."""
    return SimAcqServer(
        port=port, receive_latency_ms=receive_latency_ms, ack_version=ack_version
    ).start()
