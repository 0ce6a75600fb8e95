"""Live subject bridge: HTTP + WebSocket server wired into the engine.

One bridge hosts one session.  The browser UI connects to
``/session/<token>/ws`` and exchanges JSON text frames (schema in
docs/ui-protocol.md); stimulus audio is fetched from
``/session/<token>/stim/<index>`` and the app shell from ``/``.

The engine runs in the calling thread and blocks on queues; the aiohttp
event loop runs in a daemon thread and feeds them.  The UI owns nothing:
it acknowledges engine messages (Ready, StimulusEnded, Answer) and pushes
slider updates, while the engine does all sampling and timestamping on
its own clock.  A dropped connection may resume with the session token;
after the grace period the session aborts.
"""

from __future__ import annotations

import asyncio
import json
import queue
import secrets
import sys
import threading
import time
from pathlib import Path

from aiohttp import WSMsgType, web

from .clock import Clock
from .engine import SubjectAbort
from .specfile import DisplayStyle
from .wav import Clip

UI_SCHEMA = "audexp.ui/1"

_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>audexp</title></head>
<body><h1>audexp session bridge</h1>
<p>No subject UI bundle is installed. Point --ui-dir at a built frontend,
or connect a client to the WebSocket endpoint directly.</p>
</body></html>
"""


class SubjectBridge:
    """SubjectPort + PlaybackPort backed by one browser connection."""

    def __init__(
        self,
        clock: Clock,
        clips: dict[int, Clip],
        host: str = "127.0.0.1",
        port: int = 0,
        token: str | None = None,
        ui_dir: str | Path | None = None,
        reconnect_grace_s: float = 15.0,
    ) -> None:
        self._clock = clock
        self._clips = clips
        self._host = host
        self._port = port
        self.token = token or secrets.token_urlsafe(12)
        self._ui_dir = Path(ui_dir) if ui_dir else None
        self._grace_s = reconnect_grace_s

        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._runner: web.AppRunner | None = None
        self._ws: web.WebSocketResponse | None = None

        self._ready: queue.Queue[int] = queue.Queue()
        self._answers: queue.Queue[tuple[int, int]] = queue.Queue()
        self._ended: queue.Queue[int] = queue.Queue()
        self._slider_lock = threading.Lock()
        self._slider_value = 0.5
        self._pending_scale: tuple[int, int] | None = None
        self._stim_playing = False
        self._disconnected_at: float | None = None
        self._ever_connected = False
        self._aborted = threading.Event()
        self._last_sent: str | None = None

    # -- lifecycle ------------------------------------------------------------

    def start_server(self) -> "SubjectBridge":
        started = threading.Event()
        boot_error: list[BaseException] = []

        def run_loop() -> None:
            loop = asyncio.new_event_loop()
            asyncio.set_event_loop(loop)
            self._loop = loop
            try:
                loop.run_until_complete(self._start_site())
            except BaseException as exc:
                boot_error.append(exc)
                started.set()
                return
            started.set()
            loop.run_forever()
            loop.run_until_complete(self._runner.cleanup())
            loop.close()

        self._thread = threading.Thread(target=run_loop, name="subject-bridge", daemon=True)
        self._thread.start()
        started.wait()
        if boot_error:
            raise boot_error[0]
        return self

    async def _start_site(self) -> None:
        app = web.Application()
        app.router.add_get("/", self._page)
        app.router.add_get("/session/{token}/ws", self._ws_handler)
        app.router.add_get("/session/{token}/stim/{index}", self._stim)
        if self._ui_dir is not None:
            app.router.add_static("/ui", self._ui_dir)
        self._runner = web.AppRunner(app)
        await self._runner.setup()
        site = web.TCPSite(self._runner, self._host, self._port)
        await site.start()
        self._port = site._server.sockets[0].getsockname()[1]

    def stop_server(self) -> None:
        if self._loop is None:
            return
        self._aborted.set()
        self._loop.call_soon_threadsafe(self._loop.stop)
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    @property
    def port(self) -> int:
        return self._port

    @property
    def url(self) -> str:
        return f"http://{self._host}:{self._port}/?token={self.token}"

    # -- http -------------------------------------------------------------------

    async def _page(self, request: web.Request) -> web.Response:
        if self._ui_dir is not None and (self._ui_dir / "index.html").is_file():
            return web.FileResponse(self._ui_dir / "index.html")
        return web.Response(text=_PLACEHOLDER_PAGE, content_type="text/html")

    async def _stim(self, request: web.Request) -> web.Response:
        if request.match_info["token"] != self.token:
            raise web.HTTPNotFound()
        try:
            clip = self._clips[int(request.match_info["index"])]
        except (KeyError, ValueError):
            raise web.HTTPNotFound()
        return web.Response(body=clip.path.read_bytes(), content_type="audio/wav")

    # -- websocket ----------------------------------------------------------------

    async def _ws_handler(self, request: web.Request) -> web.WebSocketResponse:
        if request.match_info["token"] != self.token:
            raise web.HTTPNotFound()
        if self._ws is not None:
            raise web.HTTPConflict(reason="a subject is already connected")
        ws = web.WebSocketResponse()
        await ws.prepare(request)
        self._ws = ws
        self._disconnected_at = None
        self._ever_connected = True
        if self._last_sent is not None:
            await ws.send_str(self._last_sent)  # resume: replay last engine message
        try:
            async for msg in ws:
                if msg.type == WSMsgType.TEXT:
                    try:
                        self._on_message(json.loads(msg.data))
                    except (ValueError, KeyError) as exc:
                        print(f"bridge: dropped malformed message: {exc}", file=sys.stderr)
                elif msg.type in (WSMsgType.ERROR, WSMsgType.CLOSE):
                    break
        finally:
            self._ws = None
            self._disconnected_at = time.monotonic()
        return ws

    def _on_message(self, obj: dict) -> None:
        t = self._clock.now_us()
        kind = obj.get("type")
        if kind == "Ready":
            self._ready.put(t)
        elif kind == "Answer":
            if self._pending_scale is None:
                print("bridge: Answer with no question pending, ignored", file=sys.stderr)
                return
            lo, hi = self._pending_scale
            value = max(lo, min(hi, int(obj["value"])))
            self._pending_scale = None
            self._answers.put((value, t))
        elif kind == "Slider":
            value = max(0.0, min(1.0, float(obj["value"])))
            with self._slider_lock:
                self._slider_value = value
        elif kind == "StimulusEnded":
            if self._stim_playing:
                self._stim_playing = False
                self._ended.put(t)
        elif kind == "Heartbeat":
            pass
        else:
            print(f"bridge: unknown message type {kind!r}, ignored", file=sys.stderr)

    # -- engine-side plumbing -----------------------------------------------------

    def _check_abort(self) -> None:
        if self._aborted.is_set():
            raise SubjectAbort("subject connection lost")
        if (
            self._ws is None
            and self._ever_connected
            and self._disconnected_at is not None
            and time.monotonic() - self._disconnected_at > self._grace_s
        ):
            self._aborted.set()
            raise SubjectAbort("subject connection lost (reconnect grace expired)")

    def _take(self, q: queue.Queue, timeout_s: float | None = None):
        deadline = time.monotonic() + timeout_s if timeout_s is not None else None
        while True:
            self._check_abort()
            try:
                return q.get(timeout=0.1)
            except queue.Empty:
                if deadline is not None and time.monotonic() >= deadline:
                    raise TimeoutError("no subject response")

    def _send(self, obj: dict) -> None:
        self._check_abort()
        text = json.dumps(obj)
        self._last_sent = text
        fut = asyncio.run_coroutine_threadsafe(self._send_async(text), self._loop)
        fut.result(timeout=5.0)

    async def _send_async(self, text: str) -> None:
        if self._ws is not None:
            await self._ws.send_str(text)
        # else: kept in _last_sent, replayed on reconnect

    def wait_for_subject(self, timeout_s: float) -> bool:
        """Block until the UI connects and sends its first Ready."""
        try:
            self._take(self._ready, timeout_s)
            return True
        except (TimeoutError, SubjectAbort):
            return False

    # -- SubjectPort ---------------------------------------------------------------

    def apply_theme(self, display: DisplayStyle) -> None:
        self._send(
            {
                "type": "Theme",
                "schema": UI_SCHEMA,
                "background_color": display.background_color,
                "font_color": display.font_color,
                "font_size_pt": display.font_size_pt,
            }
        )

    def show_instructions(self, text: str) -> None:
        self._send({"type": "ShowInstructions", "text": text})
        self._take(self._ready)

    def show_question(
        self, prompt: str, scale_min: int, scale_max: int, anchors: tuple[str, str] | None
    ) -> tuple[int, int]:
        self._pending_scale = (scale_min, scale_max)
        self._send(
            {
                "type": "ShowQuestion",
                "prompt": prompt,
                "scale_min": scale_min,
                "scale_max": scale_max,
                "anchors": list(anchors) if anchors else None,
            }
        )
        value, t = self._take(self._answers)
        return value, t

    def start_continuous(self, min_label: str, max_label: str, duration_us: int | None) -> None:
        self._send({"type": "StartContinuous", "labels": [min_label, max_label]})

    def stop_continuous(self) -> None:
        self._send({"type": "StopContinuous"})

    def current_slider(self) -> float:
        self._check_abort()
        with self._slider_lock:
            return self._slider_value

    def session_done(self) -> None:
        self._send({"type": "SessionDone"})

    # -- PlaybackPort ----------------------------------------------------------------

    def start(self, index: int, requested_us: int, label: str | None = None) -> int:
        self._clock.wait_until(requested_us)
        self._stim_playing = True
        self._send(
            {
                "type": "PresentStimulus",
                "url": f"/session/{self.token}/stim/{index}",
                "label": label,
            }
        )
        return self._clock.now_us()

    def is_done(self, index: int) -> bool:
        self._check_abort()
        return not self._stim_playing

    def wait_done(self, index: int) -> int:
        return self._take(self._ended)

    def known_duration_us(self, index: int) -> int | None:
        return None
