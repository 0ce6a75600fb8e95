"""Operator command line: validate, compile, check, run, serve-acq.

Exit codes are stable and machine-parsable: 0 success, 1 validation or
integrity errors, 2 runtime failure, 3 usage error.  Diagnostics go to
stderr; reports and file paths go to stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading
from pathlib import Path

from . import results, triggers
from .clock import RealClock, VirtualClock
from .engine import (
    PlanFormatError,
    SessionAborted,
    ValidationFailed,
    check_plan,
    compile_plan,
    load_clips,
    load_plan,
    run_session,
    save_plan,
    scripted_subject,
)
from .specfile import (
    SpecError,
    StimulusRootUnreadable,
    StudyType,
    TriggerMode,
    ValidationReport,
    describe_spec,
    parse_spec,
    validate_spec,
)
from .wav import SimulatedPlayback

OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_USAGE = 3

STIM_ROOT_ENV = "AUDEXP_STIM_ROOT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 3, not argparse's 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="audexp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_stim_root(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--stim-root",
            default=os.environ.get(STIM_ROOT_ENV),
            help=f"stimulus directory (default: ${STIM_ROOT_ENV})",
        )

    p = sub.add_parser("validate", help="check a spec and its stimulus files")
    p.add_argument("spec", help="path to the spec document")
    add_stim_root(p)

    p = sub.add_parser("compile", help="compile a spec into a per-subject session plan")
    p.add_argument("spec")
    add_stim_root(p)
    p.add_argument("--subject", required=True, help="subject identifier")
    p.add_argument("--seed", required=True, type=int, help="session seed")
    p.add_argument("--out", required=True, help="plan file to write")

    p = sub.add_parser("check", help="re-verify a compiled plan's integrity")
    p.add_argument("plan")
    add_stim_root(p)
    p.add_argument("--spec", help="also check the plan against this spec document")

    p = sub.add_parser("run", help="execute a session plan")
    p.add_argument("plan")
    add_stim_root(p)
    p.add_argument("--out", required=True, help="result directory to create")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--simulate", action="store_true", help="headless run on the virtual clock")
    mode.add_argument("--serve", action="store_true", help="host the live subject UI bridge")
    p.add_argument("--port", type=int, default=8765, help="bridge port for --serve")
    p.add_argument("--ui-dir", help="directory with the built subject UI (for --serve)")
    p.add_argument(
        "--subject-timeout", type=float, default=120.0,
        help="seconds to wait for a subject to connect (--serve)",
    )
    p.add_argument("--acq", metavar="HOST:PORT", help="TCP trigger link endpoint override")
    p.add_argument(
        "--answer", default="midpoint",
        help="scripted answer policy: midpoint | min | max | fixed:<v> | uniform:<seed>",
    )
    p.add_argument(
        "--slider", default="ramp",
        help="scripted slider policy: ramp | constant:<v>",
    )
    p.add_argument("--answer-delay-ms", type=int, default=500)

    p = sub.add_parser("serve-acq", help="run the simulated acquisition server")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--out", default="acq_dump.json", help="timeline dump written on shutdown")
    p.add_argument("--latency-ms", type=float, default=0.0)
    return parser


def _print_report(report: ValidationReport) -> None:
    for f in report.errors:
        print(f"error {f.code} {f.location}: {f.message}")
    for f in report.warnings:
        print(f"warning {f.code} {f.location}: {f.message}")
    print(f"{len(report.errors)} error(s), {len(report.warnings)} warning(s)")


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _stim_root(arg: str | None) -> str:
    if not arg:
        raise UsageError(f"--stim-root required (or set ${STIM_ROOT_ENV})")
    return arg


def _load_spec(path: str):
    text = _require_file(path, "spec file").read_text(encoding="utf-8")
    return parse_spec(text)


def cmd_validate(args) -> int:
    try:
        spec = _load_spec(args.spec)
    except SpecError as exc:
        print(f"error SpecInvalid: {exc}")
        return EXIT_VALIDATION
    report = validate_spec(spec, _stim_root(args.stim_root))
    _print_report(report)
    return OK if report.ok else EXIT_VALIDATION


def cmd_compile(args) -> int:
    try:
        spec = _load_spec(args.spec)
    except SpecError as exc:
        print(f"error SpecInvalid: {exc}")
        return EXIT_VALIDATION
    try:
        plan = compile_plan(spec, args.subject, args.seed, _stim_root(args.stim_root))
    except ValidationFailed as exc:
        _print_report(exc.report)
        return EXIT_VALIDATION
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_plan(plan, out)
    readme = out.parent / "README-FIRST.txt"
    readme.write_text(describe_spec(spec), encoding="utf-8", newline="\n")
    print(out)
    print(readme)
    return OK


def cmd_check(args) -> int:
    plan = load_plan(_require_file(args.plan, "plan file"))
    spec = _load_spec(args.spec) if args.spec else None
    report = check_plan(plan, _stim_root(args.stim_root), spec)
    _print_report(report)
    return OK if report.ok else EXIT_VALIDATION


def _parse_answer_policy(text: str):
    if text in ("midpoint",):
        return "midpoint"
    if text == "min":
        return ("fixed-min",)  # resolved per scale below
    if text == "max":
        return ("fixed-max",)
    if text.startswith("fixed:"):
        return ("fixed", int(text.split(":", 1)[1]))
    if text.startswith("uniform:"):
        return ("uniform", int(text.split(":", 1)[1]))
    raise UsageError(f"bad --answer policy: {text}")


def _parse_slider_policy(text: str):
    if text == "ramp":
        return "ramp"
    if text.startswith("constant:"):
        return ("constant", float(text.split(":", 1)[1]))
    raise UsageError(f"bad --slider policy: {text}")


def _connect_trigger(plan, acq: str | None, clock):
    spec = plan.spec
    if spec.study_type not in (StudyType.EEG, StudyType.NEUROPHYSIOLOGICAL):
        return None
    config = spec.trigger
    if acq:
        host, _, port_text = acq.rpartition(":")
        if not host or not port_text.isdigit():
            raise UsageError(f"bad --acq endpoint: {acq}")
        config = type(config)(
            mode=TriggerMode.TCP,
            host=host,
            port=int(port_text),
            code_map=config.code_map,
            send_response_triggers=config.send_response_triggers,
        )
    return triggers.connect(config, clock)


def cmd_run(args) -> int:
    plan = load_plan(_require_file(args.plan, "plan file"))
    stim_root = _stim_root(args.stim_root)
    report = check_plan(plan, stim_root)
    if not report.ok:
        _print_report(report)
        return EXIT_VALIDATION

    if args.simulate:
        return _run_simulated(args, plan, stim_root)
    return _run_served(args, plan, stim_root)


def _run_simulated(args, plan, stim_root: str) -> int:
    clock = VirtualClock()
    clips = load_clips(plan, stim_root)
    playback = SimulatedPlayback.from_clips(clock, clips)
    answers = _parse_answer_policy(args.answer)
    if answers == ("fixed-min",):
        answers = ("fixed", min(q.scale_min for q in plan.spec.questions))
    elif answers == ("fixed-max",):
        answers = ("fixed", max(q.scale_max for q in plan.spec.questions))
    subject = scripted_subject(
        clock, answers=answers, slider=_parse_slider_policy(args.slider),
        answer_delay_ms=args.answer_delay_ms,
    )
    trigger = None
    try:
        trigger = _connect_trigger(plan, args.acq, clock)
    except (OSError, triggers.TriggerError) as exc:
        print(f"trigger link failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        return _execute(plan, subject, playback, trigger, clock, args.out)
    finally:
        if trigger is not None:
            trigger.close()


def _run_served(args, plan, stim_root: str) -> int:
    from .bridge import SubjectBridge

    clock = RealClock()
    clips = load_clips(plan, stim_root)
    bridge = SubjectBridge(
        clock=clock,
        clips=clips,
        port=args.port,
        ui_dir=args.ui_dir,
    )
    trigger = None
    try:
        bridge.start_server()
        print(f"subject UI: {bridge.url}", file=sys.stderr)
        if not bridge.wait_for_subject(args.subject_timeout):
            print("no subject connected before timeout", file=sys.stderr)
            return EXIT_RUNTIME
        try:
            trigger = _connect_trigger(plan, args.acq, clock)
        except (OSError, triggers.TriggerError) as exc:
            print(f"trigger link failed: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        return _execute(plan, bridge, bridge, trigger, clock, args.out)
    finally:
        if trigger is not None:
            trigger.close()
        bridge.stop_server()


def _execute(plan, subject, playback, trigger, clock, out_dir: str) -> int:
    try:
        log = run_session(plan, subject, playback, trigger, clock)
    except SessionAborted as exc:
        results.finalize(exc.log, plan, out_dir)
        print(out_dir)
        print(f"session aborted: {exc.reason}", file=sys.stderr)
        return EXIT_RUNTIME
    results.finalize(log, plan, out_dir)
    print(out_dir)
    return OK


def cmd_serve_acq(args) -> int:
    try:
        server = triggers.run_sim_server(port=args.port, receive_latency_ms=args.latency_ms)
    except triggers.PortInUse as exc:
        print(f"cannot start acquisition server: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    stop = threading.Event()

    def handle(_sig, _frame):
        stop.set()

    signal.signal(signal.SIGINT, handle)
    signal.signal(signal.SIGTERM, handle)
    print(f"acquisition server listening on {server.host}:{server.port}", file=sys.stderr)
    stop.wait()
    server.stop()
    dump = server.dump()
    Path(args.out).write_text(
        json.dumps(dump.to_obj(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
        newline="\n",
    )
    print(args.out)
    return OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "validate": cmd_validate,
            "compile": cmd_compile,
            "check": cmd_check,
            "run": cmd_run,
            "serve-acq": cmd_serve_acq,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PlanFormatError as exc:
        print(f"error PlanInvalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StimulusRootUnreadable as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except results.OutDirExists as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
