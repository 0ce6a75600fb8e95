from __future__ import annotations

import json
import os
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest

from audexp.cli import main
from audexp.engine import load_plan
from audexp.fixtures import demo_spec, make_wav, write_demo_stimuli
from audexp.specfile import serialize_spec
from audexp.triggers import run_sim_server


@pytest.fixture()
def spec_file(tmp_path, stim_root):
    path = tmp_path / "demo.yaml"
    path.write_text(serialize_spec(demo_spec()), encoding="utf-8")
    return path


def compile_demo(tmp_path, spec_file, stim_root, seed="7"):
    plan_path = tmp_path / "out" / "plan.json"
    code = main([
        "compile", str(spec_file), "--stim-root", str(stim_root),
        "--subject", "subj01", "--seed", seed, "--out", str(plan_path),
    ])
    assert code == 0
    return plan_path


class TestValidate:
    def test_valid_demo_exits_zero(self, spec_file, stim_root, capsys):
        assert main(["validate", str(spec_file), "--stim-root", str(stim_root)]) == 0
        out = capsys.readouterr().out
        assert "0 error(s)" in out

    def test_missing_stimulus_exits_one_with_one_error_line(self, spec_file, stim_root, capsys):
        (stim_root / "SCP 04_B-tonic.wav").unlink()
        assert main(["validate", str(spec_file), "--stim-root", str(stim_root)]) == 1
        out = capsys.readouterr().out
        error_lines = [ln for ln in out.splitlines() if ln.startswith("error ")]
        assert len(error_lines) == 1
        assert "StimulusFileMissing" in error_lines[0]

    def test_nonexistent_spec_path_is_usage_error(self, stim_root):
        assert main(["validate", "/no/such/spec.yaml", "--stim-root", str(stim_root)]) == 3

    def test_unparseable_spec_is_validation_error(self, tmp_path, stim_root):
        bad = tmp_path / "bad.yaml"
        bad.write_text("name: x\nstudy_type: nonsense\nstimuli: []\n")
        assert main(["validate", str(bad), "--stim-root", str(stim_root)]) == 1

    def test_stim_root_env_fallback(self, spec_file, stim_root, monkeypatch):
        monkeypatch.setenv("AUDEXP_STIM_ROOT", str(stim_root))
        assert main(["validate", str(spec_file)]) == 0

    def test_missing_stim_root_is_usage_error(self, spec_file, monkeypatch):
        monkeypatch.delenv("AUDEXP_STIM_ROOT", raising=False)
        assert main(["validate", str(spec_file)]) == 3


class TestCompile:
    def test_writes_plan_and_readme(self, tmp_path, spec_file, stim_root):
        plan_path = compile_demo(tmp_path, spec_file, stim_root)
        assert plan_path.is_file()
        readme = plan_path.parent / "README-FIRST.txt"
        assert readme.is_file()
        text = readme.read_text()
        assert "demoBRS" in text and "12 stimuli" in text
        assert len(load_plan(plan_path).trials) == 12

    def test_same_seed_gives_identical_plan_bytes(self, tmp_path, spec_file, stim_root):
        a = compile_demo(tmp_path / "a", spec_file, stim_root)
        b = compile_demo(tmp_path / "b", spec_file, stim_root)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_seed_syntax_is_usage_error(self, tmp_path, spec_file, stim_root):
        code = main([
            "compile", str(spec_file), "--stim-root", str(stim_root),
            "--subject", "s", "--seed", "not-a-number", "--out", str(tmp_path / "p.json"),
        ])
        assert code == 3

    def test_invalid_spec_exits_one(self, tmp_path, spec_file, stim_root):
        (stim_root / "SCP 01_B-dominant.wav").unlink()
        code = main([
            "compile", str(spec_file), "--stim-root", str(stim_root),
            "--subject", "s", "--seed", "1", "--out", str(tmp_path / "p.json"),
        ])
        assert code == 1


class TestCheck:
    def test_clean_plan_exits_zero(self, tmp_path, spec_file, stim_root):
        plan_path = compile_demo(tmp_path, spec_file, stim_root)
        assert main(["check", str(plan_path), "--stim-root", str(stim_root)]) == 0

    def test_tampered_wav_exits_one(self, tmp_path, spec_file, stim_root, capsys):
        plan_path = compile_demo(tmp_path, spec_file, stim_root)
        make_wav(stim_root / "SCP 02_B-flatII.wav", n_frames=999)
        assert main(["check", str(plan_path), "--stim-root", str(stim_root)]) == 1
        assert "HashMismatch" in capsys.readouterr().out

    def test_missing_plan_is_usage_error(self, stim_root):
        assert main(["check", "/no/plan.json", "--stim-root", str(stim_root)]) == 3

    def test_against_spec_document(self, tmp_path, spec_file, stim_root):
        plan_path = compile_demo(tmp_path, spec_file, stim_root)
        assert main([
            "check", str(plan_path), "--stim-root", str(stim_root), "--spec", str(spec_file),
        ]) == 0


class TestRunSimulate:
    def test_simulated_demo_run(self, tmp_path, spec_file, stim_root, capsys):
        plan_path = compile_demo(tmp_path, spec_file, stim_root)
        out_dir = tmp_path / "results"
        code = main([
            "run", str(plan_path), "--stim-root", str(stim_root),
            "--out", str(out_dir), "--simulate",
        ])
        assert code == 0
        assert out_dir.is_dir()
        events = list(out_dir.glob("events_*.jsonl"))
        assert len(events) == 1

    def test_integrity_failure_blocks_run(self, tmp_path, spec_file, stim_root):
        plan_path = compile_demo(tmp_path, spec_file, stim_root)
        make_wav(stim_root / "SCP 03_B-silence.wav", n_frames=1)
        code = main([
            "run", str(plan_path), "--stim-root", str(stim_root),
            "--out", str(tmp_path / "r"), "--simulate",
        ])
        assert code == 1

    def test_answer_policy_flags(self, tmp_path, spec_file, stim_root):
        plan_path = compile_demo(tmp_path, spec_file, stim_root)
        out_dir = tmp_path / "results"
        code = main([
            "run", str(plan_path), "--stim-root", str(stim_root),
            "--out", str(out_dir), "--simulate", "--answer", "fixed:9",
        ])
        assert code == 0
        events_file = next(out_dir.glob("events_*.jsonl"))
        values = [
            json.loads(ln)["value"]
            for ln in events_file.read_text().splitlines()[1:]
            if json.loads(ln)["kind"] == "answer_committed"
        ]
        assert values and all(v == 9 for v in values)

    def test_bad_policy_is_usage_error(self, tmp_path, spec_file, stim_root):
        plan_path = compile_demo(tmp_path, spec_file, stim_root)
        code = main([
            "run", str(plan_path), "--stim-root", str(stim_root),
            "--out", str(tmp_path / "r"), "--simulate", "--answer", "telepathic",
        ])
        assert code == 3

    def test_eeg_run_against_sim_server(self, tmp_path, stim_root):
        from audexp.specfile import parse_spec
        from test_engine import eeg_spec  # same fixture shape

        with run_sim_server() as server:
            spec = eeg_spec(n_stimuli=5, host=server.host, port=server.port)
            spec_path = tmp_path / "eeg.yaml"
            spec_path.write_text(serialize_spec(spec))
            plan_path = tmp_path / "plan.json"
            assert main([
                "compile", str(spec_path), "--stim-root", str(stim_root),
                "--subject", "s7", "--seed", "4", "--out", str(plan_path),
            ]) == 0
            assert main([
                "run", str(plan_path), "--stim-root", str(stim_root),
                "--out", str(tmp_path / "r"), "--simulate",
            ]) == 0
            time.sleep(0.05)
            assert len(server.dump().events) == 5

    def test_eeg_run_with_acq_override(self, tmp_path, stim_root):
        from test_engine import eeg_spec

        with run_sim_server() as server:
            spec = eeg_spec(n_stimuli=3, host="127.0.0.1", port=1)  # dead endpoint in spec
            spec_path = tmp_path / "eeg.yaml"
            spec_path.write_text(serialize_spec(spec))
            plan_path = tmp_path / "plan.json"
            main([
                "compile", str(spec_path), "--stim-root", str(stim_root),
                "--subject", "s", "--seed", "1", "--out", str(plan_path),
            ])
            code = main([
                "run", str(plan_path), "--stim-root", str(stim_root),
                "--out", str(tmp_path / "r"), "--simulate",
                "--acq", f"{server.host}:{server.port}",
            ])
            assert code == 0
            time.sleep(0.05)
            assert len(server.dump().events) == 3

    def test_unreachable_acq_is_runtime_failure(self, tmp_path, stim_root):
        from test_engine import eeg_spec

        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        dead_port = probe.getsockname()[1]
        probe.close()
        spec = eeg_spec(n_stimuli=2, port=dead_port)
        spec_path = tmp_path / "eeg.yaml"
        spec_path.write_text(serialize_spec(spec))
        plan_path = tmp_path / "plan.json"
        main([
            "compile", str(spec_path), "--stim-root", str(stim_root),
            "--subject", "s", "--seed", "1", "--out", str(plan_path),
        ])
        code = main([
            "run", str(plan_path), "--stim-root", str(stim_root),
            "--out", str(tmp_path / "r"), "--simulate",
        ])
        assert code == 2


class TestServeAcq:
    def test_standalone_server_writes_dump_on_shutdown(self, tmp_path):
        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        dump_path = tmp_path / "dump.json"
        proc = subprocess.Popen(
            [sys.executable, "-m", "audexp.cli", "serve-acq",
             "--port", str(port), "--out", str(dump_path)],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        )
        try:
            deadline = time.monotonic() + 10
            while time.monotonic() < deadline:
                try:
                    s = socket.create_connection(("127.0.0.1", port), timeout=0.2)
                    s.close()
                    break
                except OSError:
                    time.sleep(0.05)
            else:
                pytest.fail("server never came up")
            proc.send_signal(signal.SIGINT)
            proc.wait(timeout=10)
            assert proc.returncode == 0
            dump = json.loads(dump_path.read_text())
            assert dump["schema"] == "audexp.acq/1"
        finally:
            if proc.poll() is None:
                proc.kill()

    def test_occupied_port_exits_two(self, tmp_path):
        with run_sim_server() as server:
            code = main(["serve-acq", "--port", str(server.port), "--out", str(tmp_path / "d.json")])
            assert code == 2

    def test_eeg_session_dump_matches_session_log(self, tmp_path, stim_root):
        # Cross-file comparison: the standalone server's dump against the
        # result directory's events file.
        from test_engine import eeg_spec

        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        dump_path = tmp_path / "dump.json"
        proc = subprocess.Popen(
            [sys.executable, "-m", "audexp.cli", "serve-acq",
             "--port", str(port), "--out", str(dump_path)],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        )
        try:
            deadline = time.monotonic() + 10
            while time.monotonic() < deadline:
                try:
                    socket.create_connection(("127.0.0.1", port), timeout=0.2).close()
                    break
                except OSError:
                    time.sleep(0.05)
            spec = eeg_spec(n_stimuli=4, port=port)
            spec_path = tmp_path / "eeg.yaml"
            spec_path.write_text(serialize_spec(spec))
            plan_path = tmp_path / "plan.json"
            out_dir = tmp_path / "results"
            assert main([
                "compile", str(spec_path), "--stim-root", str(stim_root),
                "--subject", "x", "--seed", "9", "--out", str(plan_path),
            ]) == 0
            assert main([
                "run", str(plan_path), "--stim-root", str(stim_root),
                "--out", str(out_dir), "--simulate",
            ]) == 0
            time.sleep(0.2)
            proc.send_signal(signal.SIGINT)
            proc.wait(timeout=10)
            dump = json.loads(dump_path.read_text())
            dump_events = [e for e in dump["entries"] if e["kind"] == "event"]
            log_lines = [
                json.loads(ln)
                for ln in next(out_dir.glob("events_*.jsonl")).read_text().splitlines()[1:]
            ]
            onsets = [l for l in log_lines if l["kind"] == "stimulus_onset"]
            assert [e["code"] for e in dump_events] == [l["code"] for l in onsets]
            assert [e["onset_us"] for e in dump_events] == [l["t_us"] for l in onsets]
        finally:
            if proc.poll() is None:
                proc.kill()

    def test_serve_timeout_without_subject_exits_two(self, tmp_path, spec_file, stim_root):
        plan_path = compile_demo(tmp_path, spec_file, stim_root)
        code = main([
            "run", str(plan_path), "--stim-root", str(stim_root),
            "--out", str(tmp_path / "r"), "--serve", "--port", "0",
            "--subject-timeout", "0.4",
        ])
        assert code == 2


class TestUsage:
    def test_no_command_is_usage_error(self):
        assert main([]) == 3

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 3

    def test_run_requires_a_mode(self, tmp_path, spec_file, stim_root):
        plan_path = compile_demo(tmp_path, spec_file, stim_root)
        assert main(["run", str(plan_path), "--stim-root", str(stim_root),
                     "--out", str(tmp_path / "r")]) == 3
