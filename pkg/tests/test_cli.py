"""Command-line interface: exit codes, outputs, and the viewer server."""
import base64
import json
import re
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from thurston.cli import main

ROOT = Path(__file__).resolve().parent.parent
SCENE = str(ROOT / "scenes" / "e3_torus.json")


def run_cli(args):
    return main(args)


def test_render_roundtrip(tmp_path, capsys):
    out = tmp_path / "frame.ppm"
    code = run_cli(["render", "--scene", SCENE, "--width", "32", "--height",
                    "24", "--out", str(out), "--max-dist", "6"])
    assert code == 0
    data = out.read_bytes()
    assert data.startswith(b"P6\n32 24\n255\n")
    assert len(data) == len(b"P6\n32 24\n255\n") + 32 * 24 * 3


def test_render_bad_scene(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli(["render", "--scene", str(bad), "--out",
                    str(tmp_path / "x.ppm")]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"geometry": "e3", "camera": {}, "nope": 1,
                                   "materials": [], "lights": [],
                                   "objects": {}}))
    assert run_cli(["render", "--scene", str(unknown), "--out",
                    str(tmp_path / "x.ppm")]) == 2


def test_render_io_failure(tmp_path):
    code = run_cli(["render", "--scene", SCENE, "--width", "8", "--height",
                    "8", "--max-dist", "4",
                    "--out", str(tmp_path / "missing_dir" / "x.ppm")])
    assert code == 3


def test_print_defaults(capsys):
    assert run_cli(["render", "--print-defaults"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["march"]["eps"] == 1e-4
    assert cfg["march"]["max_steps"] == 120
    assert cfg["march"]["max_dist"] == 50.0
    assert cfg["lighting"]["intensity_clamp"] == 100.0


def test_bench_flow_csv(tmp_path, capsys):
    code = run_cli(["bench-flow", "--geometry", "nil", "--t", "2", "--n",
                    "20", "--seed", "0", "--methods", "rk4", "--dt", "0.01"])
    assert code == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0].startswith("method,dt,seconds")
    assert len(lines) == 3
    assert lines[1].startswith("exact,,")
    exact_cols = lines[1].split(",")
    assert float(exact_cols[3]) == 0.0 and float(exact_cols[7]) == 0.0
    assert run_cli(["bench-flow", "--geometry", "sol"]) == 2
    assert run_cli(["bench-flow", "--geometry", "klein"]) == 2


def test_probe_counts(capsys):
    assert run_cli(["probe", "--geometry", "nil", "--point", "2,0,15,1"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert set(first) == {"direction", "length", "family"}
    assert run_cli(["probe", "--geometry", "sl2", "--cyl", "1,0,15"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) == 3
    assert run_cli(["probe", "--geometry", "e3", "--point", "1,2,2,1"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) == 1
    assert json.loads(lines[0])["length"] == pytest.approx(3.0)


def test_probe_solver_failure(monkeypatch, capsys):
    from thurston import lighting
    from thurston.kernel import SolverFailureError

    def boom(s, q, max_pairs):
        raise SolverFailureError("forced")

    monkeypatch.setattr(lighting, "lighting_pairs", boom)
    assert run_cli(["probe", "--geometry", "nil", "--point", "1,0,1,1"]) == 4


class ServerProc:
    def __init__(self, scene, extra_args=()):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "thurston.cli", "serve", "--scene", scene,
             "--port", "0", "--width", "24", "--height", "16",
             "--max-dist", "6", "--max-sessions", "2", *extra_args],
            stderr=subprocess.PIPE, text=True)
        line = self.proc.stderr.readline()
        match = re.search(r"ws://[\d.]+:(\d+)", line)
        assert match, f"no port banner in {line!r}"
        self.port = int(match.group(1))

    def stop(self):
        self.proc.terminate()
        self.proc.wait(timeout=10)


@pytest.fixture(scope="module")
def server():
    srv = ServerProc(SCENE)
    yield srv
    srv.stop()


def recv_typed(client, kind):
    for _ in range(10):
        msg = json.loads(client.recv())
        if msg["type"] == kind:
            return msg
    raise AssertionError(f"no {kind} message")


def test_serve_protocol_roundtrip(server):
    from thurston.wsserver import WsClient
    from thurston import load_scene, apply_move, rotate_pose
    from thurston.render import Camera, render_frame, MarchConfig
    from thurston.cli import _lighting_config, build_parser

    client = WsClient("127.0.0.1", server.port)
    hello = recv_typed(client, "hello")
    assert hello["geometry"] == "e3"
    first_frame = recv_typed(client, "frame")
    assert first_frame["w"] == 24 and first_frame["h"] == 16

    # server pose must equal a direct apply_move / rotate_pose computation
    scene = load_scene(SCENE)
    pose = scene.camera.copy()
    moves = [np.array([0.05, 0.0, -0.12]), np.array([-0.02, 0.03, -0.2])]
    for dv in moves:
        client.send(json.dumps({"type": "move", "dv": list(dv)}))
        posemsg = recv_typed(client, "pose")
        recv_typed(client, "frame")
        pose = apply_move(pose, dv)
        assert np.abs(np.array(posemsg["g"]).reshape(4, 4)
                      - pose.g.matrix).max() < 1e-9
        assert np.abs(np.array(posemsg["m"]).reshape(3, 3) - pose.m).max() < 1e-9
    client.send(json.dumps({"type": "rotate", "yaw": 0.3, "pitch": -0.1}))
    posemsg = recv_typed(client, "pose")
    frame = recv_typed(client, "frame")
    pose = rotate_pose(pose, yaw=0.3, pitch=-0.1)
    assert np.abs(np.array(posemsg["m"]).reshape(3, 3) - pose.m).max() < 1e-9

    # streamed frame bytes match an offline render of the same pose
    parser = build_parser()
    args = parser.parse_args(["serve", "--scene", SCENE, "--max-dist", "6"])
    camera = Camera(pose, fov=args.fov, width=24, height=16)
    image = render_frame(camera, scene, _lighting_config(args),
                         MarchConfig(eps=args.eps, max_steps=args.max_steps,
                                     max_dist=6.0, step_scale=args.step_scale))
    assert base64.b64decode(frame["pixels"]) == image.to_rgb8()

    # resize renegotiates the streamed dimensions
    client.send(json.dumps({"type": "resize", "w": 16, "h": 12}))
    recv_typed(client, "pose")
    frame = recv_typed(client, "frame")
    assert frame["w"] == 16 and frame["h"] == 12
    client.close()

    # the pose survives a reconnect
    time.sleep(0.2)
    client2 = WsClient("127.0.0.1", server.port)
    hello2 = recv_typed(client2, "hello")
    assert np.abs(np.array(hello2["pose"]["g"]).reshape(4, 4)
                  - pose.g.matrix).max() < 1e-9
    client2.close()
