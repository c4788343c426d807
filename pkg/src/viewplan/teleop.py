"""Websocket bridge for human demonstration collection.

One live session per server.  JSON text frames; the server answers every
client action or reset with exactly one frame message, so a step-locked
client stays aligned with the recording.  Saving validates the recording
against all demonstration invariants (the final frame must satisfy the
success criterion) and writes the standard demo format with source=human.

Client -> server:  {"type":"action","delta":[tx,ty,tz,roll,pitch,yaw]}
                   {"type":"reset"} | {"type":"save"} | {"type":"discard"}
Server -> client:  {"type":"hello", scene_id, intrinsics, max_steps, clip}
                   {"type":"frame", step, rgb_png_base64, visibility,
                    in_frame, success, pose}
                   {"type":"saved", path} | {"type":"rejected", reason}
                   {"type":"discarded"}
"""

from __future__ import annotations

import base64
import io
import uuid

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from PIL import Image
from starlette.concurrency import run_in_threadpool

from .camera import CameraIntrinsics
from .controller import CLIP_ROTATION, CLIP_TRANSLATION, clip_delta
from .dataset import (
    MAX_DEMO_STEPS,
    DemoStep,
    Demonstration,
    DemoValidationError,
    quantize_rgb,
    save_demo,
)
from .render import observe
from .scene import Scene
from .se3 import Pose, PoseDelta, Trajectory, compose, pack_pose, quantize_pose
from .visibility import visibility


class TeleopSession:
    def __init__(self, scene: Scene, start: Pose, intrinsics: CameraIntrinsics, tau_v: float):
        self.session_id = uuid.uuid4().hex
        self.scene = scene
        self.intrinsics = intrinsics
        self.tau_v = tau_v
        self.start = quantize_pose(start)
        self.state = "live"
        self.reset()

    def reset(self):
        self.camera = self.start
        self.poses = [self.start]
        self.recording: list = []  # DemoStep per accepted action
        self.last_obs = observe(self.scene, self.camera, self.camera, self.intrinsics)
        self.state = "live"

    def frame_payload(self) -> dict:
        rep = visibility(self.scene, self.camera, self.intrinsics)
        png = io.BytesIO()
        Image.fromarray(quantize_rgb(self.last_obs.rgb), "RGB").save(png, format="PNG")
        return {
            "type": "frame",
            "step": len(self.recording),
            "rgb_png_base64": base64.b64encode(png.getvalue()).decode("ascii"),
            "visibility": rep.visibility_fraction,
            "in_frame": rep.in_frame,
            "success": rep.visibility_fraction >= self.tau_v and rep.in_frame,
            "pose": [float(x) for x in pack_pose(self.camera)],
        }

    def apply_action(self, delta: PoseDelta) -> None:
        # the terminal zero-action step is appended at save time, so at most
        # MAX_DEMO_STEPS - 1 client actions fit the episode cap
        if len(self.recording) >= MAX_DEMO_STEPS - 1:
            raise TeleopStepLimit(f"episode cap of {MAX_DEMO_STEPS} steps reached")
        clipped = clip_delta(delta, CLIP_TRANSLATION, CLIP_ROTATION)
        self.recording.append(DemoStep(observation=self.last_obs, action=clipped))
        prev = self.camera
        self.camera = quantize_pose(compose(self.camera, clipped))
        self.poses.append(self.camera)
        self.last_obs = observe(self.scene, self.camera, prev, self.intrinsics)

    def build_demonstration(self) -> Demonstration:
        steps = tuple(self.recording) + (
            DemoStep(observation=self.last_obs, action=PoseDelta.zero()),
        )
        return Demonstration(
            demo_id=f"teleop-{self.session_id[:8]}",
            scene_id=self.scene.scene_id,
            source="human",
            steps=steps,
            camera_trajectory=Trajectory(tuple(self.poses)),
            intrinsics=self.intrinsics,
        )


class TeleopStepLimit(RuntimeError):
    pass


def create_teleop_app(
    scene: Scene,
    start: Pose,
    out_dir,
    intrinsics: CameraIntrinsics | None = None,
    tau_v: float = 0.95,
    frontend_dir=None,
) -> FastAPI:
    intr = intrinsics if intrinsics is not None else CameraIntrinsics.default()
    app = FastAPI()
    app.state.live_socket = None

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        if app.state.live_socket is not None:
            await ws.send_json({"type": "rejected", "reason": "session_busy"})
            await ws.close()
            return
        app.state.live_socket = ws
        session = await run_in_threadpool(TeleopSession, scene, start, intr, tau_v)
        try:
            await ws.send_json(
                {
                    "type": "hello",
                    "scene_id": scene.scene_id,
                    "intrinsics": intr.to_dict(),
                    "max_steps": MAX_DEMO_STEPS,
                    "clip": {"translation": CLIP_TRANSLATION, "rotation": CLIP_ROTATION},
                }
            )
            await ws.send_json(await run_in_threadpool(session.frame_payload))
            while True:
                msg = await ws.receive_json()
                kind = msg.get("type")
                if kind == "action":
                    if session.state != "live":
                        await ws.send_json({"type": "rejected", "reason": "session_not_live"})
                        continue
                    try:
                        delta = PoseDelta.from_array(np.asarray(msg["delta"], dtype=np.float64))
                    except (KeyError, ValueError):
                        await ws.send_json({"type": "rejected", "reason": "malformed_action"})
                        continue
                    try:
                        await run_in_threadpool(session.apply_action, delta)
                    except TeleopStepLimit:
                        await ws.send_json({"type": "rejected", "reason": "step_limit"})
                        continue
                    await ws.send_json(await run_in_threadpool(session.frame_payload))
                elif kind == "reset":
                    await run_in_threadpool(session.reset)
                    await ws.send_json(await run_in_threadpool(session.frame_payload))
                elif kind == "save":
                    if session.state != "live":
                        await ws.send_json({"type": "rejected", "reason": "session_not_live"})
                        continue
                    demo = session.build_demonstration()
                    try:
                        path = await run_in_threadpool(
                            save_demo, demo, scene, out_dir, tau_v
                        )
                    except DemoValidationError as e:
                        await ws.send_json({"type": "rejected", "reason": str(e)})
                        continue
                    session.state = "saved"
                    await ws.send_json({"type": "saved", "path": str(path)})
                elif kind == "discard":
                    session.state = "discarded"
                    await ws.send_json({"type": "discarded"})
                else:
                    await ws.send_json({"type": "rejected", "reason": "unknown_message"})
        except WebSocketDisconnect:
            pass
        finally:
            app.state.live_socket = None

    if frontend_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    return app
