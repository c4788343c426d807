"""Command-line surface: scene generation, collection, training, evaluation,
and the teleoperation server.

Every command is deterministic given its flags and seeds (teleop excepted).
Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import json
import os
import sys
import traceback

import click
import numpy as np

from .camera import CameraIntrinsics
from .config import ConfigError, ExperimentConfig
from .controller import EpisodeParams, evaluate, run_episode
from .dataset import (
    DemoValidationError,
    compute_stats,
    list_demo_dirs,
    load_demo,
    save_demo,
    save_stats,
)
from .expert import ExpertConfig, demonstrate, select_goal
from .nbv import BaselineParams, run_baseline_episode
from .scene import (
    SceneFormatError,
    SceneGenerationError,
    certify_scene,
    generate_scene,
    load_scene,
    sample_initial_viewpoints,
    save_scene,
    stable_hash,
)
from .visibility import is_success


class UserError(click.ClickException):
    pass


@click.group()
def cli():
    """Occlusion-aware viewpoint planning toolkit."""


@cli.command("gen-scenes")
@click.option("--n", type=int, required=True, help="number of scenes")
@click.option("--difficulty", type=click.Choice(["easy", "medium", "hard"]), default="medium")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), required=True)
def cmd_gen_scenes(n, difficulty, seed, out):
    """Write n certified scene JSON files."""
    if n < 1:
        raise UserError("--n must be at least 1")
    os.makedirs(out, exist_ok=True)
    for i in range(n):
        scene = generate_scene(seed + i, difficulty)
        ok, n_success, n_fail = certify_scene(scene)
        path = os.path.join(out, f"{scene.scene_id}.json")
        save_scene(scene, path)
        click.echo(
            f"{scene.scene_id}: {len(scene.occluders)} occluders, "
            f"certified {n_success}/{n_success + n_fail} viewpoints succeed -> {path}"
        )


@cli.command("collect")
@click.option("--scenes", type=click.Path(exists=True), required=True, help="scene dir")
@click.option("--expert", type=click.Choice(["scripted"]), default="scripted")
@click.option("--starts-per-scene", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--steps", default="30",
              help="expert trajectory horizon: a step count or 'auto' "
                   "(per-start, targeting ~2.5 cm mid-path steps)")
@click.option("--noise-std", type=float, default=0.0)
@click.option("--goal-tau", type=float, default=0.95,
              help="visibility bar the expert's goal viewpoint must clear")
@click.option("--occluded-starts/--any-starts", default=False,
              help="restrict start poses to ones that fail the success criterion")
@click.option("--out", type=click.Path(), required=True)
def cmd_collect(scenes, expert, starts_per_scene, seed, steps, noise_std, goal_tau, occluded_starts, out):
    """Run the scripted expert over every (scene, start) and write the dataset."""
    if starts_per_scene < 1:
        raise UserError("--starts-per-scene must be at least 1")
    scene_files = sorted(
        f for f in os.listdir(scenes) if f.endswith(".json") and f != "stats.json"
    )
    if not scene_files:
        raise UserError(f"no scene files in {scenes}")
    os.makedirs(out, exist_ok=True)
    if steps != "auto":
        try:
            fixed_steps = int(steps)
        except ValueError:
            raise UserError(f"--steps must be an integer or 'auto', got {steps!r}")
    intr = CameraIntrinsics.default()
    demos = []
    for sf in scene_files:
        scene = load_scene(os.path.join(scenes, sf))
        starts = sample_starts(
            scene,
            starts_per_scene,
            stable_hash(f"{seed}:{scene.scene_id}"),
            intr,
            goal_tau,
            occluded_starts,
        )
        for j, start in enumerate(starts):
            n = adaptive_horizon(scene, start, intr, goal_tau) if steps == "auto" else fixed_steps
            cfg = ExpertConfig(steps=n, noise_std=noise_std, tau_v=goal_tau)
            demo_id = f"{scene.scene_id}-start{j:03d}"
            demo = demonstrate(scene, start, cfg, intr, seed=seed + j, demo_id=demo_id)
            try:
                save_demo(demo, scene, out)
            except DemoValidationError as e:
                raise UserError(f"demo {demo_id} failed the save gate: {e}")
            click.echo(f"{demo_id}: {len(demo)} steps, gate ok")
            demos.append(demo)
    stats = compute_stats(demos)
    save_stats(stats, out)
    click.echo(f"wrote {len(demos)} demos + stats.json to {out}")


@cli.command("train")
@click.option("--demos", type=click.Path(exists=True), required=True, help="dataset dir")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
@click.option("--resume", type=click.Path(exists=True), default=None)
@click.option("--epochs", type=int, default=None, help="override the config value")
@click.option("--seed", type=int, default=None, help="override the config value")
def cmd_train(demos, config_path, out, resume, epochs, seed):
    """Train the chunked policy; epoch metrics stream as line-delimited JSON."""
    from .dataset import load_stats
    from .policy.train import train

    exp = ExperimentConfig.from_file(config_path) if config_path else ExperimentConfig()
    tr = exp.training
    demo_dirs = list_demo_dirs(demos)
    if not demo_dirs:
        raise UserError(f"no demos found in {demos}")
    try:
        stats = load_stats(demos)
    except FileNotFoundError:
        raise UserError(f"{demos} has no stats.json; run collect first")
    loaded = [load_demo(p) for p in demo_dirs]
    os.makedirs(out, exist_ok=True)
    log_path = os.path.join(out, "train_log.ndjson")
    log_file = open(log_path, "a")

    def log(row):
        line = json.dumps({**row, "beta": tr.beta})
        click.echo(line)
        log_file.write(line + "\n")
        log_file.flush()

    try:
        train(
            loaded,
            stats,
            exp.model,
            seed=tr.seed if seed is None else seed,
            epochs=tr.epochs if epochs is None else epochs,
            lr=tr.lr,
            batch_size=tr.batch_size,
            out_dir=out,
            beta=tr.beta,
            resume=resume,
            log_fn=log,
        )
    finally:
        log_file.close()
    click.echo(f"checkpoint written to {out}")


def adaptive_horizon(scene, start, intrinsics, goal_tau, peak_step_m=0.025):
    """Expert horizon sized so the largest eased step is about peak_step_m."""
    import math

    from .se3 import pose_distance

    probe = ExpertConfig(steps=15, tau_v=goal_tau)
    goal = select_goal(scene, start, probe, intrinsics)
    dist = pose_distance(start, goal, probe.w_rot)
    return int(np.clip(round(dist * math.pi / (2 * peak_step_m)) + 2, 6, 30))


def sample_starts(scene, n, seed, intrinsics, tau_v, occluded_only):
    """n start poses per scene; optionally only starts that fail the criterion."""
    if not occluded_only:
        return sample_initial_viewpoints(scene, n, seed)
    batch = max(4 * n, 16)
    while True:
        candidates = sample_initial_viewpoints(scene, batch, seed)
        failing = [p for p in candidates if not is_success(scene, p, intrinsics, tau_v)]
        if len(failing) >= n:
            return failing[:n]
        if batch >= 40 * n:
            raise UserError(
                f"could not find {n} occluded starts in {scene.scene_id}"
            )
        batch *= 2


@cli.command("eval")
@click.option("--ckpt", type=click.Path(exists=True), default=None)
@click.option("--scenes", type=click.Path(exists=True), required=True)
@click.option("--starts", type=int, default=1, help="episodes per scene")
@click.option("--max-steps", type=int, default=50)
@click.option("--tau-v", type=float, default=0.95)
@click.option("--planner", type=click.Choice(["act", "baseline"]), default="act")
@click.option("--seed", type=int, default=0)
@click.option("--occluded-starts/--any-starts", default=True,
              help="restrict start poses to ones that fail the success criterion")
@click.option("--report", type=click.Path(), required=True)
def cmd_eval(ckpt, scenes, starts, max_steps, tau_v, planner, seed, occluded_starts, report):
    """Run the selected planner over the evaluation grid and write the report."""
    scene_files = sorted(
        f for f in os.listdir(scenes) if f.endswith(".json") and f != "stats.json"
    )
    if not scene_files:
        raise UserError(f"no scene files in {scenes}")
    params = EpisodeParams(max_steps=max_steps, tau_v=tau_v)
    if planner == "act":
        if ckpt is None:
            raise UserError("--ckpt is required for planner=act")
        from .policy.train import load_checkpoint

        checkpoint = load_checkpoint(ckpt)
        intr = CameraIntrinsics.default(
            checkpoint.config.image_size[1], checkpoint.config.image_size[0]
        )
        episode_fn = lambda scene, start: run_episode(scene, start, checkpoint, params, intr)
    else:
        checkpoint = None
        intr = CameraIntrinsics.default()
        episode_fn = lambda scene, start: run_baseline_episode(
            scene, start, params, BaselineParams(seed=seed), intr
        )

    pairs = []
    for sf in scene_files:
        scene = load_scene(os.path.join(scenes, sf))
        eval_seed = stable_hash(f"eval:{seed}:{scene.scene_id}")
        for start in sample_starts(scene, starts, eval_seed, intr, tau_v, occluded_starts):
            pairs.append((scene, start))
    tag = "act" if planner == "act" else "nbv_baseline"
    result = evaluate(pairs, checkpoint, params, intr, planner=tag, episode_fn=episode_fn)
    with open(report, "w") as f:
        json.dump(result, f, indent=1)
        f.write("\n")
    agg = result["aggregate"]
    click.echo(
        f"{planner}: {agg['n_success']}/{agg['n_episodes']} success "
        f"({agg['success_rate']}%), mean latency "
        f"{agg['mean_latency_s'] if agg['mean_latency_s'] is None else round(agg['mean_latency_s'], 4)} s"
    )
    click.echo(f"report written to {report}")


@cli.command("teleop")
@click.option("--scene", "scene_path", type=click.Path(exists=True), required=True)
@click.option("--port", type=int, default=8765)
@click.option("--host", default="127.0.0.1")
@click.option("--out", type=click.Path(), required=True)
@click.option("--start-seed", type=int, default=0)
@click.option("--frontend", type=click.Path(exists=True), default=None,
              help="static UI bundle to serve at /")
def cmd_teleop(scene_path, port, host, out, start_seed, frontend):
    """Serve the websocket teleoperation bridge for the browser control panel."""
    import uvicorn

    from .teleop import create_teleop_app

    scene = load_scene(scene_path)
    start = sample_initial_viewpoints(scene, 1, seed=start_seed)[0]
    os.makedirs(out, exist_ok=True)
    app = create_teleop_app(scene, start, out, frontend_dir=frontend)
    click.echo(f"teleop server for {scene.scene_id} on ws://{host}:{port}/ws")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    except (ConfigError, SceneFormatError, SceneGenerationError, DemoValidationError, FileNotFoundError) as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
