import math
from dataclasses import dataclass

import numpy as np
import pytest

from viewplan.camera import CameraIntrinsics
from viewplan.controller import (
    EnsembleBuffer,
    EpisodeParams,
    aggregate_results,
    clip_delta,
    ensemble_action,
    ensemble_weights,
    evaluate,
    run_episode,
)
from viewplan.dataset import DatasetStats
from viewplan.policy import ModelConfig
from viewplan.scene import generate_scene, sample_initial_viewpoints
from viewplan.se3 import PoseDelta, look_at
from viewplan.visibility import is_success

UNIT_STATS = DatasetStats(
    action_mean=np.zeros(6),
    action_std=np.ones(6),
    delta_mean=np.zeros(6),
    delta_std=np.ones(6),
    n_demos=1,
    n_steps=1,
)


def scalar_weights(ages, m):
    # independent oracle: plain python evaluation of the decay formula
    raw = [math.exp(-m * i) for i in ages]
    s = sum(raw)
    return [x / s for x in raw]


class TestWeights:
    def test_k5_decay_weights(self):
        got = ensemble_weights(np.arange(5), 0.01)
        want = scalar_weights(range(5), 0.01)
        np.testing.assert_allclose(got, want, atol=1e-12)
        assert abs(got.sum() - 1.0) <= 1e-9
        # oracle-computed six-decimal values for k=5, m=0.01
        np.testing.assert_allclose(
            got, [0.204020, 0.201990, 0.199980, 0.197990, 0.196020], atol=1e-6
        )

    def test_zero_decay_uniform(self):
        for n in range(1, 6):
            got = ensemble_weights(np.arange(n), 0.0)
            np.testing.assert_array_equal(got, np.full(n, 1.0 / n))

    def test_convexity_random_buffers(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 6))
            m = float(rng.uniform(0.0, 0.5))
            ages = rng.choice(5, size=n, replace=False)
            w = ensemble_weights(ages, m)
            assert np.all(w >= 0.0)
            assert abs(w.sum() - 1.0) <= 1e-9


class TestEnsembleBuffer:
    def test_all_available_weighting(self, rng):
        k = 5
        buf = EnsembleBuffer(k, m=0.01)
        chunks = [rng.normal(size=(k, 6)) for _ in range(k)]
        for s, c in enumerate(chunks):
            buf.push(c, s)
        t = k - 1
        action = ensemble_action(buf, t, UNIT_STATS)
        w = scalar_weights(range(k), 0.01)
        # newest chunk was issued at t (age 0); chunk issued at s contributes row t-s
        want = sum(w[i] * chunks[t - i][i] for i in range(k))
        np.testing.assert_allclose(action.to_array(), want, atol=1e-9)

    def test_warmup_renormalizes(self, rng):
        buf = EnsembleBuffer(5, m=0.1)
        a = rng.normal(size=(5, 6)) * 0.1
        b = rng.normal(size=(5, 6)) * 0.1
        buf.push(a, 0)
        buf.push(b, 1)
        action = ensemble_action(buf, 1, UNIT_STATS)
        w = scalar_weights([0, 1], 0.1)
        want = w[0] * b[0] + w[1] * a[1]
        np.testing.assert_allclose(action.to_array(), want, atol=1e-9)

    def test_identical_predictions_fixed_point(self):
        buf = EnsembleBuffer(3, m=0.01)
        a = np.tile(np.array([0.01, -0.02, 0.03, 0.0, 0.1, -0.1]), (3, 1))
        for s in range(3):
            buf.push(a.copy(), s)
        out = ensemble_action(buf, 2, UNIT_STATS)
        np.testing.assert_allclose(out.to_array(), a[0], rtol=0, atol=1e-12)

    def test_envelope_property(self, rng):
        # convexity is asserted in the normalized action space, before any
        # denormalization or angle wrapping
        for _ in range(1000):
            k = int(rng.integers(1, 6))
            buf = EnsembleBuffer(k, m=float(rng.uniform(0, 0.3)))
            t = int(rng.integers(0, 4))
            for s in range(max(0, t - k + 1), t + 1):
                buf.push(rng.normal(size=(k, 6)), s)
            ages, rows = buf.predictions_for(t)
            fused = ensemble_weights(ages, buf.m) @ rows
            assert np.all(fused >= rows.min(axis=0) - 1e-12)
            assert np.all(fused <= rows.max(axis=0) + 1e-12)

    def test_chunk_covers_only_its_window(self):
        buf = EnsembleBuffer(2, m=0.01)
        buf.push(np.ones((2, 6)), 0)
        ages, rows = buf.predictions_for(2)  # issued at 0, covers steps 0..1
        assert len(ages) == 0
        with pytest.raises(RuntimeError):
            ensemble_action(buf, 2, UNIT_STATS)

    def test_k1_degenerates_to_direct_execution(self, rng):
        buf = EnsembleBuffer(1, m=0.01)
        for t in range(5):
            c = rng.normal(size=(1, 6))
            buf.push(c, t)
            out = ensemble_action(buf, t, UNIT_STATS)
            np.testing.assert_array_equal(out.to_array(), c[0])

    def test_push_validation(self):
        buf = EnsembleBuffer(3)
        with pytest.raises(ValueError):
            buf.push(np.zeros((2, 6)), 0)
        with pytest.raises(ValueError):
            EnsembleBuffer(0)
        with pytest.raises(ValueError):
            EnsembleBuffer(3, m=-0.1)


class TestClip:
    def test_per_axis_clip(self):
        d = PoseDelta(np.array([0.2, -0.01, -0.3]), np.array([0.5, -0.5, 0.05]))
        c = clip_delta(d, 0.05, 0.2)
        np.testing.assert_allclose(c.translation, [0.05, -0.01, -0.05])
        np.testing.assert_allclose(c.rotation, [0.2, -0.2, 0.05])


@dataclass
class StubConfig:
    chunk_size: int = 5
    image_size: tuple = (64, 64)


@dataclass
class StubCheckpoint:
    config: object
    stats: object


def make_stub_checkpoint(chunk_rows):
    cfg = ModelConfig()
    return StubCheckpoint(config=cfg, stats=UNIT_STATS), np.asarray(chunk_rows)


class TestRunEpisode:
    def test_start_at_success_is_zero_steps(self, monkeypatch):
        scene = generate_scene(401, "easy")
        from viewplan.scene import goal_candidates

        intr = CameraIntrinsics.default()
        good = next(
            c for c in goal_candidates(scene, 64) if is_success(scene, c, intr, 0.95)
        )
        ckpt, _ = make_stub_checkpoint(np.zeros((5, 6)))
        res = run_episode(scene, good, ckpt)
        assert res.success and res.steps_used == 0
        assert res.path_length_m == 0.0
        assert res.decision_latencies_s == []

    def test_step_cap_reached(self, monkeypatch):
        scene = generate_scene(401, "easy")
        start = look_at(
            scene.target_center + np.array([0.45, 0.0, 0.0]),
            scene.target_center + np.array([1.0, 0.0, 0.0]),
        )  # looking away; the stub policy never turns around
        ckpt, _ = make_stub_checkpoint(None)
        monkeypatch.setattr(
            "viewplan.controller.infer_chunk_normalized",
            lambda c, o: np.zeros((5, 6)),
        )
        res = run_episode(scene, start, ckpt, EpisodeParams(max_steps=1))
        assert not res.success
        assert res.steps_used == 1

    def test_out_of_bounds_failure(self, monkeypatch):
        scene = generate_scene(401, "easy")
        start = look_at(
            scene.target_center + np.array([0.45, 0.0, 0.0]),
            scene.target_center + np.array([1.0, 0.0, 0.0]),
        )
        # constant full-speed forward motion marches out of the workspace
        chunk = np.tile(np.array([0.0, 0.0, 0.05, 0.0, 0.0, 0.0]), (5, 1))
        ckpt, _ = make_stub_checkpoint(None)
        monkeypatch.setattr(
            "viewplan.controller.infer_chunk_normalized", lambda c, o: chunk.copy()
        )
        res = run_episode(scene, start, ckpt, EpisodeParams(max_steps=50))
        assert not res.success
        assert res.failure_reason == "out_of_bounds"
        assert res.steps_used < 50

    def test_real_time_mode_paces_steps(self, monkeypatch):
        import time as _time

        scene = generate_scene(401, "easy")
        start = look_at(
            scene.target_center + np.array([0.45, 0.0, 0.0]),
            scene.target_center + np.array([1.0, 0.0, 0.0]),
        )
        ckpt, _ = make_stub_checkpoint(None)
        monkeypatch.setattr(
            "viewplan.controller.infer_chunk_normalized",
            lambda c, o: np.zeros((5, 6)),
        )
        params = EpisodeParams(max_steps=3, simulated_time=False, rate_hz=20.0)
        t0 = _time.perf_counter()
        res = run_episode(scene, start, ckpt, params)
        elapsed = _time.perf_counter() - t0
        assert res.steps_used == 3
        assert elapsed >= 3 * (1.0 / 20.0) * 0.9

    def test_episode_deterministic_modulo_clock(self, monkeypatch):
        scene = generate_scene(402, "easy")
        start = sample_initial_viewpoints(scene, 1, seed=3)[0]
        rng = np.random.default_rng(0)
        table = {}

        def fake_infer(c, o):
            key = round(float(o.pose_delta.to_array().sum()), 9)
            if key not in table:
                table[key] = rng.normal(scale=0.3, size=(5, 6))
            return table[key]

        monkeypatch.setattr("viewplan.controller.infer_chunk_normalized", fake_infer)
        ckpt, _ = make_stub_checkpoint(None)
        a = run_episode(scene, start, ckpt, EpisodeParams(max_steps=6))
        b = run_episode(scene, start, ckpt, EpisodeParams(max_steps=6))
        assert a.success == b.success
        assert a.steps_used == b.steps_used
        assert a.path_length_m == b.path_length_m
        assert a.final_visibility == b.final_visibility


class TestAggregate:
    def _result(self, success, steps, latencies, path=0.1):
        from viewplan.controller import EpisodeResult
        from viewplan.se3 import Pose

        return EpisodeResult(
            scene_id="s",
            initial_pose=Pose.identity(),
            success=success,
            steps_used=steps,
            wall_clock_s=0.0,
            decision_latencies_s=latencies,
            final_visibility=1.0 if success else 0.2,
            path_length_m=path,
            rotation_total_rad=0.0,
        )

    def test_paper_style_rate(self):
        results = [self._result(i < 13, 5, [0.01] * 5) for i in range(15)]
        agg = aggregate_results(results)
        assert agg["success_rate"] == 86.7
        assert agg["n_success"] == 13

    def test_all_failures_null_steps(self):
        results = [self._result(False, 50, [0.01] * 50) for _ in range(4)]
        agg = aggregate_results(results)
        assert agg["success_rate"] == 0.0
        assert agg["mean_steps"] is None
        assert agg["median_steps"] is None

    def test_latency_weighted_by_step_counts(self):
        a = self._result(True, 2, [0.1, 0.1])
        b = self._result(True, 4, [0.4, 0.4, 0.4, 0.4])
        agg = aggregate_results([a, b])
        want = (0.1 * 2 + 0.4 * 4) / 6
        assert agg["mean_latency_s"] == pytest.approx(want, abs=1e-12)

    def test_evaluate_report_schema(self, monkeypatch):
        scene = generate_scene(403, "easy")
        starts = sample_initial_viewpoints(scene, 2, seed=2)
        monkeypatch.setattr(
            "viewplan.controller.infer_chunk_normalized",
            lambda c, o: np.zeros((5, 6)),
        )
        ckpt, _ = make_stub_checkpoint(None)
        report = evaluate(
            [(scene, s) for s in starts], ckpt, EpisodeParams(max_steps=2)
        )
        assert set(report) == {"planner", "params", "per_episode", "aggregate"}
        assert len(report["per_episode"]) == 2
        agg = report["aggregate"]
        recomputed = sum(r["success"] for r in report["per_episode"]) / 2 * 100
        if agg["success_rate"] is not None:
            assert agg["success_rate"] == round(recomputed, 1)
