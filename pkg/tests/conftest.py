import math

import numpy as np
import pytest

from viewplan.se3 import Pose


def random_quat(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def random_pose(rng: np.random.Generator, scale: float = 1.0) -> Pose:
    return Pose(rng.uniform(-scale, scale, size=3), random_quat(rng))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def pytest_runtest_logreport(report):
    # One visible verdict line per acceptance criterion.
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    print(f"\n[ACCEPTANCE] {name}: {report.outcome.upper()}")


def assert_angles_close(a, b, tol=1e-7):
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b) + math.pi, 2 * math.pi) - math.pi)
    assert np.max(d) <= tol, f"angle mismatch: {a} vs {b}"
