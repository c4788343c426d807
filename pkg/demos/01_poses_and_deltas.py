"""Poses, camera-local deltas, and trajectory interpolation.

A camera pose is a world position plus a world-from-camera quaternion; all
motion commands are 6-DoF deltas in the camera's own frame (translation in
meters, roll/pitch/yaw in radians).  This script walks through composing
deltas, recovering them, and interpolating between poses, and draws the
interpolated approach arc.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from viewplan import PoseDelta, compose, delta_between, interpolate, pose_distance
from viewplan.se3 import look_at

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

# A camera half a meter in front of the origin, looking at it.
cam = look_at([0.5, 0.0, 0.1], [0.0, 0.0, 0.0])
print("camera position:", cam.position)
print("optical axis:   ", cam.optical_axis())

# Move 5 cm along the optical axis (camera-local +z is always "forward").
step = PoseDelta(np.array([0.0, 0.0, 0.05]), np.zeros(3))
closer = compose(cam, step)
print("\nafter a 5 cm dolly-in:", closer.position)

# delta_between inverts compose: it recovers the camera-local motion.
recovered = delta_between(cam, closer)
print("recovered delta:", recovered.to_array())

# Distances mix translation with weighted rotation angle.
print("\npose distance (w_rot=0.3):", pose_distance(cam, closer, w_rot=0.3))

# Interpolation: straight line in position, shortest-arc slerp in rotation.
goal = look_at([0.0, 0.45, 0.25], [0.0, 0.0, 0.0])
arc = [interpolate(cam, goal, s) for s in np.linspace(0, 1, 25)]

fig = plt.figure(figsize=(6, 5))
ax = fig.add_subplot(projection="3d")
pts = np.stack([p.position for p in arc])
ax.plot(pts[:, 0], pts[:, 1], pts[:, 2], "o-", ms=3, label="interpolated path")
for p in arc[::6]:
    tip = p.position + 0.06 * p.optical_axis()
    ax.plot(*zip(p.position, tip), "r-", lw=1)
ax.scatter([0], [0], [0], c="g", s=60, label="target")
ax.set_title("pose interpolation with look-at orientations")
ax.legend()
fig.savefig(os.path.join(OUT, "01_interpolation.png"), dpi=110)
print(f"\nwrote {OUT}/01_interpolation.png")
