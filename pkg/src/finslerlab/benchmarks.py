"""Benchmark maps with known rotation numbers / entropies.

Used to calibrate the estimators: rigid rotations and twist maps have exact
rotation numbers and zero entropy; the circle doubling map has entropy log 2;
the hyperbolic torus automorphism [[2, 1], [1, 1]] has entropy
log((3 + sqrt(5)) / 2).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "CAT_ENTROPY",
    "rigid_rotation",
    "twist_map",
    "doubling_map",
    "cat_map",
    "iterate_map_segments",
]

CAT_ENTROPY = math.log((3.0 + math.sqrt(5.0)) / 2.0)


def rigid_rotation(rho: float):
    """Lifted circle map x -> x + rho; displacement is exactly rho."""

    def step(x):
        return (x + rho) % 1.0, rho

    return step


def twist_map():
    """Lifted annulus twist (s, u) -> (s + u, u); displacement is u."""

    def step(point):
        s, u = point
        return ((s + u) % 1.0, u), u

    return step


def doubling_map(points: np.ndarray) -> np.ndarray:
    return (2.0 * points) % 1.0


def cat_map(points: np.ndarray) -> np.ndarray:
    x, y = points[..., 0], points[..., 1]
    return np.stack([(2.0 * x + y) % 1.0, (x + y) % 1.0], axis=-1)


def iterate_map_segments(map_fn, cloud: np.ndarray, n_iter: int) -> np.ndarray:
    """Stack (N, n_iter + 1, d) of map iterates for the entropy estimator."""
    cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
    out = np.empty((cloud.shape[0], n_iter + 1, cloud.shape[1]))
    out[:, 0, :] = cloud
    cur = cloud
    for k in range(1, n_iter + 1):
        cur = np.atleast_2d(map_fn(cur))
        out[:, k, :] = cur
    return out
