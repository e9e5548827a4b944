"""3D Swiss-roll point cloud used as training data in the 3D experiment."""

from __future__ import annotations

import numpy as np

from .errors import InputError

_THETA_LO = 1.5 * np.pi
_THETA_HI = 4.5 * np.pi
# uniform scale putting the widest turn of the spiral at radius 3
SCALE = 3.0 / _THETA_HI


def make_swiss_roll(n: int, noise: float = 0.0, seed=0) -> np.ndarray:
    """Sample ``n`` points from a 3D Swiss roll scaled to fit in [-3, 3]^3.

    The spiral lives in the (x, z) plane: radius grows linearly with angle
    theta in [1.5 pi, 4.5 pi]; y is the roll height.  Gaussian jitter of
    standard deviation ``noise`` is added per coordinate, then points are
    clipped back into the box.  Deterministic given ``seed``.
    """
    if n < 1:
        raise InputError("need n >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    theta = _THETA_LO + (_THETA_HI - _THETA_LO) * rng.random(n)
    height = 6.0 * rng.random(n) - 3.0
    pts = np.stack(
        [SCALE * theta * np.cos(theta), height, SCALE * theta * np.sin(theta)],
        axis=-1,
    )
    if noise > 0:
        pts = pts + noise * rng.standard_normal(pts.shape)
        pts = np.clip(pts, -3.0, 3.0)
    return pts


def roll_residual(pts: np.ndarray) -> np.ndarray:
    """Distance of each point from the noiseless spiral surface (for tests).

    On the spiral the radius in the (x, z) plane determines the angle, so
    recomputing the point from its radius must reproduce it.
    """
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    theta = np.hypot(x, z) / SCALE
    res_x = np.abs(SCALE * theta * np.cos(theta) - x)
    res_z = np.abs(SCALE * theta * np.sin(theta) - z)
    res_y = np.maximum(np.abs(y) - 3.0, 0.0)
    return np.maximum(np.maximum(res_x, res_z), res_y)
