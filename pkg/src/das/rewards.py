"""Reward models and the denoised reward surrogate.

A reward model exposes batched ``value`` and ``gradient``.  During sampling
the reward of a noisy point is estimated through the denoised prediction,
r_hat(x_t) = r(x0_hat(x_t)); its gradient chains through the full Tweedie
Jacobian by default (the identity shortcut common in guidance code is kept
behind a flag).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .diffusion import ScoreProvider, tweedie_x0
from .errors import InputError
from .schedule import NoiseSchedule


@runtime_checkable
class RewardModel(Protocol):
    def value(self, x: np.ndarray) -> np.ndarray:
        """Reward per row of ``x``; shape ``(n,)``."""
        ...

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Reward gradient per row; shape ``(n, d)``."""
        ...


@dataclass(frozen=True)
class QuadraticReward:
    """r(x) = -x^T A x + b^T x + c with A symmetric PSD."""

    a_matrix: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or b.shape != (a.shape[0],):
            raise InputError("A must be (d, d) and b (d,)")
        if np.max(np.abs(a - a.T)) > 1e-12:
            raise InputError("A must be symmetric within 1e-12")
        if np.linalg.eigvalsh(a).min() < -1e-12:
            raise InputError("A must be positive-semidefinite")
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    @classmethod
    def zero(cls, d: int) -> "QuadraticReward":
        return cls(np.zeros((d, d)), np.zeros(d), 0.0)

    @classmethod
    def from_diag(cls, diag, b=None, c: float = 0.0) -> "QuadraticReward":
        diag = np.asarray(diag, dtype=float)
        return cls(np.diag(diag), np.zeros_like(diag) if b is None else b, c)

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return -np.einsum("nd,de,ne->n", x, self.a_matrix, x) + x @ self.b + self.c

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return -2.0 * x @ self.a_matrix + self.b


def fig1_top_reward() -> QuadraticReward:
    """2D task: r(x, y) = -x^2/100 - y^2."""
    return QuadraticReward.from_diag([1.0 / 100.0, 1.0])


def fig1_bottom_reward() -> QuadraticReward:
    """2D task: r(x, y) = -x^2 - (y - 1)^2 / 10."""
    # expand: -x^2 - y^2/10 + y/5 - 1/10
    return QuadraticReward(np.diag([1.0, 0.1]), np.array([0.0, 0.2]), -0.1)


def swiss_roll_reward() -> QuadraticReward:
    """3D task: r(x, y, z) = -x^2/100 - y^2/100 - z^2."""
    return QuadraticReward.from_diag([0.01, 0.01, 1.0])


def r_hat(
    model: RewardModel,
    provider: ScoreProvider,
    schedule: NoiseSchedule,
    x: np.ndarray,
    t: int,
    full_jacobian: bool = True,
):
    """Denoised reward estimate and its gradient wrt the noisy point.

    Args:
        x: Noisy positions, shape ``(n, d)``.
        t: Time index of ``x`` (0 gives r_hat = r exactly).
        full_jacobian: Chain through the exact Tweedie Jacobian; if False,
            treat it as identity (common approximation).

    Returns:
        ``(values, gradients)`` with shapes ``(n,)`` and ``(n, d)``.
    """
    x0, jac = tweedie_x0(provider, schedule, x, t)
    vals = model.value(x0)
    grads = model.gradient(x0)
    if full_jacobian:
        grads = np.einsum("nde,nd->ne", jac, grads)
    return vals, grads


@dataclass(frozen=True)
class ClampedReward:
    """Wraps a reward so values stay in [lo, hi], C1-smoothly.

    Values inside the band are untouched; outside they saturate with zero
    gradient.  Within 1% of the range from each edge a cubic eases the slope
    from 1 to 0 so gradients remain continuous.
    """

    inner: RewardModel
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InputError("need lo < hi")

    @property
    def _tau(self) -> float:
        return 0.01 * (self.hi - self.lo)

    def _squash(self, v: np.ndarray):
        tau = self._tau
        out = v.copy()
        slope = np.ones_like(v)

        hi_edge = v >= self.hi
        lo_edge = v <= self.lo
        out[hi_edge] = self.hi
        out[lo_edge] = self.lo
        slope[hi_edge | lo_edge] = 0.0

        up = (~hi_edge) & (v > self.hi - tau)
        u = (self.hi - v[up]) / tau  # 0 at the edge, 1 where the band starts
        out[up] = self.hi - tau * (2.0 * u**2 - u**3)
        slope[up] = 4.0 * u - 3.0 * u**2

        dn = (~lo_edge) & (v < self.lo + tau)
        u = (v[dn] - self.lo) / tau
        out[dn] = self.lo + tau * (2.0 * u**2 - u**3)
        slope[dn] = 4.0 * u - 3.0 * u**2
        return out, slope

    def value(self, x: np.ndarray) -> np.ndarray:
        out, _ = self._squash(self.inner.value(x))
        return out

    def gradient(self, x: np.ndarray) -> np.ndarray:
        _, slope = self._squash(self.inner.value(x))
        return slope[:, None] * self.inner.gradient(x)


def clamp_reward(model: RewardModel, lo: float, hi: float) -> ClampedReward:
    return ClampedReward(model, float(lo), float(hi))


def reward_from_config(doc: dict) -> RewardModel:
    """Build a reward model from its config document.

    ``{"type": "quadratic", "A": [[...]], "b": [...], "c": 0.0}`` gives the
    analytic quadratic; ``{"type": "surrogate", "checkpoint": "path.json"}``
    loads a fitted optimistic surrogate checkpoint.
    """
    kind = doc.get("type")
    if kind == "quadratic":
        try:
            return QuadraticReward(
                np.array(doc["A"], dtype=float),
                np.array(doc["b"], dtype=float),
                float(doc.get("c", 0.0)),
            )
        except KeyError as exc:
            raise InputError(f"quadratic reward config missing field {exc}") from exc
    if kind == "surrogate":
        if "checkpoint" not in doc:
            raise InputError("surrogate reward config needs a 'checkpoint' path")
        from .online import OptimisticSurrogate, SurrogateModel

        return OptimisticSurrogate(SurrogateModel.load(doc["checkpoint"]))
    raise InputError(f"reward type must be 'quadratic' or 'surrogate', got {kind!r}")
