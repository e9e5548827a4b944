"""Reverse-time DDPM machinery over a pluggable score provider.

A score provider knows the marginal score of the diffused data distribution
at every time index; the analytic mixture provider is exact, the trained
network provider is learned.  Everything here is a pure function of
(provider, schedule, positions), batched over ``(n, d)`` arrays.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from .errors import InputError
from .gmm import Gmm, forward_marginal
from .schedule import NoiseSchedule


@runtime_checkable
class ScoreProvider(Protocol):
    """Marginal score (and optionally its Jacobian) of the diffused distribution."""

    dim: int

    def score(self, x: np.ndarray, t: int) -> np.ndarray:
        """grad log p_t at each row of ``x``; shape ``(n, d)``."""
        ...

    def score_jacobian(self, x: np.ndarray, t: int) -> np.ndarray:
        """Hessian of log p_t at each row of ``x``; shape ``(n, d, d)``."""
        ...


class GmmScoreProvider:
    """Exact scores of a mixture prior under the forward process.

    Forward marginals are themselves mixtures; they are built once per time
    index and cached, so repeated calls inside a sampling loop are cheap.
    """

    def __init__(self, prior: Gmm, schedule: NoiseSchedule):
        self.prior = prior
        self.schedule = schedule
        self.dim = prior.dim
        self._marginals: dict[int, Gmm] = {}

    def marginal(self, t: int) -> Gmm:
        if t not in self._marginals:
            self._marginals[t] = forward_marginal(self.prior, self.schedule, t)
        return self._marginals[t]

    def score(self, x: np.ndarray, t: int) -> np.ndarray:
        return self.marginal(t).score(x)

    def score_jacobian(self, x: np.ndarray, t: int) -> np.ndarray:
        return self.marginal(t).score_hessian(x)


def posterior_mean(provider: ScoreProvider, schedule: NoiseSchedule, x: np.ndarray, t: int) -> np.ndarray:
    """Reverse-kernel mean mu(x_t, t) = (x_t + beta_t * score) / sqrt(1 - beta_t).

    With an exact provider this is the exact conditional mean E[x_{t-1} | x_t]
    of the forward process, for any prior.
    """
    if t < 1:
        raise InputError("no reverse step from t=0")
    beta = schedule.beta(t)
    return (x + beta * provider.score(x, t)) / np.sqrt(1.0 - beta)


def tweedie_x0(provider: ScoreProvider, schedule: NoiseSchedule, x: np.ndarray, t: int):
    """Denoised prediction x0_hat = E[x_0 | x_t] and its Jacobian wrt x_t.

    x0_hat = (x_t + (1 - abar_t) * score) / sqrt(abar_t) and
    J = (I + (1 - abar_t) * H) / sqrt(abar_t) with H the log-density Hessian.
    t=0 is the boundary convention: x0_hat = x_t, J = I.

    Returns:
        ``(x0_hat, jac)`` with shapes ``(n, d)`` and ``(n, d, d)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    if t == 0:
        return x.copy(), np.broadcast_to(np.eye(d), (n, d, d)).copy()
    abar = schedule.alpha_bar(t)
    rem = 1.0 - abar
    x0 = (x + rem * provider.score(x, t)) / np.sqrt(abar)
    jac = (np.eye(d)[None, :, :] + rem * provider.score_jacobian(x, t)) / np.sqrt(abar)
    return x0, jac


def ancestral_sample(
    provider: ScoreProvider,
    schedule: NoiseSchedule,
    n: int,
    seed,
    guidance=None,
) -> np.ndarray:
    """Plain reverse-diffusion sampling: x_T ~ N(0, I), then the Gaussian
    reverse kernel down to t=0 (final step noiseless).  Deterministic given
    ``seed``; chains are vectorized and independent.

    ``guidance`` optionally maps (x, t) to a mean shift added before noising;
    it exists so guided baselines consume the identical noise stream.
    """
    if n < 1:
        raise InputError("need n >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = rng.standard_normal((n, provider.dim))
    for t in range(schedule.steps, 0, -1):
        mu = posterior_mean(provider, schedule, x, t)
        if guidance is not None:
            mu = mu + guidance(x, t)
        noise = rng.standard_normal(x.shape)
        x = mu + schedule.sigma(t) * noise
    return x
