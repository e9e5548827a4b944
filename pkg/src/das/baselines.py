"""Comparison samplers: single-chain approximate guidance, untempered SMC
variants, and best-of-N selection.

All of them share the diffusion core, so with the reward switched off every
method coincides with plain ancestral sampling.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .diffusion import ScoreProvider, ancestral_sample
from .errors import GuidanceExplosionError, InputError
from .rewards import RewardModel
from .schedule import NoiseSchedule
from .smc import SmcConfig, _rhat_gradient, run_das


def approx_guidance_sample(
    provider: ScoreProvider,
    schedule: NoiseSchedule,
    reward: RewardModel,
    alpha: float,
    guidance_scale: float = 1.0,
    n: int = 1,
    seed=0,
) -> np.ndarray:
    """Reward-guided ancestral sampling: the reverse-kernel mean is shifted by
    sigma_t^2 (guidance_scale / alpha) times the denoised-reward gradient.
    No weighting, no resampling; chains are independent.

    No extra scale constants are applied at toy scale, so the default
    ``guidance_scale=1`` is the plain approximate-guidance baseline.
    """
    if n < 1:
        raise InputError("need n >= 1")

    def shift(x, t):
        sigma = schedule.sigma(t)
        if sigma == 0.0 or guidance_scale == 0.0:
            return 0.0
        grad = _rhat_gradient(reward, provider, schedule, x, t - 1)
        if not np.all(np.isfinite(grad)):
            raise GuidanceExplosionError(t, float(np.max(np.abs(grad))))
        return (sigma**2) * (guidance_scale / alpha) * grad

    return ancestral_sample(provider, schedule, n, seed, guidance=shift)


def smc_no_temper(
    config: SmcConfig,
    provider: ScoreProvider,
    schedule: NoiseSchedule,
    reward: RewardModel,
    variant: str = "unguided",
):
    """SMC with the inverse temperature pinned at 1 throughout.

    ``variant='guided'`` keeps the reward-shifted proposal (ablating only the
    tempering); ``'unguided'`` also proposes from the plain reverse kernel,
    i.e. the generation process itself is the proposal.

    Returns ``(ensemble, trace)`` like :func:`das.smc.run_das`.
    """
    if variant not in ("guided", "unguided"):
        raise InputError("variant must be 'guided' or 'unguided'")
    cfg = replace(config, temper_mode="off")
    return run_das(cfg, provider, schedule, reward, guided_proposal=(variant == "guided"))


def best_of_n(
    provider: ScoreProvider,
    schedule: NoiseSchedule,
    reward: RewardModel,
    n_candidates: int,
    n_outputs: int,
    seed=0,
) -> np.ndarray:
    """For each output, run independent unguided chains and keep the final
    sample with the highest reward."""
    if n_candidates < 1:
        raise InputError("need n_candidates >= 1")
    if n_outputs < 1:
        raise InputError("need n_outputs >= 1")
    flat = ancestral_sample(provider, schedule, n_outputs * n_candidates, seed)
    pool = flat.reshape(n_outputs, n_candidates, provider.dim)
    vals = reward.value(flat).reshape(n_outputs, n_candidates)
    best = np.argmax(vals, axis=1)
    return pool[np.arange(n_outputs), best]
