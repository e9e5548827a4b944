"""Tempered SMC sampling from reward-tilted diffusion models, at toy scale."""

from .baselines import approx_guidance_sample, best_of_n, smc_no_temper
from .diffusion import GmmScoreProvider, ancestral_sample, posterior_mean, tweedie_x0
from .gmm import (
    Gmm,
    canonical_prior_2d,
    diffuse,
    expected_quadratic_reward,
    forward_marginal,
    isotropic_gmm,
    tilt_quadratic,
)
from .metrics import emd_capped, emd_exact, summary_stats
from .online import (
    FeedbackDataset,
    OnlineConfig,
    SurrogateConfig,
    fit_surrogate,
    optimistic_bonus,
    run_online_loop,
)
from .rewards import QuadraticReward, clamp_reward, r_hat
from .schedule import NoiseSchedule
from .scorenet import MlpDenoiser, NetScoreProvider, TrainConfig, backprop_gradcheck, train_denoiser
from .smc import (
    ParticleEnsemble,
    SmcConfig,
    TemperSchedule,
    ess,
    log_weight,
    make_temper_schedule,
    pooled_das,
    propose,
    resample,
    run_das,
    run_das_adaptive,
    solve_for_delta,
)
from .swissroll import make_swiss_roll

__all__ = [
    "Gmm",
    "GmmScoreProvider",
    "MlpDenoiser",
    "NetScoreProvider",
    "NoiseSchedule",
    "OnlineConfig",
    "ParticleEnsemble",
    "QuadraticReward",
    "SmcConfig",
    "SurrogateConfig",
    "TemperSchedule",
    "TrainConfig",
    "FeedbackDataset",
    "ancestral_sample",
    "approx_guidance_sample",
    "backprop_gradcheck",
    "best_of_n",
    "canonical_prior_2d",
    "clamp_reward",
    "diffuse",
    "emd_capped",
    "emd_exact",
    "ess",
    "expected_quadratic_reward",
    "fit_surrogate",
    "forward_marginal",
    "isotropic_gmm",
    "log_weight",
    "make_swiss_roll",
    "make_temper_schedule",
    "optimistic_bonus",
    "pooled_das",
    "posterior_mean",
    "propose",
    "r_hat",
    "resample",
    "run_das",
    "run_das_adaptive",
    "run_online_loop",
    "smc_no_temper",
    "solve_for_delta",
    "summary_stats",
    "tilt_quadratic",
    "train_denoiser",
    "tweedie_x0",
]
