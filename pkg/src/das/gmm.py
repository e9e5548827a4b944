"""Gaussian mixtures with full covariances: densities, scores, diffusion
marginals and the exact quadratic-reward tilt.

The mixture is the workhorse of the toy experiments.  It plays three roles:
the pre-trained data distribution, its forward-diffused marginals (which stay
mixtures under the variance-preserving process), and -- via Gaussian
conjugacy -- the exact tilted target used as ground truth.

All point-wise operations are batched over an ``(n, d)`` array of positions
and everything is computed in log space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateTargetError, InputError

MAX_DIM = 8

_SYM_TOL = 1e-12


@dataclass(frozen=True)
class Gmm:
    """Weighted mixture of full-covariance Gaussians.

    Attributes:
        weights: Mixing weights, shape ``(K,)``, non-negative, sum to 1.
        means: Component means, shape ``(K, d)``.
        covariances: Component covariances, shape ``(K, d, d)``, each
            symmetric positive-definite.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        cov = np.asarray(self.covariances, dtype=float)
        if mu.ndim != 2 or cov.ndim != 3:
            raise InputError("means must be (K, d) and covariances (K, d, d)")
        k, d = mu.shape
        if w.shape != (k,) or cov.shape != (k, d, d):
            raise InputError(
                f"inconsistent shapes: weights {w.shape}, means {mu.shape}, "
                f"covariances {cov.shape}"
            )
        if d > MAX_DIM:
            raise InputError(f"dimension {d} unsupported (max {MAX_DIM})")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("weights must be non-negative and sum to 1 within 1e-12")
        if np.max(np.abs(cov - np.swapaxes(cov, 1, 2))) > _SYM_TOL:
            raise InputError("covariances must be symmetric within 1e-12")
        for sigma in cov:
            if np.linalg.eigvalsh(sigma).min() <= 0:
                raise InputError("covariances must be positive-definite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @cached_property
    def _precisions(self) -> np.ndarray:
        return np.linalg.inv(self.covariances)

    @cached_property
    def _chols(self) -> np.ndarray:
        return np.linalg.cholesky(self.covariances)

    @cached_property
    def _log_norms(self) -> np.ndarray:
        # log of w_k / ((2 pi)^{d/2} |Sigma_k|^{1/2}); -inf for zero weights
        _, logdets = np.linalg.slogdet(self.covariances)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logw - 0.5 * self.dim * np.log(2.0 * np.pi) - 0.5 * logdets

    # ------------------------------------------------------------------
    # densities and derivatives
    # ------------------------------------------------------------------

    def _check_points(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dim:
            raise InputError(f"points have dimension {x.shape[-1]}, expected {self.dim}")
        return x

    def _log_joint(self, x: np.ndarray) -> np.ndarray:
        """log(w_k N_k(x)) for every component, shape ``(n, K)``."""
        diff = x[:, None, :] - self.means[None, :, :]  # (n, K, d)
        maha = np.einsum("nkd,kde,nke->nk", diff, self._precisions, diff)
        return self._log_norms[None, :] - 0.5 * maha

    def log_density(self, x: np.ndarray) -> np.ndarray:
        """Log mixture density at each row of ``x``, shape ``(n,)``."""
        return logsumexp(self._log_joint(self._check_points(x)), axis=1)

    def score(self, x: np.ndarray) -> np.ndarray:
        """Gradient of the log density, shape ``(n, d)``."""
        x = self._check_points(x)
        resp = self._responsibilities(x)
        g = self._component_scores(x)
        return np.einsum("nk,nkd->nd", resp, g)

    def score_hessian(self, x: np.ndarray) -> np.ndarray:
        """Hessian of the log density, shape ``(n, d, d)``.

        For a mixture with responsibilities r_k and component scores
        g_k = P_k (mu_k - x):  H = sum_k r_k (g_k g_k^T - P_k) - s s^T.
        """
        x = self._check_points(x)
        resp = self._responsibilities(x)
        g = self._component_scores(x)
        s = np.einsum("nk,nkd->nd", resp, g)
        h = np.einsum("nk,nkd,nke->nde", resp, g, g)
        h -= np.einsum("nk,kde->nde", resp, self._precisions)
        h -= np.einsum("nd,ne->nde", s, s)
        return h

    def _responsibilities(self, x: np.ndarray) -> np.ndarray:
        lj = self._log_joint(x)
        lj -= lj.max(axis=1, keepdims=True)
        p = np.exp(lj)
        return p / p.sum(axis=1, keepdims=True)

    def _component_scores(self, x: np.ndarray) -> np.ndarray:
        diff = self.means[None, :, :] - x[:, None, :]  # (n, K, d)
        return np.einsum("kde,nke->nkd", self._precisions, diff)

    def responsibilities(self, x: np.ndarray) -> np.ndarray:
        """Posterior component probabilities at each point, shape ``(n, K)``."""
        return self._responsibilities(self._check_points(x))

    # ------------------------------------------------------------------
    # sampling
    # ------------------------------------------------------------------

    def sample(self, n: int, seed) -> np.ndarray:
        """Draw ``n`` i.i.d. samples, deterministic given ``seed``.

        ``seed`` may be an int or a ``numpy.random.Generator``.
        """
        if n < 1:
            raise InputError("need n >= 1")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        idx = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[idx] + np.einsum("nde,ne->nd", self._chols[idx], z)

    # ------------------------------------------------------------------
    # serialization (field names fixed for config files)
    # ------------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Gmm":
        try:
            return cls(
                weights=np.array(doc["weights"], dtype=float),
                means=np.array(doc["means"], dtype=float),
                covariances=np.array(doc["covariances"], dtype=float),
            )
        except KeyError as exc:
            raise InputError(f"mixture document missing field {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Gmm":
        return cls.from_json_dict(json.loads(text))


def isotropic_gmm(means: np.ndarray, var: float, weights=None) -> Gmm:
    """Mixture of isotropic components with shared variance."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    k, d = means.shape
    if weights is None:
        weights = np.full(k, 1.0 / k)
    covs = np.broadcast_to(var * np.eye(d), (k, d, d)).copy()
    return Gmm(np.asarray(weights, dtype=float), means, covs)


def canonical_prior_2d(n_modes: int = 6, radius: float = 2.0, var: float = 0.05) -> Gmm:
    """Default 2D pre-trained distribution: equal-weight isotropic modes on a circle.

    Chosen so that modes are visibly separated and mode dropping is
    observable in the sampling experiments.
    """
    angles = np.linspace(0.0, 2.0 * np.pi, n_modes, endpoint=False)
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    return isotropic_gmm(means, var)


# ----------------------------------------------------------------------
# forward diffusion of a mixture
# ----------------------------------------------------------------------


def diffuse(gmm: Gmm, alpha_bar: float) -> Gmm:
    """Marginal of the variance-preserving noising channel at signal level ``alpha_bar``.

    x_t = sqrt(abar) x_0 + sqrt(1 - abar) eps maps each component
    N(mu, Sigma) to N(sqrt(abar) mu, abar Sigma + (1 - abar) I).
    """
    if not 0.0 < alpha_bar <= 1.0:
        raise InputError(f"alpha_bar must be in (0, 1], got {alpha_bar}")
    if alpha_bar == 1.0:
        return gmm
    eye = np.eye(gmm.dim)
    return Gmm(
        weights=gmm.weights.copy(),
        means=np.sqrt(alpha_bar) * gmm.means,
        covariances=alpha_bar * gmm.covariances + (1.0 - alpha_bar) * eye,
    )


def forward_marginal(gmm: Gmm, schedule, t: int) -> Gmm:
    """Mixture marginal of the forward process at time index ``t`` (0..T)."""
    if not 0 <= t <= schedule.steps:
        raise InputError(f"t={t} outside [0, {schedule.steps}]")
    if t == 0:
        return gmm
    return diffuse(gmm, schedule.alpha_bar(t))


# ----------------------------------------------------------------------
# exact reward tilt (Gaussian conjugacy; see docs/tilted_mixture.md)
# ----------------------------------------------------------------------


def tilt_quadratic(gmm: Gmm, reward, alpha: float) -> Gmm:
    """Exact mixture form of p(x) * exp(r(x)/alpha), renormalized.

    ``reward`` is a quadratic r(x) = -x^T A x + b^T x + c.  Completing the
    square per component gives new precisions P_k + 2A/alpha, new means
    solving (P_k + 2A/alpha) m = P_k mu_k + b/alpha, and weights rescaled
    by each component's Gaussian integral.

    Raises:
        DegenerateTargetError: if any tilted precision is not positive-definite.
    """
    if alpha <= 0:
        raise InputError("alpha must be positive")
    a_mat = np.asarray(reward.a_matrix, dtype=float)
    b = np.asarray(reward.b, dtype=float)
    if a_mat.shape != (gmm.dim, gmm.dim) or b.shape != (gmm.dim,):
        raise InputError("reward dimension does not match mixture")

    precs = np.linalg.inv(gmm.covariances)
    tilted_precs = precs + 2.0 * a_mat[None, :, :] / alpha
    for k, p in enumerate(tilted_precs):
        if np.linalg.eigvalsh(p).min() <= 0:
            raise DegenerateTargetError(
                f"tilted precision of component {k} not positive-definite; "
                f"alpha={alpha} too small for this reward curvature"
            )

    new_covs = np.linalg.inv(tilted_precs)
    new_covs = 0.5 * (new_covs + np.swapaxes(new_covs, 1, 2))
    eta = np.einsum("kde,ke->kd", precs, gmm.means) + b[None, :] / alpha
    new_means = np.einsum("kde,ke->kd", new_covs, eta)

    # log Gaussian-integral normalizer per component (constant c/alpha cancels)
    _, logdet_old = np.linalg.slogdet(gmm.covariances)
    _, logdet_new = np.linalg.slogdet(new_covs)
    quad_new = np.einsum("kd,kd->k", eta, new_means)
    quad_old = np.einsum("kd,kde,ke->k", gmm.means, precs, gmm.means)
    with np.errstate(divide="ignore"):
        logw = np.log(gmm.weights)
    logw = logw + 0.5 * (logdet_new - logdet_old) + 0.5 * (quad_new - quad_old)
    logw -= logsumexp(logw)
    return Gmm(weights=np.exp(logw), means=new_means, covariances=new_covs)


def expected_quadratic_reward(gmm: Gmm, reward) -> float:
    """E[r(X)] for X ~ gmm and quadratic r, in closed form."""
    a_mat = np.asarray(reward.a_matrix, dtype=float)
    b = np.asarray(reward.b, dtype=float)
    per_comp = (
        -np.einsum("kde,ed->k", gmm.covariances, a_mat)
        - np.einsum("kd,de,ke->k", gmm.means, a_mat, gmm.means)
        + gmm.means @ b
        + reward.c
    )
    return float(gmm.weights @ per_comp)
