"""Marginal-likelihood estimation of the surrogate hyperparameters.

Search protocol: score a large uniform sample of candidate parameters on
their Gaussian log marginal likelihood, then run bounded quasi-Newton
ascents (L-BFGS-B on log-parameters, finite-difference gradients) from the
best few. The correlation model is the anisotropic squared-exponential
kernel; the fitted noise is the per-replication output variance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .surrogate import TrainingSet

__all__ = ["HyperParams", "SearchConfig", "log_marginal_likelihood", "lml_gradient", "fit_hyperparameters"]

LOG_2PI = np.log(2.0 * np.pi)
PARAM_FLOOR = 1e-8  # positive stand-in for the open lower box edges


@dataclass(frozen=True)
class HyperParams:
    signal_variance: float
    lengthscales: tuple[float, ...]
    noise_variance: float

    def __post_init__(self):
        ls = tuple(float(t) for t in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        if self.signal_variance <= 0.0 or self.noise_variance <= 0.0 or min(ls) <= 0.0:
            raise ValueError("hyperparameters must be strictly positive")

    def as_vector(self) -> np.ndarray:
        return np.array([self.signal_variance, *self.lengthscales, self.noise_variance])

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "HyperParams":
        return cls(
            signal_variance=float(vec[0]),
            lengthscales=tuple(float(v) for v in vec[1:-1]),
            noise_variance=float(vec[-1]),
        )


@dataclass(frozen=True)
class SearchConfig:
    """Multistart search over the box (0, hi_sigma2) x (0, hi_theta)^d x (0, hi_noise)."""

    n_random: int = 1000
    n_local_starts: int = 10
    signal_variance_box: tuple[float, float] = (0.0, 10.0)
    lengthscale_box: tuple[float, float] = (0.0, 2.0)
    noise_variance_box: tuple[float, float] = (0.0, 1.0)
    max_iterations: int = 100

    @classmethod
    def from_config(cls, cfg: dict) -> "SearchConfig":
        box = cfg.get("box", {})
        kwargs = {}
        if "n_random" in cfg:
            kwargs["n_random"] = int(cfg["n_random"])
        if "n_local_starts" in cfg:
            kwargs["n_local_starts"] = int(cfg["n_local_starts"])
        if "signal_variance" in box:
            kwargs["signal_variance_box"] = tuple(box["signal_variance"])
        if "lengthscales" in box:
            kwargs["lengthscale_box"] = tuple(box["lengthscales"])
        if "noise_variance" in box:
            kwargs["noise_variance_box"] = tuple(box["noise_variance"])
        return cls(**kwargs)


class _Scorer:
    """Log marginal likelihood with the squared-distance stack precomputed.

    Scores are pure functions of the parameters, so concurrent scoring with
    a deterministic best-of reduction would give the sequential result; this
    implementation evaluates sequentially.
    """

    def __init__(self, data: TrainingSet):
        pts = data.points
        self.sq_dists = (pts[:, None, :] - pts[None, :, :]) ** 2  # (n, n, d)
        self.z = data.observations
        self.n = data.n
        self.r = data.replications
        self.d = data.dimension

    def __call__(self, vec: np.ndarray) -> float:
        sigma2, theta, noise = vec[0], vec[1:-1], vec[-1]
        corr = np.exp(-0.5 * (self.sq_dists / theta**2).sum(axis=-1))
        cov = sigma2 * corr
        idx = np.diag_indices(self.n)
        cov[idx] += noise / self.r
        try:
            cho = cho_factor(cov, lower=True)
        except np.linalg.LinAlgError:
            return -np.inf
        quad = self.z @ cho_solve(cho, self.z)
        logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
        return -0.5 * quad - 0.5 * logdet - 0.5 * self.n * LOG_2PI


def log_marginal_likelihood(data: TrainingSet, params: HyperParams) -> float:
    """Gaussian log density of the aggregated observations.

    ``-1/2 z' C^-1 z - 1/2 log det C - (n/2) log 2pi`` with
    ``C = sigma^2 K_corr + (noise_variance / r) I``.
    """
    if len(params.lengthscales) != data.dimension:
        raise ValueError("lengthscale count must match the data dimension")
    value = _Scorer(data)(params.as_vector())
    if not np.isfinite(value):
        raise np.linalg.LinAlgError("covariance factorization failed for these parameters")
    return float(value)


def lml_gradient(data: TrainingSet, params: HyperParams, rel_step: float = 1e-6) -> np.ndarray:
    """Forward-difference gradient of the log marginal likelihood in raw parameters."""
    scorer = _Scorer(data)
    vec = params.as_vector()
    base = scorer(vec)
    grad = np.empty_like(vec)
    for i in range(len(vec)):
        step = rel_step * abs(vec[i])
        bumped = vec.copy()
        bumped[i] += step
        grad[i] = (scorer(bumped) - base) / step
    return grad


def fit_hyperparameters(
    data: TrainingSet, search: SearchConfig | None = None, seed=None
) -> HyperParams:
    """Multistart maximum-marginal-likelihood fit; deterministic given the seed.

    Uniform draws over the search box are scored, then L-BFGS-B ascends in
    log-parameter space from the best ``n_local_starts``. The returned
    parameters never score below the best random draw.
    """
    search = search or SearchConfig()
    rng = np.random.default_rng(seed)
    scorer = _Scorer(data)
    d = data.dimension

    lows = np.array([search.signal_variance_box[0]]
                    + [search.lengthscale_box[0]] * d
                    + [search.noise_variance_box[0]])
    highs = np.array([search.signal_variance_box[1]]
                     + [search.lengthscale_box[1]] * d
                     + [search.noise_variance_box[1]])
    lows = np.maximum(lows, PARAM_FLOOR)

    draws = rng.uniform(lows, highs, size=(search.n_random, len(lows)))
    scores = np.array([scorer(v) for v in draws])
    if not np.any(np.isfinite(scores)):
        raise RuntimeError("no finite likelihood in the random search; check the data scale")
    order = np.argsort(scores)[::-1]
    best_vec = draws[order[0]]
    best_score = scores[order[0]]

    log_bounds = list(zip(np.log(lows), np.log(highs)))

    def negative(log_vec):
        return -scorer(np.exp(log_vec))

    improved = False
    for idx in order[: search.n_local_starts]:
        if not np.isfinite(scores[idx]):
            continue
        result = minimize(
            negative,
            np.log(draws[idx]),
            method="L-BFGS-B",
            bounds=log_bounds,
            options={
                "maxiter": search.max_iterations,
                "finite_diff_rel_step": 1e-6,
            },
        )
        if np.isfinite(result.fun) and -result.fun > best_score:
            best_score = -result.fun
            best_vec = np.exp(result.x)
            improved = True
    if not improved:
        warnings.warn(
            "no local ascent improved on the best random draw; returning the draw",
            stacklevel=2,
        )
    return HyperParams.from_vector(best_vec)
