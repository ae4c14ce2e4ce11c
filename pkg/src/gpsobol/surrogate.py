"""Gaussian-process predictors for replication-averaged noisy observations.

Two predictors live here. The finite-data BLUP regresses ``n`` aggregated
observations with nugget ``n * noise_variance / T`` (equivalently
``noise_variance / replications``). The idealized spectral predictor works
in the eigenbasis of the kernel integral operator and carries closed forms
for its pointwise MSE, the integrated MSE, and the threshold proxy B^2_T
that sandwiches the IMSE within a factor of two.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from numpy.polynomial.hermite import hermgauss

from .kernels import EigenSystem, KernelSpec, cross_covariance, gram_matrix

__all__ = [
    "TrainingSet",
    "GpModel",
    "SpectralModel",
    "aggregate_replications",
    "load_training_csv",
    "fit_blup",
    "fit_gp",
    "predict",
    "sample_idealized_pair",
    "spectral_mse",
    "imse",
    "bt_squared",
    "project_separable",
]

CONDITION_WARN_THRESHOLD = 1e12


@dataclass(frozen=True)
class TrainingSet:
    """Design points with replication-averaged observations.

    ``noise_variance`` is the per-replication output variance; it may be
    None while unknown (before hyperparameter fitting) but is required by
    every operation that forms the nugget.
    """

    points: np.ndarray        # (n, d)
    observations: np.ndarray  # (n,) means over replications
    replications: int
    noise_variance: float | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        obs = np.asarray(self.observations, dtype=float).ravel()
        if pts.shape[0] == 0:
            raise ValueError("training set must contain at least one point")
        if pts.shape[0] != obs.shape[0]:
            raise ValueError("points and observations disagree in length")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.noise_variance is not None and self.noise_variance <= 0.0:
            raise ValueError("noise_variance must be strictly positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "observations", obs)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def total_budget(self) -> int:
        return self.n * self.replications

    @property
    def effective_noise(self) -> float:
        """Observation-noise variance of the aggregated outputs: n * sigma_eps^2 / T."""
        if self.noise_variance is None:
            raise ValueError("noise_variance is not set on this training set")
        return self.noise_variance * self.n / self.total_budget

    def with_noise(self, noise_variance: float) -> "TrainingSet":
        return TrainingSet(self.points, self.observations, self.replications, noise_variance)


def aggregate_replications(points, raw, noise_variance: float) -> TrainingSet:
    """Average an (n, r) matrix of raw simulator outputs into a TrainingSet."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.size == 0:
        raise ValueError("raw outputs must be a nonempty (n, r) matrix")
    return TrainingSet(
        points=points,
        observations=raw.mean(axis=1),
        replications=raw.shape[1],
        noise_variance=noise_variance,
    )


def load_training_csv(
    path, noise_variance: float | None = None, replications: int | None = None
) -> TrainingSet:
    """Read a training set from CSV.

    Expected header: ``x1..xd`` followed by either raw outputs ``rep1..repr``
    (aggregated here) or a single pre-aggregated ``z`` column, in which case
    ``replications`` must be supplied.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    x_cols = [i for i, name in enumerate(header) if name.startswith("x")]
    rep_cols = [i for i, name in enumerate(header) if name.startswith("rep")]
    if rows.size == 0:
        raise ValueError(f"no data rows in {path}")
    points = rows[:, x_cols]
    if rep_cols:
        raw = rows[:, rep_cols]
        if noise_variance is None and raw.shape[1] >= 2:
            # pooled within-point sample variance as a provisional noise level
            noise_variance = float(np.mean(np.var(raw, axis=1, ddof=1)))
        return TrainingSet(points, raw.mean(axis=1), raw.shape[1], noise_variance)
    if "z" not in header:
        raise ValueError("CSV must contain rep* columns or a z column")
    if replications is None:
        raise ValueError("pre-aggregated data requires the replication count")
    z = rows[:, header.index("z")]
    return TrainingSet(points, z, replications, noise_variance)


@dataclass(frozen=True)
class GpModel:
    """Fitted BLUP state: kernel, design, factorized regularized Gram, weights."""

    kernel: KernelSpec
    points: np.ndarray
    nugget: float
    _cho: tuple
    _alpha: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[0]


def fit_gp(kernel: KernelSpec, points, observations, nugget: float) -> GpModel:
    """Factor ``K + nugget I`` and solve for the prediction weights."""
    if nugget <= 0.0:
        raise ValueError("nugget must be strictly positive")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    z = np.asarray(observations, dtype=float).ravel()
    gram = gram_matrix(kernel, pts)
    reg = gram + nugget * np.eye(len(pts))
    try:
        cho = cho_factor(reg, lower=True)
    except np.linalg.LinAlgError as exc:
        eig = np.linalg.eigvalsh(reg)
        raise np.linalg.LinAlgError(
            f"regularized Gram factorization failed: eigenvalue range [{eig[0]:.3e}, {eig[-1]:.3e}]"
        ) from exc
    diag = np.diag(cho[0])
    cond_est = (diag.max() / diag.min()) ** 2
    if cond_est > CONDITION_WARN_THRESHOLD:
        warnings.warn(
            f"regularized Gram condition estimate {cond_est:.2e} exceeds "
            f"{CONDITION_WARN_THRESHOLD:.0e}; predictions may lose accuracy",
            stacklevel=2,
        )
    alpha = cho_solve(cho, z)
    return GpModel(kernel=kernel, points=pts, nugget=nugget, _cho=cho, _alpha=alpha)


def fit_blup(data: TrainingSet, kernel: KernelSpec) -> GpModel:
    """Fit the BLUP of the aggregated observations (nugget ``n sigma_eps^2 / T``)."""
    return fit_gp(kernel, data.points, data.observations, data.effective_noise)


def predict(model: GpModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and MSE at query point(s).

    Returns scalars for a single point, 1-D arrays for a batch.
    """
    single = np.asarray(x).ndim <= 1
    kx = cross_covariance(model.kernel, model.points, x)  # (m, n)
    mean = kx @ model._alpha
    solved = cho_solve(model._cho, kx.T)
    mse = model.kernel.signal_variance - np.einsum("mn,nm->m", kx, solved)
    mse = np.maximum(mse, 0.0)  # round-off can push exact zeros slightly negative
    if single:
        return float(mean[0]), float(mse[0])
    return mean, mse


@dataclass(frozen=True)
class SpectralModel:
    """Idealized predictor in the operator eigenbasis.

    ``coefficients`` are the noisy basis coefficients z_p (signal projection
    plus observation noise); prediction shrinks each by
    ``lambda_p / (lambda_p + noise_level)``.
    """

    eigensystem: EigenSystem
    noise_level: float  # sigma_eps^2 / T
    coefficients: np.ndarray

    def __post_init__(self):
        if self.noise_level <= 0.0:
            raise ValueError("noise_level must be strictly positive")
        if len(self.coefficients) != self.eigensystem.truncation:
            raise ValueError("coefficient count must match the eigensystem truncation")

    @property
    def shrinkage(self) -> np.ndarray:
        lam = self.eigensystem.eigenvalues
        return lam / (lam + self.noise_level)

    def __call__(self, x) -> np.ndarray:
        phi = self.eigensystem.eigenfunctions(np.atleast_2d(np.asarray(x, dtype=float)))
        out = phi @ (self.shrinkage * self.coefficients)
        return float(out[0]) if np.asarray(x).ndim <= 1 else out


def sample_idealized_pair(
    eigensystem: EigenSystem, total_budget: float, noise_variance: float, seed
) -> tuple:
    """Draw one (signal, idealized predictor) pair sharing the same realization.

    The signal draws ``f_p ~ N(0, lambda_p)`` and the predictor shrinks
    ``f_p + eps_p`` with ``eps_p ~ N(0, sigma_eps^2 / T)``. Both returned
    evaluators are deterministic functions of the stored draw.
    """
    if total_budget <= 0.0 or noise_variance <= 0.0:
        raise ValueError("total_budget and noise_variance must be strictly positive")
    rng = np.random.default_rng(seed)
    lam = eigensystem.eigenvalues
    f_p = rng.normal(size=lam.shape) * np.sqrt(lam)
    noise_level = noise_variance / total_budget
    eps_p = rng.normal(size=lam.shape) * math.sqrt(noise_level)

    def signal(x):
        phi = eigensystem.eigenfunctions(np.atleast_2d(np.asarray(x, dtype=float)))
        out = phi @ f_p
        return float(out[0]) if np.asarray(x).ndim <= 1 else out

    predictor = SpectralModel(eigensystem, noise_level, f_p + eps_p)
    return signal, predictor


def spectral_mse(eigensystem: EigenSystem, total_budget: float, noise_variance: float, x):
    """Pointwise MSE of the idealized predictor, truncated at the retained eigenpairs."""
    lam = eigensystem.eigenvalues
    noise_level = noise_variance / total_budget
    terms = noise_level * lam / (noise_level + lam)
    phi = eigensystem.eigenfunctions(np.atleast_2d(np.asarray(x, dtype=float)))
    out = phi**2 @ terms
    return float(out[0]) if np.asarray(x).ndim <= 1 else out


def imse(eigensystem, total_budget: float, noise_variance: float) -> float:
    """Integrated MSE of the idealized predictor.

    Accepts an :class:`EigenSystem` or a plain eigenvalue sequence. The
    truncation tail is bounded by ``eigensystem.trace_gap`` (each neglected
    term is at most its eigenvalue).
    """
    lam = np.asarray(getattr(eigensystem, "eigenvalues", eigensystem), dtype=float)
    noise_level = noise_variance / total_budget
    return float(np.sum(noise_level * lam / (noise_level + lam)))


def bt_squared(eigenvalues, noise_variance: float, total_budget: float) -> float:
    """Threshold proxy: sum of eigenvalues at or below sigma_eps^2/T plus the
    threshold times the count above it. Sandwiches the IMSE within [1/2, 1]."""
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(np.diff(lam) > 0.0):
        raise ValueError("eigenvalues must be sorted nonincreasing")
    level = noise_variance / total_budget
    above = lam > level
    return float(lam[~above].sum() + level * np.count_nonzero(above))


def project_separable(eigensystem: EigenSystem, axis_functions, quad_nodes: int = 96) -> np.ndarray:
    """Coefficients ``int f phi_p dmu`` for a product-form f(x) = prod_i f_i(x_i).

    Per-axis Gauss-Hermite quadrature against the normalized 1-D
    eigenfunctions; exact up to quadrature error in any dimension.
    """
    if len(axis_functions) != eigensystem.dimension:
        raise ValueError("one axis function per dimension is required")
    nodes, weights = hermgauss(quad_nodes)
    sd = math.sqrt(eigensystem.measure.variance)
    x1 = math.sqrt(2.0) * sd * nodes           # quadrature points under N(0, sigma_mu^2)
    w = weights / math.sqrt(math.pi)
    coeffs = np.ones(eigensystem.truncation)
    pts = np.zeros((quad_nodes, eigensystem.dimension))
    for i, fi in enumerate(axis_functions):
        pts_i = pts.copy()
        pts_i[:, i] = x1
        table = eigensystem._axis_tables(pts_i)[i]  # (max_order+1, nodes)
        proj = table @ (w * fi(x1))
        coeffs = coeffs * proj[eigensystem.multi_indices[:, i]]
    return coeffs
