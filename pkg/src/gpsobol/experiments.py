"""End-to-end experiment drivers.

``run_coverage_experiment`` reproduces the confidence-interval coverage
study: fit hyperparameters on a pilot dataset, derive the budget rule
constant, then for each (m, alpha) grid cell build the surrogate at budget
``T = s2 (m^alpha / C) log(m / C)`` and measure how often the intervals
cover the exact indices over replicated estimations.
``run_convergence_check`` measures the gap between the finite-design
predictive MSE and its idealized spectral limit as the design grows.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .budget import _pilot_constant
from .heat import HeatConfig, exact_sobol_indices, exact_solution, simulate_code
from .hyperfit import HyperParams, SearchConfig, fit_hyperparameters
from .kernels import (
    EigenSystem,
    GaussianMeasure,
    KernelFamily,
    KernelSpec,
    gaussian_measure_eigensystem,
    truncation_size,
)
from .sobol import confidence_interval, estimate_sobol, pick_freeze_sample
from .surrogate import (
    SpectralModel,
    TrainingSet,
    fit_blup,
    fit_gp,
    imse,
    predict,
    project_separable,
    spectral_mse,
)

__all__ = [
    "CoverageCell",
    "CoverageReport",
    "SurrogateSetup",
    "pilot_setup",
    "coverage_budget",
    "run_coverage_experiment",
    "run_convergence_check",
]


def coverage_budget(m: int, alpha: float, pilot_c: float, noise_variance: float) -> float:
    """Grid budget ``T = s2 (m^alpha / C) log(m / C)`` used by the coverage study."""
    if m <= pilot_c:
        raise ValueError("budget rule degenerate: m must exceed the pilot constant C")
    return noise_variance * (m**alpha / pilot_c) * math.log(m / pilot_c)


@dataclass(frozen=True)
class SurrogateSetup:
    """Fitted ingredients shared by all grid cells of a coverage run."""

    config: HeatConfig
    hyper: HyperParams
    eigensystem: EigenSystem
    pilot_budget: float
    pilot_imse: float
    pilot_c: float
    signal_coefficients: np.ndarray  # projection of the exact solution on the eigenbasis


def _solution_axis_functions(cfg: HeatConfig):
    width = np.asarray(cfg.dispersions) + cfg.time

    def make(i):
        amp = math.sqrt(cfg.dispersions[i] / width[i])
        return lambda x: amp * np.exp(-0.5 * x**2 / width[i])

    return [make(i) for i in range(cfg.dimension)]


def pilot_setup(
    cfg: HeatConfig,
    seed,
    pilot_budget: int = 1000,
    search: SearchConfig | None = None,
    hyper: HyperParams | None = None,
) -> SurrogateSetup:
    """Run the pilot phase: simulate a design, fit hyperparameters, fix the budget rule.

    ``hyper`` may be supplied to skip the marginal-likelihood search (the
    expensive step) and reuse previously fitted parameters.
    """
    rng = np.random.default_rng(seed)
    if hyper is None:
        points = rng.normal(0.0, cfg.design_std, size=(pilot_budget, cfg.dimension))
        outputs = np.array(
            [simulate_code(cfg, p, 1, s)[0] for p, s in zip(points, rng.spawn(pilot_budget))]
        )
        data = TrainingSet(points, outputs, replications=1)
        hyper = fit_hyperparameters(data, search, seed=rng.integers(2**63))
    kernel = KernelSpec(
        KernelFamily.SQUARED_EXPONENTIAL,
        hyper.lengthscales,
        hyper.signal_variance,
    )
    measure = GaussianMeasure(cfg.dimension, cfg.design_std**2)
    eig = gaussian_measure_eigensystem(kernel, measure, truncation_size(kernel, measure))
    pilot_imse = imse(eig, pilot_budget, hyper.noise_variance)
    pilot_c = _pilot_constant(pilot_imse, pilot_budget, hyper.noise_variance)
    coeffs = project_separable(eig, _solution_axis_functions(cfg))
    return SurrogateSetup(
        config=cfg,
        hyper=hyper,
        eigensystem=eig,
        pilot_budget=float(pilot_budget),
        pilot_imse=pilot_imse,
        pilot_c=pilot_c,
        signal_coefficients=coeffs,
    )


@dataclass(frozen=True)
class CoverageCell:
    m: int
    alpha: float
    total_budget: float | None
    coverage: np.ndarray  # percentage per index


@dataclass(frozen=True)
class CoverageReport:
    cells: tuple[CoverageCell, ...]
    replicates: int
    level: float
    seed: int | None
    evaluator: str

    @property
    def binomial_se(self) -> float:
        """Standard error (percent) of one coverage estimate at the nominal level."""
        return 100.0 * math.sqrt(self.level * (1.0 - self.level) / self.replicates)

    def to_json(self) -> str:
        return json.dumps(
            {
                "replicates": self.replicates,
                "level": self.level,
                "seed": self.seed,
                "evaluator": self.evaluator,
                "binomial_se_pct": self.binomial_se,
                "cells": [
                    {
                        "m": c.m,
                        "alpha": c.alpha,
                        "T": c.total_budget,
                        "coverage_pct": list(c.coverage),
                    }
                    for c in self.cells
                ],
            }
        )

    def write_csv(self, path) -> None:
        d = len(self.cells[0].coverage)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["m", "alpha", "T", *[f"coverage_S{j+1}" for j in range(d)]])
            for c in self.cells:
                writer.writerow([c.m, c.alpha, c.total_budget, *[f"{v:.2f}" for v in c.coverage]])


def _replicate_evaluator(cfg: HeatConfig, setup, evaluator: str, total_budget, rng):
    if evaluator == "exact":
        return lambda pts: exact_solution(cfg, pts)
    if evaluator == "spectral":
        eig = setup.eigensystem
        noise_level = setup.hyper.noise_variance / total_budget
        eps = rng.normal(size=eig.truncation) * math.sqrt(noise_level)
        return SpectralModel(eig, noise_level, setup.signal_coefficients + eps)
    if evaluator == "blup":
        n = max(2, int(round(total_budget)))
        points = rng.normal(0.0, cfg.design_std, size=(n, cfg.dimension))
        outputs = np.array(
            [simulate_code(cfg, p, 1, s)[0] for p, s in zip(points, rng.spawn(n))]
        )
        kernel = KernelSpec(
            KernelFamily.SQUARED_EXPONENTIAL,
            setup.hyper.lengthscales,
            setup.hyper.signal_variance,
        )
        data = TrainingSet(points, outputs, 1, setup.hyper.noise_variance)
        model = fit_blup(data, kernel)
        return lambda pts: predict(model, pts)[0]
    raise ValueError(f"unknown evaluator {evaluator!r}")


def run_coverage_experiment(
    cfg: HeatConfig,
    grid,
    replicates: int = 200,
    level: float = 0.9,
    seed=None,
    evaluator: str = "spectral",
    setup: SurrogateSetup | None = None,
    pilot_budget: int = 1000,
    search: SearchConfig | None = None,
) -> CoverageReport:
    """Coverage of the asymptotic confidence intervals over a grid of (m, alpha) cells.

    ``evaluator`` selects what the pick-freeze estimator evaluates: the exact
    solution (surrogate disabled), the idealized spectral surrogate at the
    cell budget (default), or a finite-data BLUP refitted per replicate.
    Each replicate draws fresh surrogate noise and a fresh Monte-Carlo sample
    from a pre-split seed stream, so the cell result does not depend on
    replicate execution order.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    if replicates < 10:
        raise ValueError("replicates must be >= 10")
    root = np.random.SeedSequence(seed)
    if evaluator != "exact" and setup is None:
        setup = pilot_setup(cfg, root.spawn(1)[0], pilot_budget=pilot_budget, search=search)
    if evaluator == "blup":
        biggest = max(
            coverage_budget(m, a, setup.pilot_c, setup.hyper.noise_variance) for m, a in grid
        )
        if biggest > 5000:
            warnings.warn(
                f"blup evaluator refits an n={biggest:.0f} design per replicate; "
                "this will be slow",
                stacklevel=2,
            )
    truth = exact_sobol_indices(cfg)
    d = cfg.dimension
    cells = []
    for (m, alpha), cell_seq in zip(grid, root.spawn(len(grid))):
        if evaluator == "exact":
            total_budget = None
        else:
            total_budget = coverage_budget(m, alpha, setup.pilot_c, setup.hyper.noise_variance)
        hits = np.zeros(d)
        for rep_seq in cell_seq.spawn(replicates):
            rng = np.random.default_rng(rep_seq)
            f = _replicate_evaluator(cfg, setup, evaluator, total_budget, rng)
            for j in range(1, d + 1):
                sample = pick_freeze_sample(
                    GaussianMeasure(d, cfg.design_std**2), [j], m, rng
                )
                est = estimate_sobol(f, sample, evaluator=evaluator, total_budget=total_budget)
                lo, hi = confidence_interval(est, level)
                if lo <= truth[j - 1] <= hi:
                    hits[j - 1] += 1
        cells.append(
            CoverageCell(
                m=m, alpha=alpha, total_budget=total_budget, coverage=100.0 * hits / replicates
            )
        )
    return CoverageReport(
        cells=tuple(cells),
        replicates=replicates,
        level=level,
        seed=seed,
        evaluator=evaluator,
    )


def run_convergence_check(
    kernel: KernelSpec,
    measure: GaussianMeasure,
    total_budget: float,
    noise_variance: float,
    levels=(50, 200, 800),
    seed=None,
    n_test_points: int = 20,
):
    """Median gap between the finite-design MSE and its spectral limit per design size.

    For each level n, a design is drawn from the measure and the predictive
    MSE at fixed test points (nugget ``n s2 / T``) is compared with the
    idealized value; rows are ``(n, median absolute gap)``.
    """
    levels = list(levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    eig = gaussian_measure_eigensystem(kernel, measure, truncation_size(kernel, measure))
    rng = np.random.default_rng(seed)
    test_points = measure.sample(n_test_points, rng)
    ideal = spectral_mse(eig, total_budget, noise_variance, test_points)
    rows = []
    for n in levels:
        design = measure.sample(n, rng)
        model = fit_gp(kernel, design, np.zeros(n), nugget=n * noise_variance / total_budget)
        _, mse = predict(model, test_points)
        rows.append((n, float(np.median(np.abs(mse - ideal)))))
    return rows
