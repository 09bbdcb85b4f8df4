"""One-step estimation of the geometric odds-ratio curve.

The estimator averages, over all rows, a per-row score for each of the four
(arm, outcome-class) cells: a logit regression term active when the row's
outcome class matches, plus an inverse-variance-weighted residual
augmentation active when the row's arm matches. The log of the curve
estimate is affine in the posited outcome rate, with slope and intercept
built from the cell means, so the whole curve is summarized by four numbers
plus the estimated sampled outcome rate.

Rows are always scored with their out-of-fold nuisance fit; the sampled
outcome rate is estimated once on the full sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .dgp import Dataset, RANDOM_SAMPLING
from .nuisance import (
    CrossFitPlan,
    NuisanceFit,
    RowNuisances,
    estimate_omega,
    row_nuisances,
)

Cell = tuple[int, int]
CELLS: tuple[Cell, ...] = _kernels.COLUMN_CELLS


@dataclass(frozen=True)
class CellEstimates:
    """Cross-fit cell means keyed by (arm, outcome class), plus omega_hat."""

    values: dict[Cell, float]
    omega_hat: float

    def __post_init__(self):
        if set(self.values) != set(CELLS):
            raise ValueError(f"cell means must cover {CELLS}")
        if not all(np.isfinite(v) for v in self.values.values()):
            raise ValueError("cell means must be finite")
        if not 0.0 < self.omega_hat < 1.0:
            raise ValueError(f"omega_hat must lie in (0, 1), got {self.omega_hat}")

    @property
    def log_slope(self) -> float:
        d1 = self.values[(1, 1)] - self.values[(0, 1)]
        d0 = self.values[(1, 0)] - self.values[(0, 0)]
        return d1 - d0

    @property
    def log_intercept(self) -> float:
        return self.values[(1, 0)] - self.values[(0, 0)]

    def log_curve_at(self, rho: float) -> float:
        return self.log_intercept + float(rho) * self.log_slope

    def curve_at(self, rho: float) -> float:
        return float(np.exp(self.log_curve_at(rho)))


@dataclass(frozen=True)
class CurveEstimate:
    """Estimated odds-ratio curve over a grid of posited outcome rates."""

    rho_grid: np.ndarray
    gamma: np.ndarray
    log_slope: float
    log_intercept: float
    cells: CellEstimates

    def __post_init__(self):
        if self.rho_grid.size == 0:
            raise ValueError("empty rho grid")
        self.rho_grid.setflags(write=False)
        self.gamma.setflags(write=False)

    def at(self, rho: float) -> float:
        return float(np.exp(self.log_intercept + float(rho) * self.log_slope))


def _check_denominators(rows: RowNuisances, clip_eps: float) -> None:
    floor = clip_eps**3
    for arm, mu, pi in ((1, rows.mu1, rows.pi1), (0, rows.mu0, 1.0 - rows.pi1)):
        denom = pi * mu * (1.0 - mu)
        if denom.min() < floor:
            raise ValueError(
                f"arm {arm} score denominator fell below clip_eps^3 = {floor}; "
                "nuisance clipping appears to have been bypassed"
            )


def score_uncentered(
    y: np.ndarray,
    a: np.ndarray,
    rows: RowNuisances,
    arm: int,
    outcome: int,
    omega_hat: float,
) -> np.ndarray:
    """Per-row uncentered score for one (arm, outcome) cell."""
    if arm not in (0, 1) or outcome not in (0, 1):
        raise ValueError("arm and outcome must be 0 or 1")
    if not 0.0 < omega_hat < 1.0:
        raise ValueError(f"omega_hat must lie in (0, 1), got {omega_hat}")
    mat = _kernels.score_matrix(y, a, rows.mu1, rows.mu0, rows.pi1, rows.eta, omega_hat)
    return mat[:, _kernels.column_of(arm, outcome)]


def estimate_cells(
    dataset: Dataset,
    fits: Mapping[int, NuisanceFit],
    plan: CrossFitPlan,
    omega_hat: float | None = None,
    rows: RowNuisances | None = None,
) -> CellEstimates:
    """Grand mean of the out-of-fold scores for all four cells."""
    if rows is None:
        rows = row_nuisances(dataset, plan, fits)
    clip_eps = fits[0].clip_eps
    _check_denominators(rows, clip_eps)
    if omega_hat is None:
        omega_hat = estimate_omega(dataset, clip_eps)
    mat = _kernels.score_matrix(
        dataset.y, dataset.a, rows.mu1, rows.mu0, rows.pi1, rows.eta, omega_hat
    )
    means = mat.mean(axis=0)
    values = {cell: float(means[_kernels.column_of(*cell)]) for cell in CELLS}
    return CellEstimates(values=values, omega_hat=float(omega_hat))


def estimate_curve(cells: CellEstimates, rho_grid: Sequence[float]) -> CurveEstimate:
    """Evaluate the affine-in-rho log curve on a sorted grid inside (0, 1)."""
    grid = np.asarray(rho_grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty rho grid")
    if np.any(grid <= 0.0) or np.any(grid >= 1.0):
        raise ValueError("rho grid must lie inside (0, 1)")
    if np.any(np.diff(grid) < 0):
        raise ValueError("rho grid must be sorted ascending")
    gamma = np.exp(cells.log_intercept + grid * cells.log_slope)
    return CurveEstimate(
        rho_grid=grid,
        gamma=gamma,
        log_slope=cells.log_slope,
        log_intercept=cells.log_intercept,
        cells=cells,
    )


def rho_grid(rho_low: float, rho_high: float, n_points: int = 101) -> np.ndarray:
    """Evenly spaced grid over [rho_low, rho_high]."""
    if not 0.0 < rho_low <= rho_high < 1.0:
        raise ValueError(f"need 0 < rho_low <= rho_high < 1, got [{rho_low}, {rho_high}]")
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    if rho_low == rho_high or n_points == 1:
        return np.array([rho_low])
    return np.linspace(rho_low, rho_high, n_points)


@dataclass(frozen=True)
class RandomSamplingEstimate:
    """Point-identified estimate under random sampling."""

    log_gamma: float
    gamma: float
    scores: np.ndarray

    def __post_init__(self):
        self.scores.setflags(write=False)


def estimate_random_sampling(
    dataset: Dataset,
    fits: Mapping[int, NuisanceFit],
    plan: CrossFitPlan,
    rows: RowNuisances | None = None,
) -> RandomSamplingEstimate:
    """Cross-fit mean of the augmented log conditional odds-ratio scores.

    Only random samples are accepted; outcome-dependent data must go through
    the curve estimator.
    """
    if dataset.scheme != RANDOM_SAMPLING:
        raise ValueError(
            f"random-sampling estimator requires scheme {RANDOM_SAMPLING!r}, "
            f"got {dataset.scheme!r}; use the outcome-dependent curve estimator instead"
        )
    if rows is None:
        rows = row_nuisances(dataset, plan, fits)
    _check_denominators(rows, fits[0].clip_eps)
    scores = _kernels.rs_scores(dataset.y, dataset.a, rows.mu1, rows.mu0, rows.pi1)
    log_gamma = float(scores.mean())
    return RandomSamplingEstimate(
        log_gamma=log_gamma, gamma=float(np.exp(log_gamma)), scores=scores
    )
