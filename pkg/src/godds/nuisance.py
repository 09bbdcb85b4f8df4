"""Nuisance regressions: fitting, clipping, cross-fitting, perturbation.

Three regression surfaces feed the one-step estimator: the per-arm outcome
probabilities mu_a(x), the treatment probability pi_a(x), and the marginal
outcome probability eta(x), all under the sampled law. Fits are produced per
cross-validation fold from the out-of-fold rows only, and every emitted
probability is clipped into [clip_eps, 1 - clip_eps].

``perturb`` builds deliberately misspecified fits (logit-space shifts) for
the rate experiments in the harness.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

from . import _kernels
from ._rng import make_rng
from .dgp import Dataset, QLaw

LOGISTIC = "logistic"
ORACLE = "oracle"
PERTURBED_ORACLE = "perturbed_oracle"

ETA_COMPOSE = "compose"
ETA_DIRECT = "direct"

PERTURB_TARGETS = ("mu1", "mu0", "pi", "eta")


class ConvergenceError(RuntimeError):
    """Newton iterations exhausted without meeting the gradient tolerance."""


@dataclass(frozen=True)
class NuisanceSpec:
    """Configuration for nuisance estimation.

    ``ridge`` penalizes the mean log-loss, so the implied sum-scale penalty
    grows linearly with the training size; the default keeps Newton solvable
    on separable subsamples at the cost of a small, documented shrinkage
    bias. ``eta_mode`` selects composing eta from the fitted mu/pi pieces or
    fitting it by its own direct regression.
    """

    kind: str = LOGISTIC
    clip_eps: float = 0.01
    ridge: float = 1e-4
    max_newton_iters: int = 100
    newton_tol: float = 1e-10
    eta_mode: str = ETA_COMPOSE

    def __post_init__(self):
        if self.kind not in (LOGISTIC, ORACLE, PERTURBED_ORACLE):
            raise ValueError(f"unknown nuisance kind {self.kind!r}")
        if not 0.0 < self.clip_eps < 0.5:
            raise ValueError(f"clip_eps must lie in (0, 0.5), got {self.clip_eps}")
        if self.ridge < 0.0:
            raise ValueError("ridge must be nonnegative")
        if self.newton_tol <= 0.0:
            raise ValueError("newton_tol must be positive")
        if self.eta_mode not in (ETA_COMPOSE, ETA_DIRECT):
            raise ValueError(f"unknown eta_mode {self.eta_mode!r}")


@dataclass(frozen=True)
class CrossFitPlan:
    """Deterministic partition of rows into folds."""

    k_folds: int
    seed: int
    assignment: np.ndarray

    def __post_init__(self):
        if self.k_folds < 2:
            raise ValueError("k_folds must be at least 2")
        if set(np.unique(self.assignment)) - set(range(self.k_folds)):
            raise ValueError("fold assignment contains out-of-range folds")
        self.assignment.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.assignment.shape[0])

    def rows_in(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def rows_out(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def make_folds(n: int, k_folds: int, seed: int) -> CrossFitPlan:
    if n < k_folds:
        raise ValueError(f"cannot split {n} rows into {k_folds} folds")
    perm = make_rng(seed, 2).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.arange(n) % k_folds
    return CrossFitPlan(k_folds=k_folds, seed=int(seed), assignment=assignment)


def estimate_omega(dataset: Dataset, clip_eps: float = 0.01) -> float:
    """Full-sample mean of Y, clipped into [clip_eps, 1 - clip_eps]."""
    if dataset.n == 0:
        raise ValueError("empty dataset")
    raw = float(dataset.y.mean())
    lo, hi = clip_eps, 1.0 - clip_eps
    if raw < lo or raw > hi:
        warnings.warn(
            f"sampled outcome rate {raw} clipped to [{lo}, {hi}]",
            RuntimeWarning,
            stacklevel=2,
        )
    return min(max(raw, lo), hi)


# ---------------------------------------------------------------------------
# logistic learner
# ---------------------------------------------------------------------------

def _design(x: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(x.shape[0]), x])


def fit_logistic(features: np.ndarray, labels: np.ndarray, spec: NuisanceSpec) -> np.ndarray:
    """Ridge-penalized logistic MLE by damped Newton; returns (intercept, slopes).

    With ridge = 0 and separable data the gradient never meets the tolerance
    and a ConvergenceError is raised instead of returning a diverging fit.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    labels = np.asarray(labels, dtype=np.float64)
    if features.shape[0] == 0:
        raise ValueError("no rows to fit")
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    x = _design(features)
    beta, converged, iters = _kernels.logistic_newton(
        x, labels, spec.ridge, spec.max_newton_iters, spec.newton_tol
    )
    if not converged:
        raise ConvergenceError(
            f"logistic fit did not converge in {spec.max_newton_iters} Newton steps "
            f"(ridge={spec.ridge}); data may be separable"
        )
    if spec.ridge == 0.0:
        fitted = _kernels._expit_np(x @ beta)
        if np.min(np.minimum(fitted, 1.0 - fitted)) < 10.0 * spec.newton_tol:
            # unpenalized likelihood maximized at saturation: perfect separation
            raise ConvergenceError(
                "unpenalized logistic fit saturated at a probability boundary; "
                "data are separable, use ridge > 0"
            )
    return beta


def _logistic_predictor(beta: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    def predict(x: np.ndarray) -> np.ndarray:
        z = _design(np.asarray(x, dtype=np.float64)) @ beta
        return _kernels._expit_np(z)

    return predict


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NuisanceFit:
    """Per-fold fitted surfaces; public predictions are clipped.

    The raw callables map an (n, d) feature matrix to unclipped
    probabilities; ``predict_*`` apply the clipping policy.
    """

    raw_mu1: Callable[[np.ndarray], np.ndarray]
    raw_mu0: Callable[[np.ndarray], np.ndarray]
    raw_pi1: Callable[[np.ndarray], np.ndarray]
    raw_eta: Callable[[np.ndarray], np.ndarray]
    clip_eps: float
    fitted_on: str = "all"
    boundary_flag: bool = False

    def _clip(self, p: np.ndarray) -> np.ndarray:
        return np.clip(p, self.clip_eps, 1.0 - self.clip_eps)

    def predict_mu(self, a: int, x: np.ndarray) -> np.ndarray:
        if a not in (0, 1):
            raise ValueError(f"arm must be 0 or 1, got {a}")
        return self._clip(self.raw_mu1(x) if a == 1 else self.raw_mu0(x))

    def predict_pi(self, a: int, x: np.ndarray) -> np.ndarray:
        if a not in (0, 1):
            raise ValueError(f"arm must be 0 or 1, got {a}")
        p1 = self.raw_pi1(x)
        return self._clip(p1 if a == 1 else 1.0 - p1)

    def predict_eta(self, x: np.ndarray) -> np.ndarray:
        return self._clip(self.raw_eta(x))


class DiscreteTruth:
    """Exact sampled-law surfaces for a finite-support law.

    Rows are matched to strata by their feature vectors; unknown feature
    vectors raise.
    """

    def __init__(self, features: np.ndarray, mu1, mu0, pi1, eta):
        self.features = np.ascontiguousarray(features, dtype=np.float64)
        self.mu1 = np.asarray(mu1, dtype=np.float64)
        self.mu0 = np.asarray(mu0, dtype=np.float64)
        self.pi1 = np.asarray(pi1, dtype=np.float64)
        self.eta = np.asarray(eta, dtype=np.float64)
        k = self.features.shape[0]
        self._one_hot = self.features.shape == (k, k) and np.array_equal(
            self.features, np.eye(k)
        )

    @classmethod
    def from_qlaw(cls, qlaw: QLaw) -> "DiscreteTruth":
        return cls(qlaw.features, qlaw.mu1, qlaw.mu0, qlaw.pi1, qlaw.eta)

    def stratum_index(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
        k = self.features.shape[0]
        if self._one_hot:
            idx = np.argmax(x, axis=1)
            ok = (x == np.eye(k)[idx]).all(axis=1)
            if not ok.all():
                bad = int(np.flatnonzero(~ok)[0])
                raise KeyError(f"row {bad} has a feature vector not matching any stratum")
            return idx
        combined = np.vstack([self.features, x])
        _, inverse = np.unique(combined, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        lookup = np.full(int(inverse.max()) + 1, -1, dtype=np.int64)
        lookup[inverse[:k]] = np.arange(k)
        idx = lookup[inverse[k:]]
        if np.any(idx < 0):
            bad = int(np.flatnonzero(idx < 0)[0])
            raise KeyError(f"row {bad} has a feature vector not matching any stratum")
        return idx

    def mu1_of(self, x):
        return self.mu1[self.stratum_index(x)]

    def mu0_of(self, x):
        return self.mu0[self.stratum_index(x)]

    def pi1_of(self, x):
        return self.pi1[self.stratum_index(x)]

    def eta_of(self, x):
        return self.eta[self.stratum_index(x)]


def _truth_fit(truth, spec: NuisanceSpec, fold_label: str) -> NuisanceFit:
    if isinstance(truth, QLaw):
        truth = DiscreteTruth.from_qlaw(truth)
    for attr in ("mu1_of", "mu0_of", "pi1_of", "eta_of"):
        if not hasattr(truth, attr):
            raise TypeError("truth must be a QLaw or expose mu1_of/mu0_of/pi1_of/eta_of")
    return NuisanceFit(
        raw_mu1=truth.mu1_of,
        raw_mu0=truth.mu0_of,
        raw_pi1=truth.pi1_of,
        raw_eta=truth.eta_of,
        clip_eps=spec.clip_eps,
        fitted_on=fold_label,
    )


def _logistic_fit(dataset: Dataset, train_rows: np.ndarray, spec: NuisanceSpec, fold: int) -> NuisanceFit:
    x = dataset.x[train_rows]
    y = dataset.y[train_rows]
    a = dataset.a[train_rows]
    for arm in (0, 1):
        if not np.any(a == arm):
            raise ValueError(f"fold {fold}: no training rows with arm {arm}")
    beta_mu1 = fit_logistic(x[a == 1], y[a == 1], spec)
    beta_mu0 = fit_logistic(x[a == 0], y[a == 0], spec)
    beta_pi = fit_logistic(x, a, spec)
    mu1 = _logistic_predictor(beta_mu1)
    mu0 = _logistic_predictor(beta_mu0)
    pi1 = _logistic_predictor(beta_pi)
    if spec.eta_mode == ETA_DIRECT:
        eta = _logistic_predictor(fit_logistic(x, y, spec))
    else:
        def eta(xq, _mu1=mu1, _mu0=mu0, _pi1=pi1):
            p1 = _pi1(xq)
            return p1 * _mu1(xq) + (1.0 - p1) * _mu0(xq)

    return NuisanceFit(
        raw_mu1=mu1,
        raw_mu0=mu0,
        raw_pi1=pi1,
        raw_eta=eta,
        clip_eps=spec.clip_eps,
        fitted_on=f"fold!={fold}",
    )


def fit_nuisances(
    dataset: Dataset,
    plan: CrossFitPlan,
    spec: NuisanceSpec,
    truth=None,
) -> dict[int, NuisanceFit]:
    """Fit one NuisanceFit per fold from that fold's out-of-fold rows.

    Oracle kinds require ``truth`` (a QLaw or an object with ``*_of``
    prediction methods) and ignore the data.
    """
    if plan.n != dataset.n:
        raise ValueError(f"plan covers {plan.n} rows but dataset has {dataset.n}")
    if spec.kind in (ORACLE, PERTURBED_ORACLE):
        if truth is None:
            raise ValueError(f"nuisance kind {spec.kind!r} requires truth")
        return {f: _truth_fit(truth, spec, f"fold!={f}") for f in range(plan.k_folds)}
    return {
        f: _logistic_fit(dataset, plan.rows_out(f), spec, f) for f in range(plan.k_folds)
    }


@dataclass(frozen=True)
class RowNuisances:
    """Out-of-fold nuisance predictions aligned to dataset rows."""

    mu1: np.ndarray
    mu0: np.ndarray
    pi1: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        for arr in (self.mu1, self.mu0, self.pi1, self.eta):
            arr.setflags(write=False)


def row_nuisances(
    dataset: Dataset, plan: CrossFitPlan, fits: Mapping[int, NuisanceFit]
) -> RowNuisances:
    """Score every row with the fit trained away from its fold."""
    if set(fits) != set(range(plan.k_folds)):
        raise ValueError(f"fits cover folds {sorted(fits)} but plan has {plan.k_folds}")
    n = dataset.n
    mu1 = np.empty(n)
    mu0 = np.empty(n)
    pi1 = np.empty(n)
    eta = np.empty(n)
    for f in range(plan.k_folds):
        rows = plan.rows_in(f)
        if rows.size == 0:
            continue
        x = dataset.x[rows]
        fit = fits[f]
        mu1[rows] = fit.predict_mu(1, x)
        mu0[rows] = fit.predict_mu(0, x)
        pi1[rows] = fit.predict_pi(1, x)
        eta[rows] = fit.predict_eta(x)
    return RowNuisances(mu1=mu1, mu0=mu0, pi1=pi1, eta=eta)


# ---------------------------------------------------------------------------
# deliberate misspecification
# ---------------------------------------------------------------------------

def _logit_shift(raw: Callable, amplitude: float, shape: Callable) -> Callable:
    def shifted(x: np.ndarray) -> np.ndarray:
        p = np.clip(raw(x), 1e-300, 1.0 - 1e-16)
        z = np.log(p) - np.log1p(-p) + amplitude * shape(x)
        return _kernels._expit_np(z)

    return shifted


def perturb(
    fit: NuisanceFit,
    target: str,
    amplitude: float,
    shape: Callable[[np.ndarray], np.ndarray] | None = None,
    probe_x: np.ndarray | None = None,
) -> NuisanceFit:
    """Shift one fitted surface by ``amplitude * shape(x)`` on the logit scale.

    Other surfaces are left untouched (in particular, perturbing mu does not
    recompose eta). When ``probe_x`` is given and every probed prediction of
    the shifted surface lands on the clip boundary, the returned fit carries
    ``boundary_flag`` and a warning is emitted.
    """
    if target not in PERTURB_TARGETS:
        raise ValueError(f"target must be one of {PERTURB_TARGETS}, got {target!r}")
    if shape is None:
        shape = lambda x: np.ones(np.asarray(x).shape[0])
    if amplitude == 0.0:
        return fit

    fields = {
        "mu1": "raw_mu1",
        "mu0": "raw_mu0",
        "pi": "raw_pi1",
        "eta": "raw_eta",
    }
    shifted = _logit_shift(getattr(fit, fields[target]), amplitude, shape)
    new_fit = replace(fit, **{fields[target]: shifted})

    if probe_x is not None and len(probe_x):
        preds = {
            "mu1": lambda: new_fit.predict_mu(1, probe_x),
            "mu0": lambda: new_fit.predict_mu(0, probe_x),
            "pi": lambda: new_fit.predict_pi(1, probe_x),
            "eta": lambda: new_fit.predict_eta(probe_x),
        }[target]()
        lo, hi = fit.clip_eps, 1.0 - fit.clip_eps
        if np.all((preds == lo) | (preds == hi)):
            warnings.warn(
                f"perturbation of {target!r} pushed every probed prediction to the clip boundary",
                RuntimeWarning,
                stacklevel=2,
            )
            new_fit = replace(new_fit, boundary_flag=True)
    return new_fit
