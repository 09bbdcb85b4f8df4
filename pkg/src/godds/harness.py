"""Seeded Monte Carlo studies: coverage, convergence rate, efficiency.

Studies are driven by an :class:`ExperimentConfig` and emit a
:class:`StudyReport` whose serialization is byte-identical for identical
configs. Replications derive their seeds from (master_seed, sample size
index, replication index), so execution order and threading never change
results; per-replication failures are recorded and only abort the study when
they exceed one percent.

Built-in scenarios:

- ``worked_example_ods``: the two-stratum constant-odds-ratio population,
  tilted to the design outcome rate.
- ``het3``: three strata with conditional odds ratios 1/2, 1 and 3
  (fixture values), tilted likewise.
- ``logistic_cont``: a continuous-covariate sampled law whose treatment and
  outcome surfaces are exactly logistic in x, for parametric-correctness
  coverage runs; its truth values come from Gauss-Legendre quadrature.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from . import _jsonio
from ._rng import make_rng
from .dgp import (
    Dataset,
    DiscreteDGP,
    OUTCOME_DEPENDENT,
    QLaw,
    draw_outcome_dependent,
    draw_random_sample,
    make_dgp,
    tilt_to_outcome_rate,
    worked_example,
)
from .estimator import estimate_cells, estimate_curve, estimate_random_sampling
from .inference import ci_bound, ci_endpoint, pseudo_outcomes
from .nuisance import (
    LOGISTIC,
    ORACLE,
    PERTURBED_ORACLE,
    DiscreteTruth,
    NuisanceSpec,
    fit_nuisances,
    make_folds,
    perturb,
    row_nuisances,
)
from .oracle import (
    efficiency_bound_outcome_dependent,
    efficiency_bound_random_sampling,
    geometric_odds_ratio_at,
)

COVERAGE = "coverage"
RATE = "rate"
EFFICIENCY = "efficiency"

_MAX_FAILURE_FRACTION = 0.01


def worker_count() -> int:
    """Thread cap from GODDS_THREADS (default 1 = serial)."""
    raw = os.environ.get("GODDS_THREADS", "1")
    try:
        val = int(raw)
    except ValueError:
        raise ValueError(f"GODDS_THREADS must be an integer, got {raw!r}") from None
    return max(1, val)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def het3_dgp() -> DiscreteDGP:
    """Three strata with heterogeneous conditional odds ratios {1/2, 1, 3}."""
    return make_dgp(
        labels=("low", "mid", "high"),
        p_x=(0.35, 0.35, 0.30),
        pi1=(0.45, 0.55, 0.50),
        nu1=(3.0 / 17.0, 0.5, 2.0 / 3.0),
        nu0=(0.30, 0.50, 0.40),
    )


class ContinuousLogisticTruth:
    """Sampled-law surfaces that are exactly logistic in a scalar covariate."""

    def __init__(self, pi_coef=(0.3, 0.8), mu1_coef=(-0.3, 0.9), mu0_coef=(-0.9, 0.6)):
        self.pi_coef = pi_coef
        self.mu1_coef = mu1_coef
        self.mu0_coef = mu0_coef

    @staticmethod
    def _expit(z):
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def _lin(self, coef, x):
        x1 = np.asarray(x)[:, 0]
        return coef[0] + coef[1] * x1

    def pi1_of(self, x):
        return self._expit(self._lin(self.pi_coef, x))

    def mu1_of(self, x):
        return self._expit(self._lin(self.mu1_coef, x))

    def mu0_of(self, x):
        return self._expit(self._lin(self.mu0_coef, x))

    def eta_of(self, x):
        p1 = self.pi1_of(x)
        return p1 * self.mu1_of(x) + (1.0 - p1) * self.mu0_of(x)


@dataclass(frozen=True)
class Scenario:
    """A named data-generating setup plus its ground-truth accessors."""

    name: str
    omega: float
    rho_true: float
    draw_ods: Callable[[int, int], Dataset]
    truth_ods: object
    gamma_at: Callable[[float], float]
    sigma2_at: Callable[[float], float]
    dgp: DiscreteDGP | None = None
    qlaw: QLaw | None = None
    draw_random: Callable[[int, int], Dataset] | None = None
    truth_random: object | None = None
    sigma2_random: float | None = None


def _discrete_scenario(name: str, dgp: DiscreteDGP, omega: float) -> Scenario:
    qlaw = tilt_to_outcome_rate(dgp, omega)
    truth_rs = DiscreteTruth(
        dgp.features, dgp.nu1, dgp.nu0, dgp.pi1, dgp.pi1 * dgp.nu1 + (1 - dgp.pi1) * dgp.nu0
    )
    return Scenario(
        name=name,
        omega=float(omega),
        rho_true=dgp.rho,
        draw_ods=lambda n, seed: draw_outcome_dependent(dgp, n, omega, seed),
        truth_ods=qlaw,
        gamma_at=lambda rho: geometric_odds_ratio_at(qlaw, rho),
        sigma2_at=lambda rho: efficiency_bound_outcome_dependent(qlaw, rho),
        dgp=dgp,
        qlaw=qlaw,
        draw_random=lambda n, seed: draw_random_sample(dgp, n, seed),
        truth_random=truth_rs,
        sigma2_random=efficiency_bound_random_sampling(dgp),
    )


def _continuous_scenario(rho_true: float = 0.30, quad_points: int = 200) -> Scenario:
    truth = ContinuousLogisticTruth()
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    x = nodes.reshape(-1, 1)
    w = weights / 2.0  # uniform density on (-1, 1)
    pi1 = truth.pi1_of(x)
    mu1 = truth.mu1_of(x)
    mu0 = truth.mu0_of(x)
    eta = truth.eta_of(x)
    lor = (np.log(mu1) - np.log1p(-mu1)) - (np.log(mu0) - np.log1p(-mu0))
    omega = float(w @ eta)

    psi = {}
    for arm, mu in ((1, mu1), (0, mu0)):
        lg = np.log(mu) - np.log1p(-mu)
        psi[(arm, 1)] = float(w @ (eta * lg)) / omega
        psi[(arm, 0)] = float(w @ ((1.0 - eta) * lg)) / (1.0 - omega)
    d1 = psi[(1, 1)] - psi[(0, 1)]
    d0 = psi[(1, 0)] - psi[(0, 0)]

    def gamma_at(rho: float) -> float:
        return float(np.exp(rho * d1 + (1.0 - rho) * d0))

    def sigma2_at(rho: float) -> float:
        c1 = rho / omega
        c0 = (1.0 - rho) / (1.0 - omega)
        # moments of the distribution-corrected log conditional / aggregate terms
        e_c = float(w @ (eta * c1 * lor + (1.0 - eta) * c0 * lor))
        e_c2 = float(w @ (eta * (c1 * lor) ** 2 + (1.0 - eta) * (c0 * lor) ** 2))
        e_s = float(w @ (eta * c1 * d1 + (1.0 - eta) * c0 * d0))
        e_s2 = float(w @ (eta * (c1 * d1) ** 2 + (1.0 - eta) * (c0 * d0) ** 2))
        e_cs = float(w @ (eta * c1 * c1 * lor * d1 + (1.0 - eta) * c0 * c0 * lor * d0))
        coef = (rho - omega) / (omega * (1.0 - omega)) * eta + (1.0 - rho) / (1.0 - omega)
        inv = 1.0 / (pi1 * mu1 * (1.0 - mu1)) + 1.0 / ((1.0 - pi1) * mu0 * (1.0 - mu0))
        e_corr = float(w @ (inv * coef**2))
        g = gamma_at(rho)
        return g * g * (
            (e_c2 - e_c**2) + (e_s2 - e_s**2) - 2.0 * (e_cs - e_c * e_s) + e_corr
        )

    def draw(n: int, seed: int) -> Dataset:
        rng = make_rng(seed, 3)
        xs = rng.uniform(-1.0, 1.0, size=n).reshape(-1, 1)
        a = (rng.random(n) < truth.pi1_of(xs)).astype(np.int8)
        mu = np.where(a == 1, truth.mu1_of(xs), truth.mu0_of(xs))
        y = (rng.random(n) < mu).astype(np.int8)
        return Dataset(y=y, a=a, x=xs, scheme=OUTCOME_DEPENDENT, omega_design=None, seed=seed)

    return Scenario(
        name="logistic_cont",
        omega=omega,
        rho_true=float(rho_true),
        draw_ods=draw,
        truth_ods=truth,
        gamma_at=gamma_at,
        sigma2_at=sigma2_at,
    )


SCENARIOS = ("worked_example_ods", "het3", "logistic_cont")


def make_scenario(name: str, omega: float = 0.5) -> Scenario:
    if name == "worked_example_ods":
        return _discrete_scenario(name, worked_example(), omega)
    if name == "het3":
        return _discrete_scenario(name, het3_dgp(), omega)
    if name == "logistic_cont":
        return _continuous_scenario()
    raise ValueError(f"unknown scenario {name!r}; available: {SCENARIOS}")


# ---------------------------------------------------------------------------
# configuration and report types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbSpec:
    """Logit-shift schedule: amplitude(n) = constant * n ** exponent."""

    target: str
    constant: float
    exponent: float = 0.0

    def amplitude(self, n: int) -> float:
        return self.constant * float(n) ** self.exponent


@dataclass(frozen=True)
class ExperimentConfig:
    study: str
    scenario: str
    omega: float = 0.5
    rho_low: float | None = None
    rho_high: float | None = None
    sample_sizes: tuple[int, ...] = (4000,)
    replications: int = 1000
    alpha: float = 0.05
    nuisance_kind: str = LOGISTIC
    clip_eps: float = 0.01
    ridge: float = 1e-4
    k_folds: int = 2
    eta_mode: str = "compose"
    perturbations: tuple[PerturbSpec, ...] = ()
    sampling: str = "ods"  # efficiency study: "ods", "random", or "both"
    master_seed: int = 20260808
    bands: dict[str, tuple[float | None, float | None]] = field(default_factory=dict)

    def __post_init__(self):
        if self.study not in (COVERAGE, RATE, EFFICIENCY):
            raise ValueError(f"unknown study {self.study!r}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        sizes = tuple(int(n) for n in self.sample_sizes)
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("sample sizes must be strictly increasing")
        if self.sampling not in ("ods", "random", "both"):
            raise ValueError(f"sampling must be ods/random/both, got {self.sampling!r}")
        if self.nuisance_kind == PERTURBED_ORACLE and not self.perturbations:
            raise ValueError("perturbed_oracle requires a perturbation schedule")

    def nuisance_spec(self) -> NuisanceSpec:
        return NuisanceSpec(
            kind=self.nuisance_kind,
            clip_eps=self.clip_eps,
            ridge=self.ridge,
            eta_mode=self.eta_mode,
        )

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["sample_sizes"] = list(self.sample_sizes)
        doc["perturbations"] = [asdict(p) for p in self.perturbations]
        doc["bands"] = {k: list(v) for k, v in self.bands.items()}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        doc["sample_sizes"] = tuple(int(n) for n in doc.get("sample_sizes", (4000,)))
        doc["perturbations"] = tuple(
            PerturbSpec(**p) for p in doc.get("perturbations", ())
        )
        doc["bands"] = {
            str(k): (v[0], v[1]) for k, v in doc.get("bands", {}).items()
        }
        return cls(**doc)


@dataclass(frozen=True)
class StudyRow:
    study: str
    scenario: str
    n: int
    reps: int
    metric: str
    value: float
    mc_se: float
    band_lo: float | None = None
    band_hi: float | None = None
    passed: bool | None = None


_CSV_HEADER = "study,scenario,n,reps,metric,value,mc_se,band_lo,band_hi,passed"


@dataclass(frozen=True)
class StudyReport:
    config: dict
    rows: tuple[StudyRow, ...]
    failures: tuple[str, ...] = ()

    def all_passed(self) -> bool:
        return all(r.passed is not False for r in self.rows)

    def to_json_obj(self) -> dict:
        return {
            "config": self.config,
            "rows": [
                {
                    "study": r.study,
                    "scenario": r.scenario,
                    "n": r.n,
                    "reps": r.reps,
                    "metric": r.metric,
                    "value": r.value,
                    "mc_se": r.mc_se,
                    "band_lo": r.band_lo,
                    "band_hi": r.band_hi,
                    "passed": r.passed,
                }
                for r in self.rows
            ],
            "failures": list(self.failures),
            "all_passed": self.all_passed(),
        }

    def to_csv_text(self) -> str:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return _jsonio._format_float(v)
            return str(v)

        lines = [_CSV_HEADER]
        for r in self.rows:
            lines.append(
                ",".join(
                    fmt(v)
                    for v in (
                        r.study, r.scenario, r.n, r.reps, r.metric,
                        r.value, r.mc_se, r.band_lo, r.band_hi, r.passed,
                    )
                )
            )
        return "\n".join(lines) + "\n"


def _banded_row(config, bands, n, reps, metric, value, mc_se) -> StudyRow:
    band = bands.get(metric)
    lo, hi = (band if band else (None, None))
    passed = None
    if band:
        passed = (lo is None or value >= lo) and (hi is None or value <= hi)
    return StudyRow(
        study=config.study,
        scenario=config.scenario,
        n=n,
        reps=reps,
        metric=metric,
        value=float(value),
        mc_se=float(mc_se),
        band_lo=lo,
        band_hi=hi,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# replication engine
# ---------------------------------------------------------------------------

def _map_replications(fn, count: int):
    """Run fn(rep) for rep in range(count); results land by index."""
    results = [None] * count
    errors = [None] * count

    def run(rep):
        try:
            results[rep] = fn(rep)
        except Exception as exc:  # recorded, not raised: per-rep failure policy
            errors[rep] = f"rep {rep}: {type(exc).__name__}: {exc}"

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(count)))
    else:
        for rep in range(count):
            run(rep)
    failures = [e for e in errors if e is not None]
    if len(failures) > _MAX_FAILURE_FRACTION * count:
        raise RuntimeError(
            f"{len(failures)} of {count} replications failed; first: {failures[0]}"
        )
    kept = [r for r in results if r is not None]
    return kept, failures


def _fit_with_perturbations(dataset, plan, spec, truth, perturbations, n):
    fits = fit_nuisances(dataset, plan, spec, truth=truth)
    if not perturbations:
        return fits
    out = {}
    for fold, fit in fits.items():
        for pert in perturbations:
            fit = perturb(fit, pert.target, pert.amplitude(n))
        out[fold] = fit
    return out


def _ods_gamma_hat(scenario, config, n, size_idx, rep) -> float:
    """One replication: outcome-dependent draw -> curve value at rho_true."""
    seed = _rep_seed(config.master_seed, size_idx, rep)
    dataset = scenario.draw_ods(n, seed)
    plan = make_folds(n, config.k_folds, seed)
    spec = config.nuisance_spec()
    truth = scenario.truth_ods if spec.kind in (ORACLE, PERTURBED_ORACLE) else None
    fits = _fit_with_perturbations(dataset, plan, spec, truth, config.perturbations, n)
    cells = estimate_cells(dataset, fits, plan)
    return cells.curve_at(scenario.rho_true)


def _rep_seed(master_seed: int, size_idx: int, rep: int) -> int:
    # mixes the key ints into one seed; Philox streams keyed on the tuple
    return (int(master_seed) * 1_000_003 + size_idx) * 1_000_003 + rep


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def run_rate(config: ExperimentConfig) -> StudyReport:
    """RMSE of the curve estimate at rho_true across sample sizes.

    Emits per-size rmse/bias rows, the fitted slope of log RMSE against
    log n, and the bias t-ratio at the largest size (the plateau witness for
    constant perturbations).
    """
    if config.study != RATE:
        raise ValueError("config.study must be 'rate'")
    scenario = make_scenario(config.scenario, config.omega)
    gamma_true = scenario.gamma_at(scenario.rho_true)
    bands = _default_rate_bands(config)

    rows: list[StudyRow] = []
    failures: list[str] = []
    rmses = []
    for size_idx, n in enumerate(config.sample_sizes):
        estimates, errs = _map_replications(
            lambda rep: _ods_gamma_hat(scenario, config, n, size_idx, rep),
            config.replications,
        )
        failures.extend(errs)
        g = np.asarray(estimates)
        reps = g.size
        err = g - gamma_true
        rmse = float(np.sqrt(np.mean(err**2)))
        bias = float(np.mean(err))
        sd = float(np.std(g, ddof=1))
        bias_se = sd / np.sqrt(reps)
        # delta-method MC error of the RMSE estimate
        rmse_se = float(np.std(err**2, ddof=1) / np.sqrt(reps) / (2.0 * rmse))
        rmses.append(rmse)
        rows.append(_banded_row(config, bands, n, reps, "rmse_gamma", rmse, rmse_se))
        rows.append(_banded_row(config, bands, n, reps, "bias_gamma", bias, bias_se))
        # the bias t-ratio band is a plateau witness: only the largest size counts
        t_bands = bands if n == config.sample_sizes[-1] else {}
        rows.append(
            _banded_row(config, t_bands, n, reps, "abs_bias_t", abs(bias) / bias_se, 1.0)
        )

    if len(config.sample_sizes) >= 2:
        logn = np.log(np.asarray(config.sample_sizes, dtype=np.float64))
        logr = np.log(np.asarray(rmses))
        slope = float(np.polyfit(logn, logr, 1)[0])
        rows.append(
            _banded_row(
                config, bands, config.sample_sizes[-1], config.replications,
                "log_rmse_slope", slope, 0.0,
            )
        )
    return StudyReport(config=config.to_dict(), rows=tuple(rows), failures=tuple(failures))


def _default_rate_bands(config: ExperimentConfig) -> dict:
    if config.bands:
        return config.bands
    constant_pert = any(p.exponent == 0.0 for p in config.perturbations)
    if constant_pert:
        # plateauing bias: demand a clearly nonzero bias at the largest size
        return {"abs_bias_t": (5.0, None)}
    return {"log_rmse_slope": (-0.6, -0.4)}


def run_efficiency(config: ExperimentConfig) -> StudyReport:
    """n * var of the estimator across replications vs the closed-form bound."""
    if config.study != EFFICIENCY:
        raise ValueError("config.study must be 'efficiency'")
    scenario = make_scenario(config.scenario, config.omega)
    bands = config.bands or {"n_var_ratio": (0.9, 1.1), "n_var_ratio_rs": (0.9, 1.1)}
    rows: list[StudyRow] = []
    failures: list[str] = []

    for size_idx, n in enumerate(config.sample_sizes):
        if config.sampling in ("ods", "both"):
            sigma2 = scenario.sigma2_at(scenario.rho_true)
            estimates, errs = _map_replications(
                lambda rep: _ods_gamma_hat(scenario, config, n, size_idx, rep),
                config.replications,
            )
            failures.extend(errs)
            rows.extend(_efficiency_rows(config, bands, n, estimates, sigma2, suffix=""))
        if config.sampling in ("random", "both"):
            if scenario.draw_random is None:
                raise ValueError(f"scenario {scenario.name!r} has no random-sampling law")
            sigma2_rs = scenario.sigma2_random

            def rs_rep(rep):
                seed = _rep_seed(config.master_seed, 1000 + size_idx, rep)
                dataset = scenario.draw_random(n, seed)
                plan = make_folds(n, config.k_folds, seed)
                spec = config.nuisance_spec()
                truth = (
                    scenario.truth_random
                    if spec.kind in (ORACLE, PERTURBED_ORACLE)
                    else None
                )
                fits = _fit_with_perturbations(
                    dataset, plan, spec, truth, config.perturbations, n
                )
                return estimate_random_sampling(dataset, fits, plan).gamma

            estimates, errs = _map_replications(rs_rep, config.replications)
            failures.extend(errs)
            rows.extend(
                _efficiency_rows(config, bands, n, estimates, sigma2_rs, suffix="_rs")
            )
    return StudyReport(config=config.to_dict(), rows=tuple(rows), failures=tuple(failures))


def _efficiency_rows(config, bands, n, estimates, sigma2, suffix):
    g = np.asarray(estimates)
    reps = g.size
    nvar = float(n * g.var(ddof=1))
    # MC error of a sample variance via the fourth central moment
    centered = g - g.mean()
    m4 = float(np.mean(centered**4))
    s2 = float(g.var(ddof=1))
    var_of_var = (m4 - (reps - 3) / (reps - 1) * s2 * s2) / reps
    nvar_se = float(n * np.sqrt(max(var_of_var, 0.0)))
    ratio = nvar / sigma2
    return [
        _banded_row(config, bands, n, reps, f"n_var_gamma{suffix}", nvar, nvar_se),
        _banded_row(config, bands, n, reps, f"sigma2_bound{suffix}", sigma2, 0.0),
        _banded_row(config, bands, n, reps, f"n_var_ratio{suffix}", ratio, nvar_se / sigma2),
    ]


def run_coverage(config: ExperimentConfig) -> StudyReport:
    """Coverage of the endpoint interval at rho_true and of the identified set."""
    if config.study != COVERAGE:
        raise ValueError("config.study must be 'coverage'")
    scenario = make_scenario(config.scenario, config.omega)
    rho_true = scenario.rho_true
    rho_low = config.rho_low if config.rho_low is not None else rho_true - 0.05
    rho_high = config.rho_high if config.rho_high is not None else rho_true + 0.05
    if not 0.0 < rho_low <= rho_high < 1.0:
        raise ValueError(f"invalid rho range [{rho_low}, {rho_high}]")
    gamma_true = scenario.gamma_at(rho_true)
    set_lo, set_hi = sorted((scenario.gamma_at(rho_low), scenario.gamma_at(rho_high)))
    bands = config.bands or {"coverage_point": (0.93, 0.97), "coverage_set": (0.93, None)}

    def one_rep(rep):
        n = config.sample_sizes[-1]
        seed = _rep_seed(config.master_seed, 0, rep)
        dataset = scenario.draw_ods(n, seed)
        plan = make_folds(n, config.k_folds, seed)
        spec = config.nuisance_spec()
        truth = scenario.truth_ods if spec.kind in (ORACLE, PERTURBED_ORACLE) else None
        fits = _fit_with_perturbations(dataset, plan, spec, truth, config.perturbations, n)
        rows_nu = row_nuisances(dataset, plan, fits)
        cells = estimate_cells(dataset, fits, plan, rows=rows_nu)
        grid = np.unique(np.array([rho_low, rho_true, rho_high]))
        curve = estimate_curve(cells, grid)
        p_true = pseudo_outcomes(dataset, rows_nu, cells, rho_true, curve.at(rho_true))
        ci = ci_endpoint(p_true, curve.at(rho_true), config.alpha)
        p_lo = pseudo_outcomes(dataset, rows_nu, cells, rho_low, curve.at(rho_low))
        p_hi = pseudo_outcomes(dataset, rows_nu, cells, rho_high, curve.at(rho_high))
        bound = ci_bound(curve, p_lo, p_hi, config.alpha)
        return (
            float(ci.covers(gamma_true)),
            float(bound.covers_set(set_lo, set_hi)),
            ci.hi - ci.lo,
        )

    results, failures = _map_replications(one_rep, config.replications)
    arr = np.asarray(results)
    reps = arr.shape[0]
    n = config.sample_sizes[-1]
    rows = []
    for j, metric in enumerate(("coverage_point", "coverage_set")):
        p = float(arr[:, j].mean())
        se = float(np.sqrt(max(p * (1.0 - p), 1e-12) / reps))
        rows.append(_banded_row(config, bands, n, reps, metric, p, se))
    width = float(arr[:, 2].mean())
    width_se = float(arr[:, 2].std(ddof=1) / np.sqrt(reps))
    rows.append(_banded_row(config, bands, n, reps, "mean_ci_width", width, width_se))
    return StudyReport(config=config.to_dict(), rows=tuple(rows), failures=tuple(failures))


def run_study(config: ExperimentConfig) -> StudyReport:
    return {COVERAGE: run_coverage, RATE: run_rate, EFFICIENCY: run_efficiency}[config.study](
        config
    )
