"""Exact desk-scale computation of estimands and efficiency bounds.

Everything here operates on finite-support laws. Probability-mass algebra is
carried in exact rationals (floats convert losslessly), and the log/exp steps
run at 50 significant digits, so returned floats are correctly rounded values
of the exact quantities. These functions are the ground truth that the
sample-based estimators are tested against, including a brute-force
enumeration of the influence function that independently cross-checks the
closed-form variance bound.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath as mp
import numpy as np

from .dgp import DiscreteDGP, QLaw

_DPS = 50

Cell = tuple[int, int]  # (arm a, outcome class y)
CELLS: tuple[Cell, ...] = ((0, 0), (0, 1), (1, 0), (1, 1))


def _mpf(x: Fraction | float | int) -> mp.mpf:
    if isinstance(x, Fraction):
        return mp.mpf(x.numerator) / mp.mpf(x.denominator)
    return mp.mpf(x)


def _logit(p: mp.mpf) -> mp.mpf:
    return mp.log(p) - mp.log(1 - p)


def _odds(p: Fraction) -> Fraction:
    return p / (1 - p)


@dataclass(frozen=True)
class _ExactLaw:
    """Rational-arithmetic view of a finite law.

    ``risk1``/``risk0`` are the per-stratum outcome risks of the law itself:
    nu for a target-population law and mu for a sampled (tilted) law.
    """

    labels: tuple[str, ...]
    mass: tuple[Fraction, ...]
    pi1: tuple[Fraction, ...]
    risk1: tuple[Fraction, ...]
    risk0: tuple[Fraction, ...]
    omega: Fraction | None = None  # sampled outcome rate, Q laws only
    rho: Fraction | None = None    # source target rate, Q laws only

    @property
    def k(self) -> int:
        return len(self.labels)

    def risk(self, k: int, a: int) -> Fraction:
        return self.risk1[k] if a == 1 else self.risk0[k]

    def pi(self, k: int, a: int) -> Fraction:
        return self.pi1[k] if a == 1 else 1 - self.pi1[k]

    def eta(self, k: int) -> Fraction:
        return self.pi1[k] * self.risk1[k] + (1 - self.pi1[k]) * self.risk0[k]

    def joint(self, k: int, a: int, y: int) -> Fraction:
        risk = self.risk(k, a)
        return self.mass[k] * self.pi(k, a) * (risk if y == 1 else 1 - risk)

    def mass_y(self, y: int) -> Fraction:
        return sum(self.joint(k, a, y) for k in range(self.k) for a in (0, 1))

    def x_given_y(self, k: int, y: int) -> Fraction:
        return (self.joint(k, 0, y) + self.joint(k, 1, y)) / self.mass_y(y)

    def ax_given_y(self, k: int, a: int, y: int) -> Fraction:
        return self.joint(k, a, y) / self.mass_y(y)


def _exact(law: DiscreteDGP | QLaw) -> _ExactLaw:
    if isinstance(law, DiscreteDGP):
        return _ExactLaw(
            labels=law.labels,
            mass=tuple(Fraction(float(v)) for v in law.p_x),
            pi1=tuple(Fraction(float(v)) for v in law.pi1),
            risk1=tuple(Fraction(float(v)) for v in law.nu1),
            risk0=tuple(Fraction(float(v)) for v in law.nu0),
        )
    if isinstance(law, QLaw):
        return _ExactLaw(
            labels=law.labels,
            mass=tuple(Fraction(float(v)) for v in law.q_x),
            pi1=tuple(Fraction(float(v)) for v in law.pi1),
            risk1=tuple(Fraction(float(v)) for v in law.mu1),
            risk0=tuple(Fraction(float(v)) for v in law.mu0),
            omega=Fraction(float(law.omega)),
            rho=Fraction(float(law.rho)),
        )
    raise TypeError(f"expected DiscreteDGP or QLaw, got {type(law).__name__}")


def _require_q(law: _ExactLaw, op: str) -> None:
    if law.omega is None:
        raise TypeError(f"{op} requires a sampled (tilted) law")


def _check_risks_interior(law: _ExactLaw) -> None:
    for k in range(law.k):
        for a in (0, 1):
            if law.risk(k, a) in (0, 1):
                raise ValueError(f"degenerate outcome risk in stratum {law.labels[k]!r}, arm {a}")


# ---------------------------------------------------------------------------
# point-identified estimands
# ---------------------------------------------------------------------------

def conditional_odds_ratio(law: DiscreteDGP | QLaw, stratum: str | int) -> float:
    """Within-stratum odds ratio; invariant to outcome-dependent tilting."""
    ex = _exact(law)
    k = law.index_of(stratum)
    if ex.risk(k, 1) in (0, 1) or ex.risk(k, 0) in (0, 1):
        raise ValueError(f"degenerate risk in stratum {law.labels[k]!r}")
    return float(_odds(ex.risk(k, 1)) / _odds(ex.risk(k, 0)))


def conditional_odds_ratios(law: DiscreteDGP | QLaw) -> dict[str, float]:
    return {lab: conditional_odds_ratio(law, lab) for lab in law.labels}


def marginal_risk(dgp: DiscreteDGP, arm: int) -> float:
    """Population mean outcome risk under assigning everyone arm ``arm``."""
    ex = _exact(dgp)
    return float(sum(ex.mass[k] * ex.risk(k, arm) for k in range(ex.k)))


def population_odds_ratio(dgp: DiscreteDGP) -> float:
    """Ratio of marginal odds: odds(E[risk1]) / odds(E[risk0])."""
    ex = _exact(dgp)
    r1 = sum(ex.mass[k] * ex.risk1[k] for k in range(ex.k))
    r0 = sum(ex.mass[k] * ex.risk0[k] for k in range(ex.k))
    if r1 in (0, 1) or r0 in (0, 1):
        raise ValueError("marginal risks are degenerate")
    return float(_odds(r1) / _odds(r0))


def marginal_risk_ratio(dgp: DiscreteDGP) -> float:
    ex = _exact(dgp)
    r1 = sum(ex.mass[k] * ex.risk1[k] for k in range(ex.k))
    r0 = sum(ex.mass[k] * ex.risk0[k] for k in range(ex.k))
    if r0 == 0:
        raise ValueError("control marginal risk is zero")
    return float(r1 / r0)


def arithmetic_odds_ratio(dgp: DiscreteDGP) -> float:
    """Mass-weighted arithmetic mean of the conditional odds ratios."""
    ex = _exact(dgp)
    _check_risks_interior(ex)
    return float(
        sum(ex.mass[k] * _odds(ex.risk1[k]) / _odds(ex.risk0[k]) for k in range(ex.k))
    )


def geometric_odds_ratio(dgp: DiscreteDGP) -> float:
    """Mass-weighted geometric mean of the conditional odds ratios."""
    ex = _exact(dgp)
    _check_risks_interior(ex)
    with mp.workdps(_DPS):
        acc = mp.mpf(0)
        for k in range(ex.k):
            acc += _mpf(ex.mass[k]) * mp.log(_mpf(_odds(ex.risk1[k]) / _odds(ex.risk0[k])))
        return float(mp.exp(acc))


# ---------------------------------------------------------------------------
# partially identified estimands on the sampled law
# ---------------------------------------------------------------------------

def risk_at_outcome_rate(qlaw: QLaw, rho: float, stratum: str | int, arm: int) -> float:
    """Target-population risk for (stratum, arm) at a posited outcome rate.

    Reweights the outcome-class conditionals of the sampled law back to a
    target whose outcome rate is ``rho``. At the boundary values 0 and 1 the
    algebraic limit (0 or 1) is returned with a warning.
    """
    ex = _exact(qlaw)
    k = qlaw.index_of(stratum)
    if arm not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {arm}")
    if rho in (0.0, 1.0):
        warnings.warn(
            f"outcome rate {rho} is a degenerate boundary; returning the algebraic limit",
            RuntimeWarning,
            stacklevel=2,
        )
        return float(rho)
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    r = Fraction(float(rho))
    q1 = ex.ax_given_y(k, arm, 1)
    q0 = ex.ax_given_y(k, arm, 0)
    denom = q1 * r + q0 * (1 - r)
    if denom == 0:
        raise ValueError(f"cell (stratum {qlaw.labels[k]!r}, arm {arm}) is unreachable")
    return float(q1 * r / denom)


def population_odds_ratio_at(qlaw: QLaw, rho: float) -> float:
    """Population odds ratio of the target implied by outcome rate ``rho``."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    ex = _exact(qlaw)
    r = Fraction(float(rho))
    marg = {}
    for arm in (0, 1):
        num = Fraction(0)
        for y in (1, 0):
            wy = r if y == 1 else 1 - r
            for k in range(ex.k):
                q1 = ex.ax_given_y(k, arm, 1)
                q0 = ex.ax_given_y(k, arm, 0)
                denom = q1 * r + q0 * (1 - r)
                if denom == 0:
                    continue  # stratum/arm cell carries no mass in either class
                nu = q1 * r / denom
                num += wy * ex.x_given_y(k, y) * nu
        marg[arm] = num
    if marg[1] in (0, 1) or marg[0] in (0, 1):
        raise ValueError("implied marginal risks are degenerate")
    return float(_odds(marg[1]) / _odds(marg[0]))


def arithmetic_odds_ratio_at(qlaw: QLaw, rho: float) -> float:
    """Arithmetic-mean odds ratio of the target implied by outcome rate ``rho``.

    Equals rho * E[OR(X) | Y=1] + (1-rho) * E[OR(X) | Y=0] under the sampled
    law; the boundary values 0 and 1 give the pure outcome-class means.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    ex = _exact(qlaw)
    _check_risks_interior(ex)
    r = Fraction(float(rho))
    total = Fraction(0)
    for y in (1, 0):
        wy = r if y == 1 else 1 - r
        if wy == 0:
            continue
        total += wy * sum(
            ex.x_given_y(k, y) * _odds(ex.risk1[k]) / _odds(ex.risk0[k]) for k in range(ex.k)
        )
    return float(total)


def mean_logit_risk(qlaw: QLaw, arm: int, outcome: int) -> float:
    """Mean of logit(sampled risk in ``arm``) over the outcome class ``outcome``.

    These four (arm, outcome) cell values are the sufficient summary for the
    geometric odds-ratio curve: the log curve is affine in the posited
    outcome rate with slope and intercept built from their differences.
    """
    if arm not in (0, 1) or outcome not in (0, 1):
        raise ValueError("arm and outcome must be 0 or 1")
    ex = _exact(qlaw)
    _check_risks_interior(ex)
    with mp.workdps(_DPS):
        acc = mp.mpf(0)
        for k in range(ex.k):
            acc += _mpf(ex.x_given_y(k, outcome)) * _logit(_mpf(ex.risk(k, arm)))
        return float(acc)


def _psi_mp(ex: _ExactLaw) -> dict[Cell, mp.mpf]:
    """All four mean-logit-risk cells at working precision."""
    out: dict[Cell, mp.mpf] = {}
    for a, y in CELLS:
        acc = mp.mpf(0)
        for k in range(ex.k):
            acc += _mpf(ex.x_given_y(k, y)) * _logit(_mpf(ex.risk(k, a)))
        out[(a, y)] = acc
    return out


def exact_cell_means(qlaw: QLaw) -> dict[Cell, float]:
    """The four mean-logit-risk cells keyed by (arm, outcome)."""
    ex = _exact(qlaw)
    _check_risks_interior(ex)
    with mp.workdps(_DPS):
        return {cell: float(v) for cell, v in _psi_mp(ex).items()}


def _log_curve_mp(psi: Mapping[Cell, mp.mpf], rho: mp.mpf) -> mp.mpf:
    d1 = psi[(1, 1)] - psi[(0, 1)]
    d0 = psi[(1, 0)] - psi[(0, 0)]
    return rho * d1 + (1 - rho) * d0


def geometric_odds_ratio_at(qlaw: QLaw, rho: float) -> float:
    """Geometric-mean odds ratio of the target implied by outcome rate ``rho``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    ex = _exact(qlaw)
    _check_risks_interior(ex)
    with mp.workdps(_DPS):
        return float(mp.exp(_log_curve_mp(_psi_mp(ex), _mpf(Fraction(float(rho))))))


@dataclass(frozen=True)
class PartialCurve:
    """Estimand values over a grid of posited outcome rates."""

    rho_grid: np.ndarray
    geometric: np.ndarray
    arithmetic: np.ndarray
    population: np.ndarray
    log_slope: float
    log_intercept: float

    def __post_init__(self):
        for arr in (self.rho_grid, self.geometric, self.arithmetic, self.population):
            arr.setflags(write=False)


def partial_curve(qlaw: QLaw, rho_grid: Sequence[float]) -> PartialCurve:
    grid = np.asarray(rho_grid, dtype=np.float64)
    if grid.size == 0 or np.any(grid <= 0.0) or np.any(grid >= 1.0):
        raise ValueError("rho grid must be nonempty and inside (0, 1)")
    if np.any(np.diff(grid) < 0):
        raise ValueError("rho grid must be sorted ascending")
    ex = _exact(qlaw)
    _check_risks_interior(ex)
    with mp.workdps(_DPS):
        psi = _psi_mp(ex)
        d1 = psi[(1, 1)] - psi[(0, 1)]
        d0 = psi[(1, 0)] - psi[(0, 0)]
        geo = np.array([float(mp.exp(_log_curve_mp(psi, _mpf(Fraction(float(r)))))) for r in grid])
    ari = np.array([arithmetic_odds_ratio_at(qlaw, float(r)) for r in grid])
    pop = np.array([population_odds_ratio_at(qlaw, float(r)) for r in grid])
    return PartialCurve(
        rho_grid=grid,
        geometric=geo,
        arithmetic=ari,
        population=pop,
        log_slope=float(d1 - d0),
        log_intercept=float(d0),
    )


# ---------------------------------------------------------------------------
# influence function and efficiency bounds
# ---------------------------------------------------------------------------

def _centered_score_mp(
    ex: _ExactLaw,
    psi: Mapping[Cell, mp.mpf],
    omega: mp.mpf,
    k: int,
    a_obs: int,
    y_obs: int,
    a: int,
    y: int,
) -> mp.mpf:
    """Centered per-observation score for cell (a, y) at support point (k, a_obs, y_obs)."""
    wy = omega if y == 1 else 1 - omega
    eta = _mpf(ex.eta(k))
    eta_y = eta if y == 1 else 1 - eta
    mua = _mpf(ex.risk(k, a))
    pia = _mpf(ex.pi(k, a))
    ind_y = mp.mpf(1 if y_obs == y else 0)
    ind_a = mp.mpf(1 if a_obs == a else 0)
    reg = _logit(mua) * ind_y / wy
    aug = (eta_y / wy) * ind_a * (y_obs - mua) / (pia * mua * (1 - mua))
    return reg + aug - psi[(a, y)] * ind_y / wy


def influence_moments(qlaw: QLaw, rho: float) -> tuple[float, float]:
    """Brute-force mean and variance of the influence function over all cells.

    Enumerates every (stratum, arm, outcome) support point of the sampled law
    and accumulates exact moments of the estimator's influence function. The
    mean must vanish; the variance independently reproduces the closed-form
    efficiency bound.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    ex = _exact(qlaw)
    _require_q(ex, "influence_moments")
    _check_risks_interior(ex)
    with mp.workdps(_DPS):
        psi = _psi_mp(ex)
        r = _mpf(Fraction(float(rho)))
        om = _mpf(ex.omega)
        gamma = mp.exp(_log_curve_mp(psi, r))
        m1 = mp.mpf(0)
        m2 = mp.mpf(0)
        for k in range(ex.k):
            for a_obs in (0, 1):
                for y_obs in (0, 1):
                    w = _mpf(ex.joint(k, a_obs, y_obs))
                    if w == 0:
                        continue
                    sc = lambda a, y: _centered_score_mp(ex, psi, om, k, a_obs, y_obs, a, y)
                    if_log = r * (sc(1, 1) - sc(0, 1)) + (1 - r) * (sc(1, 0) - sc(0, 0))
                    val = gamma * if_log
                    m1 += w * val
                    m2 += w * val * val
        return float(m1), float(m2 - m1 * m1)


def efficiency_bound_outcome_dependent(qlaw: QLaw, rho: float) -> float:
    """Closed-form variance bound for the geometric odds ratio at rate ``rho``.

    The bound is gamma^2 times the sum of (i) the variance of the
    distribution-corrected log conditional odds ratio, (ii) the variance of
    its aggregate counterpart minus twice their covariance (the price of
    estimating the sampled outcome rate), and (iii) the inverse-variance
    augmentation term scaled by the squared sampling-correction coefficient,
    which degenerates to 1 when ``rho`` equals the sampled rate.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    ex = _exact(qlaw)
    _require_q(ex, "efficiency_bound_outcome_dependent")
    _check_risks_interior(ex)
    with mp.workdps(_DPS):
        psi = _psi_mp(ex)
        r = _mpf(Fraction(float(rho)))
        om = _mpf(ex.omega)
        gamma = mp.exp(_log_curve_mp(psi, r))
        d1 = psi[(1, 1)] - psi[(0, 1)]
        d0 = psi[(1, 0)] - psi[(0, 0)]

        e_c = mp.mpf(0)
        e_c2 = mp.mpf(0)
        e_s = mp.mpf(0)
        e_s2 = mp.mpf(0)
        e_cs = mp.mpf(0)
        e_corr = mp.mpf(0)
        for k in range(ex.k):
            mu1 = _mpf(ex.risk1[k])
            mu0 = _mpf(ex.risk0[k])
            pi1 = _mpf(ex.pi1[k])
            eta = _mpf(ex.eta(k))
            lor = _logit(mu1) - _logit(mu0)
            qx = _mpf(ex.mass[k])
            for y in (0, 1):
                w = qx * (eta if y == 1 else 1 - eta)  # Q(X=x, Y=y)
                cy = (r / om) if y == 1 else ((1 - r) / (1 - om))
                cond = cy * lor
                agg = cy * (d1 if y == 1 else d0)
                e_c += w * cond
                e_c2 += w * cond * cond
                e_s += w * agg
                e_s2 += w * agg * agg
                e_cs += w * cond * agg
            coef = (r - om) / (om * (1 - om)) * eta + (1 - r) / (1 - om)
            inv = 1 / (pi1 * mu1 * (1 - mu1)) + 1 / ((1 - pi1) * mu0 * (1 - mu0))
            e_corr += qx * inv * coef * coef

        var_cond = e_c2 - e_c * e_c
        var_agg = e_s2 - e_s * e_s
        cov = e_cs - e_c * e_s
        return float(gamma * gamma * (var_cond + var_agg - 2 * cov + e_corr))


def efficiency_bound_random_sampling(dgp: DiscreteDGP) -> float:
    """Variance bound for the geometric odds ratio under random sampling."""
    ex = _exact(dgp)
    _check_risks_interior(ex)
    with mp.workdps(_DPS):
        log_g = mp.mpf(0)
        for k in range(ex.k):
            log_g += _mpf(ex.mass[k]) * (_logit(_mpf(ex.risk1[k])) - _logit(_mpf(ex.risk0[k])))
        total = mp.mpf(0)
        for k in range(ex.k):
            mu1 = _mpf(ex.risk1[k])
            mu0 = _mpf(ex.risk0[k])
            pi1 = _mpf(ex.pi1[k])
            lor = _logit(mu1) - _logit(mu0)
            total += _mpf(ex.mass[k]) * (
                1 / (pi1 * mu1 * (1 - mu1))
                + 1 / ((1 - pi1) * mu0 * (1 - mu0))
                + (lor - log_g) ** 2
            )
        return float(mp.exp(2 * log_g) * total)


def risk_difference_bound(dgp: DiscreteDGP) -> float:
    """Variance bound for the average risk difference (contrast diagnostic).

    Unlike the odds-ratio bounds, this one shrinks as the outcome variances
    mu_a(1-mu_a) shrink; it exists here only to document that contrast.
    """
    ex = _exact(dgp)
    with mp.workdps(_DPS):
        ate = mp.mpf(0)
        for k in range(ex.k):
            ate += _mpf(ex.mass[k]) * (_mpf(ex.risk1[k]) - _mpf(ex.risk0[k]))
        total = mp.mpf(0)
        for k in range(ex.k):
            mu1 = _mpf(ex.risk1[k])
            mu0 = _mpf(ex.risk0[k])
            pi1 = _mpf(ex.pi1[k])
            total += _mpf(ex.mass[k]) * (
                mu1 * (1 - mu1) / pi1
                + mu0 * (1 - mu0) / (1 - pi1)
                + (mu1 - mu0 - ate) ** 2
            )
        return float(total)


def cell_score_variance(qlaw: QLaw, arm: int, outcome: int) -> float:
    """Exact variance of the centered per-cell score (one (a, y) cell alone)."""
    ex = _exact(qlaw)
    _require_q(ex, "cell_score_variance")
    _check_risks_interior(ex)
    with mp.workdps(_DPS):
        psi = _psi_mp(ex)
        om = _mpf(ex.omega)
        m1 = mp.mpf(0)
        m2 = mp.mpf(0)
        for k in range(ex.k):
            for a_obs in (0, 1):
                for y_obs in (0, 1):
                    w = _mpf(ex.joint(k, a_obs, y_obs))
                    val = _centered_score_mp(ex, psi, om, k, a_obs, y_obs, arm, outcome)
                    m1 += w * val
                    m2 += w * val * val
        return float(m2 - m1 * m1)


# ---------------------------------------------------------------------------
# report bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimandReport:
    """All point-identified estimands of a target law."""

    conditional: dict[str, float]
    population: float
    arithmetic: float
    geometric: float
    marginal_rr: float
    rho: float

    def __post_init__(self):
        if self.geometric <= 0 or any(v <= 0 for v in self.conditional.values()):
            raise ValueError("odds ratios must be positive")


def estimand_report(dgp: DiscreteDGP) -> EstimandReport:
    return EstimandReport(
        conditional=conditional_odds_ratios(dgp),
        population=population_odds_ratio(dgp),
        arithmetic=arithmetic_odds_ratio(dgp),
        geometric=geometric_odds_ratio(dgp),
        marginal_rr=marginal_risk_ratio(dgp),
        rho=dgp.rho,
    )
