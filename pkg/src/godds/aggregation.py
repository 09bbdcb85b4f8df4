"""Arithmetic and geometric aggregation of conditional effects.

The point of this module is the collapsibility check: the marginal odds ratio
built from geometrically aggregated per-arm odds always equals the geometric
mean of the conditional odds ratios, while the ordinary (arithmetic) marginal
odds ratio generally does not equal any weighted mean of the conditionals.
The risk ratio is collapsible arithmetically once the weights are tilted by
the control-arm risk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import mpmath as mp

from .dgp import DiscreteDGP
from .oracle import (
    _DPS,
    _exact,
    _logit,
    _mpf,
    arithmetic_odds_ratio,
    geometric_odds_ratio,
    marginal_risk_ratio,
    population_odds_ratio,
)

ARITHMETIC = "arithmetic"
GEOMETRIC = "geometric"
_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class AggregationSpec:
    kind: str
    weights: dict[str, float]

    def __post_init__(self):
        if self.kind not in (ARITHMETIC, GEOMETRIC):
            raise ValueError(f"kind must be {ARITHMETIC!r} or {GEOMETRIC!r}, got {self.kind!r}")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights.values()) - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1, got {sum(self.weights.values())!r}")


def aggregate(values: Mapping[str, float], spec: AggregationSpec) -> float:
    """Weighted arithmetic or geometric mean of per-stratum values."""
    missing = set(spec.weights) - set(values)
    if missing:
        raise KeyError(f"values missing for strata {sorted(missing)}")
    if spec.kind == ARITHMETIC:
        return float(sum(spec.weights[s] * values[s] for s in spec.weights))
    if any(values[s] <= 0 for s in spec.weights):
        raise ValueError("geometric aggregation requires strictly positive values")
    with mp.workdps(_DPS):
        acc = mp.mpf(0)
        for s in spec.weights:
            acc += _mpf(Fraction(float(spec.weights[s]))) * mp.log(_mpf(Fraction(float(values[s]))))
        return float(mp.exp(acc))


def marginal_odds_geometric(dgp: DiscreteDGP, arm: int) -> float:
    """Geometrically aggregated marginal odds of the outcome under one arm."""
    if arm not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {arm}")
    ex = _exact(dgp)
    with mp.workdps(_DPS):
        acc = mp.mpf(0)
        for k in range(ex.k):
            risk = ex.risk(k, arm)
            if risk in (0, 1):
                raise ValueError(f"degenerate risk in stratum {ex.labels[k]!r}")
            acc += _mpf(ex.mass[k]) * _logit(_mpf(risk))
        return float(mp.exp(acc))


def collapsibility_residuals(dgp: DiscreteDGP) -> dict[str, float]:
    """Residuals of three marginal-vs-aggregated identities.

    ``geometric_residual`` compares the log marginal odds ratio under
    geometric per-arm aggregation with the log geometric-mean conditional
    odds ratio; it is an algebraic identity and should vanish.

    ``arithmetic_residual`` is |population OR - arithmetic mean OR|, a
    diagnostic that is typically far from zero even with a constant
    conditional odds ratio.

    ``rr_residual`` checks that the marginal risk ratio equals the
    conditional risk ratios averaged with weights proportional to stratum
    mass times control-arm risk; also an identity.
    """
    ex = _exact(dgp)
    # two independent float routes to the same identity
    marg = marginal_odds_geometric(dgp, 1) / marginal_odds_geometric(dgp, 0)
    geometric_residual = abs(math.log(marg) - math.log(geometric_odds_ratio(dgp)))

    arithmetic_residual = abs(population_odds_ratio(dgp) - arithmetic_odds_ratio(dgp))

    # risk-ratio collapsibility with weights mass * control risk / E[control risk]
    e0 = sum(ex.mass[k] * ex.risk0[k] for k in range(ex.k))
    weighted_rr = sum(
        (ex.mass[k] * ex.risk0[k] / e0) * (ex.risk1[k] / ex.risk0[k]) for k in range(ex.k)
    )
    rr_residual = abs(float(weighted_rr) - marginal_risk_ratio(dgp))

    return {
        "geometric_residual": geometric_residual,
        "arithmetic_residual": arithmetic_residual,
        "rr_residual": rr_residual,
    }
