import numpy as np
import pytest

from godds.dgp import make_dgp, random_dgp, tilt_to_outcome_rate
from godds.oracle import (
    arithmetic_odds_ratio,
    arithmetic_odds_ratio_at,
    cell_score_variance,
    conditional_odds_ratio,
    conditional_odds_ratios,
    efficiency_bound_outcome_dependent,
    efficiency_bound_random_sampling,
    estimand_report,
    exact_cell_means,
    geometric_odds_ratio,
    geometric_odds_ratio_at,
    influence_moments,
    marginal_risk_ratio,
    partial_curve,
    population_odds_ratio,
    population_odds_ratio_at,
    risk_at_outcome_rate,
    risk_difference_bound,
)


def one_stratum(pi1=0.5, r1=0.5, r0=0.5):
    return make_dgp(["only"], [1.0], [pi1], [r1], [r0], eps=1e-3)


# ---------------------------------------------------------------------------
# point-identified estimands on the two-stratum example
# ---------------------------------------------------------------------------

def test_conditional_or_values(we_dgp):
    assert conditional_odds_ratio(we_dgp, "Female") == pytest.approx(1 / 45, abs=1e-12)
    assert conditional_odds_ratio(we_dgp, "Male") == pytest.approx(1 / 45, abs=1e-12)
    with pytest.raises(KeyError):
        conditional_odds_ratio(we_dgp, "Other")


def test_conditional_or_tilt_invariance(we_dgp, we_qlaw):
    for lab in we_dgp.labels:
        assert conditional_odds_ratio(we_qlaw, lab) == pytest.approx(
            conditional_odds_ratio(we_dgp, lab), abs=1e-14
        )


def test_population_or(we_dgp):
    assert population_odds_ratio(we_dgp) == pytest.approx(32 / 945, abs=1e-12)


def test_marginal_rr(we_dgp):
    assert marginal_risk_ratio(we_dgp) == pytest.approx(140 / 1053, abs=1e-12)


def test_aggregated_ors(we_dgp):
    assert arithmetic_odds_ratio(we_dgp) == pytest.approx(1 / 45, abs=1e-12)
    assert geometric_odds_ratio(we_dgp) == pytest.approx(1 / 45, abs=1e-12)


def test_constant_risks_give_unit_or():
    dgp = one_stratum()
    assert population_odds_ratio(dgp) == 1.0
    assert geometric_odds_ratio(dgp) == pytest.approx(1.0, abs=1e-15)


def test_population_or_equals_conditional_when_constant_risks():
    # identical risks across strata: no aggregation effect at all
    dgp = make_dgp(["a", "b"], [0.4, 0.6], [0.5, 0.3], [0.2, 0.2], [0.6, 0.6])
    assert population_odds_ratio(dgp) == pytest.approx(
        conditional_odds_ratio(dgp, "a"), abs=1e-14
    )


def test_geometric_mean_symmetry():
    # conditional odds ratios {2, 1/2} with equal mass average to 1 geometrically
    dgp = make_dgp(
        ["a", "b"], [0.5, 0.5], [0.5, 0.5],
        nu1=[0.5, 0.2], nu0=[1 / 3, 1 / 3],
    )
    ors = conditional_odds_ratios(dgp)
    assert ors["a"] == pytest.approx(2.0, abs=1e-12)
    assert ors["b"] == pytest.approx(0.5, abs=1e-12)
    assert geometric_odds_ratio(dgp) == pytest.approx(1.0, abs=1e-12)
    assert arithmetic_odds_ratio(dgp) == pytest.approx(1.25, abs=1e-12)


# ---------------------------------------------------------------------------
# partial identification
# ---------------------------------------------------------------------------

def test_risk_at_outcome_rate_recovers_truth(we_dgp, we_qlaw):
    for k, lab in enumerate(we_dgp.labels):
        assert risk_at_outcome_rate(we_qlaw, we_dgp.rho, lab, 1) == pytest.approx(
            we_dgp.nu1[k], abs=1e-14
        )
        assert risk_at_outcome_rate(we_qlaw, we_dgp.rho, lab, 0) == pytest.approx(
            we_dgp.nu0[k], abs=1e-14
        )


def test_risk_at_sampled_rate_gives_sampled_risk(we_qlaw):
    # evaluating at the sampled outcome rate returns the sampled-law risks
    for k, lab in enumerate(we_qlaw.labels):
        assert risk_at_outcome_rate(we_qlaw, we_qlaw.omega, lab, 1) == pytest.approx(
            we_qlaw.mu1[k], abs=1e-14
        )


def test_risk_boundary_warns(we_qlaw):
    with pytest.warns(RuntimeWarning, match="boundary"):
        assert risk_at_outcome_rate(we_qlaw, 1.0, "Female", 1) == 1.0
    with pytest.warns(RuntimeWarning, match="boundary"):
        assert risk_at_outcome_rate(we_qlaw, 0.0, "Female", 1) == 0.0


def test_partial_identities_on_worked_example(we_dgp, we_qlaw):
    rho = we_dgp.rho
    assert geometric_odds_ratio_at(we_qlaw, rho) == pytest.approx(1 / 45, abs=1e-12)
    assert arithmetic_odds_ratio_at(we_qlaw, rho) == pytest.approx(1 / 45, abs=1e-12)
    assert population_odds_ratio_at(we_qlaw, rho) == pytest.approx(32 / 945, abs=1e-12)


def test_partial_identities_random_laws(rng):
    """Tilting then evaluating at the true rate reproduces the untilted values."""
    for _ in range(10):
        dgp = random_dgp(rng)
        for omega in (0.3, 0.5, 0.7):
            q = tilt_to_outcome_rate(dgp, omega)
            assert geometric_odds_ratio_at(q, dgp.rho) == pytest.approx(
                geometric_odds_ratio(dgp), abs=1e-12
            )
            assert arithmetic_odds_ratio_at(q, dgp.rho) == pytest.approx(
                arithmetic_odds_ratio(dgp), abs=1e-12
            )
            assert population_odds_ratio_at(q, dgp.rho) == pytest.approx(
                population_odds_ratio(dgp), abs=1e-12
            )


def test_arithmetic_partial_endpoints(het3_qlaw):
    # rho = 1 reduces to the case-class mean of the conditional odds ratios
    ors = conditional_odds_ratios(het3_qlaw)
    q_cells = het3_qlaw.joint_cells()
    w = {
        lab: sum(
            v for (k, a, y), v in q_cells.items() if y == 1 and k == i
        ) / het3_qlaw.omega
        for i, lab in enumerate(het3_qlaw.labels)
    }
    expected = sum(w[lab] * ors[lab] for lab in het3_qlaw.labels)
    assert arithmetic_odds_ratio_at(het3_qlaw, 1.0) == pytest.approx(expected, abs=1e-12)


def test_cell_means_zero_for_symmetric_risks():
    dgp = one_stratum()
    q = tilt_to_outcome_rate(dgp, 0.5)
    cells = exact_cell_means(q)
    for v in cells.values():
        assert v == pytest.approx(0.0, abs=1e-14)


def test_cell_means_differ_across_outcome_classes(het3_qlaw):
    cells = exact_cell_means(het3_qlaw)
    assert abs(cells[(1, 1)] - cells[(1, 0)]) > 1e-3


def test_partial_curve_log_affine(het3_qlaw):
    grid = np.linspace(0.1, 0.9, 33)
    curve = partial_curve(het3_qlaw, grid)
    logs = np.log(curve.geometric)
    fitted = curve.log_intercept + grid * curve.log_slope
    assert np.max(np.abs(logs - fitted)) < 1e-10
    cells = exact_cell_means(het3_qlaw)
    slope = (cells[(1, 1)] - cells[(0, 1)]) - (cells[(1, 0)] - cells[(0, 0)])
    assert curve.log_slope == pytest.approx(slope, abs=1e-12)


def test_partial_curve_validation(het3_qlaw):
    with pytest.raises(ValueError, match="sorted"):
        partial_curve(het3_qlaw, [0.5, 0.3])
    with pytest.raises(ValueError, match="inside"):
        partial_curve(het3_qlaw, [0.0, 0.5])


# ---------------------------------------------------------------------------
# efficiency bounds
# ---------------------------------------------------------------------------

def test_influence_mean_zero_and_bound_match(we_qlaw, we_dgp, het3_qlaw, het3):
    for qlaw, rho in ((we_qlaw, we_dgp.rho), (het3_qlaw, het3.rho), (het3_qlaw, 0.3)):
        mean, var = influence_moments(qlaw, rho)
        assert abs(mean) < 1e-12
        closed = efficiency_bound_outcome_dependent(qlaw, rho)
        assert var == pytest.approx(closed, abs=1e-12)


def test_bound_match_random_laws(rng):
    for _ in range(5):
        dgp = random_dgp(rng, n_strata=3)
        q = tilt_to_outcome_rate(dgp, 0.4)
        mean, var = influence_moments(q, dgp.rho)
        assert abs(mean) < 1e-12
        assert var == pytest.approx(
            efficiency_bound_outcome_dependent(q, dgp.rho), rel=1e-12
        )


def test_sampling_correction_collapses_at_design_rate(we_qlaw):
    """At rho = omega the correction coefficient is 1 for every stratum."""
    omega = we_qlaw.omega
    rho = omega
    coef = (rho - omega) / (omega * (1 - omega)) * we_qlaw.eta + (1 - rho) / (1 - omega)
    assert np.allclose(coef, 1.0, atol=1e-15)


def test_constant_or_kills_heterogeneity_terms(we_qlaw):
    """Constant conditional odds ratio: corrected terms cancel exactly.

    The conditional and aggregate corrected log odds ratios coincide, so the
    bound reduces to the pure augmentation term.
    """
    rho = 0.37
    omega = we_qlaw.omega
    cells = exact_cell_means(we_qlaw)
    lor = (np.log(we_qlaw.mu1) - np.log1p(-we_qlaw.mu1)) - (
        np.log(we_qlaw.mu0) - np.log1p(-we_qlaw.mu0)
    )
    assert np.ptp(lor) < 1e-13  # constant log odds ratio across strata
    d1 = cells[(1, 1)] - cells[(0, 1)]
    d0 = cells[(1, 0)] - cells[(0, 0)]
    assert d1 == pytest.approx(d0, abs=1e-13)
    gamma = geometric_odds_ratio_at(we_qlaw, rho)
    coef = (rho - omega) / (omega * (1 - omega)) * we_qlaw.eta + (1 - rho) / (1 - omega)
    inv = 1.0 / (we_qlaw.pi1 * we_qlaw.mu1 * (1 - we_qlaw.mu1)) + 1.0 / (
        (1 - we_qlaw.pi1) * we_qlaw.mu0 * (1 - we_qlaw.mu0)
    )
    aug_only = gamma**2 * float(we_qlaw.q_x @ (inv * coef**2))
    assert efficiency_bound_outcome_dependent(we_qlaw, rho) == pytest.approx(
        aug_only, rel=1e-10
    )


def test_random_sampling_bound_hand_value():
    dgp = one_stratum(pi1=0.5, r1=0.5, r0=0.5)
    assert efficiency_bound_random_sampling(dgp) == pytest.approx(16.0, abs=1e-12)


def test_random_sampling_bound_constant_or_drops_heterogeneity(we_dgp):
    # constant conditional odds ratio: only the inverse-variance term remains
    gamma = geometric_odds_ratio(we_dgp)
    inv = 1.0 / (we_dgp.pi1 * we_dgp.nu1 * (1 - we_dgp.nu1)) + 1.0 / (
        (1 - we_dgp.pi1) * we_dgp.nu0 * (1 - we_dgp.nu0)
    )
    expected = gamma**2 * float(we_dgp.p_x @ inv)
    assert efficiency_bound_random_sampling(we_dgp) == pytest.approx(expected, rel=1e-12)


def test_risk_difference_bound_hand_value():
    dgp = one_stratum(pi1=0.5, r1=0.5, r0=0.5)
    assert risk_difference_bound(dgp) == pytest.approx(1.0, abs=1e-12)


def test_bound_directions_with_outcome_variance():
    """Shrinking outcome variance helps the risk difference, hurts the odds ratio.

    Both arms share the same near-deterministic risk so the odds-ratio target
    stays at 1 while the outcome variance goes to zero.
    """
    prev_rd, prev_rs = None, None
    for eps in (0.1, 0.01):
        dgp = one_stratum(pi1=0.5, r1=eps, r0=eps)
        rd = risk_difference_bound(dgp)
        rs = efficiency_bound_random_sampling(dgp)
        if prev_rd is not None:
            assert rd < prev_rd  # risk-difference bound falls
            assert rs > prev_rs  # odds-ratio bound rises
        prev_rd, prev_rs = rd, rs


def test_bound_positivity(rng):
    for _ in range(10):
        dgp = random_dgp(rng)
        q = tilt_to_outcome_rate(dgp, 0.5)
        assert efficiency_bound_outcome_dependent(q, dgp.rho) > 0
        assert efficiency_bound_random_sampling(dgp) > 0


def test_bound_rejects_boundary_rho(we_qlaw):
    with pytest.raises(ValueError, match="rho"):
        efficiency_bound_outcome_dependent(we_qlaw, 0.0)
    with pytest.raises(ValueError, match="rho"):
        influence_moments(we_qlaw, 1.0)


def test_cell_score_variance_positive(we_qlaw):
    for arm in (0, 1):
        for outcome in (0, 1):
            assert cell_score_variance(we_qlaw, arm, outcome) > 0


def test_estimand_report(we_dgp):
    rep = estimand_report(we_dgp)
    assert rep.geometric == pytest.approx(1 / 45, abs=1e-12)
    assert rep.population == pytest.approx(32 / 945, abs=1e-12)
    assert rep.rho == pytest.approx(1193 / 2730, abs=1e-14)
