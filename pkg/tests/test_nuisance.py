import numpy as np
import pytest

from godds import _backend
from godds.dgp import (
    Dataset,
    OUTCOME_DEPENDENT,
    draw_outcome_dependent,
    make_dgp,
    tilt_to_outcome_rate,
)
from godds.nuisance import (
    ConvergenceError,
    DiscreteTruth,
    LOGISTIC,
    NuisanceSpec,
    ORACLE,
    estimate_omega,
    fit_logistic,
    fit_nuisances,
    make_folds,
    perturb,
    row_nuisances,
)


def dataset_from_arrays(y, a, x):
    return Dataset(
        y=np.asarray(y, dtype=np.int8),
        a=np.asarray(a, dtype=np.int8),
        x=np.asarray(x, dtype=np.float64),
        scheme=OUTCOME_DEPENDENT,
    )


def test_spec_validation():
    with pytest.raises(ValueError, match="clip_eps"):
        NuisanceSpec(clip_eps=0.6)
    with pytest.raises(ValueError, match="kind"):
        NuisanceSpec(kind="forest")
    with pytest.raises(ValueError, match="eta_mode"):
        NuisanceSpec(eta_mode="magic")


def test_estimate_omega_basic():
    ds = dataset_from_arrays([0, 1, 0, 1], [0, 1, 0, 1], np.zeros((4, 1)))
    assert estimate_omega(ds) == 0.5


def test_estimate_omega_clips_with_warning():
    ds = dataset_from_arrays([1, 1, 1, 1], [0, 1, 0, 1], np.zeros((4, 1)))
    with pytest.warns(RuntimeWarning, match="clipped"):
        assert estimate_omega(ds, clip_eps=0.01) == 0.99


def test_estimate_omega_binomial_accuracy(we_dgp):
    n = 100_000
    ds = draw_outcome_dependent(we_dgp, n, 0.3, seed=11)
    assert abs(estimate_omega(ds) - 0.3) < 3 * np.sqrt(0.3 * 0.7 / n)


def test_fit_logistic_intercept_only_balanced():
    x = np.zeros((100, 0))
    y = np.array([0, 1] * 50, dtype=np.float64)
    beta = fit_logistic(x, y, NuisanceSpec(ridge=0.0))
    assert abs(beta[0]) < 1e-8


def test_fit_logistic_recovers_coefficients(rng):
    n = 50_000
    x = rng.normal(size=(n, 1))
    p = 1.0 / (1.0 + np.exp(-(1.0 + 2.0 * x[:, 0])))
    y = (rng.random(n) < p).astype(np.float64)
    beta = fit_logistic(x, y, NuisanceSpec())
    assert abs(beta[0] - 1.0) < 0.05
    assert abs(beta[1] - 2.0) < 0.05


def test_fit_logistic_separable():
    x = np.zeros((20, 0))
    y = np.ones(20)
    beta = fit_logistic(x, y, NuisanceSpec(ridge=1e-4))
    assert np.isfinite(beta[0])
    with pytest.raises(ConvergenceError, match="separable"):
        fit_logistic(x, y, NuisanceSpec(ridge=0.0, max_newton_iters=60))


def test_make_folds_partition():
    plan = make_folds(101, 4, seed=3)
    assert plan.n == 101
    sizes = [plan.rows_in(f).size for f in range(4)]
    assert sum(sizes) == 101
    assert max(sizes) - min(sizes) <= 1
    plan2 = make_folds(101, 4, seed=3)
    assert np.array_equal(plan.assignment, plan2.assignment)
    with pytest.raises(ValueError, match="folds"):
        make_folds(1, 2, seed=0)


def test_oracle_fit_is_exact_passthrough(we_dgp, we_qlaw):
    ds = draw_outcome_dependent(we_dgp, 400, 0.5, seed=2)
    plan = make_folds(ds.n, 2, seed=0)
    fits = fit_nuisances(ds, plan, NuisanceSpec(kind=ORACLE), truth=we_qlaw)
    rows = row_nuisances(ds, plan, fits)
    strat = np.argmax(ds.x, axis=1)
    assert np.array_equal(rows.mu1, we_qlaw.mu1[strat])
    assert np.array_equal(rows.mu0, we_qlaw.mu0[strat])
    assert np.array_equal(rows.pi1, we_qlaw.pi1[strat])
    assert np.allclose(rows.eta, we_qlaw.eta[strat], atol=0)


def test_oracle_fit_requires_truth(we_dgp):
    ds = draw_outcome_dependent(we_dgp, 100, 0.5, seed=2)
    plan = make_folds(ds.n, 2, seed=0)
    with pytest.raises(ValueError, match="truth"):
        fit_nuisances(ds, plan, NuisanceSpec(kind=ORACLE))


def test_eta_composition_identity(we_dgp):
    ds = draw_outcome_dependent(we_dgp, 2000, 0.5, seed=4)
    plan = make_folds(ds.n, 2, seed=0)
    fits = fit_nuisances(ds, plan, NuisanceSpec(kind=LOGISTIC))
    for f in range(2):
        fit = fits[f]
        x = ds.x[plan.rows_in(f)]
        composed = fit.predict_pi(1, x) * fit.predict_mu(1, x) + fit.predict_pi(
            0, x
        ) * fit.predict_mu(0, x)
        assert np.allclose(fit.predict_eta(x), composed, atol=1e-12)


def test_eta_direct_mode(we_dgp):
    ds = draw_outcome_dependent(we_dgp, 8000, 0.5, seed=14)
    plan = make_folds(ds.n, 2, seed=0)
    direct = fit_nuisances(ds, plan, NuisanceSpec(kind=LOGISTIC, eta_mode="direct"))
    composed = fit_nuisances(ds, plan, NuisanceSpec(kind=LOGISTIC))
    x = ds.x[:50]
    # both routes estimate the same surface; they agree within sampling error
    assert np.allclose(direct[0].predict_eta(x), composed[0].predict_eta(x), atol=0.05)
    # and the direct route is a genuinely different fit
    assert not np.array_equal(direct[0].predict_eta(x), composed[0].predict_eta(x))


def test_estimate_omega_empty():
    ds = dataset_from_arrays(
        np.empty(0, dtype=np.int8), np.empty(0, dtype=np.int8), np.empty((0, 1))
    )
    with pytest.raises(ValueError, match="empty"):
        estimate_omega(ds)


def test_logistic_folds_agree(we_dgp):
    # both folds see the same distribution, so coefficients agree within noise
    ds = draw_outcome_dependent(we_dgp, 20_000, 0.5, seed=5)
    plan = make_folds(ds.n, 2, seed=0)
    fits = fit_nuisances(ds, plan, NuisanceSpec(kind=LOGISTIC))
    x = ds.x[:50]
    for a in (0, 1):
        assert np.allclose(
            fits[0].predict_mu(a, x), fits[1].predict_mu(a, x), atol=0.05
        )


def test_missing_arm_in_fold_errors():
    y = np.array([0, 1, 0, 1], dtype=np.int8)
    a = np.array([1, 0, 0, 0], dtype=np.int8)
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    ds = dataset_from_arrays(y, a, x)
    # fold 0 = rows {0, 2}; training for fold 0 = rows {1, 3}, all arm 0
    plan = make_folds(4, 2, seed=0)
    rows0 = plan.rows_in(0)
    if 0 not in rows0:
        plan = make_folds(4, 2, seed=1)
        rows0 = plan.rows_in(0)
    assert 0 in rows0 or 0 in plan.rows_in(1)
    with pytest.raises(ValueError, match="fold"):
        fit_nuisances(ds, plan, NuisanceSpec(kind=LOGISTIC))


def test_cross_fit_isolation(we_dgp):
    """Corrupting rows of fold f leaves fold f's fit unchanged."""
    ds = draw_outcome_dependent(we_dgp, 2000, 0.5, seed=6)
    plan = make_folds(ds.n, 2, seed=0)
    fits = fit_nuisances(ds, plan, NuisanceSpec(kind=LOGISTIC))

    y2 = np.array(ds.y)
    fold0 = plan.rows_in(0)
    y2[fold0] = 1 - y2[fold0]  # poison fold 0
    ds2 = dataset_from_arrays(y2, ds.a, ds.x)
    fits2 = fit_nuisances(ds2, plan, NuisanceSpec(kind=LOGISTIC))

    probe = ds.x[fold0[:20]]
    for a in (0, 1):
        assert np.array_equal(fits[0].predict_mu(a, probe), fits2[0].predict_mu(a, probe))
    # while the other fold's fit definitely changed
    assert not np.allclose(
        fits[1].predict_mu(1, probe), fits2[1].predict_mu(1, probe), atol=1e-3
    )


def test_fit_determinism(we_dgp):
    ds = draw_outcome_dependent(we_dgp, 1500, 0.5, seed=8)
    plan = make_folds(ds.n, 2, seed=0)
    spec = NuisanceSpec(kind=LOGISTIC)
    f1 = fit_nuisances(ds, plan, spec)
    f2 = fit_nuisances(ds, plan, spec)
    probe = ds.x[:40]
    assert np.array_equal(f1[0].predict_mu(1, probe), f2[0].predict_mu(1, probe))
    assert np.array_equal(f1[1].predict_pi(1, probe), f2[1].predict_pi(1, probe))


def test_clipping_enforced(we_qlaw):
    truth = DiscreteTruth.from_qlaw(we_qlaw)
    from godds.nuisance import _truth_fit

    fit = _truth_fit(truth, NuisanceSpec(kind=ORACLE, clip_eps=0.2), "all")
    preds = fit.predict_mu(1, we_qlaw.features)
    assert preds.min() >= 0.2
    assert preds.max() <= 0.8


def test_perturb_identity_and_shift(we_qlaw):
    from godds.nuisance import _truth_fit

    fit = _truth_fit(we_qlaw, NuisanceSpec(kind=ORACLE), "all")
    assert perturb(fit, "mu1", 0.0) is fit

    delta = 0.37
    shifted = perturb(fit, "mu1", delta)
    x = we_qlaw.features
    logit = lambda p: np.log(p) - np.log1p(-p)
    assert np.allclose(
        logit(shifted.raw_mu1(x)) - logit(fit.raw_mu1(x)), delta, atol=1e-12
    )
    # other surfaces untouched
    assert np.array_equal(shifted.raw_mu0(x), fit.raw_mu0(x))
    assert np.array_equal(shifted.raw_eta(x), fit.raw_eta(x))


def test_perturb_pi_keeps_complement(we_qlaw):
    from godds.nuisance import _truth_fit

    fit = _truth_fit(we_qlaw, NuisanceSpec(kind=ORACLE), "all")
    shifted = perturb(fit, "pi", 0.5)
    x = we_qlaw.features
    assert np.allclose(shifted.predict_pi(0, x), 1.0 - shifted.raw_pi1(x), atol=1e-15)


def test_perturb_boundary_flag(we_qlaw):
    from godds.nuisance import _truth_fit

    fit = _truth_fit(we_qlaw, NuisanceSpec(kind=ORACLE), "all")
    with pytest.warns(RuntimeWarning, match="clip boundary"):
        flagged = perturb(fit, "mu1", 50.0, probe_x=we_qlaw.features)
    assert flagged.boundary_flag


def test_perturb_unknown_target(we_qlaw):
    from godds.nuisance import _truth_fit

    fit = _truth_fit(we_qlaw, NuisanceSpec(kind=ORACLE), "all")
    with pytest.raises(ValueError, match="target"):
        perturb(fit, "sigma", 0.1)


def test_discrete_truth_unknown_features(we_qlaw):
    truth = DiscreteTruth.from_qlaw(we_qlaw)
    with pytest.raises(KeyError, match="row 0"):
        truth.mu1_of(np.array([[0.5, 0.5]]))


def test_discrete_truth_general_features_path():
    # non-one-hot features exercise the generic matching branch
    dgp = make_dgp(
        ["a", "b", "c"],
        [0.3, 0.3, 0.4],
        [0.5, 0.4, 0.6],
        [0.3, 0.2, 0.4],
        [0.5, 0.6, 0.3],
        features=[[1.0, -2.0], [0.0, 3.5], [2.0, 2.0]],
    )
    q = tilt_to_outcome_rate(dgp, 0.5)
    truth = DiscreteTruth.from_qlaw(q)
    x = q.features[[2, 0, 1, 1]]
    assert np.array_equal(truth.stratum_index(x), [2, 0, 1, 1])
    assert np.array_equal(truth.mu1_of(x), q.mu1[[2, 0, 1, 1]])


@pytest.mark.skipif(not _backend.HAVE_NUMBA, reason="numba not installed")
def test_logistic_backend_parity(rng):
    n = 5000
    x = rng.normal(size=(n, 2))
    p = 1.0 / (1.0 + np.exp(-(0.5 + x[:, 0] - 0.5 * x[:, 1])))
    y = (rng.random(n) < p).astype(np.float64)
    spec = NuisanceSpec()
    prev = _backend.get_backend()
    try:
        _backend.set_backend("numba")
        b_nb = fit_logistic(x, y, spec)
        _backend.set_backend("numpy")
        b_np = fit_logistic(x, y, spec)
    finally:
        _backend.set_backend(prev)
    assert np.allclose(b_nb, b_np, atol=1e-8)
