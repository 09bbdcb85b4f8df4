"""Hot numeric kernels with numba and pure-numpy implementations.

Each public function dispatches on the active backend. Row-wise kernels are
bit-identical across backends; reductions inside the numba logistic solver
use compensated accumulation so the two paths agree to ~1e-13.

Score-matrix column convention: column c = 2*a + y for (arm a, outcome y),
i.e. columns are (a=0,y=0), (a=0,y=1), (a=1,y=0), (a=1,y=1).
"""

from __future__ import annotations

import numpy as np

from . import _backend

COLUMN_CELLS = ((0, 0), (0, 1), (1, 0), (1, 1))


def column_of(a: int, y: int) -> int:
    return 2 * a + y


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _score_matrix_np(y, a, mu1, mu0, pi1, eta, omega):
    n = y.shape[0]
    out = np.empty((n, 4))
    yf = y.astype(np.float64)
    logit1 = np.log(mu1 / (1.0 - mu1))
    logit0 = np.log(mu0 / (1.0 - mu0))
    res1 = (a == 1) * (yf - mu1) / (pi1 * mu1 * (1.0 - mu1))
    res0 = (a == 0) * (yf - mu0) / ((1.0 - pi1) * mu0 * (1.0 - mu0))
    for a_cell in (0, 1):
        lg = logit1 if a_cell == 1 else logit0
        res = res1 if a_cell == 1 else res0
        for y_cell in (0, 1):
            rate = omega if y_cell == 1 else 1.0 - omega
            eta_y = eta if y_cell == 1 else 1.0 - eta
            ind_y = (y == y_cell).astype(np.float64)
            out[:, column_of(a_cell, y_cell)] = lg * ind_y / rate + (eta_y / rate) * res
    return out


def _rs_scores_np(y, a, mu1, mu0, pi1):
    yf = y.astype(np.float64)
    logit1 = np.log(mu1 / (1.0 - mu1))
    logit0 = np.log(mu0 / (1.0 - mu0))
    aug1 = (a == 1) * (yf - mu1) / (mu1 * (1.0 - mu1) * pi1)
    aug0 = (a == 0) * (yf - mu0) / (mu0 * (1.0 - mu0) * (1.0 - pi1))
    return logit1 - logit0 + aug1 - aug0


def _logistic_newton_np(X, t, ridge, max_iter, tol):
    n, p = X.shape

    def objective(beta):
        z = X @ beta
        # stable softplus(z) - t*z
        nll = np.mean(np.logaddexp(0.0, z) - t * z)
        return nll + 0.5 * ridge * float(beta @ beta)

    beta = np.zeros(p)
    obj = objective(beta)
    for it in range(max_iter):
        z = X @ beta
        pr = _expit_np(z)
        grad = X.T @ (pr - t) / n + ridge * beta
        if np.max(np.abs(grad)) < tol:
            return beta, True, it
        w = pr * (1.0 - pr)
        hess = (X.T * w) @ X / n + ridge * np.eye(p)
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        for _ in range(50):
            cand = beta - scale * step
            cand_obj = objective(cand)
            if cand_obj <= obj + 1e-14 * (1.0 + abs(obj)):
                break
            scale *= 0.5
        beta = cand
        obj = cand_obj
    z = X @ beta
    grad = X.T @ (_expit_np(z) - t) / n + ridge * beta
    return beta, bool(np.max(np.abs(grad)) < tol), max_iter


def _expit_np(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if _backend.HAVE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _score_matrix_nb(y, a, mu1, mu0, pi1, eta, omega):
        n = y.shape[0]
        out = np.empty((n, 4))
        for i in range(n):
            yi = np.float64(y[i])
            lg1 = np.log(mu1[i] / (1.0 - mu1[i]))
            lg0 = np.log(mu0[i] / (1.0 - mu0[i]))
            r1 = (yi - mu1[i]) / (pi1[i] * mu1[i] * (1.0 - mu1[i])) if a[i] == 1 else 0.0
            r0 = (yi - mu0[i]) / ((1.0 - pi1[i]) * mu0[i] * (1.0 - mu0[i])) if a[i] == 0 else 0.0
            for a_cell in range(2):
                lg = lg1 if a_cell == 1 else lg0
                res = r1 if a_cell == 1 else r0
                for y_cell in range(2):
                    rate = omega if y_cell == 1 else 1.0 - omega
                    eta_y = eta[i] if y_cell == 1 else 1.0 - eta[i]
                    ind_y = 1.0 if y[i] == y_cell else 0.0
                    out[i, 2 * a_cell + y_cell] = lg * ind_y / rate + (eta_y / rate) * res
        return out

    @njit(cache=True)
    def _rs_scores_nb(y, a, mu1, mu0, pi1):
        n = y.shape[0]
        out = np.empty(n)
        for i in range(n):
            yi = np.float64(y[i])
            lg = np.log(mu1[i] / (1.0 - mu1[i])) - np.log(mu0[i] / (1.0 - mu0[i]))
            if a[i] == 1:
                lg += (yi - mu1[i]) / (mu1[i] * (1.0 - mu1[i]) * pi1[i])
            else:
                lg -= (yi - mu0[i]) / (mu0[i] * (1.0 - mu0[i]) * (1.0 - pi1[i]))
            out[i] = lg
        return out

    @njit(cache=True)
    def _logistic_objective_nb(X, t, beta, ridge):
        n = X.shape[0]
        p = X.shape[1]
        total = 0.0
        comp = 0.0  # Kahan compensation keeps the reduction order-stable
        for i in range(n):
            z = 0.0
            for j in range(p):
                z += X[i, j] * beta[j]
            if z > 0.0:
                term = z + np.log1p(np.exp(-z)) - t[i] * z
            else:
                term = np.log1p(np.exp(z)) - t[i] * z
            yv = term - comp
            s = total + yv
            comp = (s - total) - yv
            total = s
        pen = 0.0
        for j in range(p):
            pen += beta[j] * beta[j]
        return total / n + 0.5 * ridge * pen

    @njit(cache=True)
    def _logistic_newton_nb(X, t, ridge, max_iter, tol):
        n = X.shape[0]
        p = X.shape[1]
        beta = np.zeros(p)
        grad = np.empty(p)
        hess = np.empty((p, p))
        obj = _logistic_objective_nb(X, t, beta, ridge)
        for it in range(max_iter):
            grad[:] = 0.0
            hess[:, :] = 0.0
            for i in range(n):
                z = 0.0
                for j in range(p):
                    z += X[i, j] * beta[j]
                if z >= 0.0:
                    pr = 1.0 / (1.0 + np.exp(-z))
                else:
                    ez = np.exp(z)
                    pr = ez / (1.0 + ez)
                resid = pr - t[i]
                w = pr * (1.0 - pr)
                for j in range(p):
                    grad[j] += X[i, j] * resid
                    for l in range(j, p):
                        hess[j, l] += X[i, j] * X[i, l] * w
            gmax = 0.0
            for j in range(p):
                grad[j] = grad[j] / n + ridge * beta[j]
                if abs(grad[j]) > gmax:
                    gmax = abs(grad[j])
                for l in range(j, p):
                    hess[j, l] /= n
                    hess[l, j] = hess[j, l]
                hess[j, j] += ridge
            if gmax < tol:
                return beta, True, it
            step = np.linalg.solve(hess, grad)
            scale = 1.0
            cand = beta - step
            cand_obj = _logistic_objective_nb(X, t, cand, ridge)
            for _ in range(50):
                if cand_obj <= obj + 1e-14 * (1.0 + abs(obj)):
                    break
                scale *= 0.5
                cand = beta - scale * step
                cand_obj = _logistic_objective_nb(X, t, cand, ridge)
            beta = cand
            obj = cand_obj
        # final gradient check
        grad[:] = 0.0
        for i in range(n):
            z = 0.0
            for j in range(p):
                z += X[i, j] * beta[j]
            if z >= 0.0:
                pr = 1.0 / (1.0 + np.exp(-z))
            else:
                ez = np.exp(z)
                pr = ez / (1.0 + ez)
            for j in range(p):
                grad[j] += X[i, j] * (pr - t[i])
        gmax = 0.0
        for j in range(p):
            g = grad[j] / n + ridge * beta[j]
            if abs(g) > gmax:
                gmax = abs(g)
        return beta, gmax < tol, max_iter


# ---------------------------------------------------------------------------
# dispatchers
# ---------------------------------------------------------------------------

def score_matrix(y, a, mu1, mu0, pi1, eta, omega):
    """Uncentered per-row scores for the four (arm, outcome) cells, (n, 4)."""
    args = _as_kernel_args(y, a, mu1, mu0, pi1, eta)
    if _backend.get_backend() == "numba":
        return _score_matrix_nb(*args, float(omega))
    return _score_matrix_np(*args, float(omega))


def rs_scores(y, a, mu1, mu0, pi1):
    """Per-row log odds-ratio scores for the random-sampling estimator, (n,)."""
    y, a, mu1, mu0, pi1 = _as_kernel_args(y, a, mu1, mu0, pi1)
    if _backend.get_backend() == "numba":
        return _rs_scores_nb(y, a, mu1, mu0, pi1)
    return _rs_scores_np(y, a, mu1, mu0, pi1)


def logistic_newton(X, t, ridge, max_iter, tol):
    """Damped-Newton ridge logistic fit: (coefficients, converged, iterations)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    if _backend.get_backend() == "numba":
        beta, ok, its = _logistic_newton_nb(X, t, float(ridge), int(max_iter), float(tol))
        return beta, bool(ok), int(its)
    return _logistic_newton_np(X, t, float(ridge), int(max_iter), float(tol))


def _as_kernel_args(y, a, *rest):
    y = np.ascontiguousarray(y, dtype=np.int8)
    a = np.ascontiguousarray(a, dtype=np.int8)
    return (y, a) + tuple(np.ascontiguousarray(r, dtype=np.float64) for r in rest)
