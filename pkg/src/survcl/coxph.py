"""Cox proportional hazards baseline.

Breslow partial likelihood (tied event times share the full risk set),
maximized by Newton-Raphson with step-halving and a small ridge penalty for
stability on collinear columns (one-hot cluster indicators, wide embedding
matrices). Features are standardized internally; coefficients are reported
on the original feature scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CoxModel", "cox_fit", "cox_risk", "partial_loglik", "partial_loglik_grad"]


@dataclass
class CoxModel:
    beta: np.ndarray
    log_partial_likelihood: float
    converged: bool
    iterations: int


def _validate(x, t, e):
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    e = np.asarray(e)
    if x.ndim != 2:
        raise ValueError("x must be 2-D (patients x features)")
    if t.shape != (x.shape[0],) or e.shape != (x.shape[0],):
        raise ValueError("t and e must align with the rows of x")
    if not np.any(e == 1):
        raise ValueError("Cox fitting needs at least one observed event")
    return x, t, e


def _breslow(x, t, e, beta, want_hessian: bool):
    """Breslow log partial likelihood, gradient, and (optionally) Hessian.

    One descending pass over distinct times, maintaining running risk-set
    sums of exp(eta), x*exp(eta), and x x^T exp(eta).
    """
    n, d = x.shape
    eta = x @ beta
    # guard the exp against runaway linear predictors during line search
    eta = np.clip(eta, -500.0, 500.0)
    w = np.exp(eta)
    order = np.argsort(t, kind="stable")[::-1]
    ll = 0.0
    grad = np.zeros(d)
    hess = np.zeros((d, d)) if want_hessian else None
    s0 = 0.0
    s1 = np.zeros(d)
    s2 = np.zeros((d, d)) if want_hessian else None
    i = 0
    while i < n:
        j = i
        u = t[order[i]]
        while j < n and t[order[j]] == u:
            idx = order[j]
            s0 += w[idx]
            s1 += w[idx] * x[idx]
            if want_hessian:
                s2 += w[idx] * np.outer(x[idx], x[idx])
            j += 1
        for m in range(i, j):
            idx = order[m]
            if e[idx] == 1:
                mu = s1 / s0
                ll += eta[idx] - np.log(s0)
                grad += x[idx] - mu
                if want_hessian:
                    hess -= s2 / s0 - np.outer(mu, mu)
        i = j
    return (ll, grad, hess) if want_hessian else (ll, grad)


def partial_loglik(x, t, e, beta) -> float:
    """Breslow log partial likelihood at ``beta`` (unpenalized)."""
    x, t, e = _validate(x, t, e)
    ll, _ = _breslow(x, t, e, np.asarray(beta, dtype=np.float64), want_hessian=False)
    return float(ll)


def partial_loglik_grad(x, t, e, beta) -> np.ndarray:
    """Gradient of the Breslow log partial likelihood at ``beta``."""
    x, t, e = _validate(x, t, e)
    _, grad = _breslow(x, t, e, np.asarray(beta, dtype=np.float64), want_hessian=False)
    return grad


def cox_fit(
    x,
    t,
    e,
    ridge: float = 1e-4,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> CoxModel:
    """Maximize the ridge-penalized Breslow partial likelihood.

    Newton steps with step-halving; converged when the max-norm of the
    penalized gradient (in standardized feature space) drops below ``tol``.
    On failure to improve after exhausting the halving budget, the best
    iterate is returned with ``converged=False``.
    """
    x, t, e = _validate(x, t, e)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std < 1e-12, 1.0, std)
    xs = (x - mean) / scale

    d = xs.shape[1]
    beta = np.zeros(d)
    ll, grad, hess = _breslow(xs, t, e, beta, want_hessian=True)
    ll_pen = ll - 0.5 * ridge * beta @ beta
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad_pen = grad - ridge * beta
        if np.max(np.abs(grad_pen)) < tol:
            converged = True
            iterations -= 1
            break
        hess_pen = hess - ridge * np.eye(d)
        delta = np.linalg.solve(-hess_pen, grad_pen)
        step = 1.0
        improved = False
        while step > 1e-10:
            candidate = beta + step * delta
            ll_new, grad_new, hess_new = _breslow(xs, t, e, candidate, want_hessian=True)
            ll_new_pen = ll_new - 0.5 * ridge * candidate @ candidate
            if ll_new_pen >= ll_pen - 1e-12:
                beta, ll, grad, hess, ll_pen = candidate, ll_new, grad_new, hess_new, ll_new_pen
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    else:
        grad_pen = grad - ridge * beta
        converged = bool(np.max(np.abs(grad_pen)) < tol)

    return CoxModel(
        beta=beta / scale,
        log_partial_likelihood=float(ll),
        converged=converged,
        iterations=iterations,
    )


def cox_risk(model: CoxModel, x) -> np.ndarray:
    """Linear predictor x . beta; higher means higher hazard."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.beta.shape[0]:
        raise ValueError(
            f"feature matrix of shape {x.shape} does not match "
            f"{model.beta.shape[0]} coefficients"
        )
    return x @ model.beta
