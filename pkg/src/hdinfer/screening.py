"""Lasso regularization paths (linear and logistic) used for variable screening.

The penalized objective is ``sum(w (z - X b)^2) / (2n) + lam |b|_1``; for the
logistic model it is the negative mean log-likelihood plus the same penalty.
The intercept and any control covariates are profiled out exactly (weighted
Frisch-Waugh), so they are never penalized.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _cd
from .errors import NonConvergence, PerfectSeparation

PROB_EPS = 1e-10
# a fit explaining more than this share of the null deviance is treated as
# separated: coefficients would diverge as lambda decreases further
SEPARATION_DEV_RATIO = 0.999


@dataclass
class LassoPath:
    lambdas: np.ndarray
    entry_order: list[int]
    coefs: np.ndarray | None = None       # (n_lambda, p) penalized coefficients
    unpenalized: np.ndarray | None = None  # (n_lambda, 1 + q): intercept, clvar
    truncated: bool = False


@dataclass
class ScreenedSet:
    selected: list[int]
    target_size: int

    def __len__(self):
        return len(self.selected)

    def __contains__(self, j):
        return j in self.selected


def _design_unpen(n, clvar):
    ones = np.ones((n, 1))
    if clvar is None:
        return ones
    return np.hstack([ones, np.asarray(clvar, dtype=float).reshape(n, -1)])


def _wls_project(U, w, M):
    """Coefficients of the weighted LS regression of columns of M on U."""
    Uw = U * w[:, None]
    return np.linalg.lstsq(Uw.T @ U, Uw.T @ M, rcond=None)[0]


def _default_ratio(n, p):
    return 0.01 if p > n else 1e-4


def fit_lasso_path(x, y, clvar=None, family="gaussian", n_lambda=100,
                   lambda_min_ratio=None, max_entries=None, keep_coefs=False,
                   tol=1e-7, max_iter=100_000) -> LassoPath:
    """Lasso path from lambda_max down to lambda_max * lambda_min_ratio.

    With ``max_entries`` the path stops at the first grid point where that many
    variables have entered; screening only needs the prefix of the entry order.
    """
    X = np.asfortranarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if lambda_min_ratio is None:
        lambda_min_ratio = _default_ratio(n, p)
    U = _design_unpen(n, clvar)
    if family == "gaussian":
        return _gaussian_path(X, y, U, n_lambda, lambda_min_ratio, max_entries,
                              keep_coefs, tol, max_iter)
    if family == "binomial":
        return _binomial_path(X, y, U, n_lambda, lambda_min_ratio, max_entries,
                              keep_coefs, tol, max_iter)
    raise ValueError(f"unknown family {family!r}")


def _grid(lam_max, n_lambda, ratio):
    if lam_max <= 0:
        return np.array([0.0])
    return np.exp(np.linspace(np.log(lam_max), np.log(lam_max * ratio), n_lambda))


class _EntryTracker:
    """Records first-nonzero order; ties at one grid point are broken by the
    larger |gradient| at the previous solution, then by column index."""

    def __init__(self, p):
        self.seen = np.zeros(p, dtype=bool)
        self.order: list[int] = []

    def update(self, beta, grad_prev):
        new = np.flatnonzero((beta != 0) & ~self.seen)
        if new.size == 0:
            return
        if new.size > 1:
            g = np.abs(grad_prev(new))
            new = new[np.lexsort((new, -g))]
        self.seen[new] = True
        self.order.extend(int(j) for j in new)


def _solve(Xr, w, r, beta, xx, lam, lam_prev, grad, tol, max_iter):
    """Solve at `lam` with the sequential strong rule.

    Coordinate descent runs on the strong set {|grad_j| >= 2 lam - lam_prev}
    plus the current nonzeros; any KKT violator outside it is added and the
    fit repeated. Returns the gradient X'(w r)/n at the solution.
    """
    n = Xr.shape[0]
    strong = (np.abs(grad) >= 2.0 * lam - lam_prev) | (beta != 0)
    while True:
        it = _cd.lasso_cd(Xr, w, r, beta, xx, lam, tol, max_iter, np.flatnonzero(strong))
        if it < 0:
            raise NonConvergence(f"coordinate descent hit {max_iter} sweeps at lambda={lam:.3g}")
        g = Xr.T @ (w * r) / n
        viol = ~strong & (np.abs(g) > lam) & (xx > 0)
        if not viol.any():
            return g
        strong |= viol


def _gaussian_path(X, y, U, n_lambda, ratio, max_entries, keep, tol, max_iter):
    n, p = X.shape
    A = _wls_project(U, np.ones(n), X)
    Xr = np.asfortranarray(X - U @ A)
    gy = _wls_project(U, np.ones(n), y)
    r = y - U @ gy
    w = np.ones(n)
    xx = (Xr * Xr).sum(axis=0) / n
    grad0 = Xr.T @ r / n
    lam_max = float(np.abs(grad0).max()) if p else 0.0
    lambdas = _grid(lam_max, n_lambda, ratio)
    beta = np.zeros(p)
    tracker = _EntryTracker(p)
    coefs, unpen = [], []
    grad, lam_prev = grad0, lam_max
    for k, lam in enumerate(lambdas):
        g_prev = grad
        grad = _solve(Xr, w, r, beta, xx, lam, lam_prev, grad, tol, max_iter)
        lam_prev = lam
        tracker.update(beta, lambda idx: g_prev[idx])
        if keep:
            coefs.append(beta.copy())
            unpen.append(gy - A @ beta)
        if max_entries is not None and len(tracker.order) >= max_entries:
            lambdas = lambdas[: k + 1]
            break
    return LassoPath(lambdas, tracker.order,
                     np.array(coefs) if keep else None,
                     np.array(unpen) if keep else None)


def _sigmoid(eta):
    return 0.5 * (1.0 + np.tanh(0.5 * eta))


def _logistic_unpen_fit(U, y, offset, max_iter=100):
    """Unpenalized logistic fit of y on U with a fixed offset (Newton)."""
    gam = np.zeros(U.shape[1])
    dev_old = np.inf
    for _ in range(max_iter):
        eta = offset + U @ gam
        mu = _sigmoid(eta)
        w = np.maximum(mu * (1 - mu), 1e-10)
        z = U @ gam + (y - mu) / w
        gam = _wls_project(U, w, z)
        mu = _sigmoid(offset + U @ gam)
        dev = _deviance(y, mu)
        if abs(dev - dev_old) < 1e-10 * (abs(dev) + 1):
            break
        dev_old = dev
    return gam


def _deviance(y, mu):
    mu = np.clip(mu, 1e-300, 1 - 1e-16)
    return -2.0 * float(np.sum(y * np.log(mu) + (1 - y) * np.log1p(-mu)))


def _binomial_path(X, y, U, n_lambda, ratio, max_entries, keep, tol, max_iter,
                   max_outer=50):
    n, p = X.shape
    gam = _logistic_unpen_fit(U, y, np.zeros(n))
    mu0 = _sigmoid(U @ gam)
    dev_null = _deviance(y, mu0)
    grad0 = X.T @ (y - mu0) / n
    lam_max = float(np.abs(grad0).max()) if p else 0.0
    lambdas = _grid(lam_max, n_lambda, ratio)
    beta = np.zeros(p)
    tracker = _EntryTracker(p)
    coefs, unpen = [], []
    truncated = False
    eta = U @ gam
    lam_prev = lam_max
    for k, lam in enumerate(lambdas):
        grad = X.T @ (y - _sigmoid(eta)) / n
        eta_prev = eta.copy()
        beta_prev, gam_prev = beta.copy(), gam.copy()
        dev_old = np.inf
        for _ in range(max_outer):
            mu = _sigmoid(eta)
            w = np.maximum(mu * (1 - mu), 1e-5)
            z = eta + (y - mu) / w
            A = _wls_project(U, w, X)
            Xr = np.asfortranarray(X - U @ A)
            gz = _wls_project(U, w, z)
            zr = z - U @ gz
            r = zr - Xr @ beta
            xx = (w[:, None] * Xr * Xr).sum(axis=0) / n
            _solve(Xr, w, r, beta, xx, lam, lam_prev, grad, tol, max_iter)
            gam = gz - A @ beta
            eta = X @ beta + U @ gam
            mu = _sigmoid(eta)
            dev = _deviance(y, mu)
            if abs(dev - dev_old) < 1e-8 * (abs(dev) + 0.1):
                break
            dev_old = dev
        pinned = np.all((mu < PROB_EPS) | (mu > 1 - PROB_EPS))
        if pinned or dev < (1.0 - SEPARATION_DEV_RATIO) * dev_null:
            truncated = True
            beta, gam, eta = beta_prev, gam_prev, eta_prev
            lambdas = lambdas[:k]
            warnings.warn(PerfectSeparationWarning(
                f"perfect separation at lambda={lam:.3g}; path truncated"))
            break
        lam_prev = lam
        tracker.update(beta, lambda idx: grad[idx])
        if keep:
            coefs.append(beta.copy())
            unpen.append(gam.copy())
        if max_entries is not None and len(tracker.order) >= max_entries:
            lambdas = lambdas[: k + 1]
            break
    return LassoPath(lambdas, tracker.order,
                     np.array(coefs) if keep else None,
                     np.array(unpen) if keep else None, truncated)


class PerfectSeparationWarning(UserWarning):
    pass


def screen_size(n_full: int) -> int:
    return n_full // 6


def screen(path: LassoPath, n_full: int) -> ScreenedSet:
    """First floor(n_full / 6) variables to enter the path, in entry order."""
    target = screen_size(n_full)
    return ScreenedSet(list(path.entry_order[:target]), target)


def screen_half(x, y, clvar, family, n_full, **kw) -> ScreenedSet:
    """Fit the path on one half sample and keep the entry-order prefix."""
    target = screen_size(n_full)
    if target == 0:
        return ScreenedSet([], 0)
    path = fit_lasso_path(x, y, clvar, family, max_entries=target, **kw)
    return screen(path, n_full)


__all__ = ["LassoPath", "ScreenedSet", "fit_lasso_path", "screen", "screen_half",
           "PerfectSeparation", "PerfectSeparationWarning"]
