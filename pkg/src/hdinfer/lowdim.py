"""Classical low-dimensional fits and tests run on the inference half sample."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateFit, NegativeDeviance, NonConvergence, NumericError, Separation

RANK_TOL = 1e-7
PIN_EPS = 1e-10


@dataclass
class FitResult:
    coef: np.ndarray        # over retained design columns: intercept, clvar, x_sub
    retained: np.ndarray    # retained positions within x_sub
    n_unpen: int            # intercept + clvar columns kept (never dropped)
    df_resid: int
    rss: float = np.nan
    deviance: float = np.nan
    family: str = "gaussian"

    @property
    def rank(self) -> int:
        return len(self.coef)

    @property
    def loglik(self) -> float:
        if self.family == "binomial":
            return -0.5 * self.deviance
        n = self.df_resid + self.rank
        return -0.5 * n * (np.log(2 * np.pi * self.rss / n) + 1)


def _design(x_sub, n, clvar):
    cols = [np.ones((n, 1))]
    if clvar is not None:
        cols.append(np.asarray(clvar, dtype=float).reshape(n, -1))
    q = sum(c.shape[1] for c in cols)
    if x_sub is not None and np.size(x_sub):
        cols.append(np.asarray(x_sub, dtype=float).reshape(n, -1))
    return np.hstack(cols), q


def rank_repair(D: np.ndarray) -> np.ndarray:
    """Indices of columns kept so that the design has full column rank.

    A column is dropped when it lies (numerically) in the span of the columns
    before it, so earlier columns always win.
    """
    keep = np.arange(D.shape[1])
    norms = np.linalg.norm(D, axis=0)
    while keep.size:
        R = np.linalg.qr(D[:, keep], mode="r")
        diag = np.abs(np.diag(R))
        scale = np.maximum(norms[keep], 1e-300)
        bad = np.flatnonzero(diag <= RANK_TOL * scale)
        if bad.size == 0:
            break
        keep = np.delete(keep, bad[0])
    return keep


def _retained_positions(keep, q, q_keep):
    return keep[q_keep:] - q


def fit_ols(x_sub, y, clvar=None) -> FitResult:
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    D, q = _design(x_sub, n, clvar)
    keep = rank_repair(D)
    q_keep = int(np.sum(keep < q))
    Dk = D[:, keep]
    df = n - keep.size
    if df < 1:
        raise DegenerateFit(f"no residual degrees of freedom ({n} obs, {keep.size} columns)")
    coef = np.linalg.lstsq(Dk, y, rcond=None)[0]
    res = y - Dk @ coef
    return FitResult(coef, _retained_positions(keep, q, q_keep), q_keep, df,
                     rss=float(res @ res), family="gaussian")


def _sigmoid(eta):
    return 0.5 * (1.0 + np.tanh(0.5 * eta))


def binomial_deviance(y, mu) -> float:
    mu = np.clip(mu, 1e-300, 1 - 1e-16)
    return -2.0 * float(np.sum(y * np.log(mu) + (1 - y) * np.log1p(-mu)))


def _irls(D, y, start=None, tol=1e-8, max_iter=100):
    n, k = D.shape
    if start is None:
        ybar = np.clip(y.mean(), 1e-3, 1 - 1e-3)
        beta = np.zeros(k)
        beta[0] = np.log(ybar / (1 - ybar))
    else:
        beta = np.array(start, dtype=float)
    eta = D @ beta
    dev = binomial_deviance(y, _sigmoid(eta))
    for _ in range(max_iter):
        mu = _sigmoid(eta)
        w = np.maximum(mu * (1 - mu), 1e-12)
        z = eta + (y - mu) / w
        sw = np.sqrt(w)
        beta_new = np.linalg.lstsq(D * sw[:, None], z * sw, rcond=None)[0]
        eta_new = D @ beta_new
        dev_new = binomial_deviance(y, _sigmoid(eta_new))
        # step halving guards against overshooting
        halvings = 0
        while dev_new > dev + 1e-10 * (abs(dev) + 1) and halvings < 30:
            beta_new = 0.5 * (beta_new + beta)
            eta_new = D @ beta_new
            dev_new = binomial_deviance(y, _sigmoid(eta_new))
            halvings += 1
        converged = abs(dev - dev_new) < tol
        beta, eta, dev = beta_new, eta_new, dev_new
        if converged:
            return beta, eta, dev
    raise NonConvergence(f"IRLS did not converge in {max_iter} iterations")


def fit_logistic(x_sub, y, clvar=None, start=None) -> FitResult:
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    D, q = _design(x_sub, n, clvar)
    keep = rank_repair(D)
    q_keep = int(np.sum(keep < q))
    df = n - keep.size
    if df < 1:
        raise DegenerateFit(f"no residual degrees of freedom ({n} obs, {keep.size} columns)")
    if start is not None and len(start) != keep.size:
        start = None
    beta, eta, dev = _irls(D[:, keep], y, start)
    mu = _sigmoid(eta)
    if np.any((mu < PIN_EPS) | (mu > 1 - PIN_EPS)):
        raise Separation("fitted probabilities pinned at 0 or 1")
    return FitResult(beta, _retained_positions(keep, q, q_keep), q_keep, df,
                     deviance=dev, family="binomial")


def partial_f_test(fit_full: FitResult, fit_reduced: FitResult) -> float:
    ddf = fit_reduced.df_resid - fit_full.df_resid
    if ddf <= 0:
        return 1.0
    diff = max(fit_reduced.rss - fit_full.rss, 0.0)
    return _f_pvalue(diff, ddf, fit_full.rss, fit_full.df_resid)


def _f_pvalue(diff, ddf, rss_full, df_full):
    if diff <= 0:
        return 1.0
    if rss_full <= 0:
        return 0.0
    F = (diff / ddf) / (rss_full / df_full)
    return float(special.fdtrc(ddf, df_full, F))


def lrt(fit_full: FitResult, fit_reduced: FitResult) -> float:
    ddf = fit_reduced.df_resid - fit_full.df_resid
    lam = fit_reduced.deviance - fit_full.deviance
    if lam < -1e-6:
        raise NegativeDeviance(f"reduced model fits better by {-lam:.3g}")
    lam = max(lam, 0.0)
    if ddf <= 0 or lam == 0.0:
        return 1.0
    return float(special.chdtrc(ddf, lam))


def t_test(fit: FitResult, j: int, x_sub, y, clvar=None) -> float:
    """Two-sided t-test p-value for column j of x_sub in a gaussian fit."""
    n = np.asarray(y).shape[0]
    D, q = _design(x_sub, n, clvar)
    keep = np.concatenate([np.arange(fit.n_unpen), q + fit.retained])
    Dk = D[:, keep]
    pos = np.flatnonzero(fit.retained == j)
    if pos.size == 0:
        return 1.0
    k = fit.n_unpen + pos[0]
    cov = np.linalg.inv(Dk.T @ Dk) * (fit.rss / fit.df_resid)
    t = fit.coef[k] / np.sqrt(cov[k, k])
    return float(2 * special.stdtr(fit.df_resid, -abs(t)))


def group_pvalue(x2, y2, clvar2, screened, group, family="gaussian") -> float:
    """p-value for the group on the inference half given the screened set.

    Compares clvar + screened against clvar + (screened minus the group). Any
    fit failure gives the conservative value 1.
    """
    return ScreenedModel(x2, y2, clvar2, screened, family).pvalue(group)


class ScreenedModel:
    """Full model (clvar + screened columns) on one inference half, fitted once
    and reused for every group tested against that split."""

    def __init__(self, x2, y2, clvar2, screened, family="gaussian"):
        self.family = family
        self.y = np.asarray(y2, dtype=float)
        self.clvar = clvar2
        self.screened = np.asarray(list(screened), dtype=np.intp)
        self.xs = np.asarray(x2, dtype=float)[:, self.screened]
        self.failed = False
        self._fast = None
        if self.screened.size == 0:
            return
        try:
            if family == "gaussian":
                self.full = fit_ols(self.xs, self.y, clvar2)
                self._prepare_fast()
            else:
                self.full = fit_logistic(self.xs, self.y, clvar2)
            dropped = np.ones(self.screened.size, dtype=bool)
            dropped[self.full.retained] = False
            self._dropped = np.flatnonzero(dropped)
        except (NumericError, np.linalg.LinAlgError):
            self.failed = True

    def _prepare_fast(self):
        n = self.y.shape[0]
        D, q = _design(self.xs, n, self.clvar)
        fit = self.full
        keep = np.concatenate([np.arange(fit.n_unpen), q + fit.retained])
        if fit.n_unpen != q:
            return
        Dk = D[:, keep]
        try:
            V = np.linalg.inv(Dk.T @ Dk)
        except np.linalg.LinAlgError:
            return
        self._fast = V

    def pvalue(self, group) -> float:
        if self.screened.size == 0 or self.failed:
            return 1.0
        g = group if isinstance(group, np.ndarray) else np.asarray(list(group), dtype=np.intp)
        if g.dtype == bool:
            in_group = g[self.screened]  # mask over all p columns
        else:
            in_group = np.isin(self.screened, g)
        if not in_group.any():
            return 1.0
        try:
            return self._pvalue(in_group)
        except (NumericError, np.linalg.LinAlgError):
            return 1.0

    def _pvalue(self, in_group):
        fit = self.full
        reduced_cols = np.flatnonzero(~in_group)
        # the reduced model is nested in the rank-repaired full one unless it
        # keeps a column that rank repair dropped
        nested = bool(in_group[self._dropped].all())
        g_ret = in_group[fit.retained]
        if self._fast is not None and nested:
            # Wald form of the partial F statistic from the cached (D'D)^-1
            tested = np.flatnonzero(g_ret)
            if tested.size == 0:
                return 1.0
            pos = fit.n_unpen + tested
            b = fit.coef[pos]
            Vgg = self._fast[np.ix_(pos, pos)]
            diff = float(b @ np.linalg.solve(Vgg, b))
            return _f_pvalue(diff, tested.size, fit.rss, fit.df_resid)
        xs_red = self.xs[:, reduced_cols]
        if self.family == "gaussian":
            red = fit_ols(xs_red, self.y, self.clvar)
            return partial_f_test(fit, red)
        start = None
        if nested:
            keep_pos = np.concatenate([np.arange(fit.n_unpen),
                                       fit.n_unpen + np.flatnonzero(~g_ret)])
            start = fit.coef[keep_pos]
        red = fit_logistic(xs_red, self.y, self.clvar, start=start)
        return lrt(fit, red)
