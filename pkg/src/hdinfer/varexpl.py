"""Explained variance of a cluster, averaged over the sample splits."""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .dataset import Dataset
from .errors import NumericError
from .lowdim import fit_logistic, fit_ols
from .multisplit import MultiSplit, SplitPlan


def adjusted_r2(rss: float, df_resid: int, y: np.ndarray) -> float:
    tss = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - (rss / df_resid) / (tss / (y.size - 1))


def nagelkerke_r2(loglik_null: float, loglik_full: float, n: int) -> float:
    """[1 - (L0/L1)^(2/n)] / [1 - L0^(2/n)] evaluated on the log scale."""
    num = -np.expm1(2.0 / n * (loglik_null - loglik_full))
    den = -np.expm1(2.0 / n * loglik_null)
    return float(num / den)


def _split_r2(x2, y2, cl2, cols, family):
    if family == "gaussian":
        fit = fit_ols(x2[:, cols], y2, cl2)
        return adjusted_r2(fit.rss, fit.df_resid, y2)
    full = fit_logistic(x2[:, cols], y2, cl2)
    null = fit_logistic(None, y2, cl2)
    return nagelkerke_r2(null.loglik, full.loglik, y2.size)


def compute_r2(d: Dataset, cluster: Iterable[str] | None = None,
               plan: SplitPlan | None = None, *, splits: MultiSplit | None = None,
               empty_as_zero: bool = True) -> float:
    """Mean over splits of the R^2 of clvar + (screened set within the cluster),
    fitted on the inference half. Adjusted R^2 for a gaussian response,
    Nagelkerke's R^2 for a binary one (null model: intercept + clvar).

    Splits whose screened set misses the cluster contribute 0, or are skipped
    with ``empty_as_zero=False``. Pass ``splits`` to reuse an analysis'
    screening cache.
    """
    if splits is None:
        if plan is None:
            raise ValueError("need a split plan or a prepared MultiSplit")
        splits = MultiSplit(d, plan)
    cluster_idx = None if cluster is None else set(d.indices(cluster).tolist())
    values = []
    cl = d.clvar
    for b, s in enumerate(splits.screened):
        cols = [j for j in s.selected if cluster_idx is None or j in cluster_idx]
        if not cols:
            if empty_as_zero:
                values.append(0.0)
            continue
        i2 = splits.plan.i2[b]
        try:
            values.append(_split_r2(d.x[i2], d.y[i2], None if cl is None else cl[i2],
                                    np.asarray(cols), d.family))
        except (NumericError, np.linalg.LinAlgError):
            values.append(0.0)
    return float(np.mean(values)) if values else 0.0
