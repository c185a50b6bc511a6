"""Combining per-study p-values (Tippett, Stouffer) and the pooling baseline."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .dataset import Dataset, StudyCollection
from .errors import ColumnUniverseMismatch, EmptyInput
from .multisplit import MultiSplit

METHODS = ("tippett", "stouffer")
CLAMP_EPS = 1e-15


@dataclass(frozen=True)
class MetaConfig:
    method: str = "tippett"
    eps: float = CLAMP_EPS

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown aggregation method {self.method!r}")


def stouffer_weights(n_per_study: Sequence[int]) -> np.ndarray:
    n = np.asarray(n_per_study, dtype=float)
    return np.sqrt(n / n.sum())


def tippett(p: Sequence[float]) -> float:
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        raise EmptyInput("tippett needs at least one p-value")
    pmin = float(p.min())
    if pmin <= 0.0:
        return 0.0
    if pmin >= 1.0:
        return 1.0
    # 1 - (1 - pmin)^m without cancellation for small pmin
    return float(-np.expm1(p.size * np.log1p(-pmin)))


def stouffer(p: Sequence[float], n_per_study: Sequence[int] | None = None,
             eps: float = CLAMP_EPS) -> float:
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        raise EmptyInput("stouffer needs at least one p-value")
    if n_per_study is None:
        n_per_study = np.ones(p.size)
    w = stouffer_weights(n_per_study)
    if w.size != p.size:
        raise ValueError("one sample size per p-value is required")
    z = ndtri(np.clip(p, eps, 1.0 - eps))
    return float(ndtr(w @ z))


def combine(p: Sequence[float], cfg: MetaConfig, n_per_study=None) -> float:
    if cfg.method == "tippett":
        return tippett(p)
    return stouffer(p, n_per_study, cfg.eps)


class MetaTester:
    """Group p-value across studies: per-study multisplit p on the intersection
    of the group with that study's columns, then combined."""

    def __init__(self, studies: Sequence[MultiSplit], cfg: MetaConfig = MetaConfig()):
        if not studies:
            raise EmptyInput("no studies")
        self.studies = list(studies)
        self.cfg = cfg
        self.sizes = [ms.data.n for ms in self.studies]

    def study_pvalues(self, group: Iterable[str]) -> list[float]:
        group = list(group)
        return [ms.pvalue(group) for ms in self.studies]

    def pvalue(self, group: Iterable[str]) -> float:
        return combine(self.study_pvalues(group), self.cfg, self.sizes)


def meta_group_pvalue(studies: StudyCollection, group: Iterable[str], plans,
                      cfg: MetaConfig = MetaConfig(), threads: int = 1) -> float:
    testers = [MultiSplit(d, plan, threads=threads) for d, plan in zip(studies, plans)]
    return MetaTester(testers, cfg).pvalue(group)


def pool_studies(studies: StudyCollection) -> Dataset:
    """Row-stack the studies with one intercept per study.

    Conceptually wrong under heterogeneity (effects of opposite sign cancel);
    kept as the baseline the aggregation rules are compared against.
    """
    first = studies[0]
    ref = first.colnames
    for d in studies:
        if set(d.colnames) != set(ref) or len(d.colnames) != len(ref):
            raise ColumnUniverseMismatch("pooling requires identical columns in every study")
    m = len(studies)
    if m == 1:
        return first
    xs = [d.x if d.colnames == ref else d.x[:, d.indices(ref)] for d in studies]
    has_cl = [d.clvar is not None for d in studies]
    if any(has_cl) and not all(has_cl):
        raise ColumnUniverseMismatch("either all or none of the studies need control covariates")
    if all(has_cl):
        qs = {d.clvar.shape[1] for d in studies}
        if len(qs) != 1:
            raise ColumnUniverseMismatch("studies have different numbers of control covariates")
    sizes = [d.n for d in studies]
    ind = np.zeros((sum(sizes), m - 1))
    start = 0
    for k, nk in enumerate(sizes):
        if k > 0:
            ind[start:start + nk, k - 1] = 1.0
        start += nk
    ind_names = tuple(f"study{k + 1}" for k in range(1, m))
    if all(has_cl):
        clvar = np.hstack([np.vstack([d.clvar for d in studies]), ind])
        cl_names = first.clvar_names + ind_names
    else:
        clvar, cl_names = ind, ind_names
    return Dataset(np.vstack(xs), np.concatenate([d.y for d in studies]), ref,
                   first.family, clvar, cl_names)
