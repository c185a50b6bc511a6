"""Multi sample splitting: random half splits, per-split screening and testing,
and aggregation of the dependent per-split p-values."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import MIN_OBS, Dataset
from .errors import DimensionMismatch, EmptyInput, HdInferError
from .lowdim import ScreenedModel
from .screening import ScreenedSet, screen_half

DEFAULT_B = 50


@dataclass(frozen=True)
class GammaConfig:
    gamma_min: float = 0.05

    def __post_init__(self):
        if not 0 < self.gamma_min < 1:
            raise ValueError("gamma_min must lie in (0, 1)")

    @property
    def factor(self) -> float:
        return 1.0 - math.log(self.gamma_min)


@dataclass(frozen=True)
class SplitPlan:
    """B random partitions of range(n) into I1 (size n // 2) and I2."""

    n: int
    seed: int | Sequence[int]
    i1: tuple[np.ndarray, ...]
    i2: tuple[np.ndarray, ...]

    @property
    def B(self) -> int:
        return len(self.i1)


def make_splits(n: int, B: int = DEFAULT_B, seed: int | Sequence[int] = 0) -> SplitPlan:
    """Each split draws from its own child stream of SeedSequence(seed)."""
    if n < MIN_OBS:
        raise DimensionMismatch(f"need at least {MIN_OBS} observations to split, got {n}")
    if B < 1:
        raise ValueError(f"B must be positive, got {B}")
    children = np.random.SeedSequence(seed).spawn(B)
    half = n // 2
    i1, i2 = [], []
    for child in children:
        perm = np.random.default_rng(child).permutation(n)
        i1.append(np.sort(perm[:half]))
        i2.append(np.sort(perm[half:]))
    return SplitPlan(n, seed, tuple(i1), tuple(i2))


def aggregate_pvalues(p_splits: Sequence[float], cfg: GammaConfig = GammaConfig()) -> float:
    """Quantile aggregation of B dependent p-values.

    With the k-th order statistic p_(k), the empirical gamma-quantile of
    {p_b / gamma} is p_(ceil(gamma B)) / gamma. On each interval where the
    order index is constant this decreases in gamma, so the infimum over
    (gamma_min, 1) is attained at the right endpoints k / B > gamma_min.
    """
    p = np.sort(np.asarray(p_splits, dtype=float))
    B = p.size
    if B == 0:
        raise EmptyInput("no p-values to aggregate")
    k = np.arange(1, B + 1)
    ok = k * 1.0 / B > cfg.gamma_min
    # k = B is always admissible (the limit gamma -> 1)
    q = p[ok] * B / k[ok]
    return float(min(1.0, cfg.factor * q.min()))


def _resolve_threads(threads: int | None) -> int:
    return max(1, int(threads or 1))


@dataclass
class MultiSplit:
    """Screening cache and per-split full models for one dataset.

    Screened sets are computed exactly once per split on first use and reused
    for every group tested afterwards.
    """

    data: Dataset
    plan: SplitPlan
    cfg: GammaConfig = field(default_factory=GammaConfig)
    threads: int | None = 1
    screen_kw: dict = field(default_factory=dict)
    screen_calls: int = 0
    _models: list | None = field(default=None, repr=False)
    _screened: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.plan.n != self.data.n:
            raise HdInferError(f"split plan is for n={self.plan.n}, data has n={self.data.n}")

    def _one_split(self, b: int):
        d = self.data
        i1, i2 = self.plan.i1[b], self.plan.i2[b]
        cl = d.clvar
        s = screen_half(d.x[i1], d.y[i1], None if cl is None else cl[i1],
                        d.family, d.n, **self.screen_kw)
        model = ScreenedModel(d.x[i2], d.y[i2], None if cl is None else cl[i2],
                              s.selected, d.family)
        return s, model

    def prepare(self) -> None:
        if self._models is not None:
            return
        B = self.plan.B
        nt = _resolve_threads(self.threads)
        if nt == 1:
            out = [self._one_split(b) for b in range(B)]
        else:
            with ThreadPoolExecutor(max_workers=nt) as ex:
                out = list(ex.map(self._one_split, range(B)))
        self.screen_calls += B
        self._screened = [s for s, _ in out]
        self._models = [m for _, m in out]

    @property
    def screened(self) -> list[ScreenedSet]:
        self.prepare()
        return self._screened

    @property
    def models(self) -> list[ScreenedModel]:
        self.prepare()
        return self._models

    def split_pvalues(self, group_idx: Iterable[int]) -> np.ndarray:
        mask = np.zeros(self.data.p, dtype=bool)
        mask[np.asarray(list(group_idx), dtype=np.intp)] = True
        return np.array([m.pvalue(mask) for m in self.models])

    def pvalue_idx(self, group_idx: Iterable[int]) -> float:
        idx = np.asarray(list(group_idx), dtype=np.intp)
        if idx.size == 0:
            return 1.0
        return aggregate_pvalues(self.split_pvalues(idx), self.cfg)

    def pvalue(self, group: Iterable[str]) -> float:
        """Aggregated p-value for a group of column names (unknown names ignored)."""
        return self.pvalue_idx(self.data.indices(group, strict=False))


def multisplit_pvalue(d: Dataset, group: Iterable[str], plan: SplitPlan,
                      cfg: GammaConfig = GammaConfig(), threads: int = 1) -> float:
    return MultiSplit(d, plan, cfg, threads).pvalue(group)
