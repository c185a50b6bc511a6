"""Simulation laboratory: synthetic genotype designs, responses, and power/FWER
experiments comparing Tippett, Stouffer and pooling."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import BlockMap, Dataset, StudyCollection
from .hiertest import traverse
from .hiertree import HierTree, cluster_var
from .meta import MetaConfig, MetaTester, pool_studies
from .multisplit import GammaConfig, MultiSplit, make_splits

LATENT_CUT = 0.75
ALL_METHODS = ("tippett", "stouffer", "pooling")


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# data generation

def parse_correlation(spec: str) -> tuple[str, float, int]:
    """'independent', 'ar1:RHO' or 'block:RHO:SIZE'."""
    parts = spec.strip().split(":")
    kind = parts[0]
    try:
        if kind == "independent" and len(parts) == 1:
            return kind, 0.0, 1
        if kind == "ar1" and len(parts) == 2:
            return kind, float(parts[1]), 1
        if kind == "block" and len(parts) == 3:
            return kind, float(parts[1]), int(parts[2])
    except ValueError:
        pass
    raise ScenarioError(f"bad correlation spec {spec!r}")


def _latent(n, p, correlation, rng):
    kind, rho, size = parse_correlation(correlation)
    e = rng.standard_normal((n, p))
    if kind == "independent":
        return e
    if kind == "ar1":
        z = np.empty_like(e)
        z[:, 0] = e[:, 0]
        s = math.sqrt(1 - rho * rho)
        for j in range(1, p):
            z[:, j] = rho * z[:, j - 1] + s * e[:, j]
        return z
    n_blocks = -(-p // size)
    f = rng.standard_normal((n, n_blocks))
    block_of = np.arange(p) // size
    return math.sqrt(rho) * f[:, block_of] + math.sqrt(1 - rho) * e


def gen_design(n: int, p: int, correlation: str = "independent", seed=0) -> np.ndarray:
    """SNP-like 0/1/2 matrix: correlated latent Gaussians cut at -0.75 and 0.75."""
    rng = np.random.default_rng(seed)
    z = _latent(n, p, correlation, rng)
    return (z > -LATENT_CUT).astype(float) + (z > LATENT_CUT)


def drop_collinear(x: np.ndarray, max_set: int = 10, tol: float = 1e-8) -> np.ndarray:
    """Indices of columns kept after removing constant columns and columns that
    are (numerically) in the span of the up to max_set - 1 previously kept
    columns, scanning greedily by column index."""
    keep: list[int] = []
    xc = x - x.mean(axis=0)
    for j in range(x.shape[1]):
        v = xc[:, j]
        vv = float(v @ v)
        if vv <= tol:
            continue
        window = keep[-(max_set - 1):]
        if window:
            W = xc[:, window]
            coef = np.linalg.lstsq(W, v, rcond=None)[0]
            r = v - W @ coef
            if float(r @ r) <= tol * vv:
                continue
        keep.append(j)
    return np.asarray(keep, dtype=np.intp)


def gen_response(x: np.ndarray, beta: np.ndarray, sigma: float, family: str = "gaussian",
                 seed=0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    eta = x @ beta
    if family == "gaussian":
        return eta + sigma * rng.standard_normal(x.shape[0])
    eta = eta - eta.mean()
    return (rng.random(x.shape[0]) < 1.0 / (1.0 + np.exp(-eta))).astype(float)


def adaptive_power(findings: Iterable[Sequence[str]], active: Iterable[str]) -> float:
    """Sum of 1/|C| over findings containing an active variable, over |S0|."""
    active = set(active)
    if not active:
        return 0.0
    total = sum(1.0 / len(c) for c in findings if c and active.intersection(c))
    return total / len(active)


def false_detection(findings: Iterable[Sequence[str]], active: Iterable[str]) -> bool:
    active = set(active)
    return any(c and not active.intersection(c) for c in findings)


# ---------------------------------------------------------------------------
# scenarios

def _as_list(v, m, cast=float):
    if isinstance(v, (list, tuple)):
        out = [cast(x) for x in v]
    else:
        out = [cast(v)]
    if len(out) == 1:
        out = out * m
    if len(out) != m:
        raise ScenarioError(f"expected 1 or {m} values, got {len(out)}")
    return out


@dataclass
class SimScenario:
    name: str = "scenario"
    m: int = 1
    n: list = field(default_factory=lambda: [200])
    p: int = 500
    s0: int = 10
    beta: list = field(default_factory=lambda: [0.0])
    sigma: list = field(default_factory=lambda: [1.0])
    correlation: str = "block:0.5:10"
    active: str = "random"          # random | block (one whole correlated block)
    blocks: int = 1                 # >1 adds a block level of equal-sized chunks
    family: str = "gaussian"
    methods: list = field(default_factory=lambda: list(ALL_METHODS))
    R: int = 100
    B: int = 50
    alpha: float = 0.05
    gamma_min: float = 0.05
    seed: int = 1

    def __post_init__(self):
        self.n = _as_list(self.n, self.m, int)
        self.beta = _as_list(self.beta, self.m, float)
        self.sigma = _as_list(self.sigma, self.m, float)
        if isinstance(self.methods, str):
            self.methods = [s.strip() for s in self.methods.split(",") if s.strip()]
        bad = [x for x in self.methods if x not in ALL_METHODS]
        if bad:
            raise ScenarioError(f"unknown method {bad[0]!r}")
        if self.s0 > self.p:
            raise ScenarioError("s0 must not exceed p")
        if any(s <= 0 for s in self.sigma):
            raise ScenarioError("sigma must be positive")
        if self.active not in ("random", "block"):
            raise ScenarioError(f"unknown active-set mode {self.active!r}")
        parse_correlation(self.correlation)


PRESETS: dict[str, SimScenario] = {
    "null": SimScenario("null", m=1, n=200, p=500, beta=0.0, R=200),
    "meta_null": SimScenario("meta_null", m=2, n=200, p=500, beta=0.0, R=200),
    "tippett_vs_stouffer": SimScenario("tippett_vs_stouffer", m=2, n=300, p=1000,
                                       beta=[3.0, 0.0], sigma=[1.0, 1.0],
                                       methods=["tippett", "stouffer"], blocks=2),
    "sign_cancel": SimScenario("sign_cancel", m=2, n=300, p=1000, beta=[1.0, -1.0],
                               methods=["tippett", "pooling"], blocks=2),
    "pooling_vs_tippett": SimScenario("pooling_vs_tippett", m=10, n=150, p=2000,
                                      beta=1.0, methods=["tippett", "pooling"]),
    "strong_singleton": SimScenario("strong_singleton", m=1, n=300, p=100, s0=1,
                                    beta=5.0, methods=["tippett"]),
    "weak_group": SimScenario("weak_group", m=1, n=300, p=200, s0=10, beta=0.15,
                              correlation="block:0.9:10", active="block",
                              methods=["tippett"]),
}


def _coerce(name, raw, lineno):
    kinds = {f.name: f for f in fields(SimScenario)}
    if name not in kinds:
        raise ScenarioError(f"line {lineno}: unknown key {name!r}")
    try:
        if name in ("n", "beta", "sigma"):
            vals = [s.strip() for s in raw.split(",")]
            return [int(v) if name == "n" else float(v) for v in vals]
        if name == "methods":
            return [s.strip() for s in raw.split(",") if s.strip()]
        if name in ("m", "p", "s0", "blocks", "R", "B", "seed"):
            return int(raw)
        if name in ("alpha", "gamma_min"):
            return float(raw)
        return raw
    except ValueError:
        raise ScenarioError(f"line {lineno}: bad value {raw!r} for {name!r}") from None


def parse_scenario(text: str) -> SimScenario:
    """key = value lines; '#' starts a comment; 'preset = NAME' sets defaults."""
    values: dict = {}
    base = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if not key or not raw:
            raise ScenarioError(f"line {lineno}: empty key or value")
        if key == "preset":
            if raw not in PRESETS:
                raise ScenarioError(f"line {lineno}: unknown preset {raw!r}")
            base = PRESETS[raw]
            continue
        values[key] = _coerce(key, raw, lineno)
    try:
        if base is not None:
            kw = {f.name: getattr(base, f.name) for f in fields(SimScenario)}
            kw.update(values)
            if "m" in values:
                for k in ("n", "beta", "sigma"):
                    if k not in values:
                        kw[k] = kw[k][:1]
            return SimScenario(**kw)
        return SimScenario(**values)
    except TypeError as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(path) -> SimScenario:
    return parse_scenario(Path(path).read_text())


# ---------------------------------------------------------------------------
# experiment

@dataclass
class Fixture:
    """Designs and tree that stay fixed across replicates."""

    designs: list[np.ndarray]
    colnames: tuple[str, ...]
    tree: HierTree


def make_fixture(sc: SimScenario) -> Fixture:
    xs = [gen_design(sc.n[k], sc.p, sc.correlation, [sc.seed, 0, k]) for k in range(sc.m)]
    keep = drop_collinear(np.vstack(xs))
    # drop columns degenerate in any single study as well
    keep = np.asarray([j for j in keep if all(x[:, j].std() > 0 for x in xs)], dtype=np.intp)
    xs = [np.ascontiguousarray(x[:, keep]) for x in xs]
    names = tuple(f"SNP.{j + 1}" for j in keep)
    studies = StudyCollection(tuple(
        Dataset(x, np.zeros(x.shape[0]), names, "gaussian")
        for x in xs))
    block = None
    if sc.blocks > 1:
        chunk = -(-len(names) // sc.blocks)
        block = BlockMap(tuple((c, f"chrom {j // chunk + 1}") for j, c in enumerate(names)))
    tree = cluster_var(studies, block)
    return Fixture(xs, names, tree)


def toy_study(n: int = 500, p: int = 1000, blocks: int = 2, s0: int = 10,
              beta: float = 1.0, sigma: float = 1.0, correlation: str = "block:0.5:10",
              family: str = "gaussian", seed=0) -> tuple[Dataset, BlockMap, tuple[str, ...]]:
    """Single-study dataset with contiguous blocks ("chrom 1", ...).

    Returns the dataset, its block map and the names of the active variables.
    """
    x = gen_design(n, p, correlation, [seed, 0])
    keep = drop_collinear(x)
    x = np.ascontiguousarray(x[:, keep])
    names = tuple(f"SNP.{j + 1}" for j in keep)
    rng = np.random.default_rng([seed, 1])
    act = np.sort(rng.choice(len(names), size=min(s0, len(names)), replace=False))
    b = np.zeros(len(names))
    b[act] = beta
    y = gen_response(x, b, sigma, family, [seed, 2])
    chunk = -(-len(names) // max(blocks, 1))
    block = BlockMap(tuple((c, f"chrom {j // chunk + 1}") for j, c in enumerate(names)))
    return Dataset(x, y, names, family), block, tuple(names[j] for j in act)


def _active_set(sc: SimScenario, fx: Fixture, rng) -> np.ndarray:
    p = len(fx.colnames)
    if sc.active == "block":
        _, _, size = parse_correlation(sc.correlation)
        n_blocks = -(-sc.p // size)
        # latent block membership follows original column numbers
        orig = np.array([int(c.split(".")[1]) - 1 for c in fx.colnames])
        b = int(rng.integers(n_blocks))
        cand = np.flatnonzero(orig // size == b)
        return np.sort(cand[: sc.s0])
    return np.sort(rng.choice(p, size=sc.s0, replace=False))


@dataclass
class ReplicateResult:
    rep: int
    active: tuple[str, ...]
    findings: dict[str, list[tuple[str, ...]]]


def run_replicate(sc: SimScenario, fx: Fixture, rep: int) -> ReplicateResult:
    rng = np.random.default_rng([sc.seed, 1, rep])
    act = _active_set(sc, fx, rng)
    p = len(fx.colnames)
    datasets = []
    for k, x in enumerate(fx.designs):
        beta = np.zeros(p)
        beta[act] = sc.beta[k]
        y = gen_response(x, beta, sc.sigma[k], sc.family, [sc.seed, 2, rep, k])
        if sc.family == "binomial" and y.min() == y.max():
            y[0] = 1 - y[0]
        datasets.append(Dataset(x, y, fx.colnames, sc.family))
    cfg = GammaConfig(sc.gamma_min)
    studies = [MultiSplit(d, make_splits(d.n, sc.B, [sc.seed, 3, rep, k]), cfg)
               for k, d in enumerate(datasets)]
    found: dict[str, list[tuple[str, ...]]] = {}
    for method in sc.methods:
        if method == "pooling":
            if sc.m == 1:
                tester = studies[0]
            else:
                pooled = pool_studies(StudyCollection(tuple(datasets)))
                tester = MultiSplit(pooled, make_splits(pooled.n, sc.B, [sc.seed, 4, rep]), cfg)
            fn = tester.pvalue
        else:
            fn = MetaTester(studies, MetaConfig(method)).pvalue
        res = traverse(fx.tree, fn, sc.alpha)
        found[method] = [f.group for f in res.findings]
    # with every effect zero no variable is active and any finding is false
    active = tuple(fx.colnames[j] for j in act) if any(sc.beta) else ()
    return ReplicateResult(rep, active, found)


@dataclass
class MethodSummary:
    method: str
    power: float
    power_se: float
    fwer: float
    fwer_se: float
    replicates: int


@dataclass
class PowerReport:
    scenario: SimScenario
    summaries: dict[str, MethodSummary]
    replicates: list[ReplicateResult]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["scenario", "method", "replicates", "power", "power_se", "fwer",
                    "fwer_se", "fwer_upper"])
        for s in self.summaries.values():
            w.writerow([self.scenario.name, s.method, s.replicates, f"{s.power:.6f}",
                        f"{s.power_se:.6f}", f"{s.fwer:.6f}", f"{s.fwer_se:.6f}",
                        f"{s.fwer + 2 * s.fwer_se:.6f}"])
        return out.getvalue()


def summarize(sc: SimScenario, reps: list[ReplicateResult]) -> PowerReport:
    summaries = {}
    for method in sc.methods:
        pw = np.array([adaptive_power(r.findings[method], r.active) for r in reps])
        fd = np.array([false_detection(r.findings[method], r.active) for r in reps], float)
        R = len(reps)
        fwer = float(fd.mean())
        summaries[method] = MethodSummary(
            method, float(pw.mean()), float(pw.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0,
            fwer, math.sqrt(fwer * (1 - fwer) / R), R)
    return PowerReport(sc, summaries, reps)


def _worker(args):
    sc, fx, rep = args
    return run_replicate(sc, fx, rep)


def run_experiment(sc: SimScenario, methods: Iterable[str] | None = None,
                   workers: int = 1, progress=None) -> PowerReport:
    """R replicates of the scenario; results do not depend on `workers`."""
    if methods is not None:
        sc = replace(sc, methods=list(methods), n=list(sc.n), beta=list(sc.beta),
                     sigma=list(sc.sigma))
    fx = make_fixture(sc)
    jobs = [(sc, fx, rep) for rep in range(sc.R)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            reps = list(ex.map(_worker, jobs))
    else:
        reps = []
        for j in jobs:
            reps.append(_worker(j))
            if progress is not None:
                progress(len(reps), sc.R)
    return summarize(sc, reps)
