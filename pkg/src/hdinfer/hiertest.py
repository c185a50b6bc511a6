"""Top-down hierarchical testing with depth-wise multiplicity adjustment."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .dataset import Dataset, StudyCollection
from .errors import TreeDatasetMismatch
from .hiertree import HierTree, Node
from .meta import MetaConfig, MetaTester
from .multisplit import DEFAULT_B, GammaConfig, MultiSplit, make_splits


@dataclass(frozen=True)
class ClusterFinding:
    block: str | None
    group: tuple[str, ...]
    p_adjusted: float

    @property
    def is_na(self) -> bool:
        return not self.group


@dataclass
class NodeTest:
    node: Node
    depth: int
    p_raw: float
    p_adjusted: float
    p_hier: float


@dataclass
class HierResult:
    findings: list[ClusterFinding]
    blocks: list[str] | None
    alpha: float
    tested: list[NodeTest] = field(default_factory=list)

    def rows(self) -> list[ClusterFinding]:
        """Findings plus one NA row for every block without a finding."""
        if self.blocks is None:
            return list(self.findings) or [ClusterFinding(None, (), math.nan)]
        rows = [f for f in self.findings if f.block is None]
        for b in self.blocks:
            fb = [f for f in self.findings if f.block == b]
            rows.extend(fb or [ClusterFinding(b, (), math.nan)])
        return rows

    def __str__(self):
        return print_findings(self)


def adjust(p_raw: float, group_size: int, p_total: int) -> float:
    """Depth-wise Bonferroni-type adjustment p * p_total / |G|, capped at 1."""
    if not 1 <= group_size <= p_total:
        raise ValueError(f"group size {group_size} outside [1, {p_total}]")
    return min(1.0, p_raw * p_total / group_size)


def _check_tree(tree: HierTree, colnames: Iterable[str]) -> None:
    known = set(colnames)
    bad = [c for c in tree.colnames if c not in known]
    if bad:
        raise TreeDatasetMismatch(f"{len(bad)} tree variables not in the data, e.g. {bad[0]!r}")


def traverse(tree: HierTree, pvalue: Callable[[tuple[str, ...]], float],
             alpha: float = 0.05) -> HierResult:
    """Breadth-first testing; children are visited only below rejected nodes.

    A node's hierarchically adjusted p-value is the maximum of its own adjusted
    p-value and its parent's. Findings are rejected nodes none of whose
    children were rejected.
    """
    p_total = len(tree.root.members)
    level = [(tree.root, 0.0)]
    depth = 1
    tested: list[NodeTest] = []
    while level:
        nxt = []
        for node, parent_h in level:
            raw = pvalue(node.members)
            adj = adjust(raw, len(node.members), p_total)
            h = max(adj, parent_h)
            tested.append(NodeTest(node, depth, raw, adj, h))
            if h <= alpha:
                nxt.extend((c, h) for c in node.children)
        level = nxt
        depth += 1
    rejected = {id(t.node) for t in tested if t.p_hier <= alpha}
    minimal = [ClusterFinding(t.node.block, t.node.members, t.p_hier) for t in tested
               if id(t.node) in rejected
               and not any(id(c) in rejected for c in t.node.children)]
    return HierResult(minimal, tree.blocks, alpha, tested)


def build_tester(data: Dataset | StudyCollection, *, B: int = DEFAULT_B, seed=0,
                 gamma_min: float = 0.05, meta_method: str = "tippett",
                 threads: int = 1, screen_kw: dict | None = None):
    """Multisplit tester for one dataset, or a meta tester over studies.

    Study k uses the split stream SeedSequence([seed, k]).
    """
    cfg = GammaConfig(gamma_min)
    kw = screen_kw or {}
    if isinstance(data, StudyCollection):
        testers = [MultiSplit(d, make_splits(d.n, B, [int(seed), k]), cfg, threads, kw)
                   for k, d in enumerate(data)]
        return MetaTester(testers, MetaConfig(meta_method))
    return MultiSplit(data, make_splits(data.n, B, seed), cfg, threads, kw)


def test_hierarchy(data: Dataset | StudyCollection, tree: HierTree, *, B: int = DEFAULT_B,
                   seed=0, alpha: float = 0.05, gamma_min: float = 0.05,
                   meta_method: str = "tippett", threads: int = 1,
                   tester=None) -> HierResult:
    """Hierarchical testing of `tree` against one dataset or a study collection.

    Pass a prebuilt ``tester`` (anything with ``pvalue(names)``) to reuse its
    screening cache across calls.
    """
    _check_tree(tree, data.colnames)
    if tester is None:
        tester = build_tester(data, B=B, seed=seed, gamma_min=gamma_min,
                              meta_method=meta_method, threads=threads)
    return traverse(tree, tester.pvalue, alpha)


test_hierarchy.__test__ = False  # not a pytest test despite the name


# ---------------------------------------------------------------------------
# output

def format_pvalue(p: float) -> str:
    if p is None or math.isnan(p):
        return "NA"
    if p >= 1e-4:
        return f"{p:.7f}"
    return f"{p:.3e}"


def format_cluster(group: Sequence[str], n_terms: int = 5) -> str:
    if not group:
        return "NA"
    if len(group) <= n_terms:
        return ", ".join(group)
    return ", ".join(group[:n_terms]) + f", ... [{len(group) - n_terms}]"


def print_findings(result: HierResult | Sequence[ClusterFinding], n_terms: int = 5) -> str:
    rows = result.rows() if isinstance(result, HierResult) else list(result)
    table = [("", "block", "p.value", "significant.cluster")]
    for i, f in enumerate(rows, start=1):
        table.append((str(i), "NA" if f.block is None else f.block,
                      format_pvalue(f.p_adjusted), format_cluster(f.group, n_terms)))
    widths = [max(len(r[k]) for r in table) for k in range(4)]
    lines = []
    for r in table:
        cells = [r[0].rjust(widths[0])] + [r[k].ljust(widths[k]) for k in (1, 2, 3)]
        lines.append(" ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def write_findings(result: HierResult | Sequence[ClusterFinding], fh=None) -> str:
    """Tab-delimited table, one row per finding, cluster names joined by ';'."""
    rows = result.rows() if isinstance(result, HierResult) else list(result)
    out = io.StringIO()
    out.write("block\tp.value\tsignificant.cluster\n")
    for f in rows:
        p = "NA" if f.is_na else repr(float(f.p_adjusted))
        cl = "NA" if f.is_na else ";".join(f.group)
        out.write(f"{'NA' if f.block is None else f.block}\t{p}\t{cl}\n")
    text = out.getvalue()
    if fh is not None:
        fh.write(text)
    return text
