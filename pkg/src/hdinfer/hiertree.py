"""Hierarchical trees over variables: correlation clustering or genomic-position
partitioning, with an optional user-defined block level below the root."""
from __future__ import annotations

import warnings
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import _cd
from .dataset import (BlockMap, Dataset, PositionMap, StudyCollection,
                      check_block_coverage, check_unique_positions)
from .errors import DataValidationError, DegenerateColumn, UnknownColname

TREE_HEADER = "# hdinfer-tree 1"


@dataclass(eq=False)
class Node:
    members: tuple[str, ...]
    children: list["Node"] = field(default_factory=list)
    block: str | None = None
    height: float | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def __len__(self):
        return len(self.members)


@dataclass(eq=False)
class HierTree:
    root: Node
    blocks: list[str] | None = None

    def walk(self) -> Iterator[tuple[Node, int]]:
        """Breadth-first (node, depth) pairs; the root has depth 1."""
        queue = deque([(self.root, 1)])
        while queue:
            node, depth = queue.popleft()
            yield node, depth
            queue.extend((c, depth + 1) for c in node.children)

    def leaves(self) -> list[str]:
        return [n.members[0] for n, _ in self.walk() if n.is_leaf]

    @property
    def colnames(self) -> tuple[str, ...]:
        return self.root.members

    def depth(self) -> int:
        return max(d for _, d in self.walk())

    def check(self) -> None:
        """Raise if any node's children fail to partition it or a leaf is not a singleton."""
        for node, _ in self.walk():
            if node.is_leaf:
                if len(node.members) != 1:
                    raise DataValidationError(f"leaf with {len(node.members)} members")
                continue
            union = [m for c in node.children for m in c.members]
            if len(union) != len(set(union)) or set(union) != set(node.members):
                raise DataValidationError("children do not partition their parent")

    # -- serialization: one line per node, indentation = depth, names on leaves only
    def to_text(self) -> str:
        lines = [TREE_HEADER]
        stack = [(self.root, 0)]
        while stack:
            node, depth = stack.pop()
            h = "" if node.height is None else repr(float(node.height))
            name = node.members[0] if node.is_leaf else ""
            lines.append(f"{'  ' * depth}* {node.block or ''}\t{h}\t{name}")
            stack.extend((c, depth + 1) for c in reversed(node.children))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "HierTree":
        raw = text.splitlines()
        if not raw or raw[0].strip() != TREE_HEADER:
            raise DataValidationError("not a tree file (missing header)")
        stack: list[tuple[int, Node]] = []
        root = None
        for lineno, line in enumerate(raw[1:], start=2):
            if not line.strip():
                continue
            indent = len(line) - len(line.lstrip(" "))
            body = line[indent:]
            if indent % 2 or not body.startswith("* "):
                raise DataValidationError(f"tree line {lineno}: malformed")
            parts = body[2:].split("\t")
            if len(parts) != 3:
                raise DataValidationError(f"tree line {lineno}: expected 3 fields")
            block, h, name = parts
            node = Node((name,) if name else (), [], block or None,
                        float(h) if h else None)
            depth = indent // 2
            while stack and stack[-1][0] >= depth:
                stack.pop()
            if stack:
                if stack[-1][0] != depth - 1:
                    raise DataValidationError(f"tree line {lineno}: bad indentation")
                stack[-1][1].children.append(node)
            elif root is None and depth == 0:
                root = node
            else:
                raise DataValidationError(f"tree line {lineno}: second root")
            stack.append((depth, node))
        if root is None:
            raise DataValidationError("empty tree file")
        _fill_members(root)
        blocks = list(dict.fromkeys(n.block for n, _ in cls(root).walk() if n.block))
        tree = cls(root, blocks or None)
        tree.check()
        return tree

    @classmethod
    def load(cls, path) -> "HierTree":
        return cls.from_text(Path(path).read_text())


def _fill_members(root: Node) -> None:
    order: list[Node] = []
    stack = [root]
    while stack:
        n = stack.pop()
        order.append(n)
        stack.extend(n.children)
    for n in reversed(order):
        if n.children:
            n.members = tuple(m for c in n.children for m in c.members)


# ---------------------------------------------------------------------------
# correlation clustering

def _stacked(data: Dataset | StudyCollection, names: Sequence[str]) -> np.ndarray:
    """Observations stacked across studies; NaN where a study lacks a column."""
    studies = data.studies if isinstance(data, StudyCollection) else (data,)
    blocks = []
    for d in studies:
        idx = d.col_index
        m = np.full((d.n, len(names)), np.nan)
        for k, c in enumerate(names):
            j = idx.get(c)
            if j is not None:
                m[:, k] = d.x[:, j]
        blocks.append(m)
    return np.vstack(blocks)


def correlation(X: np.ndarray) -> np.ndarray:
    """Pearson correlation; pairwise-complete observations when X has NaNs."""
    mask = ~np.isnan(X)
    if mask.all():
        Xc = X - X.mean(axis=0)
        ss = np.sqrt((Xc * Xc).sum(axis=0))
        if np.any(ss == 0):
            raise DegenerateColumn("zero-variance column in clustering input")
        return (Xc.T @ Xc) / np.outer(ss, ss)
    M = mask.astype(float)
    Z = np.where(mask, X, 0.0)
    cnt = M.T @ M
    sx = Z.T @ M           # sx[i, j]: sum of x_i over rows where j is observed
    sxx = (Z * Z).T @ M
    sxy = Z.T @ Z
    with np.errstate(invalid="ignore", divide="ignore"):
        cov = sxy / cnt - (sx / cnt) * (sx.T / cnt)
        vi = sxx / cnt - (sx / cnt) ** 2
        r = cov / np.sqrt(vi * vi.T)
    if np.any(np.diag(vi) <= 0):
        raise DegenerateColumn("zero-variance column in clustering input")
    # pairs never observed together carry no information: treat as uncorrelated
    r = np.where(np.isfinite(r), r, 0.0)
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0)


def average_linkage_merges(dissimilarity: np.ndarray, names: Sequence[str]):
    """Merge sequence [(members_a, members_b, height), ...] of average linkage.

    Equal dissimilarities are resolved in favour of the pair whose smallest
    member names are lexicographically smallest, so the result does not
    depend on the input column order.
    """
    order = sorted(range(len(names)), key=lambda k: names[k])
    D = np.ascontiguousarray(dissimilarity[np.ix_(order, order)], dtype=float)
    sorted_names = [names[k] for k in order]
    merges, heights, _ = _cd.average_linkage(D)
    clusters: list[tuple[str, ...]] = [(c,) for c in sorted_names]
    out = []
    for (a, b), h in zip(merges, heights):
        ma, mb = clusters[a], clusters[b]
        clusters.append(ma + mb)
        out.append((ma, mb, float(h)))
    return out


def _dendrogram_tree(names: Sequence[str], D: np.ndarray, block: str | None) -> Node:
    if len(names) == 1:
        return Node((names[0],), [], block, 0.0)
    order = sorted(range(len(names)), key=lambda k: names[k])
    Ds = np.ascontiguousarray(D[np.ix_(order, order)])
    merges, heights, _ = _cd.average_linkage(Ds)
    nodes = [Node((names[k],), [], block, 0.0) for k in order]
    for (a, b), h in zip(merges, heights):
        left, right = nodes[a], nodes[b]
        # average linkage is monotone; guard against last-bit rounding
        h = max(float(h), left.height, right.height)
        nodes.append(Node(left.members + right.members, [left, right], block, h))
    return nodes[-1]


def _cluster_block(data, names, label):
    # canonical order first, so that even rounding does not depend on column order
    names = sorted(names)
    if len(names) == 1:
        if label is not None:
            warnings.warn(f"block {label!r} has a single variable; it becomes a leaf")
        return Node((names[0],), [], label, 0.0)
    X = _stacked(data, names)
    r = correlation(X)
    D = 1.0 - r * r
    np.fill_diagonal(D, 0.0)
    D = np.clip(D, 0.0, 1.0)
    return _dendrogram_tree(names, D, label)


def _assemble(block_nodes: list[Node], labels: list[str] | None) -> HierTree:
    if labels is None:
        return HierTree(block_nodes[0], None)
    root = Node(tuple(m for b in block_nodes for m in b.members), block_nodes, None,
                None)
    return HierTree(root, labels)


def _grouped(colnames: Sequence[str], block: BlockMap | None):
    if block is None:
        return [(None, list(colnames))]
    check_block_coverage(block, colnames)
    lab = block.as_dict()
    present = set(colnames)
    groups: dict[str, list[str]] = {b: [] for b in block.blocks()}
    for c, b in block.entries:
        if c in present:
            groups[b].append(c)
    return [(b, cs) for b, cs in groups.items() if cs]


def cluster_var(data: Dataset | StudyCollection, block: BlockMap | None = None,
                threads: int = 1) -> HierTree:
    """Average-linkage clustering on 1 - cor^2, separately within each block."""
    colnames = data.colnames
    if len(colnames) < 1:
        raise DataValidationError("nothing to cluster")
    groups = _grouped(colnames, block)
    work = lambda g: _cluster_block(data, g[1], g[0])  # noqa: E731
    if threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            nodes = list(ex.map(work, groups))
    else:
        nodes = [work(g) for g in groups]
    return _assemble(nodes, None if block is None else [g[0] for g in groups])


# ---------------------------------------------------------------------------
# position partitioning

def _position_block(names_sorted: list[str], label: str | None) -> Node:
    root = Node(tuple(names_sorted), [], label, None)
    stack = [root]
    while stack:
        node = stack.pop()
        k = len(node.members)
        if k == 1:
            continue
        cut = (k + 1) // 2
        left = Node(node.members[:cut], [], label, None)
        right = Node(node.members[cut:], [], label, None)
        node.children = [left, right]
        stack.extend((left, right))
    return root


def cluster_position(pos: PositionMap, block: BlockMap | None = None,
                     colnames: Sequence[str] | None = None) -> HierTree:
    """Recursive balanced binary partitioning of position-sorted variables.

    Each node splits into its first ceil(k/2) variables and the rest. With
    ``colnames`` the tree is restricted to those variables, which must all have
    a position.
    """
    positions = pos.as_dict()
    if colnames is None:
        colnames = [c for c, _ in pos.entries]
    missing = [c for c in colnames if c not in positions]
    if missing:
        raise UnknownColname(f"no position for {missing[0]!r}")
    check_unique_positions(PositionMap(tuple((c, positions[c]) for c in colnames)), block)
    nodes, labels = [], []
    for label, names in _grouped(colnames, block):
        names = sorted(names, key=lambda c: (positions[c], c))
        nodes.append(_position_block(names, label))
        labels.append(label)
    return _assemble(nodes, None if block is None else labels)
