import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdinfer.dataset import BlockMap, Dataset, PositionMap
from hdinfer.errors import TreeDatasetMismatch
from hdinfer.hiertest import (ClusterFinding, adjust, format_cluster, format_pvalue,
                              print_findings, test_hierarchy as run_hierarchy, traverse,
                              write_findings)
from hdinfer.hiertree import cluster_position, cluster_var
from hdinfer.simlab import gen_design, toy_study

from conftest import snp_names


def balanced_tree(p, blocks=None):
    pos = PositionMap(tuple((f"SNP.{k + 1}", k) for k in range(p)))
    return cluster_position(pos, blocks)


def test_adjust_root_is_raw():
    assert adjust(0.0123, 64, 64) == 0.0123


def test_adjust_depth_two_factor():
    assert adjust(0.01, 32, 64) == pytest.approx(0.02)


def test_adjust_clamped():
    assert adjust(0.4, 8, 64) == 1.0


def test_adjust_rejects_bad_size():
    with pytest.raises(ValueError):
        adjust(0.1, 0, 10)


def test_root_not_rejected():
    tree = balanced_tree(16)
    calls = []

    def pv(g):
        calls.append(g)
        return 0.2
    res = traverse(tree, pv, 0.05)
    assert len(calls) == 1 and res.findings == []
    rows = res.rows()
    assert len(rows) == 1 and rows[0].is_na and math.isnan(rows[0].p_adjusted)


def scripted(signal, p_total):
    """Raw p-value tiny for groups that contain a signal variable, else 0.5."""
    def pv(g):
        return 1e-6 * len(g) / p_total if signal.intersection(g) else 0.5
    return pv


def test_descends_to_singleton():
    tree = balanced_tree(32)
    res = traverse(tree, scripted({"SNP.7"}, 32), 0.05)
    assert [f.group for f in res.findings] == [("SNP.7",)]


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 64), st.integers(0, 2**32 - 1))
def test_monotone_and_disjoint(p, seed):
    rng = np.random.default_rng(seed)
    tree = balanced_tree(p)
    raw = {}

    def pv(g):
        return raw.setdefault(g, float(rng.uniform() ** 4))
    res = traverse(tree, pv, 0.05)
    parent_h = {id(tree.root): 0.0}
    for t in res.tested:
        assert t.p_hier >= parent_h[id(t.node)]
        assert t.p_hier >= t.p_adjusted
        for c in t.node.children:
            parent_h[id(c)] = t.p_hier
    seen = set()
    for f in res.findings:
        assert not seen.intersection(f.group)
        seen.update(f.group)
        assert f.p_adjusted <= 0.05


def test_na_rows_per_block():
    blk = BlockMap(tuple((f"SNP.{k + 1}", "chr1" if k < 8 else "chr2") for k in range(16)))
    tree = balanced_tree(16, blk)
    res = traverse(tree, scripted({"SNP.3"}, 16), 0.05)
    rows = res.rows()
    assert [(r.block, r.group) for r in rows] == [("chr1", ("SNP.3",)), ("chr2", ())]


def test_format_cluster():
    names = [f"SNP.{c}" for c in "abcdefghijkl"]
    assert format_cluster(names, 4) == "SNP.a, SNP.b, SNP.c, SNP.d, ... [8]"
    assert format_cluster(["SNP.x"], 4) == "SNP.x"
    assert format_cluster((), 4) == "NA"


def test_format_pvalue():
    assert format_pvalue(0.0312) == "0.0312000"
    assert format_pvalue(1.5e-7) == "1.500e-07"
    assert format_pvalue(float("nan")) == "NA"


def test_print_findings_table():
    rows = [ClusterFinding("chr1", ("SNP.1", "SNP.2"), 0.001),
            ClusterFinding("chr2", (), float("nan"))]
    text = print_findings(rows)
    lines = text.splitlines()
    assert lines[0].split() == ["block", "p.value", "significant.cluster"]
    assert lines[1].split() == ["1", "chr1", "0.0010000", "SNP.1,", "SNP.2"]
    assert lines[2].split() == ["2", "chr2", "NA", "NA"]


def test_write_findings():
    rows = [ClusterFinding(None, ("a", "b"), 0.01)]
    assert write_findings(rows) == "block\tp.value\tsignificant.cluster\nNA\t0.01\ta;b\n"


def test_tree_dataset_mismatch():
    d = Dataset(np.eye(10)[:, :3] + 0.0, np.arange(10.0), ("a", "b", "c"))
    tree = cluster_position(PositionMap((("a", 1), ("zz", 2))))
    with pytest.raises(TreeDatasetMismatch):
        run_hierarchy(d, tree, B=2, seed=0)


def test_end_to_end_finds_signal():
    d, blk, active = toy_study(n=200, p=120, blocks=2, s0=3, beta=2.0, seed=4)
    tree = cluster_var(d, blk)
    res = run_hierarchy(d, tree, B=20, seed=1)
    found = set().union(*(f.group for f in res.findings))
    assert set(active) <= found
    assert all(0 <= f.p_adjusted <= 0.05 for f in res.findings)


def test_threads_identical():
    d, blk, _ = toy_study(n=200, p=150, blocks=2, s0=4, beta=1.0, seed=5)
    tree = cluster_var(d, blk)
    a = run_hierarchy(d, tree, B=10, seed=9, threads=1)
    b = run_hierarchy(d, tree, B=10, seed=9, threads=4)
    assert write_findings(a) == write_findings(b)


def test_strong_singleton_small():
    """Short version of the acceptance check: beta=5 singleton, p=100, n=300."""
    hits = 0
    x = gen_design(300, 100, "block:0.5:10", [21, 0])
    tree = cluster_var(Dataset(x, np.zeros(300), snp_names(100)))
    for rep in range(10):
        rng = np.random.default_rng([21, rep])
        j = int(rng.integers(100))
        y = 5 * x[:, j] + rng.standard_normal(300)
        res = run_hierarchy(Dataset(x, y, snp_names(100)), tree, B=20, seed=rep)
        hits += (f"SNP.{j + 1}",) in [f.group for f in res.findings]
    assert hits >= 9
