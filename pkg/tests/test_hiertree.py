import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import squareform

from hdinfer import _cd
from hdinfer.dataset import BlockMap, Dataset, PositionMap, StudyCollection
from hdinfer.errors import DataValidationError, DuplicatePosition
from hdinfer.hiertree import (HierTree, average_linkage_merges, cluster_position,
                              cluster_var, correlation)
from hdinfer.simlab import gen_design

from conftest import snp_names


def as_data(x, names=None):
    return Dataset(x, np.zeros(x.shape[0]), names or snp_names(x.shape[1]))


def sets(nodes):
    return {frozenset(n.members) for n in nodes}


def assert_heights_monotone(tree):
    for node, _ in tree.walk():
        for c in node.children:
            if node.height is not None and c.height is not None:
                assert c.height <= node.height


def test_two_perfect_pairs(rng):
    a, b = rng.standard_normal(50), rng.standard_normal(50)
    b -= a * (a @ b) / (a @ a)  # exactly uncorrelated with a after centering
    a -= a.mean()
    b -= b.mean()
    b -= a * (a @ b) / (a @ a)
    x = np.column_stack([a, b, 2 * a + 1, -b])
    tree = cluster_var(as_data(x, ("v1", "v2", "v3", "v4")))
    assert sets(tree.root.children) == {frozenset({"v1", "v3"}), frozenset({"v2", "v4"})}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
def test_partition_invariant_var(seed, p):
    x = gen_design(60, p, "block:0.6:5", seed)
    x[0, :] = np.arange(p) % 3  # keep every column non-constant
    x[1, :] = (np.arange(p) + 1) % 3
    tree = cluster_var(as_data(x))
    tree.check()
    assert sorted(tree.root.members) == sorted(snp_names(p))
    assert all(len(n.members) == 1 for n, _ in tree.walk() if n.is_leaf)
    assert_heights_monotone(tree)


def test_planted_blocks_recovered():
    hits = 0
    C = np.full((8, 8), 0.0)
    C[:4, :4] = C[4:, 4:] = 0.8
    np.fill_diagonal(C, 1.0)
    L = np.linalg.cholesky(C)
    for rep in range(100):
        z = np.random.default_rng([3, rep]).standard_normal((500, 8)) @ L.T
        tree = cluster_var(as_data(z, tuple("abcdefgh")))
        hits += sets(tree.root.children) == {frozenset("abcd"), frozenset("efgh")}
    assert hits >= 95


def test_equidistant_tie():
    D = np.ones((3, 3)) - np.eye(3)
    merges = average_linkage_merges(D, ["c", "b", "a"])
    assert set(merges[0][0] + merges[0][1]) == {"a", "b"}


def test_duplicates_merge_first(rng):
    x = rng.integers(0, 3, size=(80, 6)).astype(float)
    x[:, 4] = x[:, 1]
    x[:, 5] = x[:, 1]
    D = 1 - correlation(x) ** 2
    merges = average_linkage_merges(D, snp_names(6))
    first_two = set(merges[0][0] + merges[0][1] + merges[1][0] + merges[1][1])
    assert first_two == {"SNP.2", "SNP.5", "SNP.6"}
    assert merges[0][2] == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    x = gen_design(40, 12, "block:0.5:4", seed)
    x[0, :] = np.arange(12) % 3
    names = snp_names(12)
    perm = rng.permutation(12)
    a = cluster_var(as_data(x, names)).to_text()
    b = cluster_var(as_data(x[:, perm], tuple(names[k] for k in perm))).to_text()
    assert a == b


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 30))
def test_heights_match_scipy(seed, p):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((p, 3))
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    merges, heights, sizes = _cd.average_linkage(D)
    ref = linkage(squareform(D, checks=False), method="average")
    np.testing.assert_allclose(heights, ref[:, 2], rtol=1e-10, atol=1e-12)
    assert np.all(np.diff(heights) >= -1e-12)
    assert sizes[-1] == p


def test_blocks_under_root(rng):
    x = rng.integers(0, 3, size=(50, 6)).astype(float)
    blk = BlockMap(tuple((c, "chr1" if j < 4 else "chr2") for j, c in enumerate(snp_names(6))))
    tree = cluster_var(as_data(x), blk)
    assert tree.blocks == ["chr1", "chr2"]
    assert [c.block for c in tree.root.children] == ["chr1", "chr2"]
    assert tree.root.block is None
    tree.check()


def test_singleton_block_warns(rng):
    x = rng.integers(0, 3, size=(50, 3)).astype(float)
    blk = BlockMap((("SNP.1", "a"), ("SNP.2", "a"), ("SNP.3", "b")))
    with pytest.warns(UserWarning, match="single variable"):
        tree = cluster_var(as_data(x), blk)
    assert tree.root.children[1].is_leaf


def test_studies_with_missing_columns(rng):
    x1 = rng.integers(0, 3, size=(40, 4)).astype(float)
    x2 = rng.integers(0, 3, size=(30, 3)).astype(float)
    s = StudyCollection((as_data(x1, ("a", "b", "c", "d")), as_data(x2, ("b", "c", "e"))))
    tree = cluster_var(s)
    tree.check()
    assert sorted(tree.colnames) == ["a", "b", "c", "d", "e"]


def test_pairwise_complete_correlation(rng):
    X = rng.standard_normal((30, 3))
    Xn = X.copy()
    Xn[:5, 0] = np.nan
    r = correlation(Xn)
    ref = np.corrcoef(X[5:, 0], X[5:, 1])[0, 1]
    assert r[0, 1] == pytest.approx(ref, abs=1e-12)
    assert r[1, 2] == pytest.approx(np.corrcoef(X[:, 1], X[:, 2])[0, 1], abs=1e-12)


def positions(n, start=10, step=10):
    return PositionMap(tuple((f"s{k}", start + step * k) for k in range(n)))


def test_position_four():
    tree = cluster_position(positions(4))
    assert [c.members for c in tree.root.children] == [("s0", "s1"), ("s2", "s3")]
    assert all(g.is_leaf for c in tree.root.children for g in c.children)


def test_position_five():
    tree = cluster_position(positions(5))
    assert [len(c) for c in tree.root.children] == [3, 2]


def test_position_depth():
    pos = positions(1000)
    blk = BlockMap(tuple((f"s{k}", "1" if k < 500 else "2") for k in range(1000)))
    tree = cluster_position(pos, blk)
    for b in tree.root.children:
        assert HierTree(b).depth() - 1 == 9


def test_position_order_only(rng):
    base = rng.permutation(50) * 3 + 1
    a = PositionMap(tuple((f"s{k}", int(v)) for k, v in enumerate(base)))
    b = PositionMap(tuple((f"s{k}", int(v) ** 2 + 7) for k, v in enumerate(base)))
    assert cluster_position(a).to_text() == cluster_position(b).to_text()


def test_position_duplicate():
    with pytest.raises(DuplicatePosition):
        cluster_position(PositionMap((("a", 1), ("b", 1))))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.integers(1, 4))
def test_position_invariants(n, nb):
    blk = BlockMap(tuple((f"s{k}", str(k * nb // n)) for k in range(n)))
    tree = cluster_position(positions(n), blk)
    tree.check()
    for node, _ in tree.walk():
        if node.children and node.block is not None:
            k = len(node)
            assert len(node.children[0]) == (k + 1) // 2


def test_serialization_roundtrip(rng, tmp_path):
    x = gen_design(60, 20, "block:0.5:5", 1)
    blk = BlockMap(tuple((c, "chrom 1" if j < 9 else "chrom 2")
                         for j, c in enumerate(snp_names(20))))
    tree = cluster_var(as_data(x), blk)
    tree.save(tmp_path / "t.txt")
    back = HierTree.load(tmp_path / "t.txt")
    assert back.to_text() == tree.to_text()
    assert back.blocks == ["chrom 1", "chrom 2"]
    assert back.leaves() == tree.leaves()


def test_bad_tree_file():
    with pytest.raises(DataValidationError):
        HierTree.from_text("not a tree\n")
    with pytest.raises(DataValidationError):
        HierTree.from_text("# hdinfer-tree 1\n* \t\t\n  * \t\ta\n      * \t\tb\n")
