import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from hdinfer.dataset import (BlockMap, Dataset, PositionMap, StudyCollection,
                             check_block_coverage, check_unique_positions, load_blocks,
                             load_dataset, load_positions, read_matrix, save_dataset,
                             save_two_column, validate_columns)
from hdinfer.errors import (DegenerateColumn, DimensionMismatch, DuplicateColname,
                            DuplicatePosition, MissingValue, NonBinaryResponse,
                            UnknownColname)


def write(path, text):
    path.write_text(text)
    return path


def test_smallest_file(tmp_path):
    x = write(tmp_path / "x.csv", "a,b\n1,2\n0,1\n2,2\n")
    y = write(tmp_path / "y.txt", "0.5\n1.5\n-1\n")
    d = load_dataset(x, y)
    assert (d.n, d.p) == (3, 2)
    assert d.colnames == ("a", "b")
    np.testing.assert_array_equal(d.x[:, 1], [2, 1, 2])


def test_empty_cell_is_missing(tmp_path):
    x = write(tmp_path / "x.csv", "a,b\n1,\n0,1\n2,2\n")
    y = write(tmp_path / "y.txt", "1\n2\n3\n")
    with pytest.raises(MissingValue):
        load_dataset(x, y)


def test_na_token_is_missing(tmp_path):
    x = write(tmp_path / "x.tsv", "a\tb\n1\tNA\n0\t1\n2\t2\n")
    y = write(tmp_path / "y.txt", "1\n2\n3\n")
    with pytest.raises(MissingValue):
        load_dataset(x, y)


def test_binomial_needs_01(tmp_path):
    x = write(tmp_path / "x.csv", "a\n1\n0\n2\n")
    y = write(tmp_path / "y.txt", "0\n1\n2\n")
    with pytest.raises(NonBinaryResponse):
        load_dataset(x, y, family="binomial")


def test_binomial_needs_both_classes():
    with pytest.raises(NonBinaryResponse):
        Dataset(np.zeros((10, 1)) + np.arange(10)[:, None], np.ones(10), ("a",), "binomial")


def test_tab_delimiter_and_header(tmp_path):
    names, x = read_matrix(write(tmp_path / "x.tsv", "SNP.1\tSNP.2\n0\t1\n1\t2\n"))
    assert names == ("SNP.1", "SNP.2")
    assert x.shape == (2, 2)


def test_duplicate_colnames():
    with pytest.raises(DuplicateColname):
        Dataset(np.eye(3), np.arange(3.0), ("a", "b", "a"))


def test_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        Dataset(np.eye(3), np.arange(4.0), ("a", "b", "c"))
    with pytest.raises(DimensionMismatch):
        Dataset(np.eye(3), np.arange(3.0), ("a", "b"))


def test_arrays_are_read_only():
    d = Dataset(np.eye(3), np.arange(3.0), ("a", "b", "c"))
    with pytest.raises(ValueError):
        d.x[0, 0] = 5.0


def test_indices():
    d = Dataset(np.eye(3), np.arange(3.0), ("a", "b", "c"))
    assert d.indices(["c", "a"]).tolist() == [2, 0]
    assert d.indices(["zz", "b"], strict=False).tolist() == [1]
    with pytest.raises(UnknownColname):
        d.indices(["zz"])


def _with_constant(rng):
    x = rng.integers(0, 3, size=(20, 4)).astype(float)
    x[:, 2] = 2.0
    return Dataset(x, rng.standard_normal(20), ("a", "b", "c", "d"))


def test_validate_drops_constant(rng):
    d2, rep = validate_columns(_with_constant(rng), drop_degenerate=True)
    assert rep.dropped == ["c"]
    assert d2.colnames == ("a", "b", "d")


def test_validate_identity(rng):
    d = Dataset(rng.standard_normal((20, 3)), rng.standard_normal(20), ("a", "b", "c"))
    d2, rep = validate_columns(d)
    assert d2 is d and rep.dropped == []


def test_validate_rejects_constant(rng):
    with pytest.raises(DegenerateColumn):
        validate_columns(_with_constant(rng))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_validate_idempotent(seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 3, size=(12, 6)).astype(float)
    x[:, rng.integers(6)] = 1.0
    d = Dataset(x, rng.standard_normal(12), tuple("abcdef"))
    d1, _ = validate_columns(d, drop_degenerate=True)
    d2, rep2 = validate_columns(d1, drop_degenerate=True)
    assert rep2.dropped == [] and d2.colnames == d1.colnames


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=25, deadline=None)
@given(x=hnp.arrays(float, st.tuples(st.integers(2, 12), st.integers(1, 5)), elements=finite),
       with_cl=st.booleans())
def test_roundtrip(tmp_path_factory, x, with_cl):
    tmp = tmp_path_factory.mktemp("rt")
    n, p = x.shape
    names = tuple(f"rs{j}_x.{j}" for j in range(p))
    y = np.linspace(-3, 3, n)
    cl = np.arange(n, dtype=float)[:, None] / 7 if with_cl else None
    d = Dataset(x, y, names, "gaussian", cl, ("age",) if with_cl else ())
    paths = [tmp / "x.csv", tmp / "y.txt", tmp / "c.csv" if with_cl else None]
    save_dataset(d, *paths)
    e = load_dataset(*paths)
    assert e.colnames == d.colnames
    np.testing.assert_allclose(e.x, d.x, rtol=0, atol=1e-12)
    np.testing.assert_allclose(e.y, d.y, rtol=0, atol=1e-12)
    if with_cl:
        assert e.clvar_names == ("age",)
        np.testing.assert_allclose(e.clvar, d.clvar, atol=1e-12)


def test_study_collection_union():
    a = Dataset(np.eye(3), np.arange(3.0), ("a", "b", "c"))
    b = Dataset(np.eye(2), np.arange(2.0), ("d", "b"))
    sc = StudyCollection((a, b))
    assert sc.colnames == ("a", "b", "c", "d")
    assert sc.sizes == [3, 2]


def test_positions_and_blocks(tmp_path):
    save_two_column(tmp_path / "p.tsv", ("snp", "pos"), [("a", 10), ("b", 20)])
    save_two_column(tmp_path / "b.tsv", ("snp", "chr"), [("a", "chr1"), ("b", "chr2")])
    pos, blk = load_positions(tmp_path / "p.tsv"), load_blocks(tmp_path / "b.tsv")
    assert pos.as_dict() == {"a": 10, "b": 20}
    assert blk.blocks() == ["chr1", "chr2"]
    check_block_coverage(blk, ["a", "b"])
    with pytest.raises(UnknownColname):
        check_block_coverage(blk, ["a", "c"])


def test_duplicate_position():
    with pytest.raises(DuplicatePosition):
        check_unique_positions(PositionMap((("a", 5), ("b", 5))), None)
    # the same position in different blocks is fine
    check_unique_positions(PositionMap((("a", 5), ("b", 5))),
                           BlockMap((("a", "1"), ("b", "2"))))
