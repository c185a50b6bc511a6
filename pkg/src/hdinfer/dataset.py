"""Data model and text-file ingestion for single- and multi-study analyses."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DataValidationError,
    DegenerateColumn,
    DimensionMismatch,
    DuplicateColname,
    DuplicatePosition,
    MissingValue,
    NonBinaryResponse,
    UnknownColname,
)

FAMILIES = ("gaussian", "binomial")
MIN_OBS = 8  # smallest n with floor(n / 6) >= 1; enforced when splitting


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response, SNP design matrix and optional unpenalized control covariates.

    SNP codings are kept as reals and are never standardized. The intercept is
    not stored; every fitter adds its own.
    """

    x: np.ndarray
    y: np.ndarray
    colnames: tuple[str, ...]
    family: str = "gaussian"
    clvar: np.ndarray | None = None
    clvar_names: tuple[str, ...] = ()
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if x.ndim != 2:
            raise DimensionMismatch(f"x must be 2-d, got shape {x.shape}")
        clvar = self.clvar
        if clvar is not None:
            clvar = np.asarray(clvar, dtype=float)
            if clvar.ndim == 1:
                clvar = clvar[:, None]
            if clvar.shape[1] == 0:
                clvar = None
        names = tuple(str(c) for c in self.colnames)
        cl_names = tuple(str(c) for c in self.clvar_names)
        if clvar is not None and not cl_names:
            cl_names = tuple(f"clvar{k + 1}" for k in range(clvar.shape[1]))
        for key, val in (("x", x), ("y", y), ("clvar", clvar),
                         ("colnames", names), ("clvar_names", cl_names)):
            object.__setattr__(self, key, val)
        x.flags.writeable = False
        y.flags.writeable = False
        if self.check:
            self._validate()

    def _validate(self):
        n, p = self.x.shape
        if self.family not in FAMILIES:
            raise DataValidationError(f"unknown family {self.family!r}")
        if self.y.shape[0] != n:
            raise DimensionMismatch(f"y has {self.y.shape[0]} rows, x has {n}")
        if len(self.colnames) != p:
            raise DimensionMismatch(f"{len(self.colnames)} column names for {p} columns")
        if len(set(self.colnames)) != p:
            raise DuplicateColname(_first_duplicate(self.colnames))
        if not np.isfinite(self.x).all() or not np.isfinite(self.y).all():
            raise MissingValue("x or y contains missing or non-finite values")
        if self.clvar is not None:
            if self.clvar.shape[0] != n:
                raise DimensionMismatch(f"clvar has {self.clvar.shape[0]} rows, x has {n}")
            if len(self.clvar_names) != self.clvar.shape[1]:
                raise DimensionMismatch("clvar_names does not match clvar columns")
            if not np.isfinite(self.clvar).all():
                raise MissingValue("clvar contains missing values")
        if self.family == "binomial":
            if not np.isin(self.y, (0.0, 1.0)).all():
                raise NonBinaryResponse("binomial response must be coded 0/1")
            if self.y.min() == self.y.max():
                raise NonBinaryResponse("binomial response needs both classes")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @cached_property
    def col_index(self) -> dict[str, int]:
        return {c: j for j, c in enumerate(self.colnames)}

    def indices(self, names: Iterable[str], strict: bool = True) -> np.ndarray:
        """Column indices of `names`; unknown names raise unless strict=False."""
        lookup = self.col_index
        out = []
        for c in names:
            j = lookup.get(c)
            if j is None:
                if strict:
                    raise UnknownColname(f"unknown column {c!r}")
                continue
            out.append(j)
        return np.asarray(out, dtype=np.intp)

    def take_rows(self, rows: np.ndarray) -> "Dataset":
        """Row subset without re-validation (a half sample may lack a class)."""
        return Dataset(
            self.x[rows], self.y[rows], self.colnames, self.family,
            None if self.clvar is None else self.clvar[rows],
            self.clvar_names, check=False,
        )

    def take_columns(self, cols: Sequence[int]) -> "Dataset":
        cols = np.asarray(cols, dtype=np.intp)
        return Dataset(
            self.x[:, cols], self.y, tuple(self.colnames[j] for j in cols),
            self.family, self.clvar, self.clvar_names, check=self.check,
        )


@dataclass(frozen=True)
class StudyCollection:
    """Ordered studies analysed jointly. Order is meaningful and preserved."""

    studies: tuple[Dataset, ...]

    def __post_init__(self):
        studies = tuple(self.studies)
        if not studies:
            raise DataValidationError("a study collection needs at least one study")
        fams = {d.family for d in studies}
        if len(fams) != 1:
            raise DataValidationError(f"studies mix families {sorted(fams)}")
        object.__setattr__(self, "studies", studies)

    def __len__(self):
        return len(self.studies)

    def __iter__(self):
        return iter(self.studies)

    def __getitem__(self, i):
        return self.studies[i]

    @property
    def family(self) -> str:
        return self.studies[0].family

    @cached_property
    def colnames(self) -> tuple[str, ...]:
        """Union of column names, in order of first appearance."""
        seen: dict[str, None] = {}
        for d in self.studies:
            for c in d.colnames:
                seen.setdefault(c, None)
        return tuple(seen)

    @property
    def sizes(self) -> list[int]:
        return [d.n for d in self.studies]


# ---------------------------------------------------------------------------
# text I/O

def _sniff_delimiter(line: str) -> str:
    return "\t" if "\t" in line else ","


def _first_duplicate(names: Sequence[str]) -> str:
    seen = set()
    for c in names:
        if c in seen:
            return c
        seen.add(c)
    return ""


def _parse_float(tok: str, where: str) -> float:
    tok = tok.strip()
    if tok == "" or tok.upper() in ("NA", "NAN", "NULL", "."):
        raise MissingValue(f"missing value at {where}")
    try:
        val = float(tok)
    except ValueError:
        raise DataValidationError(f"non-numeric value {tok!r} at {where}") from None
    if not np.isfinite(val):
        raise MissingValue(f"non-finite value at {where}")
    return val


def read_matrix(path: str | Path) -> tuple[tuple[str, ...], np.ndarray]:
    """Read a delimited numeric matrix with a mandatory header row."""
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DimensionMismatch(f"{path}: empty file")
    delim = _sniff_delimiter(lines[0])
    rows = list(csv.reader(io.StringIO("\n".join(lines)), delimiter=delim))
    header = tuple(h.strip() for h in rows[0])
    if len(set(header)) != len(header):
        raise DuplicateColname(f"{path}: duplicate column {_first_duplicate(header)!r}")
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DimensionMismatch(
                f"{path}:{i}: {len(row)} fields, header has {len(header)}")
        for j, tok in enumerate(row):
            data[i - 2, j] = _parse_float(tok, f"{path}:{i} column {header[j]!r}")
    return header, data


def read_vector(path: str | Path) -> np.ndarray:
    """One value per line; a non-numeric first line is taken as a header."""
    path = Path(path)
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    if lines:
        try:
            float(lines[0])
        except ValueError:
            if lines[0] and lines[0].upper() not in ("NA", "NAN"):
                lines = lines[1:]
    return np.array([_parse_float(tok, f"{path}:{i + 1}") for i, tok in enumerate(lines)])


def load_dataset(x_path, y_path, clvar_path=None, family: str = "gaussian") -> Dataset:
    colnames, x = read_matrix(x_path)
    y = read_vector(y_path)
    clvar, cl_names = None, ()
    if clvar_path is not None:
        cl_names, clvar = read_matrix(clvar_path)
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"y has {y.shape[0]} values, x has {x.shape[0]} rows")
    return Dataset(x, y, colnames, family, clvar, cl_names)


def _write_matrix(path, names, data):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def save_dataset(d: Dataset, x_path, y_path, clvar_path=None) -> None:
    _write_matrix(x_path, d.colnames, d.x)
    with open(y_path, "w") as fh:
        fh.writelines(repr(float(v)) + "\n" for v in d.y)
    if d.clvar is not None:
        if clvar_path is None:
            raise ValueError("dataset has control covariates but no clvar_path given")
        _write_matrix(clvar_path, d.clvar_names, d.clvar)


def read_two_column(path: str | Path) -> list[tuple[str, str]]:
    """Two-column (colname, value) table with a header row."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        return []
    delim = _sniff_delimiter(lines[0])
    rows = list(csv.reader(io.StringIO("\n".join(lines)), delimiter=delim))
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DimensionMismatch(f"{path}:{i}: expected 2 fields, got {len(row)}")
        out.append((row[0].strip(), row[1].strip()))
    return out


@dataclass(frozen=True)
class PositionMap:
    entries: tuple[tuple[str, int], ...]

    def __post_init__(self):
        entries = tuple((str(c), int(pos)) for c, pos in self.entries)
        names = [c for c, _ in entries]
        if len(set(names)) != len(names):
            raise DuplicateColname(_first_duplicate(names))
        object.__setattr__(self, "entries", entries)

    def as_dict(self) -> dict[str, int]:
        return dict(self.entries)


@dataclass(frozen=True)
class BlockMap:
    entries: tuple[tuple[str, str], ...]

    def __post_init__(self):
        entries = tuple((str(c), str(b)) for c, b in self.entries)
        names = [c for c, _ in entries]
        if len(set(names)) != len(names):
            raise DuplicateColname(f"block map lists {_first_duplicate(names)!r} twice")
        object.__setattr__(self, "entries", entries)

    def as_dict(self) -> dict[str, str]:
        return dict(self.entries)

    def blocks(self) -> list[str]:
        """Block labels in order of first appearance."""
        return list(dict.fromkeys(b for _, b in self.entries))


def load_positions(path) -> PositionMap:
    out = []
    for c, v in read_two_column(path):
        try:
            out.append((c, int(float(v))))
        except ValueError:
            raise DataValidationError(f"{path}: position {v!r} for {c!r} is not an integer") from None
    return PositionMap(tuple(out))


def load_blocks(path) -> BlockMap:
    return BlockMap(tuple(read_two_column(path)))


def save_two_column(path, header: tuple[str, str], entries) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for c, v in entries:
            fh.write(f"{c}\t{v}\n")


def check_block_coverage(block: BlockMap, colnames: Iterable[str]) -> None:
    mapping = block.as_dict()
    missing = [c for c in colnames if c not in mapping]
    if missing:
        raise UnknownColname(f"{len(missing)} columns have no block, e.g. {missing[0]!r}")


def check_unique_positions(pos: PositionMap, block: BlockMap | None) -> None:
    lab = block.as_dict() if block is not None else {}
    seen: dict[tuple[str | None, int], str] = {}
    for c, p in pos.entries:
        key = (lab.get(c), p)
        if key in seen:
            raise DuplicatePosition(f"{c!r} and {seen[key]!r} share position {p}")
        seen[key] = c


@dataclass
class ColumnReport:
    dropped: list[str] = field(default_factory=list)


def validate_columns(d: Dataset, drop_degenerate: bool = False) -> tuple[Dataset, ColumnReport]:
    """Remove (or reject) zero-variance SNP columns."""
    sd = d.x.std(axis=0)
    constant = np.flatnonzero(sd == 0)
    report = ColumnReport([d.colnames[j] for j in constant])
    if constant.size == 0:
        return d, report
    if not drop_degenerate:
        raise DegenerateColumn(f"constant column(s): {', '.join(report.dropped[:5])}")
    keep = np.flatnonzero(sd != 0)
    return d.take_columns(keep), report
