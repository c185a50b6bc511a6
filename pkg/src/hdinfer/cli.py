"""Command-line interface: cluster, test, r2 and simulate.

Exit codes: 0 success, 2 usage, 3 data validation, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataset import (Dataset, StudyCollection, load_blocks, load_dataset, load_positions,
                      read_matrix)
from .errors import DataValidationError, HdInferError, NumericError
from .hiertest import print_findings, test_hierarchy, write_findings
from .hiertree import HierTree, cluster_position, cluster_var
from .meta import METHODS
from .multisplit import DEFAULT_B, make_splits
from .simlab import ScenarioError, load_scenario, run_experiment
from .varexpl import compute_r2

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4
THREADS_ENV = "HDINFER_THREADS"


class UsageError(Exception):
    pass


def _threads(args) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return max(1, args.threads)


def read_manifest(path) -> list[tuple[str, str, str | None]]:
    """One study per line: x path, y path and an optional clvar path,
    separated by whitespace. Relative paths resolve against the manifest."""
    base = Path(path).parent
    studies = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise UsageError(f"{path}:{lineno}: expected 'x y [clvar]', got {len(parts)} fields")
        resolved = [str(base / p) for p in parts]
        studies.append((resolved[0], resolved[1], resolved[2] if len(parts) == 3 else None))
    if not studies:
        raise UsageError(f"{path}: no studies listed")
    return studies


def _load_data(args):
    if args.studies:
        if args.x or args.y:
            raise UsageError("--studies cannot be combined with --x/--y")
        return StudyCollection(tuple(load_dataset(x, y, cl, args.family)
                                     for x, y, cl in read_manifest(args.studies)))
    if not (args.x and args.y):
        raise UsageError("--x and --y are required (or --studies)")
    return load_dataset(args.x, args.y, args.clvar, args.family)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_cluster(args) -> int:
    block = load_blocks(args.block) if args.block else None
    if args.method == "position":
        if not args.position:
            raise UsageError("--method position requires --position")
        colnames = read_matrix(args.x)[0] if args.x else None
        tree = cluster_position(load_positions(args.position), block, colnames)
    else:
        if not args.x:
            raise UsageError("--method var requires --x")
        names, x = read_matrix(args.x)
        # the response is irrelevant for clustering; a placeholder keeps Dataset happy
        data = Dataset(x, np.arange(x.shape[0], dtype=float), names)
        tree = cluster_var(data, block, threads=_threads(args))
    _emit(tree.to_text(), args.out)
    return 0


def cmd_test(args) -> int:
    data = _load_data(args)
    tree = HierTree.load(args.tree)
    result = test_hierarchy(data, tree, B=args.B, seed=args.seed, alpha=args.alpha,
                            gamma_min=args.gamma_min, meta_method=args.agg,
                            threads=_threads(args))
    if args.out:
        _emit(write_findings(result), args.out)
    sys.stdout.write(print_findings(result, args.n_terms))
    return 0


def cmd_r2(args) -> int:
    data = _load_data(args)
    if isinstance(data, StudyCollection):
        raise UsageError("r2 works on a single dataset")
    cluster = None
    if args.cluster is not None:
        cluster = [c.strip() for c in args.cluster.split(";") if c.strip()]
        data.indices(cluster)  # UnknownColname for typos
    r2 = compute_r2(data, cluster, make_splits(data.n, args.B, args.seed))
    sys.stdout.write(f"{r2!r}\n")
    return 0


def cmd_simulate(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except ScenarioError as e:
        raise UsageError(f"{args.scenario}: {e}") from None
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    if args.R is not None:
        sc = replace(sc, R=args.R)
    report = run_experiment(sc, workers=_threads(args))
    _emit(report.to_csv(), args.out)
    return 0


def _add_data_args(p):
    p.add_argument("--x", help="design matrix (header row of column names)")
    p.add_argument("--y", help="response vector")
    p.add_argument("--clvar", help="control covariates, never penalized or tested")
    p.add_argument("--studies", help="manifest: one 'x y [clvar]' line per study")
    p.add_argument("--family", choices=("gaussian", "binomial"), default="gaussian")
    p.add_argument("--B", type=int, default=DEFAULT_B, help="number of sample splits")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdinfer",
                                 description="Hierarchical inference for high-dimensional regression.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("cluster", help="build a hierarchical tree of the variables")
    c.add_argument("--method", choices=("var", "position"), default="var")
    c.add_argument("--x")
    c.add_argument("--block", help="two-column file: variable, block label")
    c.add_argument("--position", help="two-column file: variable, integer position")
    c.add_argument("--out")
    c.add_argument("--threads", type=int, default=1)
    c.set_defaults(func=cmd_cluster)

    t = sub.add_parser("test", help="hierarchical testing of a tree")
    _add_data_args(t)
    t.add_argument("--tree", required=True)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--gamma-min", type=float, default=0.05)
    t.add_argument("--agg", choices=METHODS, default="tippett")
    t.add_argument("--n-terms", type=int, default=5)
    t.add_argument("--out", help="also write the findings as a tab-delimited table")
    t.set_defaults(func=cmd_test)

    r = sub.add_parser("r2", help="explained variance of a cluster")
    _add_data_args(r)
    r.add_argument("--cluster", help="';'-separated variable names (default: all)")
    r.set_defaults(func=cmd_r2)

    s = sub.add_parser("simulate", help="run a simulation scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--R", type=int, help="override the number of replicates")
    s.add_argument("--threads", type=int, default=1, help="worker processes")
    s.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"hdinfer: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataValidationError, FileNotFoundError) as e:
        print(f"hdinfer: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"hdinfer: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except HdInferError as e:
        print(f"hdinfer: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
