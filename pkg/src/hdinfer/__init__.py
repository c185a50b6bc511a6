"""Hierarchical inference for high-dimensional (generalized) linear models.

Lasso screening on random half samples, multi sample splitting p-values,
top-down testing of a variable hierarchy with familywise error control, and
aggregation of p-values across studies.
"""
from .dataset import Dataset, StudyCollection, load_dataset
from .errors import DataValidationError, HdInferError, NumericError
from .hiertest import HierResult, print_findings, test_hierarchy
from .hiertree import HierTree, cluster_position, cluster_var
from .meta import pool_studies, stouffer, tippett
from .multisplit import GammaConfig, MultiSplit, aggregate_pvalues, make_splits
from .screening import fit_lasso_path
from .varexpl import compute_r2

__version__ = "0.1.0"

__all__ = [
    "Dataset", "StudyCollection", "load_dataset", "HdInferError", "DataValidationError",
    "NumericError", "HierResult", "print_findings", "test_hierarchy", "HierTree",
    "cluster_position", "cluster_var", "pool_studies", "stouffer", "tippett",
    "GammaConfig", "MultiSplit", "aggregate_pvalues", "make_splits", "fit_lasso_path",
    "compute_r2",
]
