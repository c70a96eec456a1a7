"""Exact Shapley values of database facts and constants for Boolean queries,
fixed-size generalized model counting, probabilistic evaluation, and the
reductions between them."""

from shapval.counting import (
    CountVector,
    fgmc,
    fgmc_vector,
    fgmc_vector_from_pqe,
    fgmc_via_fmc,
    fmc_vector,
    gmc,
    mc,
    pqe,
    sppqe_from_fgmc_vector,
)
from shapval.dbformat import dumps, load, loads
from shapval.query import parse_query
from shapval.relational import (
    Constant,
    Fact,
    PartitionedDatabase,
    ProbabilisticDatabase,
    Variable,
    fact,
)
from shapval.shapley import (
    ConstantPartition,
    QueryGame,
    max_shapley,
    shapley_all,
    shapley_constants,
    shapley_permutations,
    shapley_subsets,
    shapley_via_fgmc,
)

__version__ = "0.1.0"

__all__ = [
    "Constant", "ConstantPartition", "CountVector", "Fact", "PartitionedDatabase",
    "ProbabilisticDatabase", "QueryGame", "Variable", "dumps", "fact", "fgmc",
    "fgmc_vector", "fgmc_vector_from_pqe", "fgmc_via_fmc", "fmc_vector", "gmc",
    "load", "loads", "max_shapley", "mc", "parse_query", "pqe", "shapley_all",
    "shapley_constants", "shapley_permutations", "shapley_subsets",
    "shapley_via_fgmc", "sppqe_from_fgmc_vector",
]
