"""Tensor-train machine learning estimator.

Discretizes a labeled dataset's feature space onto a threshold grid,
initializes a low-rank tensor train from a tree-ensemble surrogate via
cross approximation, and refines it by Riemannian conjugate gradient
tensor completion.
"""

from .tt import (
    CPTensor,
    TensorTrain,
    batch_entries,
    cp_to_tt,
    hosvd_truncate,
    orthogonalize,
    random_tt,
    tt_axpy,
    tt_entry,
    tt_inner,
    tt_norm,
    tt_to_dense,
    zero_tt,
)
from .flops import flop_estimate

__all__ = [
    "CPTensor",
    "TensorTrain",
    "batch_entries",
    "cp_to_tt",
    "flop_estimate",
    "hosvd_truncate",
    "orthogonalize",
    "random_tt",
    "tt_axpy",
    "tt_entry",
    "tt_inner",
    "tt_norm",
    "tt_to_dense",
    "zero_tt",
]

__version__ = "0.1.0"
