"""Tensor-train numerics and multi-scale ergodic exploration."""

__version__ = "0.1.0"

from .tt import (
    ConvergenceError,
    DenseTensor,
    TtTensor,
    num_params,
    tt_add,
    tt_element,
    tt_from_dense,
    tt_gather,
    tt_hadamard,
    tt_inner,
    tt_inner3,
    tt_load,
    tt_norm,
    tt_random,
    tt_rank1,
    tt_round,
    tt_save,
    tt_scale,
    tt_to_dense,
    tt_zeros,
)
from .cross import CrossInfo, maxvol, tt_cross

__all__ = [
    "ConvergenceError",
    "CrossInfo",
    "DenseTensor",
    "TtTensor",
    "maxvol",
    "num_params",
    "tt_add",
    "tt_cross",
    "tt_element",
    "tt_from_dense",
    "tt_gather",
    "tt_hadamard",
    "tt_inner",
    "tt_inner3",
    "tt_load",
    "tt_norm",
    "tt_random",
    "tt_rank1",
    "tt_round",
    "tt_save",
    "tt_scale",
    "tt_to_dense",
    "tt_zeros",
]
