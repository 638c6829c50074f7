"""Numerical substrate: autodiff tensors, differentiable ranking, AdamW."""

from .optim import OptimState, adamw_step
from .softrank import DegenerateTargetsError, soft_rank, soft_srcc, spearman
from .tensor import (
    NonFiniteError,
    ScatterPlan,
    Tensor,
    absolute,
    add,
    backward,
    concat_cols,
    constant,
    div,
    exp,
    leaky_relu,
    log,
    matmul,
    mul,
    neg,
    no_grad,
    parameter,
    power,
    reduce_mean,
    reduce_sum,
    relu,
    segment_mean,
    segment_sum,
    sqrt,
    sub,
    take_rows,
)

__all__ = [
    "Tensor",
    "NonFiniteError",
    "ScatterPlan",
    "DegenerateTargetsError",
    "OptimState",
    "adamw_step",
    "soft_rank",
    "soft_srcc",
    "spearman",
    "backward",
    "no_grad",
    "constant",
    "parameter",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "absolute",
    "relu",
    "leaky_relu",
    "exp",
    "log",
    "sqrt",
    "power",
    "reduce_sum",
    "reduce_mean",
    "concat_cols",
    "take_rows",
    "segment_sum",
    "segment_mean",
]
