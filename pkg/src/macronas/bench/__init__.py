"""Synthetic benchmarks: ground-truth oracles and target-label expressions."""

from .oracle import OracleParams, SyntheticOracle, label_dataset, make_synthetic_space
from .target import (
    Bin,
    Call,
    Num,
    TargetEvalError,
    TargetExpr,
    TargetSyntaxError,
    Unary,
    Var,
    eval_target,
    parse_target,
    print_target,
)

__all__ = [
    "OracleParams",
    "SyntheticOracle",
    "label_dataset",
    "make_synthetic_space",
    "TargetExpr",
    "Num",
    "Var",
    "Call",
    "Unary",
    "Bin",
    "TargetSyntaxError",
    "TargetEvalError",
    "parse_target",
    "eval_target",
    "print_target",
]
