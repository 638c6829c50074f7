"""Rank-aligned graph predictors: model, training, evaluation, checkpoints."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .encoding import EncodedBatch, concat_batches, encode_graphs, encode_node_features
from .model import (
    ForwardResult,
    HopStats,
    PredictorConfig,
    PredictorModel,
    femlp_embed,
    forward_batch,
    gnn_forward,
    init_params,
)
from .train import TrainReport, batch_outputs, eval_srcc, predict, train

__all__ = [
    "PredictorConfig",
    "PredictorModel",
    "HopStats",
    "ForwardResult",
    "TrainReport",
    "femlp_embed",
    "gnn_forward",
    "forward_batch",
    "init_params",
    "train",
    "eval_srcc",
    "predict",
    "batch_outputs",
    "EncodedBatch",
    "encode_graphs",
    "encode_node_features",
    "concat_batches",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]
