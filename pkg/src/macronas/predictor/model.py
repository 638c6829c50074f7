"""Graph predictor: per-category feature embedder, attention message
passing with residual hops, per-hop pooled graph embeddings, and a
regression head.

The 0-hop node embedding concatenates one abs-scalar per feature category,
each produced by that category's own small feed-forward stack, so the
categories never interact at hop 0. Message passing layer m scores each
incoming edge (self-loop included) as a'.LeakyReLU(W_src.h_dst +
W_tgt.h_src), softmax-normalizes over the destination's incoming set,
sums the attention-weighted W_tgt.h_src messages, applies ReLU, and adds
the hop input back (projected once at hop 1 where the width changes).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .. import numerics as nm
from ..archspace import ArchGraph, FeatureSchema, SearchSpaceSpec, SpaceError
from .encoding import EncodedBatch, encode_graphs, encode_node_features

__all__ = ["PredictorConfig", "PredictorModel", "ForwardResult", "femlp_embed", "gnn_forward"]

LOSS_MODES = ("ranked", "mse_only", "mae_rank")


@dataclass(frozen=True)
class PredictorConfig:
    hops: int = 4
    hidden: int = 32
    aggregation: str = "mean"  # "mean" | "sum"
    loss: str = "ranked"  # "ranked" | "mse_only" | "mae_rank"
    target: str = "y"
    epochs: int = 200
    batch_size: int = 128
    lr: float = 1e-4
    weight_decay: float = 1e-5
    soft_rank_eps: float = 0.1
    standardize_rank_inputs: bool = True
    femlp_hidden: int = 16
    head_hidden: int = 32
    leaky_slope: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.hops < 1 or self.hidden < 1:
            raise ValueError("hops and hidden width must be >= 1")
        if self.aggregation not in ("mean", "sum"):
            raise ValueError(f"unknown aggregation '{self.aggregation}'")
        if self.loss not in LOSS_MODES:
            raise ValueError(f"unknown loss mode '{self.loss}'")
        if self.loss != "mse_only" and self.batch_size < 2:
            raise ValueError("rank losses need batch_size >= 2")
        if self.soft_rank_eps <= 0:
            raise ValueError("soft_rank_eps must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class HopStats:
    """Mean/std of node embedding norms per hop over a reference set."""

    mean: list[float]
    std: list[float]

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d) -> "HopStats":
        return cls(mean=[float(x) for x in d["mean"]], std=[float(x) for x in d["std"]])


@dataclass
class PredictorModel:
    config: PredictorConfig
    schema: FeatureSchema
    space_fingerprint: str
    params: dict[str, np.ndarray]
    label_mean: float = 0.0
    label_std: float = 1.0
    hop_stats: HopStats | None = None
    # Filled by compute_stage_label_stats via the scorer.
    stage_label_stats: dict = field(default_factory=dict)

    def param_names(self) -> list[str]:
        return sorted(self.params)

    def check_space(self, fingerprint: str) -> None:
        if fingerprint != self.space_fingerprint:
            raise SpaceError("graph does not belong to the model's search space")


def init_params(config: PredictorConfig, schema: FeatureSchema, rng) -> dict[str, np.ndarray]:
    """Uniform +-1/sqrt(fan_in) init, drawn in a fixed name order."""
    d = config.hidden
    params: dict[str, np.ndarray] = {}

    def u(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    for cat in schema:
        w_in = cat.encoded_width()
        h = config.femlp_hidden
        params[f"femlp.{cat.name}.w1"] = u((w_in, h), w_in)
        params[f"femlp.{cat.name}.b1"] = u((h,), w_in)
        params[f"femlp.{cat.name}.w2"] = u((h, 1), h)
        params[f"femlp.{cat.name}.b2"] = u((1,), h)
    width = len(schema)
    for m in range(1, config.hops + 1):
        params[f"gnn.{m}.w_src"] = u((width, d), width)
        params[f"gnn.{m}.w_tgt"] = u((width, d), width)
        params[f"gnn.{m}.att"] = u((d, 1), d)
        if width != d:
            params[f"gnn.{m}.proj"] = u((width, d), width)
        width = d
    params["head.w1"] = u((d, config.head_hidden), d)
    params["head.b1"] = u((config.head_hidden,), d)
    params["head.w2"] = u((config.head_hidden, 1), config.head_hidden)
    params["head.b2"] = u((1,), config.head_hidden)
    return params


@dataclass
class ForwardResult:
    """Per-hop embeddings and predictions for one encoded batch.

    All entries are `numerics.Tensor`; use `.data` for the raw arrays.
    `node_h[m]` is (num_nodes, width_m), `graph_h[m]` is (num_graphs,
    width_m), `graph_norms[m]` is the per-graph L1 norm column, and
    `pred_std` / `pred` are the standardized and label-unit predictions.
    """

    node_h: list
    graph_h: list
    graph_norms: list
    pred_std: nm.Tensor
    pred: nm.Tensor


def _segment_max_sorted(values: np.ndarray, starts: np.ndarray) -> np.ndarray:
    return np.maximum.reduceat(values, starts, axis=0)


def forward_batch(model: PredictorModel, batch: EncodedBatch, params=None) -> ForwardResult:
    """Run the predictor over an encoded batch.

    `params` may supply Tensor-wrapped parameters (the training loop passes
    trainable ones); by default the model's arrays run as constants.
    """
    if params is None:
        with nm.no_grad():
            return _forward(model, batch, {k: nm.constant(v) for k, v in model.params.items()})
    return _forward(model, batch, params)


def _forward(model: PredictorModel, batch: EncodedBatch, p) -> ForwardResult:
    cfg = model.config
    n = batch.num_nodes
    # FE-MLP: one abs scalar per category, no cross-category interaction.
    cols = []
    for cat, x in zip(model.schema, batch.cat_inputs):
        hidden = nm.relu(
            nm.add(nm.matmul(nm.constant(x), p[f"femlp.{cat.name}.w1"]), p[f"femlp.{cat.name}.b1"])
        )
        cols.append(nm.add(nm.matmul(hidden, p[f"femlp.{cat.name}.w2"]), p[f"femlp.{cat.name}.b2"]))
    h = nm.absolute(nm.concat_cols(cols))
    node_h = [h]
    src_plan = batch.plan("src")
    dst_plan = batch.plan("dst")
    for m in range(1, cfg.hops + 1):
        s = nm.matmul(h, p[f"gnn.{m}.w_src"])
        t = nm.matmul(h, p[f"gnn.{m}.w_tgt"])
        s_dst = nm.take_rows(s, batch.edge_dst, dst_plan)
        t_src = nm.take_rows(t, batch.edge_src, src_plan)
        scores = nm.matmul(nm.leaky_relu(nm.add(s_dst, t_src), cfg.leaky_slope), p[f"gnn.{m}.att"])
        # Softmax over each destination's incoming set; the shift constant
        # does not affect the value or the gradient.
        shift = _segment_max_sorted(scores.data, batch.dst_starts)
        z = nm.exp(nm.sub(scores, nm.constant(shift[batch.edge_dst])))
        denom = nm.segment_sum(z, batch.edge_dst, n, dst_plan)
        alpha = nm.div(z, nm.take_rows(denom, batch.edge_dst, dst_plan))
        msg = nm.segment_sum(nm.mul(alpha, t_src), batch.edge_dst, n, dst_plan)
        update = nm.relu(msg)
        proj_name = f"gnn.{m}.proj"
        residual = nm.matmul(h, p[proj_name]) if proj_name in p else h
        h = nm.add(update, residual)
        node_h.append(h)
    pool = nm.segment_mean if cfg.aggregation == "mean" else nm.segment_sum
    node_plan = batch.plan("node")
    graph_h = [pool(hm, batch.node_graph, batch.num_graphs, node_plan) for hm in node_h]
    graph_norms = [nm.reduce_sum(nm.absolute(g), axis=1, keepdims=True) for g in graph_h]
    hidden = nm.relu(nm.add(nm.matmul(graph_h[-1], p["head.w1"]), p["head.b1"]))
    pred_std = nm.add(nm.matmul(hidden, p["head.w2"]), p["head.b2"])
    pred = nm.add(nm.mul(pred_std, model.label_std), model.label_mean)
    return ForwardResult(
        node_h=node_h, graph_h=graph_h, graph_norms=graph_norms, pred_std=pred_std, pred=pred
    )


def femlp_embed(model: PredictorModel, features: dict) -> np.ndarray:
    """0-hop embedding of a single node's features (one entry per category)."""
    rows = encode_node_features(model.schema, features)
    out = np.zeros(len(rows))
    for i, (cat, row) in enumerate(zip(model.schema, rows)):
        w1 = model.params[f"femlp.{cat.name}.w1"]
        b1 = model.params[f"femlp.{cat.name}.b1"]
        w2 = model.params[f"femlp.{cat.name}.w2"]
        b2 = model.params[f"femlp.{cat.name}.b2"]
        hidden = np.maximum(row @ w1 + b1, 0.0)
        out[i] = abs(float(hidden @ w2 + b2))
    return out


def gnn_forward(model: PredictorModel, arch: ArchGraph) -> dict:
    """Full forward pass over one architecture.

    Returns per-hop node embeddings, per-hop graph embeddings, and the
    prediction in label units.
    """
    model.check_space(arch.space_fingerprint)
    batch = encode_graphs(model.schema, [arch])
    result = forward_batch(model, batch)
    return {
        "node_h": [t.data for t in result.node_h],
        "graph_h": [t.data[0] for t in result.graph_h],
        "prediction": float(result.pred.data[0, 0]),
    }
