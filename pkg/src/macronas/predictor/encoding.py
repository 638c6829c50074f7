"""Graph batches as flat numpy arrays for the vectorized forward pass."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..archspace import ArchGraph, FeatureSchema
from ..numerics import ScatterPlan

__all__ = ["EncodedBatch", "encode_node_features", "encode_graphs", "concat_batches"]


@dataclass
class EncodedBatch:
    """Concatenated node features and edges for a list of graphs.

    Nodes are stage-major per graph and graph-major overall, so
    `node_graph` is sorted. Edges include a self-loop per node and are
    sorted by destination; `dst_starts` are the reduceat boundaries of the
    destination groups (every node has at least its self-loop, so there is
    one group per node).
    """

    num_graphs: int
    num_nodes: int
    cat_inputs: list[np.ndarray]
    edge_src: np.ndarray
    edge_dst: np.ndarray
    dst_starts: np.ndarray
    node_graph: np.ndarray
    _plans: dict = field(default_factory=dict, repr=False)

    def plan(self, which: str) -> ScatterPlan:
        """Reusable scatter layouts for the hot gather/scatter indices."""
        if which not in self._plans:
            index, rows = {
                "src": (self.edge_src, self.num_nodes),
                "dst": (self.edge_dst, self.num_nodes),
                "node": (self.node_graph, self.num_graphs),
            }[which]
            self._plans[which] = ScatterPlan(index, rows)
        return self._plans[which]


def encode_node_features(schema: FeatureSchema, features: dict) -> list[np.ndarray]:
    """Per-category model inputs for one node (one-hot / scaled scalar)."""
    rows = []
    for cat in schema:
        if cat.kind == "categorical":
            row = np.zeros(len(cat.choices))
            row[cat.choices.index(features[cat.name])] = 1.0
        else:
            row = np.array([(float(features[cat.name]) - cat.lo) / (cat.hi - cat.lo)])
        rows.append(row)
    return rows


def encode_graphs(schema: FeatureSchema, graphs: list[ArchGraph]) -> EncodedBatch:
    widths = [c.encoded_width() for c in schema]
    total_nodes = sum(g.num_nodes for g in graphs)
    cat_inputs = [np.zeros((total_nodes, w)) for w in widths]
    node_graph = np.zeros(total_nodes, dtype=np.intp)
    src_list: list[int] = []
    dst_list: list[int] = []
    offset = 0
    for gi, g in enumerate(graphs):
        n = g.num_nodes
        node_graph[offset : offset + n] = gi
        for k, feats in enumerate(g.node_features):
            for ci, row in enumerate(encode_node_features(schema, feats)):
                cat_inputs[ci][offset + k] = row
        incoming: list[list[int]] = [[i] for i in range(n)]
        for s, d in g.edges:
            incoming[d].append(s)
        for d in range(n):
            for s in incoming[d]:
                src_list.append(offset + s)
                dst_list.append(offset + d)
        offset += n
    edge_src = np.asarray(src_list, dtype=np.intp)
    edge_dst = np.asarray(dst_list, dtype=np.intp)
    dst_starts = np.flatnonzero(np.r_[True, edge_dst[1:] != edge_dst[:-1]])
    return EncodedBatch(
        num_graphs=len(graphs),
        num_nodes=total_nodes,
        cat_inputs=cat_inputs,
        edge_src=edge_src,
        edge_dst=edge_dst,
        dst_starts=dst_starts,
        node_graph=node_graph,
    )


def concat_batches(batches: list[EncodedBatch]) -> EncodedBatch:
    """Merge pre-encoded batches; used to assemble training mini-batches."""
    if len(batches) == 1:
        return batches[0]
    num_cats = len(batches[0].cat_inputs)
    cat_inputs = [
        np.concatenate([b.cat_inputs[ci] for b in batches], axis=0) for ci in range(num_cats)
    ]
    node_off = np.cumsum([0] + [b.num_nodes for b in batches])
    graph_off = np.cumsum([0] + [b.num_graphs for b in batches])
    edge_src = np.concatenate([b.edge_src + node_off[i] for i, b in enumerate(batches)])
    edge_dst = np.concatenate([b.edge_dst + node_off[i] for i, b in enumerate(batches)])
    edge_off = np.cumsum([0] + [len(b.edge_src) for b in batches])
    dst_starts = np.concatenate([b.dst_starts + edge_off[i] for i, b in enumerate(batches)])
    node_graph = np.concatenate([b.node_graph + graph_off[i] for i, b in enumerate(batches)])
    return EncodedBatch(
        num_graphs=int(graph_off[-1]),
        num_nodes=int(node_off[-1]),
        cat_inputs=cat_inputs,
        edge_src=edge_src,
        edge_dst=edge_dst,
        dst_starts=dst_starts,
        node_graph=node_graph,
    )
