"""Importance scores for stage subgraphs and node feature choices.

A stage subgraph is scored in isolation: its layers (carrying their true
stage/layer positional features) run through the trained predictor as a
standalone sequence, and the raw score is the L1 norm of the terminal
node's embedding at hop l-1, whose receptive field covers the whole
subgraph. Raw norms are only comparable within one hop level, so tables
are built in one of two normalization modes:

shifted: affine-map the norm from the hop's norm distribution onto the
  label distribution of architectures whose stage u has l layers
  ((norm - mu_h) * sigma_y / sigma_h + mu_y). Needs per-(u, l) label
  statistics with enough samples.
zscore: standardize within each (stage, hop) group. `score_subgraph`
  standardizes against the model's stored hop statistics; a full table
  standardizes against the enumerated group itself, which makes every
  per-stage-per-hop score column exactly zero-mean unit-std.

Ensembles combine per-model scores with weights proportional to each
model's held-out rank correlation at the subgraph's hop level, clamped at
zero and normalized per hop.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .archspace import (
    DatasetRecord,
    ModuleSubgraph,
    SearchSpaceSpec,
    SpaceError,
    count_stage_subgraphs,
    enumerate_stage_subgraphs,
)
from .predictor import PredictorModel, forward_batch
from .predictor.encoding import EncodedBatch, encode_node_features
from .predictor.model import HopStats

__all__ = [
    "HopStats",
    "StageLabelStats",
    "ScoreRow",
    "ScoreTable",
    "EnsembleWeights",
    "ScoringError",
    "compute_hop_stats",
    "compute_stage_label_stats",
    "shift_norm",
    "score_subgraph",
    "build_score_table",
    "feature_importance",
    "write_table_csv",
    "read_table_csv",
]

DEFAULT_COUNT_FLOOR = 30
TABLE_FORMAT = "macronas-table/1"


class ScoringError(ValueError):
    pass


# ---------------------------------------------------------------------------
# statistics


def compute_hop_stats(model: PredictorModel, spec: SearchSpaceSpec, records) -> HopStats:
    """Node-embedding-norm mean/std per hop over a reference set.

    The result is stored on the model (checkpoints carry it) and returned.
    """
    archs = [r.arch if isinstance(r, DatasetRecord) else r for r in records]
    if not archs:
        raise ScoringError("empty reference set")
    hops = model.config.hops
    sums = np.zeros(hops + 1)
    sqsums = np.zeros(hops + 1)
    count = 0
    for lo in range(0, len(archs), 512):
        chunk = archs[lo : lo + 512]
        batch = _encode_archs(model, spec, chunk)
        result = forward_batch(model, batch)
        for m, h in enumerate(result.node_h):
            norms = np.abs(h.data).sum(axis=1)
            sums[m] += norms.sum()
            sqsums[m] += (norms * norms).sum()
        count += batch.num_nodes
    mean = sums / count
    var = np.maximum(sqsums / count - mean * mean, 0.0)
    model.hop_stats = HopStats(mean=mean.tolist(), std=np.sqrt(var).tolist())
    return model.hop_stats


def _encode_archs(model, spec, archs) -> EncodedBatch:
    from .predictor.encoding import encode_graphs

    for a in archs:
        model.check_space(a.space_fingerprint)
    return encode_graphs(model.schema, archs)


@dataclass
class StageLabelStats:
    """Label mean/std per (stage, layer-count) group of a training set.

    Groups under the sample-count floor, or with zero spread, are flagged
    unusable; the shifted-score path refuses them and suggests zscore mode.
    """

    entries: dict[tuple[int, int], dict] = field(default_factory=dict)
    floor: int = DEFAULT_COUNT_FLOOR

    def get(self, u: int, l: int) -> dict:
        try:
            return self.entries[(u, l)]
        except KeyError:
            raise ScoringError(f"no label statistics for stage {u} with {l} layers") from None

    def usable(self, u: int, l: int) -> bool:
        e = self.entries.get((u, l))
        return e is not None and e["count"] >= self.floor and e["std"] > 0.0


def compute_stage_label_stats(
    records: list[DatasetRecord],
    spec: SearchSpaceSpec,
    target: str = "y",
    floor: int = DEFAULT_COUNT_FLOOR,
) -> StageLabelStats:
    if not records:
        raise ScoringError("empty training set")
    groups: dict[tuple[int, int], list[float]] = {}
    for r in records:
        label = float(r.metrics[target])
        for u, types in enumerate(r.arch.stage_types, start=1):
            groups.setdefault((u, len(types)), []).append(label)
    entries = {}
    for key, values in sorted(groups.items()):
        arr = np.asarray(values)
        entries[key] = {
            "mean": float(arr.mean()),
            "std": float(arr.std()),
            "count": int(len(arr)),
        }
    return StageLabelStats(entries=entries, floor=floor)


def shift_norm(
    norm: float,
    m: int,
    u: int,
    l: int,
    hop_stats: HopStats,
    label_stats: StageLabelStats,
) -> float:
    """Affine remap of a hop-m node norm onto the (u, l) label distribution."""
    if l != m + 1:
        raise ScoringError(f"hop {m} scores subgraphs of {m + 1} layers, not {l}")
    if not label_stats.usable(u, l):
        raise ScoringError(
            f"label statistics for (u={u}, l={l}) unusable "
            f"(need >= {label_stats.floor} samples and nonzero spread); "
            "consider zscore mode"
        )
    sigma_h = hop_stats.std[m]
    if sigma_h == 0.0:
        raise ScoringError(f"hop {m} norm spread is zero")
    e = label_stats.get(u, l)
    return (float(norm) - hop_stats.mean[m]) * (e["std"] / sigma_h) + e["mean"]


# ---------------------------------------------------------------------------
# subgraph scoring


def _encode_subgraphs(model: PredictorModel, spec: SearchSpaceSpec, subgraphs) -> EncodedBatch:
    """Encode isolated stage subgraphs (true positional features) as a batch."""
    schema = model.schema
    widths = [c.encoded_width() for c in schema]
    total = sum(sg.num_layers for sg in subgraphs)
    cat_inputs = [np.zeros((total, w)) for w in widths]
    node_graph = np.zeros(total, dtype=np.intp)
    src: list[int] = []
    dst: list[int] = []
    offset = 0
    for gi, sg in enumerate(subgraphs):
        for layer, t in enumerate(sg.types, start=1):
            feats = spec.node_features(t, sg.u, layer)
            for ci, row in enumerate(encode_node_features(schema, feats)):
                cat_inputs[ci][offset + layer - 1] = row
        n = sg.num_layers
        node_graph[offset : offset + n] = gi
        for d in range(n):
            src.append(offset + d)
            dst.append(offset + d)
            if d > 0:
                src.append(offset + d - 1)
                dst.append(offset + d)
        offset += n
    edge_src = np.asarray(src, dtype=np.intp)
    edge_dst = np.asarray(dst, dtype=np.intp)
    # Edges were appended self-loop first then predecessor, grouped by
    # destination, so edge_dst is already sorted.
    dst_starts = np.flatnonzero(np.r_[True, edge_dst[1:] != edge_dst[:-1]])
    return EncodedBatch(
        num_graphs=len(subgraphs),
        num_nodes=total,
        cat_inputs=cat_inputs,
        edge_src=edge_src,
        edge_dst=edge_dst,
        dst_starts=dst_starts,
        node_graph=node_graph,
    )


def raw_subgraph_norms(model: PredictorModel, spec: SearchSpaceSpec, subgraphs) -> np.ndarray:
    """Terminal-node embedding norm at hop l-1 for each subgraph."""
    subgraphs = list(subgraphs)
    out = np.zeros(len(subgraphs))
    for lo in range(0, len(subgraphs), 2048):
        chunk = subgraphs[lo : lo + 2048]
        hop_needed = max(sg.num_layers for sg in chunk) - 1
        if hop_needed > model.config.hops:
            raise ScoringError(
                f"subgraph needs hop {hop_needed} but the model has {model.config.hops}"
            )
        batch = _encode_subgraphs(model, spec, chunk)
        result = forward_batch(model, batch)
        sizes = np.array([sg.num_layers for sg in chunk])
        terminal = np.cumsum(sizes) - 1
        for i, sg in enumerate(chunk):
            h = result.node_h[sg.num_layers - 1].data
            out[lo + i] = np.abs(h[terminal[i]]).sum()
    return out


def score_subgraph(
    model: PredictorModel,
    spec: SearchSpaceSpec,
    subgraph: ModuleSubgraph,
    mode: str = "shifted",
    label_stats: StageLabelStats | None = None,
) -> float:
    """Importance score of one stage subgraph under the given mode.

    Both modes standardize against the model's stored hop statistics;
    shifted mode additionally remaps onto the (u, l) label distribution.
    """
    if mode not in ("shifted", "zscore", "raw"):
        raise ScoringError(f"unknown scoring mode '{mode}'")
    raw = float(raw_subgraph_norms(model, spec, [subgraph])[0])
    if mode == "raw":
        return raw
    if model.hop_stats is None:
        raise ScoringError("model has no hop statistics; run compute_hop_stats first")
    m = subgraph.num_layers - 1
    if mode == "zscore":
        sigma = model.hop_stats.std[m]
        if sigma == 0.0:
            raise ScoringError(f"hop {m} norm spread is zero")
        return (raw - model.hop_stats.mean[m]) / sigma
    if label_stats is None:
        label_stats = StageLabelStats(entries=model.stage_label_stats)
    return shift_norm(raw, m, subgraph.u, subgraph.num_layers, model.hop_stats, label_stats)


# ---------------------------------------------------------------------------
# score tables


@dataclass(frozen=True)
class ScoreRow:
    u: int
    subgraph_id: str
    choice_indices: tuple[int, ...]
    types: tuple[str, ...]
    hop: int
    raw_norm: float
    score: float


@dataclass
class ScoreTable:
    space_fingerprint: str
    mode: str
    stages: dict[int, list[ScoreRow]]
    provenance: dict = field(default_factory=dict)

    def stage_rows(self, u: int) -> list[ScoreRow]:
        try:
            return self.stages[u]
        except KeyError:
            raise ScoringError(f"table has no stage {u}") from None

    def score_of(self, u: int, choice_indices: tuple[int, ...]) -> float:
        row = self._index().get((u, tuple(choice_indices)))
        if row is None:
            raise ScoringError(f"no table row for stage {u} indices {choice_indices}")
        return row.score

    def _index(self):
        if not hasattr(self, "_row_index"):
            self._row_index = {
                (u, r.choice_indices): r for u, rows in self.stages.items() for r in rows
            }
        return self._row_index

    def validate_against(self, spec: SearchSpaceSpec) -> None:
        if spec.fingerprint != self.space_fingerprint:
            raise ScoringError("score table belongs to a different space")
        for stage in spec.stages:
            want = count_stage_subgraphs(spec, stage.u)
            have = len(self.stages.get(stage.u, ()))
            if want != have:
                raise ScoringError(f"stage {stage.u}: table has {have} rows, expected {want}")


class EnsembleWeights:
    """Held-out per-hop rank correlations turned into convex weights."""

    def __init__(self, per_model_hop_srcc: list[list[float]]):
        self.raw = np.asarray(per_model_hop_srcc, dtype=np.float64)
        if self.raw.ndim != 2:
            raise ScoringError("expected one SRCC list per model")

    @property
    def num_models(self) -> int:
        return self.raw.shape[0]

    def weights(self, hop: int) -> np.ndarray:
        clamped = np.maximum(self.raw[:, hop], 0.0)
        total = clamped.sum()
        if total == 0.0:
            raise ScoringError(f"no confident predictor at hop {hop}")
        return clamped / total


def build_score_table(
    models,
    spec: SearchSpaceSpec,
    mode: str = "shifted",
    weights: EnsembleWeights | None = None,
    label_stats: StageLabelStats | None = None,
    cap: int = 10**7,
) -> ScoreTable:
    """Score every stage subgraph of the space.

    `models` is one model or a list; with a list, `weights` supplies the
    held-out SRCC weighting (an ensemble of one degenerates to the single
    model). In zscore mode the per-(stage, hop) groups are standardized
    against the enumeration itself.
    """
    if isinstance(models, PredictorModel):
        models = [models]
    models = list(models)
    if not models:
        raise ScoringError("need at least one model")
    if len(models) > 1 and weights is None:
        raise ScoringError("an ensemble needs held-out SRCC weights")
    if weights is not None and weights.num_models != len(models):
        raise ScoringError("weight table size does not match the model list")
    if mode not in ("shifted", "zscore"):
        raise ScoringError(f"unknown scoring mode '{mode}'")
    stages: dict[int, list[ScoreRow]] = {}
    for stage in spec.stages:
        total = count_stage_subgraphs(spec, stage.u)
        if total > cap:
            raise ScoringError(f"stage {stage.u} has {total} subgraphs, cap is {cap}")
        subgraphs = list(enumerate_stage_subgraphs(spec, stage.u))
        raws = np.stack([raw_subgraph_norms(m, spec, subgraphs) for m in models])
        hops = np.array([sg.num_layers - 1 for sg in subgraphs])
        scores = np.zeros_like(raws)
        for mi, model in enumerate(models):
            if mode == "zscore":
                for hop in np.unique(hops):
                    sel = hops == hop
                    mu = raws[mi, sel].mean()
                    sd = raws[mi, sel].std()
                    scores[mi, sel] = 0.0 if sd == 0.0 else (raws[mi, sel] - mu) / sd
            else:
                if model.hop_stats is None:
                    raise ScoringError("model has no hop statistics; run compute_hop_stats")
                stats = label_stats
                if stats is None:
                    stats = StageLabelStats(entries=model.stage_label_stats)
                for i, sg in enumerate(subgraphs):
                    scores[mi, i] = shift_norm(
                        raws[mi, i], hops[i], sg.u, sg.num_layers, model.hop_stats, stats
                    )
        if len(models) == 1:
            combined = scores[0]
            combined_raw = raws[0]
        else:
            combined = np.zeros(len(subgraphs))
            combined_raw = np.zeros(len(subgraphs))
            for hop in np.unique(hops):
                sel = hops == hop
                w = weights.weights(int(hop))
                combined[sel] = w @ scores[:, sel]
                combined_raw[sel] = w @ raws[:, sel]
        rows = [
            ScoreRow(
                u=stage.u,
                subgraph_id=sg.canonical_id,
                choice_indices=sg.choice_indices,
                types=sg.types,
                hop=int(hops[i]),
                raw_norm=float(combined_raw[i]),
                score=float(combined[i]),
            )
            for i, sg in enumerate(subgraphs)
        ]
        stages[stage.u] = rows
    return ScoreTable(
        space_fingerprint=spec.fingerprint,
        mode=mode,
        stages=stages,
        provenance={"num_models": len(models)},
    )


# ---------------------------------------------------------------------------
# feature importance


def feature_importance(model: PredictorModel, numeric_grid: int = 9) -> dict:
    """Abs scalar each feature choice receives from its embedding stack.

    Categorical categories list every choice; numeric ones are probed on an
    even grid over their range. Each entry reports the per-choice scores
    and the min-max range of the category.
    """
    out: dict[str, dict] = {}
    for ci, cat in enumerate(model.schema):
        w1 = model.params[f"femlp.{cat.name}.w1"]
        b1 = model.params[f"femlp.{cat.name}.b1"]
        w2 = model.params[f"femlp.{cat.name}.w2"]
        b2 = model.params[f"femlp.{cat.name}.b2"]

        def scalar(row):
            hidden = np.maximum(row @ w1 + b1, 0.0)
            return abs(float(hidden @ w2 + b2))

        choices: list[tuple] = []
        if cat.kind == "categorical":
            for k, choice in enumerate(cat.choices):
                row = np.zeros(len(cat.choices))
                row[k] = 1.0
                choices.append((choice, scalar(row)))
        else:
            for v in np.linspace(cat.lo, cat.hi, numeric_grid):
                row = np.array([(v - cat.lo) / (cat.hi - cat.lo)])
                choices.append((float(v), scalar(row)))
        values = [s for _, s in choices]
        out[cat.name] = {
            "kind": cat.kind,
            "choices": choices,
            "range": (min(values), max(values)),
            "spread": max(values) - min(values),
        }
    return out


# ---------------------------------------------------------------------------
# CSV interface


def write_table_csv(table: ScoreTable, path) -> None:
    """Stage-major, canonical-id-ordered rows; stable float formatting."""
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# {TABLE_FORMAT} space={table.space_fingerprint} mode={table.mode}\n"
        )
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["stage", "subgraph_id", "layer_sequence", "hop", "raw_norm", "score", "mode"]
        )
        for u in sorted(table.stages):
            for row in table.stages[u]:
                writer.writerow(
                    [
                        row.u,
                        row.subgraph_id,
                        "|".join(row.types),
                        row.hop,
                        f"{row.raw_norm:.17g}",
                        f"{row.score:.17g}",
                        table.mode,
                    ]
                )


def read_table_csv(path, spec: SearchSpaceSpec) -> ScoreTable:
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        parts = header.lstrip("# ").split()
        if not parts or parts[0] != TABLE_FORMAT:
            raise ScoringError(f"not a score table file: {path}")
        meta = dict(p.split("=", 1) for p in parts[1:])
        if meta.get("space") != spec.fingerprint:
            raise ScoringError("score table belongs to a different space")
        reader = csv.DictReader(fh)
        stages: dict[int, list[ScoreRow]] = {}
        for rec in reader:
            u = int(rec["stage"])
            types = tuple(rec["layer_sequence"].split("|"))
            sg = ModuleSubgraph.from_types(spec, u, types)
            stages.setdefault(u, []).append(
                ScoreRow(
                    u=u,
                    subgraph_id=rec["subgraph_id"],
                    choice_indices=sg.choice_indices,
                    types=types,
                    hop=int(rec["hop"]),
                    raw_norm=float(rec["raw_norm"]),
                    score=float(rec["score"]),
                )
            )
    table = ScoreTable(
        space_fingerprint=meta["space"], mode=meta.get("mode", "?"), stages=stages
    )
    table.validate_against(spec)
    return table
