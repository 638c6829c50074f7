"""Versioned JSON checkpoints with exact float64 round-tripping."""

from __future__ import annotations

import json

import numpy as np

from ..archspace import SearchSpaceSpec, schema_from_dict, schema_to_dict
from .model import HopStats, PredictorConfig, PredictorModel

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint"]

CHECKPOINT_FORMAT = "macronas-predictor/1"


class CheckpointError(ValueError):
    pass


def _model_to_dict(model: PredictorModel) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "schema": schema_to_dict(model.schema),
        "space_fingerprint": model.space_fingerprint,
        "label_mean": model.label_mean,
        "label_std": model.label_std,
        "params": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in sorted(model.params.items())
        },
        "hop_stats": model.hop_stats.to_dict() if model.hop_stats else None,
        "stage_label_stats": _stage_stats_to_json(model.stage_label_stats),
    }


def _stage_stats_to_json(stats: dict) -> list:
    return [
        {"u": u, "l": l, "mean": v["mean"], "std": v["std"], "count": v["count"]}
        for (u, l), v in sorted(stats.items())
    ]


def _stage_stats_from_json(entries) -> dict:
    return {
        (int(e["u"]), int(e["l"])): {
            "mean": float(e["mean"]),
            "std": float(e["std"]),
            "count": int(e["count"]),
        }
        for e in entries or []
    }


def save_checkpoint(model: PredictorModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(_model_to_dict(model), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path, spec: SearchSpaceSpec | None = None) -> PredictorModel:
    """Load a checkpoint; rejects version mismatches and, when `spec` is
    given, checkpoints trained on a different space."""
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format {data.get('format')!r}")
    if spec is not None and data["space_fingerprint"] != spec.fingerprint:
        raise CheckpointError("checkpoint was trained on a different search space")
    params = {
        name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in data["params"].items()
    }
    model = PredictorModel(
        config=PredictorConfig(**data["config"]),
        schema=schema_from_dict(data["schema"]),
        space_fingerprint=data["space_fingerprint"],
        params=params,
        label_mean=float(data["label_mean"]),
        label_std=float(data["label_std"]),
        hop_stats=HopStats.from_dict(data["hop_stats"]) if data.get("hop_stats") else None,
        stage_label_stats=_stage_stats_from_json(data.get("stage_label_stats")),
    )
    return model
