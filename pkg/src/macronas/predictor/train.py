"""Training under the magnitude-ranked loss and its ablations.

ranked:   MSE(y, y') + mean over hops m of (1 - soft_srcc(|h_G^m|_1, y))
mse_only: MSE(y, y')
mae_rank: MAE(y, y') + (1 - soft_srcc(y', y))

Rank terms are computed per batch. A batch whose targets are all equal, or
a final batch of size 1, contributes only the regression term (logged
once). Labels are standardized with the train-split mean/std, which the
model keeps for de-standardizing predictions.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .. import numerics as nm
from ..archspace import DatasetRecord, SearchSpaceSpec
from .encoding import concat_batches, encode_graphs
from .model import PredictorConfig, PredictorModel, forward_batch, init_params

__all__ = ["TrainReport", "train", "eval_srcc", "predict", "batch_outputs"]

logger = logging.getLogger(__name__)

_EVAL_CHUNK = 512


@dataclass
class TrainReport:
    epoch_loss: list[float]
    train_srcc: dict
    test_srcc: dict | None
    wall_time: float
    seed: int
    notes: list[str]


def _labels(records: list[DatasetRecord], target: str) -> np.ndarray:
    try:
        y = np.array([r.metrics[target] for r in records], dtype=np.float64)
    except KeyError:
        raise ValueError(f"dataset records lack target metric '{target}'") from None
    if not np.isfinite(y).all():
        raise ValueError(f"non-finite labels for target '{target}'")
    return y


def _batch_standardize(t):
    """Differentiable zero-mean unit-std rescale of a column tensor.

    Returns None when the variance is exactly zero (caller skips the rank
    term for that batch).
    """
    centered = nm.sub(t, nm.reduce_mean(t))
    var = nm.reduce_mean(nm.mul(centered, centered))
    if var.data == 0.0:
        return None
    return nm.div(centered, nm.sqrt(var))


def _rank_input(t, standardize: bool):
    return _batch_standardize(t) if standardize else t


def train(
    spec: SearchSpaceSpec,
    records: list[DatasetRecord],
    config: PredictorConfig,
    test_records: list[DatasetRecord] | None = None,
) -> tuple[PredictorModel, TrainReport]:
    """Fit a predictor; identical (records, config, seed) gives identical weights."""
    if len(records) < 2:
        raise ValueError("need at least 2 training records")
    t0 = time.perf_counter()
    y = _labels(records, config.target)
    rank_loss = config.loss in ("ranked", "mae_rank")
    if rank_loss and np.ptp(y) == 0.0:
        raise nm.DegenerateTargetsError("all labels equal; rank terms undefined")
    label_mean = float(y.mean())
    label_std = float(y.std())
    if label_std == 0.0:
        label_std = 1.0
    y_std = (y - label_mean) / label_std

    init_rng = np.random.default_rng([config.seed, 1])
    model = PredictorModel(
        config=config,
        schema=spec.schema,
        space_fingerprint=spec.fingerprint,
        params=init_params(config, spec.schema, init_rng),
        label_mean=label_mean,
        label_std=label_std,
    )
    encoded = [encode_graphs(spec.schema, [r.arch]) for r in records]

    shuffle_rng = np.random.default_rng([config.seed, 2])
    state = nm.OptimState(lr=config.lr, weight_decay=config.weight_decay)
    notes: list[str] = []
    noted = set()

    def note(key, message):
        if key not in noted:
            noted.add(key)
            notes.append(message)
            logger.warning(message)

    epoch_loss: list[float] = []
    n = len(records)
    for _epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        seen = 0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            batch = concat_batches([encoded[i] for i in idx])
            yb = y[idx]
            yb_std = y_std[idx].reshape(-1, 1)
            params_t = {k: nm.parameter(v, name=k) for k, v in model.params.items()}
            result = forward_batch(model, batch, params_t)
            err = nm.sub(result.pred_std, nm.constant(yb_std))
            if config.loss == "mae_rank":
                loss = nm.reduce_mean(nm.absolute(err))
            else:
                loss = nm.reduce_mean(nm.mul(err, err))
            use_rank = rank_loss and len(idx) >= 2 and np.ptp(yb) > 0.0
            if rank_loss and not use_rank:
                note("degenerate-batch", "rank terms skipped for a degenerate batch")
            if use_rank and config.loss == "ranked":
                terms = []
                for norms in result.graph_norms:
                    xs = _rank_input(norms, config.standardize_rank_inputs)
                    if xs is None:
                        note("flat-norms", "rank term skipped: hop norms all equal in a batch")
                        continue
                    terms.append(nm.sub(1.0, nm.soft_srcc(xs, yb, config.soft_rank_eps)))
                if terms:
                    rank_total = terms[0]
                    for t in terms[1:]:
                        rank_total = nm.add(rank_total, t)
                    loss = nm.add(loss, nm.mul(rank_total, 1.0 / (config.hops + 1)))
            elif use_rank and config.loss == "mae_rank":
                xs = _rank_input(result.pred_std, config.standardize_rank_inputs)
                if xs is None:
                    note("flat-preds", "rank term skipped: predictions all equal in a batch")
                else:
                    loss = nm.add(loss, nm.sub(1.0, nm.soft_srcc(xs, yb, config.soft_rank_eps)))
            grads = nm.backward(loss)
            named = {t.name: g for t, g in grads.items()}
            model.params = nm.adamw_step(model.params, named, state)
            total += loss.item() * len(idx)
            seen += len(idx)
        epoch_loss.append(total / seen)

    train_srcc = eval_srcc(model, spec, records)
    test_srcc = eval_srcc(model, spec, test_records) if test_records else None
    report = TrainReport(
        epoch_loss=epoch_loss,
        train_srcc=train_srcc,
        test_srcc=test_srcc,
        wall_time=time.perf_counter() - t0,
        seed=config.seed,
        notes=notes,
    )
    return model, report


def batch_outputs(model: PredictorModel, spec: SearchSpaceSpec, archs) -> tuple[np.ndarray, np.ndarray]:
    """Per-hop graph-embedding L1 norms (hops+1, n) and predictions (n,)."""
    archs = list(archs)
    for a in archs:
        model.check_space(a.space_fingerprint)
    norms = np.zeros((model.config.hops + 1, len(archs)))
    preds = np.zeros(len(archs))
    for lo in range(0, len(archs), _EVAL_CHUNK):
        chunk = archs[lo : lo + _EVAL_CHUNK]
        batch = encode_graphs(model.schema, chunk)
        result = forward_batch(model, batch)
        for m, t in enumerate(result.graph_norms):
            norms[m, lo : lo + len(chunk)] = t.data[:, 0]
        preds[lo : lo + len(chunk)] = result.pred.data[:, 0]
    return norms, preds


def predict(model: PredictorModel, spec: SearchSpaceSpec, archs) -> np.ndarray:
    """Predictions in label units."""
    return batch_outputs(model, spec, archs)[1]


def eval_srcc(model: PredictorModel, spec: SearchSpaceSpec, records) -> dict:
    """Exact Spearman of each hop's norms, and of the prediction, vs labels."""
    records = list(records)
    if len(records) < 2:
        raise ValueError("need at least 2 records to evaluate SRCC")
    y = _labels(records, model.config.target)
    norms, preds = batch_outputs(model, spec, [r.arch for r in records])
    return {
        "hops": [nm.spearman(norms[m], y) for m in range(model.config.hops + 1)],
        "pred": nm.spearman(preds, y),
    }
