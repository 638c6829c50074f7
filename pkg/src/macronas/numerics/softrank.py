"""Differentiable ranking via projection onto the permutahedron.

``soft_rank`` projects ``scores / eps`` onto the permutahedron generated by
``(1, ..., n)``. The projection reduces to isotonic regression solved by
pool-adjacent-violators in O(n log n) (the log factor is the sort). Small
``eps`` approaches hard ranks (ties map to the mean of their block); large
``eps`` pulls every rank toward the midpoint (n+1)/2.

Convention: ascending ranks, i.e. the smallest score receives a rank near 1
and the largest a rank near n.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from .tensor import (
    Tensor,
    _lift,
    _node,
    div,
    mul,
    reduce_mean,
    reduce_sum,
    sqrt,
    sub,
)

__all__ = ["soft_rank", "soft_srcc", "spearman", "DegenerateTargetsError"]


class DegenerateTargetsError(ValueError):
    """Rank term undefined: the target vector has zero variance."""


def _pav_nonincreasing(u: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """L2 isotonic fit of `u` under a non-increasing constraint.

    Returns the fitted vector and the pooled blocks as (start, end) index
    pairs (end exclusive) in input order.
    """
    n = len(u)
    # Each stack entry: [sum, count, start]
    sums: list[float] = []
    counts: list[int] = []
    starts: list[int] = []
    for i in range(n):
        sums.append(float(u[i]))
        counts.append(1)
        starts.append(i)
        # Merge while the means violate non-increasing order.
        while len(sums) > 1 and sums[-2] * counts[-1] < sums[-1] * counts[-2]:
            s, c = sums.pop(), counts.pop()
            starts.pop()
            sums[-1] += s
            counts[-1] += c
    fitted = np.empty(n, dtype=np.float64)
    blocks: list[tuple[int, int]] = []
    for s, c, b in zip(sums, counts, starts):
        fitted[b : b + c] = s / c
        blocks.append((b, b + c))
    return fitted, blocks


def _project_permutahedron(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    """Euclidean projection of z onto the permutahedron of (1..n).

    Returns (projection, descending sort permutation, pooled blocks in
    sorted coordinates).
    """
    n = len(z)
    order = np.argsort(-z, kind="stable")
    s = z[order]
    w = np.arange(n, 0, -1, dtype=np.float64)
    v, blocks = _pav_nonincreasing(s - w)
    x_sorted = s - v
    out = np.empty(n, dtype=np.float64)
    out[order] = x_sorted
    return out, order, blocks


def soft_rank(scores, eps: float) -> Tensor:
    """Differentiable ranks of a score vector (ascending convention).

    The output lies in the permutahedron of (1..n): components sum to
    n(n+1)/2 and are majorized by (n, n-1, ..., 1). As eps -> 0 the output
    converges to hard ranks with ties averaged.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    scores = _lift(scores)
    z = scores.data.reshape(-1)
    if scores.data.ndim > 1 and scores.data.shape != (len(z), 1):
        raise ValueError(f"soft_rank expects a vector, got shape {scores.shape}")
    n = len(z)
    if n < 2:
        raise ValueError("soft_rank needs at least 2 scores")
    out, order, blocks = _project_permutahedron(z / eps)

    def grad_fn(g):
        gs = g.reshape(-1)[order]
        # Jacobian in sorted coordinates is I - B with B block-averaging.
        adj = gs.copy()
        for b, e in blocks:
            adj[b:e] -= gs[b:e].mean()
        gz = np.empty(n, dtype=np.float64)
        gz[order] = adj / eps
        return (gz.reshape(scores.data.shape),)

    return _node("soft_rank", out.reshape(scores.data.shape), (scores,), grad_fn)


def spearman(a, b) -> float:
    """Exact Spearman rank correlation of two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if len(a) != len(b):
        raise ValueError("length mismatch")
    if len(a) < 2:
        raise ValueError("need at least 2 points")
    ra = stats.rankdata(a, method="average")
    rb = stats.rankdata(b, method="average")
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    denom = np.sqrt((ra * ra).sum() * (rb * rb).sum())
    if denom == 0.0:
        raise DegenerateTargetsError("rank correlation undefined for constant input")
    return float((ra * rb).sum() / denom)


def soft_srcc(predicted, targets, eps: float) -> Tensor:
    """Differentiable Spearman correlation between predictions and targets.

    Pearson correlation between ``soft_rank(predicted, eps)`` and the hard
    (average-tie) ranks of ``targets``. Differentiable in ``predicted``
    only; converges to the exact Spearman rho as eps -> 0 when the
    predicted entries are distinct.
    """
    predicted = _lift(predicted)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    n = predicted.data.size
    if t.size != n:
        raise ValueError(f"length mismatch: {n} predictions vs {t.size} targets")
    if n < 2:
        raise ValueError("soft_srcc needs at least 2 points")
    if np.ptp(t) == 0.0:
        raise DegenerateTargetsError("rank term undefined: targets have zero variance")
    rt = stats.rankdata(t, method="average")
    rt = rt - rt.mean()
    rp = soft_rank(predicted, eps)
    cp = sub(rp, reduce_mean(rp))
    num = reduce_sum(mul(cp, rt.reshape(cp.data.shape)))
    den = sqrt(mul(reduce_sum(mul(cp, cp)), float((rt * rt).sum())))
    if den.data == 0.0:
        raise DegenerateTargetsError(
            "rank term undefined: soft ranks collapsed to a single value"
        )
    return div(num, den)
