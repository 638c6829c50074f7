"""Shared test oracles, independent of the implementation under test."""

from __future__ import annotations

import numpy as np


def central_diff_grads(f, arrays, step=1e-5):
    """Finite-difference gradients of a scalar function of numpy arrays.

    `f` takes the list of arrays and returns a float. Returns one gradient
    array per input, computed by central differences.
    """
    grads = []
    for k, a in enumerate(arrays):
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = f(arrays)
            flat[i] = orig - step
            fm = f(arrays)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * step)
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rel=1e-4, abs_tol=1e-7):
    """Entrywise: |a - n| <= abs_tol or |a - n| / max(|a|, |n|) <= rel."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    ok = (diff <= abs_tol) | (diff <= rel * denom)
    assert ok.all(), (
        f"gradient mismatch: max abs diff {diff.max():.3e}, "
        f"max rel {np.max(diff / np.maximum(denom, 1e-300)):.3e}"
    )


def hard_ranks(x):
    """Ascending average-tie ranks, brute force."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    ranks = np.zeros(n)
    for i in range(n):
        less = np.sum(x < x[i])
        equal = np.sum(x == x[i])
        ranks[i] = less + (equal + 1) / 2.0
    return ranks


def closed_form_spearman(a, b):
    """1 - 6*sum(d^2)/(n(n^2-1)) for distinct-valued vectors."""
    ra = hard_ranks(a)
    rb = hard_ranks(b)
    n = len(ra)
    d = ra - rb
    return 1.0 - 6.0 * float(np.sum(d * d)) / (n * (n * n - 1))


def brute_force_nondominated(points, directions):
    """O(n^2) nondominated filter; returns indices of surviving points."""
    pts = [tuple(p) for p in points]
    signs = [1.0 if d == "max" else -1.0 for d in directions]

    def dominates(a, b):
        at_least_as_good = all(sa * x >= sa * y for sa, x, y in zip(signs, a, b))
        strictly_better = any(sa * x > sa * y for sa, x, y in zip(signs, a, b))
        return at_least_as_good and strictly_better

    keep = []
    for i, p in enumerate(pts):
        if not any(dominates(q, p) for j, q in enumerate(pts) if j != i):
            keep.append(i)
    return keep
