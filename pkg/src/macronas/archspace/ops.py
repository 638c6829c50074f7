"""Counting, enumeration, and sampling over staged search spaces."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .graph import ArchGraph, ConstraintViolation, ModuleSubgraph, assemble_arch
from .schema import SearchSpaceSpec, SpaceError

__all__ = [
    "count_stage_subgraphs",
    "count_space_size",
    "enumerate_stage_subgraphs",
    "subgraph_from_index",
    "sample_random",
    "EnumerationCapExceeded",
    "DEFAULT_ENUMERATION_CAP",
]

DEFAULT_ENUMERATION_CAP = 10**7

# Give up sampling when the constraint rejection rate provably exceeds this.
_MAX_REJECTION_RATE = 0.999


class EnumerationCapExceeded(SpaceError):
    pass


def count_stage_subgraphs(spec: SearchSpaceSpec, u: int) -> int:
    """sum over l in [l_min, l_max] of |vocab|^l, exactly."""
    stage = spec.stage(u)
    b = len(stage.vocab)
    return sum(b**l for l in range(stage.l_min, stage.l_max + 1))


def count_space_size(spec: SearchSpaceSpec) -> int:
    """Product of per-stage subgraph counts.

    Ignores cross-stage constraints, so the value is an upper bound when
    `spec.constraints` is nonempty (callers surface that flag).
    """
    total = 1
    for stage in spec.stages:
        total *= count_stage_subgraphs(spec, stage.u)
    return total


def subgraph_from_index(spec: SearchSpaceSpec, u: int, index: int) -> ModuleSubgraph:
    """Decode a position in the lexicographic (length, choices) order."""
    stage = spec.stage(u)
    b = len(stage.vocab)
    if index < 0:
        raise SpaceError(f"negative subgraph index {index}")
    remaining = index
    for l in range(stage.l_min, stage.l_max + 1):
        block = b**l
        if remaining < block:
            digits = []
            for _ in range(l):
                digits.append(remaining % b)
                remaining //= b
            idx = tuple(reversed(digits))
            return ModuleSubgraph(u=u, choice_indices=idx, types=tuple(stage.vocab[i] for i in idx))
        remaining -= block
    raise SpaceError(f"subgraph index {index} out of range for stage {u}")


def enumerate_stage_subgraphs(
    spec: SearchSpaceSpec, u: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[ModuleSubgraph]:
    """All module subgraphs of one stage in (length, choices) order."""
    total = count_stage_subgraphs(spec, u)
    if total > cap:
        raise EnumerationCapExceeded(f"stage {u} has {total} subgraphs, cap is {cap}")
    stage = spec.stage(u)
    b = len(stage.vocab)
    for l in range(stage.l_min, stage.l_max + 1):
        for flat in range(b**l):
            digits = []
            rem = flat
            for _ in range(l):
                digits.append(rem % b)
                rem //= b
            idx = tuple(reversed(digits))
            yield ModuleSubgraph(u=u, choice_indices=idx, types=tuple(stage.vocab[i] for i in idx))


def sample_random(spec: SearchSpaceSpec, n: int, seed: int) -> list[ArchGraph]:
    """Uniform over valid stage-subgraph tuples via rejection sampling."""
    if n < 1:
        raise SpaceError("n must be >= 1")
    rng = np.random.default_rng(seed)
    sizes = [count_stage_subgraphs(spec, s.u) for s in spec.stages]
    out: list[ArchGraph] = []
    attempts = 0
    while len(out) < n:
        attempts += 1
        # Demand enough evidence that a ~0.5% acceptance rate cannot trip
        # the guard by bad luck.
        if attempts > 5000 and (len(out) / attempts) < (1.0 - _MAX_REJECTION_RATE):
            raise SpaceError(
                f"constraint rejection rate above {_MAX_REJECTION_RATE:.1%}; "
                "the space is effectively empty"
            )
        picks = [
            subgraph_from_index(spec, s.u, int(rng.integers(0, size)))
            for s, size in zip(spec.stages, sizes)
        ]
        try:
            out.append(assemble_arch(spec, picks))
        except ConstraintViolation:
            continue
    return out
