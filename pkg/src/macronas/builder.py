"""Turn score tables into reduced spaces and concrete architectures."""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator

from .archspace import (
    ArchGraph,
    ConstraintViolation,
    ModuleSubgraph,
    SearchSpaceSpec,
    SpaceError,
    assemble_arch,
    count_stage_subgraphs,
)
from .scorer import ScoreTable, ScoringError

__all__ = [
    "ReducedSpace",
    "BuilderError",
    "reduce_space",
    "union_spaces",
    "enumerate_reduced",
    "build_top",
    "save_reduced_space",
    "load_reduced_space",
]

REDUCED_FORMAT = "macronas-reduced/1"
DEFAULT_REDUCED_CAP = 10**6


class BuilderError(ValueError):
    pass


@dataclass
class ReducedSpace:
    """Per-stage retained module subgraphs plus provenance."""

    space_fingerprint: str
    retained: dict[int, list[ModuleSubgraph]]
    provenance: dict = field(default_factory=dict)

    def size_bound(self) -> int:
        """Product of retained counts; an upper bound under constraints."""
        total = 1
        for subs in self.retained.values():
            total *= len(subs)
        return total

    def stage_subgraphs(self, u: int) -> list[ModuleSubgraph]:
        try:
            return self.retained[u]
        except KeyError:
            raise BuilderError(f"reduced space has no stage {u}") from None


def _hop_quotas(k: int, sizes_present: list[int], class_counts: dict[int, int]) -> dict[int, int]:
    """Split K across subgraph sizes, remainder (and overflow) to larger sizes."""
    sizes = sorted(sizes_present)
    base = k // len(sizes)
    rem = k % len(sizes)
    quotas = {l: base for l in sizes}
    for l in sorted(sizes, reverse=True)[:rem]:
        quotas[l] += 1
    # A class smaller than its quota hands the excess to the largest class
    # that still has room.
    for _ in range(len(sizes)):
        spare = 0
        for l in sizes:
            if quotas[l] > class_counts[l]:
                spare += quotas[l] - class_counts[l]
                quotas[l] = class_counts[l]
        if spare == 0:
            break
        for l in sorted(sizes, reverse=True):
            room = class_counts[l] - quotas[l]
            take = min(room, spare)
            quotas[l] += take
            spare -= take
            if spare == 0:
                break
        if spare > 0:
            break  # every class saturated
    return quotas


def reduce_space(
    table: ScoreTable,
    spec: SearchSpaceSpec,
    k: int,
    selection: str = "unconstrained",
) -> ReducedSpace:
    """Top-K subgraphs per stage by score (ties broken by canonical id).

    `hop_constrained` splits K as evenly as possible across the stage's
    admissible subgraph sizes (remainder to larger sizes) and takes the top
    of each size class. K beyond the stage vocabulary keeps the whole
    vocabulary.
    """
    if k < 1:
        raise BuilderError("K must be >= 1")
    if selection not in ("unconstrained", "hop_constrained"):
        raise BuilderError(f"unknown selection mode '{selection}'")
    table.validate_against(spec)
    retained: dict[int, list[ModuleSubgraph]] = {}
    for stage in spec.stages:
        rows = table.stage_rows(stage.u)
        subs = {
            row.choice_indices: ModuleSubgraph(
                u=stage.u, choice_indices=row.choice_indices, types=row.types
            )
            for row in rows
        }
        ranked = sorted(rows, key=lambda r: (-r.score, subs[r.choice_indices].sort_key))
        if selection == "unconstrained":
            picked = ranked[: min(k, len(ranked))]
        else:
            class_counts: dict[int, int] = {}
            for row in rows:
                l = len(row.choice_indices)
                class_counts[l] = class_counts.get(l, 0) + 1
            quotas = _hop_quotas(min(k, len(rows)), list(class_counts), class_counts)
            picked = []
            for l, quota in sorted(quotas.items()):
                pool = [r for r in ranked if len(r.choice_indices) == l]
                picked.extend(pool[:quota])
        chosen = sorted((subs[r.choice_indices] for r in picked), key=lambda s: s.sort_key)
        retained[stage.u] = chosen
    return ReducedSpace(
        space_fingerprint=spec.fingerprint,
        retained=retained,
        provenance={"k": k, "selection": selection, "mode": table.mode},
    )


def union_spaces(spaces: list[ReducedSpace]) -> ReducedSpace:
    """Per-stage set union of reduced spaces over the same parent."""
    spaces = list(spaces)
    if not spaces:
        raise BuilderError("nothing to union")
    fp = spaces[0].space_fingerprint
    for s in spaces[1:]:
        if s.space_fingerprint != fp:
            raise BuilderError("reduced spaces come from different parent spaces")
    retained: dict[int, list[ModuleSubgraph]] = {}
    for u in sorted(spaces[0].retained):
        merged: dict[tuple[int, ...], ModuleSubgraph] = {}
        for s in spaces:
            for sg in s.stage_subgraphs(u):
                merged[sg.choice_indices] = sg
        retained[u] = sorted(merged.values(), key=lambda s: s.sort_key)
    return ReducedSpace(
        space_fingerprint=fp,
        retained=retained,
        provenance={"union_of": [s.provenance for s in spaces]},
    )


def enumerate_reduced(
    reduced: ReducedSpace,
    spec: SearchSpaceSpec,
    cap: int = DEFAULT_REDUCED_CAP,
) -> Iterator[ArchGraph]:
    """All valid architectures of a reduced space, lexicographic product order."""
    if reduced.space_fingerprint != spec.fingerprint:
        raise BuilderError("reduced space belongs to a different parent space")
    bound = reduced.size_bound()
    if bound > cap:
        raise BuilderError(f"reduced space bound {bound} exceeds cap {cap}")
    per_stage = [reduced.stage_subgraphs(s.u) for s in spec.stages]
    for combo in itertools.product(*per_stage):
        try:
            yield assemble_arch(spec, list(combo))
        except ConstraintViolation:
            continue


def build_top(
    table: ScoreTable,
    spec: SearchSpaceSpec,
    n: int,
    reduced: ReducedSpace | None = None,
) -> list[tuple[ArchGraph, float]]:
    """The n valid architectures with the highest total subgraph score.

    Exact best-first search over per-stage score-sorted candidate lists:
    the all-best assignment enters a max-heap and each popped assignment
    expands by advancing one stage to its next candidate, so assignments
    pop in non-increasing total-score order. Constraint-violating
    assignments are expanded but not emitted. Ties break by candidate
    position (canonical id order within equal scores).
    """
    if n < 1:
        raise BuilderError("n must be >= 1")
    table.validate_against(spec)
    lists: list[list[tuple[float, ModuleSubgraph]]] = []
    for stage in spec.stages:
        cands = (
            reduced.stage_subgraphs(stage.u)
            if reduced is not None
            else [
                ModuleSubgraph(u=stage.u, choice_indices=r.choice_indices, types=r.types)
                for r in table.stage_rows(stage.u)
            ]
        )
        scored = [(table.score_of(stage.u, sg.choice_indices), sg) for sg in cands]
        scored.sort(key=lambda t: (-t[0], t[1].sort_key))
        lists.append(scored)
    start = (0,) * len(lists)
    start_score = sum(lst[0][0] for lst in lists)
    heap = [(-start_score, start)]
    seen = {start}
    out: list[tuple[ArchGraph, float]] = []
    while heap and len(out) < n:
        neg, pos = heapq.heappop(heap)
        try:
            arch = assemble_arch(spec, [lists[i][p][1] for i, p in enumerate(pos)])
            out.append((arch, -neg))
        except ConstraintViolation:
            pass
        for i in range(len(lists)):
            if pos[i] + 1 >= len(lists[i]):
                continue
            nxt = pos[:i] + (pos[i] + 1,) + pos[i + 1 :]
            if nxt in seen:
                continue
            seen.add(nxt)
            delta = lists[i][pos[i] + 1][0] - lists[i][pos[i]][0]
            heapq.heappush(heap, (neg - delta, nxt))
    if len(out) < n:
        raise BuilderError(f"only {len(out)} valid combinations exist, needed {n}")
    return out


# ---------------------------------------------------------------------------
# file interface


def save_reduced_space(reduced: ReducedSpace, path) -> None:
    payload = {
        "format": REDUCED_FORMAT,
        "space": reduced.space_fingerprint,
        "stages": {
            str(u): [list(sg.types) for sg in subs] for u, subs in sorted(reduced.retained.items())
        },
        "provenance": reduced.provenance,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_reduced_space(path, spec: SearchSpaceSpec) -> ReducedSpace:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") != REDUCED_FORMAT:
        raise BuilderError(f"not a reduced-space file: {path}")
    if data["space"] != spec.fingerprint:
        raise BuilderError("reduced space belongs to a different parent space")
    retained = {
        int(u): [ModuleSubgraph.from_types(spec, int(u), types) for types in subs]
        for u, subs in data["stages"].items()
    }
    return ReducedSpace(
        space_fingerprint=data["space"],
        retained=retained,
        provenance=data.get("provenance", {}),
    )
