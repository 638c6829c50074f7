"""Mutation-based multi-objective evolutionary search.

The loop samples an initial pool, keeps the exact Pareto frontier of all
evaluations, and per iteration mutates parents drawn uniformly from the
frontier. Duplicate architectures are served from a cache and do not
consume evaluation budget, so a run performs exactly
initial_archs + iters * evals_per_iter unique evaluator calls (fewer only
when the space is exhausted, which is recorded in the log).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .archspace import (
    ArchGraph,
    ConstraintViolation,
    ModuleSubgraph,
    SearchSpaceSpec,
    assemble_arch,
    count_stage_subgraphs,
    subgraph_from_index,
)
from .builder import ReducedSpace

__all__ = [
    "SearchConfig",
    "FrontMember",
    "ParetoFront",
    "EvaluationError",
    "MutationError",
    "pareto_merge",
    "mutate",
    "run_ea",
    "SearchResult",
    "hypervolume",
]

_MUTATION_MODES = ("stage_swap", "layer_edit")
_MAX_MUTATE_TRIES = 200


class EvaluationError(RuntimeError):
    def __init__(self, arch_id: str, cause: Exception):
        self.arch_id = arch_id
        super().__init__(f"evaluator failed on architecture {arch_id}: {cause}")


class MutationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    initial_archs: int = 50
    iters: int = 4
    evals_per_iter: int = 50
    mutation: str = "stage_swap"
    directions: tuple[tuple[str, str], ...] = (("y", "max"), ("cost", "min"))
    seed: int = 0

    def __post_init__(self):
        if min(self.initial_archs, self.iters, self.evals_per_iter) < 1:
            raise ValueError("all search counts must be >= 1")
        if self.mutation not in _MUTATION_MODES:
            raise ValueError(f"unknown mutation mode '{self.mutation}'")
        for _, d in self.directions:
            if d not in ("max", "min"):
                raise ValueError(f"objective direction must be max or min, got '{d}'")

    @property
    def budget(self) -> int:
        return self.initial_archs + self.iters * self.evals_per_iter


@dataclass(frozen=True)
class FrontMember:
    arch_id: str
    objectives: tuple[float, ...]
    encoding: dict


def _dominates(a, b, signs) -> bool:
    ge = all(s * x >= s * y for s, x, y in zip(signs, a, b))
    gt = any(s * x > s * y for s, x, y in zip(signs, a, b))
    return ge and gt


@dataclass
class ParetoFront:
    directions: tuple[tuple[str, str], ...]
    members: list[FrontMember] = field(default_factory=list)

    @property
    def signs(self) -> tuple[float, ...]:
        return tuple(1.0 if d == "max" else -1.0 for _, d in self.directions)

    def objective_matrix(self) -> np.ndarray:
        return np.array([m.objectives for m in self.members], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.members)


def pareto_merge(front: ParetoFront, candidates: list[FrontMember]) -> ParetoFront:
    """Exact nondominated set of front members plus candidates."""
    signs = front.signs
    members = list(front.members)
    ids = {m.arch_id for m in members}
    for cand in candidates:
        if len(cand.objectives) != len(front.directions):
            raise ValueError(
                f"objective arity {len(cand.objectives)} != {len(front.directions)}"
            )
        if cand.arch_id in ids:
            continue
        if any(_dominates(m.objectives, cand.objectives, signs) for m in members):
            continue
        members = [m for m in members if not _dominates(cand.objectives, m.objectives, signs)]
        members.append(cand)
        ids = {m.arch_id for m in members}
    return ParetoFront(directions=front.directions, members=members)


# ---------------------------------------------------------------------------
# mutation


def _random_subgraph(spec, u, rng, reduced) -> ModuleSubgraph:
    if reduced is not None:
        pool = reduced.stage_subgraphs(u)
        return pool[int(rng.integers(0, len(pool)))]
    total = count_stage_subgraphs(spec, u)
    return subgraph_from_index(spec, u, int(rng.integers(0, total)))


def _layer_edit(spec, subgraphs, rng) -> list[ModuleSubgraph]:
    """Apply one add/remove/edit move to a uniformly chosen concrete move."""
    moves = []  # (kind, u, position, new_type_index)
    for sg in subgraphs:
        stage = spec.stage(sg.u)
        b = len(stage.vocab)
        l = sg.num_layers
        for pos in range(l):
            for t in range(b):
                if t != sg.choice_indices[pos]:
                    moves.append(("edit", sg.u, pos, t))
        if l < stage.l_max:
            for pos in range(l + 1):
                for t in range(b):
                    moves.append(("add", sg.u, pos, t))
        if l > stage.l_min:
            for pos in range(l):
                moves.append(("remove", sg.u, pos, -1))
    kind, u, pos, t = moves[int(rng.integers(0, len(moves)))]
    out = []
    for sg in subgraphs:
        if sg.u != u:
            out.append(sg)
            continue
        idx = list(sg.choice_indices)
        if kind == "edit":
            idx[pos] = t
        elif kind == "add":
            idx.insert(pos, t)
        else:
            del idx[pos]
        vocab = spec.stage(u).vocab
        out.append(
            ModuleSubgraph(u=u, choice_indices=tuple(idx), types=tuple(vocab[i] for i in idx))
        )
    return out


def mutate(
    arch: ArchGraph,
    spec: SearchSpaceSpec,
    mode: str,
    rng: np.random.Generator,
    reduced: ReducedSpace | None = None,
) -> ArchGraph:
    """One valid mutation of `arch`: a whole-stage swap or a single layer
    add/remove/edit, rejection-resampled against the space constraints."""
    if mode not in _MUTATION_MODES:
        raise MutationError(f"unknown mutation mode '{mode}'")
    base = list(arch.subgraphs(spec))
    for _ in range(_MAX_MUTATE_TRIES):
        if mode == "stage_swap":
            u = int(rng.integers(0, len(base))) + 1
            replacement = _random_subgraph(spec, u, rng, reduced)
            if replacement.choice_indices == base[u - 1].choice_indices:
                continue
            picks = list(base)
            picks[u - 1] = replacement
        else:
            picks = _layer_edit(spec, base, rng)
        try:
            child = assemble_arch(spec, picks)
        except ConstraintViolation:
            continue
        if child.arch_id != arch.arch_id:
            return child
    raise MutationError(f"no valid {mode} mutation found for {arch.arch_id}")


# ---------------------------------------------------------------------------
# the search loop


@dataclass
class SearchResult:
    front: ParetoFront
    log: list[dict]
    front_history: list[ParetoFront]
    evaluations: int
    exhausted: bool


def _sample_valid(spec, rng, reduced) -> ArchGraph:
    for _ in range(100_000):
        picks = [
            _random_subgraph(spec, stage.u, rng, reduced) for stage in spec.stages
        ]
        try:
            return assemble_arch(spec, picks)
        except ConstraintViolation:
            continue
    raise MutationError("could not sample a valid architecture; space appears empty")


def run_ea(
    spec: SearchSpaceSpec,
    evaluator,
    config: SearchConfig,
    reduced: ReducedSpace | None = None,
) -> SearchResult:
    """Seed-deterministic evolutionary search; see the module docstring."""
    rng = np.random.default_rng([config.seed, 0xEA])
    cache: dict[str, dict] = {}
    arch_by_id: dict[str, ArchGraph] = {}
    log: list[dict] = []
    names = [name for name, _ in config.directions]
    front = ParetoFront(directions=config.directions)
    history: list[ParetoFront] = []
    exhausted = False

    def evaluate(arch: ArchGraph, iteration: int) -> FrontMember:
        try:
            metrics = evaluator(arch)
        except Exception as exc:  # propagate with the offending id
            raise EvaluationError(arch.arch_id, exc) from exc
        objectives = tuple(float(metrics[n]) for n in names)
        if not all(np.isfinite(objectives)):
            raise EvaluationError(arch.arch_id, ValueError("non-finite objectives"))
        cache[arch.arch_id] = metrics
        arch_by_id[arch.arch_id] = arch
        log.append(
            {
                "iteration": iteration,
                "arch_id": arch.arch_id,
                "arch": arch.encode(),
                "objectives": dict(zip(names, objectives)),
            }
        )
        return FrontMember(arch.arch_id, objectives, arch.encode())

    # Initial pool: unique random architectures.
    batch: list[FrontMember] = []
    misses = 0
    while len(batch) < config.initial_archs:
        arch = _sample_valid(spec, rng, reduced)
        if arch.arch_id in cache:
            misses += 1
            if misses > max(2000, 100 * config.initial_archs):
                exhausted = True
                break
            continue
        batch.append(evaluate(arch, 0))
    front = pareto_merge(front, batch)
    history.append(front)

    for iteration in range(1, config.iters + 1):
        if exhausted or not front.members:
            break
        batch = []
        new_ids: set[str] = set()
        misses = 0
        while len(batch) < config.evals_per_iter:
            parent_idx = int(rng.integers(0, len(front.members)))
            parent = front.members[parent_idx]
            parent_arch = arch_by_id[parent.arch_id]
            try:
                child = mutate(parent_arch, spec, config.mutation, rng, reduced)
            except MutationError:
                exhausted = True
                break
            if child.arch_id in cache or child.arch_id in new_ids:
                misses += 1
                if misses > max(2000, 100 * config.evals_per_iter):
                    exhausted = True
                    break
                continue
            new_ids.add(child.arch_id)
            batch.append(evaluate(child, iteration))
        front = pareto_merge(front, batch)
        history.append(front)
        if exhausted:
            break

    in_front = {m.arch_id for m in front.members}
    for entry in log:
        entry["in_front"] = entry["arch_id"] in in_front
    return SearchResult(
        front=front,
        log=log,
        front_history=history,
        evaluations=len(log),
        exhausted=exhausted,
    )


# ---------------------------------------------------------------------------
# hypervolume (2 objectives)


def hypervolume(front: ParetoFront, reference: tuple[float, float]) -> float:
    """Exact dominated area between a 2-objective front and a reference
    point that every member dominates."""
    if len(front.directions) != 2:
        raise ValueError("hypervolume supports exactly 2 objectives")
    if not front.members:
        return 0.0
    signs = front.signs
    pts = [
        (signs[0] * m.objectives[0], signs[1] * m.objectives[1]) for m in front.members
    ]
    ref = (signs[0] * reference[0], signs[1] * reference[1])
    for x, y in pts:
        if not (x >= ref[0] and y >= ref[1] and (x > ref[0] or y > ref[1])):
            raise ValueError("reference point is not dominated by every member")
    pts.sort(key=lambda p: (-p[0], p[1]))
    area = 0.0
    y_prev = ref[1]
    for x, y in pts:
        if y > y_prev:
            area += (x - ref[0]) * (y - y_prev)
            y_prev = y
    return area
