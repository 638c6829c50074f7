"""Architecture graphs and per-stage module subgraphs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .schema import SearchSpaceSpec, SpaceError

__all__ = ["ModuleSubgraph", "ArchGraph", "ConstraintViolation", "assemble_arch"]


class ConstraintViolation(SpaceError):
    """An assembled graph broke a named validity rule."""

    def __init__(self, rules: list[str]):
        self.rules = tuple(rules)
        super().__init__("constraint violation: " + ", ".join(rules))


@dataclass(frozen=True)
class ModuleSubgraph:
    """One stage's layer sequence, the unit that gets scored and recombined.

    The canonical ordering (and therefore every tie-break downstream) is
    `sort_key`: (stage, length, vocabulary indices).
    """

    u: int
    choice_indices: tuple[int, ...]
    types: tuple[str, ...] = field(compare=False)

    @classmethod
    def from_types(cls, spec: SearchSpaceSpec, u: int, types) -> "ModuleSubgraph":
        stage = spec.stage(u)
        types = tuple(types)
        if not (stage.l_min <= len(types) <= stage.l_max):
            raise SpaceError(
                f"stage {u}: {len(types)} layers outside [{stage.l_min}, {stage.l_max}]"
            )
        try:
            idx = tuple(stage.vocab.index(t) for t in types)
        except ValueError as exc:
            raise SpaceError(f"stage {u}: unknown layer type in {types}") from exc
        return cls(u=u, choice_indices=idx, types=types)

    @property
    def num_layers(self) -> int:
        return len(self.choice_indices)

    @property
    def sort_key(self) -> tuple:
        return (self.u, len(self.choice_indices), self.choice_indices)

    @property
    def canonical_id(self) -> str:
        return f"u{self.u}:" + "-".join(str(i) for i in self.choice_indices)


@dataclass(frozen=True)
class ArchGraph:
    """A sequence DAG of configured layers with positional annotations.

    Node order is stage-major; edges run i -> i+1 (general DAG edges are
    representable but nothing here emits them). The id is a content hash
    over the space fingerprint and the stage-major layer types, so it is
    stable under re-serialization and changes with any feature change.
    """

    space_fingerprint: str
    stage_types: tuple[tuple[str, ...], ...]
    node_types: tuple[str, ...]
    node_features: tuple[dict, ...]
    edges: tuple[tuple[int, int], ...]
    stage_of_node: tuple[int, ...]
    layer_of_node: tuple[int, ...]

    @property
    def num_nodes(self) -> int:
        return len(self.node_types)

    @property
    def arch_id(self) -> str:
        blob = json.dumps(
            {"space": self.space_fingerprint, "stages": [list(s) for s in self.stage_types]},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:24]

    def encode(self) -> dict:
        """Stage-major encoding used by the JSONL dataset format."""
        return {"stages": [list(s) for s in self.stage_types]}

    def subgraphs(self, spec: SearchSpaceSpec) -> tuple[ModuleSubgraph, ...]:
        """Decompose back into one module subgraph per stage."""
        return tuple(
            ModuleSubgraph.from_types(spec, u, types)
            for u, types in enumerate(self.stage_types, start=1)
        )


def _build_nodes(spec: SearchSpaceSpec, stage_types):
    node_types: list[str] = []
    features: list[dict] = []
    stage_of: list[int] = []
    layer_of: list[int] = []
    for u, types in enumerate(stage_types, start=1):
        for layer, t in enumerate(types, start=1):
            node_types.append(t)
            features.append(spec.node_features(t, u, layer))
            stage_of.append(u)
            layer_of.append(layer)
    return node_types, features, stage_of, layer_of


def assemble_arch(spec: SearchSpaceSpec, subgraphs) -> ArchGraph:
    """Stack one module subgraph per stage into a validated sequence graph."""
    subgraphs = list(subgraphs)
    if len(subgraphs) != len(spec.stages):
        raise SpaceError(
            f"need one subgraph per stage: got {len(subgraphs)} for {len(spec.stages)} stages"
        )
    for want_u, sg in enumerate(subgraphs, start=1):
        if sg.u != want_u:
            raise SpaceError(f"subgraph for stage {sg.u} placed at stage {want_u}")
        stage = spec.stage(want_u)
        if not (stage.l_min <= sg.num_layers <= stage.l_max):
            raise SpaceError(f"stage {want_u}: layer count {sg.num_layers} out of bounds")
        for i in sg.choice_indices:
            if not (0 <= i < len(stage.vocab)):
                raise SpaceError(f"stage {want_u}: choice index {i} outside vocabulary")
    stage_types = tuple(sg.types for sg in subgraphs)
    node_types, features, stage_of, layer_of = _build_nodes(spec, stage_types)
    violated = spec.check_constraints(stage_of, features)
    if violated:
        raise ConstraintViolation(violated)
    n = len(node_types)
    return ArchGraph(
        space_fingerprint=spec.fingerprint,
        stage_types=stage_types,
        node_types=tuple(node_types),
        node_features=tuple(features),
        edges=tuple((i, i + 1) for i in range(n - 1)),
        stage_of_node=tuple(stage_of),
        layer_of_node=tuple(layer_of),
    )
