"""Search-space definitions: feature schema, stages, validity constraints.

A space is a sequence of stages; stage ``u`` holds between ``l_min`` and
``l_max`` layers, each drawn (with replacement) from the stage vocabulary.
Every layer type maps to a fixed assignment of the schema's non-positional
feature categories; the positional categories ``stage`` and ``layer`` are
filled in at assembly time.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

__all__ = [
    "FeatureCategory",
    "schema_to_dict",
    "schema_from_dict",
    "FeatureSchema",
    "StageSpec",
    "Constraint",
    "SearchSpaceSpec",
    "SpaceError",
    "POSITIONAL_CATEGORIES",
    "load_space_spec",
    "save_space_spec",
    "space_spec_to_dict",
    "space_spec_from_dict",
]

SPACE_FORMAT = "macronas-space/1"
POSITIONAL_CATEGORIES = ("stage", "layer")
KNOWN_CONSTRAINTS = ("channel_consistency", "mirror_multiplier")


class SpaceError(ValueError):
    """Invalid space definition or graph/space mismatch."""


@dataclass(frozen=True)
class FeatureCategory:
    name: str
    kind: str  # "categorical" | "numeric"
    choices: tuple = ()
    lo: float = 0.0
    hi: float = 1.0
    unit: str = ""

    def __post_init__(self):
        if self.kind not in ("categorical", "numeric"):
            raise SpaceError(f"unknown feature kind '{self.kind}'")
        if self.kind == "categorical" and not self.choices:
            raise SpaceError(f"categorical category '{self.name}' needs choices")
        if self.kind == "numeric" and not self.hi > self.lo:
            raise SpaceError(f"numeric category '{self.name}' needs hi > lo")

    def encoded_width(self) -> int:
        return len(self.choices) if self.kind == "categorical" else 1

    def check_value(self, value) -> None:
        if self.kind == "categorical":
            if value not in self.choices:
                raise SpaceError(f"value {value!r} not a choice of category '{self.name}'")
        else:
            v = float(value)
            if not (self.lo <= v <= self.hi):
                raise SpaceError(f"value {v} outside [{self.lo}, {self.hi}] for '{self.name}'")


@dataclass(frozen=True)
class FeatureSchema:
    categories: tuple[FeatureCategory, ...]

    def __post_init__(self):
        names = [c.name for c in self.categories]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate feature category names")
        for required in POSITIONAL_CATEGORIES:
            if required not in names:
                raise SpaceError(f"schema must include positional category '{required}'")

    def __iter__(self):
        return iter(self.categories)

    def __len__(self):
        return len(self.categories)

    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.categories)

    def category(self, name: str) -> FeatureCategory:
        for c in self.categories:
            if c.name == name:
                return c
        raise SpaceError(f"unknown feature category '{name}'")


@dataclass(frozen=True)
class StageSpec:
    u: int
    l_min: int
    l_max: int
    vocab: tuple[str, ...]

    def __post_init__(self):
        if not (1 <= self.l_min <= self.l_max):
            raise SpaceError(f"stage {self.u}: need 1 <= l_min <= l_max")
        if not self.vocab:
            raise SpaceError(f"stage {self.u}: empty vocabulary")
        if len(set(self.vocab)) != len(self.vocab):
            raise SpaceError(f"stage {self.u}: duplicate vocabulary entries")


@dataclass(frozen=True)
class Constraint:
    """A named validity rule checked on assembled graphs.

    channel_consistency: all nodes share one value of `feature`.
    mirror_multiplier: for each (a, b) stage pair, all nodes of stages a
    and b share one value of `feature`.
    """

    rule: str
    feature: str
    pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.rule not in KNOWN_CONSTRAINTS:
            raise SpaceError(f"unknown constraint rule '{self.rule}'")
        if self.rule == "mirror_multiplier" and not self.pairs:
            raise SpaceError("mirror_multiplier needs stage pairs")

    def check(self, stage_of_node, features) -> bool:
        """True when satisfied. Accepts a partial (prefix) node list; a
        prefix violation is final because both rules demand equality."""
        if self.rule == "channel_consistency":
            vals = {f[self.feature] for f in features}
            return len(vals) <= 1
        groups: dict[int, set] = {}
        for u, f in zip(stage_of_node, features):
            for a, b in self.pairs:
                if u == a or u == b:
                    groups.setdefault(a, set()).add(f[self.feature])
        return all(len(vals) <= 1 for vals in groups.values())


@dataclass(frozen=True)
class SearchSpaceSpec:
    name: str
    stages: tuple[StageSpec, ...]
    schema: FeatureSchema
    layer_features: dict[str, dict]
    constraints: tuple[Constraint, ...] = ()
    _fingerprint: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.stages:
            raise SpaceError("space needs at least one stage")
        if [s.u for s in self.stages] != list(range(1, len(self.stages) + 1)):
            raise SpaceError("stage indices must be 1..n in order")
        nonpos = [c for c in self.schema if c.name not in POSITIONAL_CATEGORIES]
        for stage in self.stages:
            for t in stage.vocab:
                feats = self.layer_features.get(t)
                if feats is None:
                    raise SpaceError(f"layer type '{t}' missing from layer_features")
                for c in nonpos:
                    if c.name not in feats:
                        raise SpaceError(f"layer type '{t}' missing feature '{c.name}'")
                    c.check_value(feats[c.name])
        for con in self.constraints:
            self.schema.category(con.feature)
            for a, b in con.pairs:
                if not (1 <= a <= len(self.stages) and 1 <= b <= len(self.stages)):
                    raise SpaceError(f"constraint pair ({a}, {b}) references unknown stage")
        object.__setattr__(self, "_fingerprint", self._compute_fingerprint())

    def _compute_fingerprint(self) -> str:
        blob = json.dumps(space_spec_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def fingerprint(self) -> str:
        return self._fingerprint

    def stage(self, u: int) -> StageSpec:
        if not (1 <= u <= len(self.stages)):
            raise SpaceError(f"unknown stage {u}")
        return self.stages[u - 1]

    def node_features(self, layer_type: str, u: int, layer: int) -> dict:
        feats = dict(self.layer_features[layer_type])
        feats["stage"] = float(u)
        feats["layer"] = float(layer)
        return feats

    def check_constraints(self, stage_of_node, features) -> list[str]:
        """Names of violated rules (empty when valid)."""
        return [
            c.rule for c in self.constraints if not c.check(stage_of_node, features)
        ]


def schema_to_dict(schema: FeatureSchema) -> list[dict]:
    cats = []
    for c in schema:
        entry: dict = {"name": c.name, "kind": c.kind}
        if c.kind == "categorical":
            entry["choices"] = list(c.choices)
        else:
            entry["lo"] = c.lo
            entry["hi"] = c.hi
            if c.unit:
                entry["unit"] = c.unit
        cats.append(entry)
    return cats


def schema_from_dict(entries: list[dict]) -> FeatureSchema:
    cats = []
    for entry in entries:
        if entry["kind"] == "categorical":
            cats.append(
                FeatureCategory(entry["name"], "categorical", choices=tuple(entry["choices"]))
            )
        else:
            cats.append(
                FeatureCategory(
                    entry["name"],
                    "numeric",
                    lo=float(entry["lo"]),
                    hi=float(entry["hi"]),
                    unit=entry.get("unit", ""),
                )
            )
    return FeatureSchema(tuple(cats))


def space_spec_to_dict(spec: SearchSpaceSpec) -> dict:
    return {
        "format": SPACE_FORMAT,
        "name": spec.name,
        "schema": schema_to_dict(spec.schema),
        "stages": [
            {"u": s.u, "l_min": s.l_min, "l_max": s.l_max, "vocab": list(s.vocab)}
            for s in spec.stages
        ],
        "layer_features": {t: dict(f) for t, f in sorted(spec.layer_features.items())},
        "constraints": [
            {"rule": c.rule, "feature": c.feature, "pairs": [list(p) for p in c.pairs]}
            for c in spec.constraints
        ],
    }


def space_spec_from_dict(data: dict) -> SearchSpaceSpec:
    if data.get("format") != SPACE_FORMAT:
        raise SpaceError(f"unsupported space format {data.get('format')!r}")
    return SearchSpaceSpec(
        name=data["name"],
        stages=tuple(
            StageSpec(s["u"], s["l_min"], s["l_max"], tuple(s["vocab"]))
            for s in data["stages"]
        ),
        schema=schema_from_dict(data["schema"]),
        layer_features={t: dict(f) for t, f in data["layer_features"].items()},
        constraints=tuple(
            Constraint(c["rule"], c["feature"], tuple(tuple(p) for p in c.get("pairs", [])))
            for c in data.get("constraints", [])
        ),
    )


def save_space_spec(spec: SearchSpaceSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(space_spec_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_space_spec(path) -> SearchSpaceSpec:
    with open(path) as fh:
        return space_spec_from_dict(json.load(fh))
