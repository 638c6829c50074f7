"""Synthetic ground-truth oracles over staged search spaces.

An oracle assigns every architecture a primary metric ``y`` built from
per-stage contribution tables (sum over stages), optional cross-stage
interactions, and seeded per-architecture noise, plus a secondary ``cost``
metric that grows with layer count. The contribution tables are retrievable
so tests can compare learned scores against the truth.

Contribution structure per stage subgraph: a sum of per-node feature
effects (a seeded weight per categorical choice, a seeded linear weight
for numeric categories), a deterministic layer-count bias, and a seeded
idiosyncratic term per subgraph.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..archspace import (
    ArchGraph,
    DatasetRecord,
    FeatureCategory,
    FeatureSchema,
    ModuleSubgraph,
    SearchSpaceSpec,
    SpaceError,
    StageSpec,
    count_stage_subgraphs,
    enumerate_stage_subgraphs,
    space_spec_from_dict,
    space_spec_to_dict,
    space_template,
)
from .target import TargetEvalError, eval_target, parse_target

__all__ = ["OracleParams", "SyntheticOracle", "make_synthetic_space", "label_dataset"]

_TABLE_CAP = 10**6


@dataclass(frozen=True)
class OracleParams:
    """Shape and strength knobs for a synthetic benchmark.

    `space_template` names a bundled space; otherwise a generic space with
    `num_stages` stages, one categorical feature of `vocab_size` choices,
    and `l_min..l_max` layers per stage is synthesized.
    """

    space_template: str | None = "mbv3_like"
    num_stages: int = 3
    vocab_size: int = 4
    l_min: int = 1
    l_max: int = 2
    feature_scales: dict[str, float] = field(default_factory=dict)
    default_feature_scale: float = 1.0
    positional_scale: float = 0.5
    feature_jitter: float = 0.25
    layer_bias: float = 0.6
    idiosyncratic_scale: float = 0.35
    relative_interaction: float = 0.1
    relative_noise: float = 0.05
    cost_spread: float = 0.3

    def validate(self):
        if self.space_template is None:
            if self.num_stages < 1 or self.vocab_size < 1 or not (1 <= self.l_min <= self.l_max):
                raise SpaceError("invalid generic space parameters")
        if self.relative_noise < 0 or self.relative_interaction < 0:
            raise SpaceError("noise and interaction strengths must be >= 0")
        if self.idiosyncratic_scale < 0 or self.cost_spread < 0:
            raise SpaceError("scales must be >= 0")

    def to_dict(self) -> dict:
        return {
            "space_template": self.space_template,
            "num_stages": self.num_stages,
            "vocab_size": self.vocab_size,
            "l_min": self.l_min,
            "l_max": self.l_max,
            "feature_scales": dict(sorted(self.feature_scales.items())),
            "default_feature_scale": self.default_feature_scale,
            "positional_scale": self.positional_scale,
            "feature_jitter": self.feature_jitter,
            "layer_bias": self.layer_bias,
            "idiosyncratic_scale": self.idiosyncratic_scale,
            "relative_interaction": self.relative_interaction,
            "relative_noise": self.relative_noise,
            "cost_spread": self.cost_spread,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OracleParams":
        return cls(**data)


def _generic_space(params: OracleParams) -> SearchSpaceSpec:
    vocab = tuple(f"op{i}" for i in range(params.vocab_size))
    schema = FeatureSchema(
        (
            FeatureCategory("op", "categorical", choices=vocab),
            FeatureCategory("stage", "numeric", lo=1.0, hi=float(max(params.num_stages, 2))),
            FeatureCategory("layer", "numeric", lo=1.0, hi=float(max(params.l_max, 2))),
        )
    )
    return SearchSpaceSpec(
        name=f"generic_{params.num_stages}x{params.vocab_size}",
        stages=tuple(
            StageSpec(u, params.l_min, params.l_max, vocab)
            for u in range(1, params.num_stages + 1)
        ),
        schema=schema,
        layer_features={t: {"op": t} for t in vocab},
    )


class SyntheticOracle:
    """Deterministic evaluator with retrievable per-stage ground truth."""

    def __init__(self, spec: SearchSpaceSpec, params: OracleParams, seed: int):
        params.validate()
        self.spec = spec
        self.params = params
        self.seed = int(seed)
        rng = np.random.default_rng([0xBE, self.seed])
        self._feature_weights = self._draw_feature_weights(rng)
        self._contrib: list[dict[tuple[int, ...], float]] = []
        self._interact: list[dict[tuple[int, ...], float]] = []
        self._build_stage_tables(rng)
        self._cost_per_type = {
            t: 1.0 + abs(rng.normal(0.0, params.cost_spread))
            for t in sorted(spec.layer_features)
        }
        contrib_var = sum(np.var(list(table.values())) for table in self._contrib)
        self._sigma_total = float(np.sqrt(contrib_var)) or 1.0
        self._offset = 5.0 * self._sigma_total
        self._noise_std = params.relative_noise * self._sigma_total
        n_pairs = len(spec.stages) * (len(spec.stages) - 1) // 2
        self._interaction_coef = (
            params.relative_interaction * self._sigma_total / np.sqrt(max(n_pairs, 1))
        )

    def _draw_feature_weights(self, rng) -> dict:
        """Monotone effect ladders with seeded jitter.

        Choices listed later in a category earn higher mean effect (the
        'bigger is better' structure real accuracy surfaces show), so the
        benchmark is learnable at every hop level while the jitter,
        idiosyncratic, interaction, and noise terms keep it non-trivial.
        """
        weights: dict = {}
        jit = self.params.feature_jitter
        for cat in self.spec.schema:
            if cat.name in ("stage", "layer"):
                scale = self.params.positional_scale
            else:
                scale = self.params.feature_scales.get(
                    cat.name, self.params.default_feature_scale
                )
            if cat.kind == "categorical":
                c = len(cat.choices)
                ladder = np.linspace(0.0, 1.0, c) if c > 1 else np.zeros(1)
                weights[cat.name] = {
                    choice: float(scale * (ladder[k] + jit * rng.normal()))
                    for k, choice in enumerate(cat.choices)
                }
            else:
                weights[cat.name] = float(scale * abs(1.0 + jit * rng.normal()))
        return weights

    def _node_effect(self, features: dict) -> float:
        total = 0.0
        for cat in self.spec.schema:
            w = self._feature_weights[cat.name]
            if cat.kind == "categorical":
                total += w[features[cat.name]]
            else:
                v = (float(features[cat.name]) - cat.lo) / (cat.hi - cat.lo)
                total += w * v
        return total

    def _build_stage_tables(self, rng) -> None:
        for stage in self.spec.stages:
            if count_stage_subgraphs(self.spec, stage.u) > _TABLE_CAP:
                raise SpaceError(
                    f"stage {stage.u} too large for a synthetic contribution table"
                )
            contrib: dict[tuple[int, ...], float] = {}
            interact: dict[tuple[int, ...], float] = {}
            for sg in enumerate_stage_subgraphs(self.spec, stage.u):
                base = sum(
                    self._node_effect(self.spec.node_features(t, stage.u, layer))
                    for layer, t in enumerate(sg.types, start=1)
                )
                base += self.params.layer_bias * (sg.num_layers - stage.l_min)
                base += self.params.idiosyncratic_scale * float(rng.normal())
                contrib[sg.choice_indices] = base
                interact[sg.choice_indices] = float(rng.normal())
            self._contrib.append(contrib)
            self._interact.append(interact)

    # -- ground truth access -------------------------------------------------

    def true_contribution(self, subgraph: ModuleSubgraph) -> float:
        return self._contrib[subgraph.u - 1][subgraph.choice_indices]

    def stage_truth_table(self, u: int) -> dict[tuple[int, ...], float]:
        self.spec.stage(u)
        return dict(self._contrib[u - 1])

    @property
    def contribution_sigma(self) -> float:
        return self._sigma_total

    # -- evaluation ----------------------------------------------------------

    def _noise(self, arch: ArchGraph) -> float:
        if self._noise_std == 0.0:
            return 0.0
        digest = hashlib.sha256(arch.arch_id.encode()).digest()
        key = int.from_bytes(digest[:8], "big")
        rng = np.random.default_rng([0x17, self.seed, key])
        return float(rng.normal(0.0, self._noise_std))

    def evaluate(self, arch: ArchGraph) -> dict[str, float]:
        """Metrics for one architecture: y (higher better) and cost."""
        if arch.space_fingerprint != self.spec.fingerprint:
            raise SpaceError("architecture does not belong to this oracle's space")
        subs = arch.subgraphs(self.spec)
        y = self._offset + sum(self.true_contribution(sg) for sg in subs)
        if self._interaction_coef != 0.0:
            g = [self._interact[sg.u - 1][sg.choice_indices] for sg in subs]
            for i in range(len(g)):
                for j in range(i + 1, len(g)):
                    y += self._interaction_coef * g[i] * g[j]
        y += self._noise(arch)
        cost = sum(self._cost_per_type[t] for t in arch.node_types)
        return {"y": y, "cost": cost}

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "macronas-oracle/1",
            "seed": self.seed,
            "params": self.params.to_dict(),
            "space": space_spec_to_dict(self.spec),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticOracle":
        if data.get("format") != "macronas-oracle/1":
            raise SpaceError(f"unsupported oracle format {data.get('format')!r}")
        spec = space_spec_from_dict(data["space"])
        return cls(spec, OracleParams.from_dict(data["params"]), data["seed"])


def make_synthetic_space(params: OracleParams, seed: int) -> tuple[SearchSpaceSpec, SyntheticOracle]:
    """Build (space, oracle) for a parameter set; same seed, same tables."""
    params.validate()
    if params.space_template is not None:
        spec = space_template(params.space_template)
    else:
        spec = _generic_space(params)
    return spec, SyntheticOracle(spec, params, seed)


def label_dataset(
    oracle: SyntheticOracle,
    archs,
    targets: dict[str, str] | None = None,
) -> list[DatasetRecord]:
    """Evaluate architectures and append derived target metrics.

    `targets` maps new metric names to expression strings over the raw
    metric names. Domain errors are reported with the offending
    architecture id.
    """
    exprs = {name: parse_target(text) for name, text in (targets or {}).items()}
    records = []
    for arch in archs:
        metrics = oracle.evaluate(arch)
        for name, expr in exprs.items():
            try:
                metrics[name] = eval_target(expr, metrics)
            except TargetEvalError as exc:
                raise TargetEvalError(f"target '{name}' on arch {arch.arch_id}: {exc}") from exc
        records.append(DatasetRecord(arch, metrics))
    return records
