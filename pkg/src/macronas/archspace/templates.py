"""Bundled space templates used by the benchmarks, tests, and CLI."""

from __future__ import annotations

from .schema import Constraint, FeatureCategory, FeatureSchema, SearchSpaceSpec, StageSpec

__all__ = ["space_template", "TEMPLATE_NAMES"]


def _mbconv_vocab():
    types = {}
    order = []
    for k in (3, 5, 7):
        for e in (3, 4, 6):
            name = f"k{k}e{e}"
            order.append(name)
            types[name] = {"kernel": k, "expand": e}
    return tuple(order), types


def _mbconv_schema(num_stages: int, l_max: int) -> FeatureSchema:
    return FeatureSchema(
        (
            FeatureCategory("kernel", "categorical", choices=(3, 5, 7)),
            FeatureCategory("expand", "categorical", choices=(3, 4, 6)),
            FeatureCategory("stage", "numeric", lo=1.0, hi=float(num_stages)),
            FeatureCategory("layer", "numeric", lo=1.0, hi=float(l_max)),
        )
    )


def mbv3_like() -> SearchSpaceSpec:
    """Five stages of 2-4 MBConv layers, 9 layer types (kernel x expansion)."""
    vocab, feats = _mbconv_vocab()
    return SearchSpaceSpec(
        name="mbv3_like",
        stages=tuple(StageSpec(u, 2, 4, vocab) for u in range(1, 6)),
        schema=_mbconv_schema(5, 4),
        layer_features=feats,
    )


def pn_like() -> SearchSpaceSpec:
    """mbv3_like plus a single-layer 6th stage."""
    vocab, feats = _mbconv_vocab()
    stages = tuple(StageSpec(u, 2, 4, vocab) for u in range(1, 6)) + (
        StageSpec(6, 1, 1, vocab),
    )
    return SearchSpaceSpec(
        name="pn_like",
        stages=stages,
        schema=_mbconv_schema(6, 4),
        layer_features=feats,
    )


def pn_like_merged() -> SearchSpaceSpec:
    """pn_like with the 5th and 6th stages merged into one 3-5 layer stage."""
    vocab, feats = _mbconv_vocab()
    stages = tuple(StageSpec(u, 2, 4, vocab) for u in range(1, 5)) + (
        StageSpec(5, 3, 5, vocab),
    )
    return SearchSpaceSpec(
        name="pn_like_merged",
        stages=stages,
        schema=_mbconv_schema(5, 5),
        layer_features=feats,
    )


def tiny3() -> SearchSpaceSpec:
    """Three stages, 4 layer types, 1-2 layers: 20^3 = 8000 architectures."""
    types = {}
    order = []
    for k in (3, 5):
        for e in (3, 6):
            name = f"k{k}e{e}"
            order.append(name)
            types[name] = {"kernel": k, "expand": e}
    schema = FeatureSchema(
        (
            FeatureCategory("kernel", "categorical", choices=(3, 5)),
            FeatureCategory("expand", "categorical", choices=(3, 6)),
            FeatureCategory("stage", "numeric", lo=1.0, hi=3.0),
            FeatureCategory("layer", "numeric", lo=1.0, hi=2.0),
        )
    )
    return SearchSpaceSpec(
        name="tiny3",
        stages=tuple(StageSpec(u, 1, 2, tuple(order)) for u in range(1, 4)),
        schema=schema,
        layer_features=types,
    )


def unet_like() -> SearchSpaceSpec:
    """Encoder / middle / decoder stages of conv/attention layers.

    Layer types carry a base channel width and a per-stage multiplier. The
    base width must be one global value (`channel_consistency` on `cbase`)
    and the mirrored encoder/decoder pair (1,3) must agree on the
    multiplier (`mirror_multiplier` on `mult`). 2880 valid architectures.
    """
    types = {}
    order = []
    for op in ("conv", "attn"):
        for mult in (1, 2):
            for cbase in (128, 256):
                name = f"{op}_m{mult}_c{cbase}"
                order.append(name)
                types[name] = {"op": op, "mult": mult, "cbase": cbase}
    schema = FeatureSchema(
        (
            FeatureCategory("op", "categorical", choices=("conv", "attn")),
            FeatureCategory("mult", "categorical", choices=(1, 2)),
            FeatureCategory("cbase", "categorical", choices=(128, 256)),
            FeatureCategory("stage", "numeric", lo=1.0, hi=3.0),
            FeatureCategory("layer", "numeric", lo=1.0, hi=2.0),
        )
    )
    return SearchSpaceSpec(
        name="unet_like",
        stages=tuple(StageSpec(u, 1, 2, tuple(order)) for u in range(1, 4)),
        schema=schema,
        layer_features=types,
        constraints=(
            Constraint("channel_consistency", feature="cbase"),
            Constraint("mirror_multiplier", feature="mult", pairs=((1, 3),)),
        ),
    )


def toy_mirror() -> SearchSpaceSpec:
    """Three stages with a mirrored (1,3) pair; 1440 valid architectures."""
    types = {}
    order = []
    for op in ("a", "b"):
        for mult in (1, 2):
            name = f"{op}_m{mult}"
            order.append(name)
            types[name] = {"op": op, "mult": mult}
    schema = FeatureSchema(
        (
            FeatureCategory("op", "categorical", choices=("a", "b")),
            FeatureCategory("mult", "categorical", choices=(1, 2)),
            FeatureCategory("stage", "numeric", lo=1.0, hi=3.0),
            FeatureCategory("layer", "numeric", lo=1.0, hi=2.0),
        )
    )
    return SearchSpaceSpec(
        name="toy_mirror",
        stages=tuple(StageSpec(u, 1, 2, tuple(order)) for u in range(1, 4)),
        schema=schema,
        layer_features=types,
        constraints=(Constraint("mirror_multiplier", feature="mult", pairs=((1, 3),)),),
    )


_TEMPLATES = {
    "mbv3_like": mbv3_like,
    "pn_like": pn_like,
    "pn_like_merged": pn_like_merged,
    "tiny3": tiny3,
    "unet_like": unet_like,
    "toy_mirror": toy_mirror,
}

TEMPLATE_NAMES = tuple(sorted(_TEMPLATES))


def space_template(name: str) -> SearchSpaceSpec:
    try:
        builder = _TEMPLATES[name]
    except KeyError:
        raise ValueError(f"unknown space template '{name}'; have {', '.join(TEMPLATE_NAMES)}")
    return builder()
