"""Staged macro search spaces: definition, enumeration, graphs, datasets."""

from .dataset import DatasetRecord, decode_arch, dumps_record, read_dataset, write_dataset
from .graph import ArchGraph, ConstraintViolation, ModuleSubgraph, assemble_arch
from .ops import (
    DEFAULT_ENUMERATION_CAP,
    EnumerationCapExceeded,
    count_space_size,
    count_stage_subgraphs,
    enumerate_stage_subgraphs,
    sample_random,
    subgraph_from_index,
)
from .schema import (
    Constraint,
    FeatureCategory,
    FeatureSchema,
    SearchSpaceSpec,
    SpaceError,
    StageSpec,
    load_space_spec,
    save_space_spec,
    space_spec_from_dict,
    space_spec_to_dict,
    schema_from_dict,
    schema_to_dict,
)
from .templates import TEMPLATE_NAMES, space_template

__all__ = [
    "ArchGraph",
    "ModuleSubgraph",
    "ConstraintViolation",
    "assemble_arch",
    "DatasetRecord",
    "decode_arch",
    "dumps_record",
    "read_dataset",
    "write_dataset",
    "count_stage_subgraphs",
    "count_space_size",
    "enumerate_stage_subgraphs",
    "subgraph_from_index",
    "sample_random",
    "EnumerationCapExceeded",
    "DEFAULT_ENUMERATION_CAP",
    "Constraint",
    "FeatureCategory",
    "FeatureSchema",
    "SearchSpaceSpec",
    "SpaceError",
    "StageSpec",
    "load_space_spec",
    "save_space_spec",
    "space_spec_to_dict",
    "space_spec_from_dict",
    "schema_to_dict",
    "schema_from_dict",
    "TEMPLATE_NAMES",
    "space_template",
]
