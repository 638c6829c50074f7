"""JSONL datasets: one record per line, {"arch": ..., "metrics": ...}."""

from __future__ import annotations

import json

from .graph import ArchGraph, ModuleSubgraph, assemble_arch
from .schema import SearchSpaceSpec, SpaceError

__all__ = ["DatasetRecord", "decode_arch", "read_dataset", "write_dataset", "dumps_record"]


class DatasetRecord:
    __slots__ = ("arch", "metrics")

    def __init__(self, arch: ArchGraph, metrics: dict[str, float]):
        self.arch = arch
        self.metrics = metrics

    def __repr__(self):
        return f"DatasetRecord({self.arch.arch_id}, {sorted(self.metrics)})"


def decode_arch(spec: SearchSpaceSpec, encoding: dict) -> ArchGraph:
    stages = encoding.get("stages")
    if stages is None:
        raise SpaceError("arch encoding missing 'stages'")
    subgraphs = [
        ModuleSubgraph.from_types(spec, u, types) for u, types in enumerate(stages, start=1)
    ]
    return assemble_arch(spec, subgraphs)


def dumps_record(record: DatasetRecord) -> str:
    payload = {
        "arch": record.arch.encode(),
        "metrics": {k: record.metrics[k] for k in sorted(record.metrics)},
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def write_dataset(path, records) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(dumps_record(record))
            fh.write("\n")


def read_dataset(path, spec: SearchSpaceSpec) -> list[DatasetRecord]:
    out: list[DatasetRecord] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SpaceError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            arch = decode_arch(spec, payload["arch"])
            metrics = {str(k): float(v) for k, v in payload["metrics"].items()}
            out.append(DatasetRecord(arch, metrics))
    return out
