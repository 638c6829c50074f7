"""Command-line pipeline: spaces, sampling, labeling, training, scoring,
reduction, construction, search, and reports.

Every artifact is written together with a sidecar `<name>.manifest.json`
recording the tool version, the subcommand, the seed, and the sha256 of
each input and of the artifact itself, so a pipeline run is reproducible
and tamper-evident. Config precedence: command-line flag > --config file
entry > built-in default. MACRONAS_OUT_DIR, when set, prefixes relative
output paths.

Exit codes: 0 success, 2 usage, 3 validation failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from . import archspace as sp
from . import bench, builder, evonas, scorer
from . import numerics as nm
from . import predictor as pred
from .predictor.model import LOSS_MODES

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        self.code = code
        self.kind = kind
        super().__init__(message)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _out_path(path: str) -> str:
    base = os.environ.get("MACRONAS_OUT_DIR")
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


class Manifest:
    """Tracks inputs and emitted artifacts for one subcommand run."""

    def __init__(self, command: str, seed, effective: dict):
        self.command = command
        self.seed = seed
        self.effective = effective
        self.inputs: dict[str, str] = {}

    def add_input(self, path) -> str:
        path = str(path)
        if not os.path.exists(path):
            raise CliError(EXIT_IO, "missing-input", f"input not found: {path}")
        self.inputs[path] = _sha256(path)
        return path

    def emit(self, path: str, write_fn) -> str:
        path = _out_path(path)
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        write_fn(path)
        payload = {
            "version": __version__,
            "command": self.command,
            "seed": self.seed,
            "config": self.effective,
            "inputs": dict(sorted(self.inputs.items())),
            "artifact": {"path": os.path.basename(path), "sha256": _sha256(path)},
        }
        with open(path + ".manifest.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _load_spec(manifest: Manifest, path) -> sp.SearchSpaceSpec:
    return sp.load_space_spec(manifest.add_input(path))


def _load_oracle(manifest: Manifest, path) -> bench.SyntheticOracle:
    with open(manifest.add_input(path)) as fh:
        return bench.SyntheticOracle.from_dict(json.load(fh))


def _load_records(manifest: Manifest, path, spec) -> list[sp.DatasetRecord]:
    return sp.read_dataset(manifest.add_input(path), spec)


def _write_json(payload):
    def write(path):
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    return write


# ---------------------------------------------------------------------------
# subcommands


def cmd_space_gen(args, manifest: Manifest) -> int:
    spec = sp.space_template(args.template)
    manifest.emit(args.out, lambda p: sp.save_space_spec(spec, p))
    if args.oracle_out:
        params = bench.OracleParams(
            space_template=args.template,
            relative_noise=args.noise,
            relative_interaction=args.interaction,
        )
        _, oracle = bench.make_synthetic_space(params, args.seed)
        manifest.emit(args.oracle_out, _write_json(oracle.to_dict()))
    print(f"space {spec.name} fingerprint={spec.fingerprint}")
    return EXIT_OK


def cmd_space_count(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    for stage in spec.stages:
        print(f"stage {stage.u}: {sp.count_stage_subgraphs(spec, stage.u)} subgraphs")
    total = sp.count_space_size(spec)
    qualifier = " (upper bound: cross-stage constraints apply)" if spec.constraints else ""
    print(f"total: {total} ({total:.3e}){qualifier}")
    return EXIT_OK


def cmd_sample(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    archs = sp.sample_random(spec, args.n, args.seed)
    records = [sp.DatasetRecord(a, {}) for a in archs]
    manifest.emit(args.out, lambda p: sp.write_dataset(p, records))
    print(f"sampled {len(archs)} architectures")
    return EXIT_OK


def cmd_label(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    oracle = _load_oracle(manifest, args.oracle)
    records = _load_records(manifest, args.archs, spec)
    targets = {}
    for item in args.target or []:
        name, _, expr = item.partition("=")
        if not expr:
            raise CliError(EXIT_USAGE, "bad-target", f"--target needs name=expr, got {item!r}")
        targets[name] = expr
    labeled = bench.label_dataset(oracle, [r.arch for r in records], targets)
    manifest.emit(args.out, lambda p: sp.write_dataset(p, labeled))
    print(f"labeled {len(labeled)} records with metrics {sorted(labeled[0].metrics)}")
    return EXIT_OK


def _predictor_config(args) -> pred.PredictorConfig:
    return pred.PredictorConfig(
        hops=args.hops,
        hidden=args.hidden,
        aggregation=args.aggregation,
        loss=args.loss,
        target=args.target,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        weight_decay=args.weight_decay,
        soft_rank_eps=args.soft_rank_eps,
        seed=args.seed,
    )


def cmd_train(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    records = _load_records(manifest, args.data, spec)
    test = _load_records(manifest, args.test, spec) if args.test else None
    config = _predictor_config(args)
    model, report = pred.train(spec, records, config, test_records=test)
    if args.with_stats:
        scorer.compute_hop_stats(model, spec, records)
        stats = scorer.compute_stage_label_stats(records, spec, target=config.target)
        model.stage_label_stats = stats.entries
    manifest.emit(args.out, lambda p: pred.save_checkpoint(model, p))
    hops = " ".join(f"{v:.3f}" for v in report.train_srcc["hops"])
    print(f"trained {config.loss} in {report.wall_time:.1f}s; train srcc hops [{hops}] "
          f"pred {report.train_srcc['pred']:.3f}")
    if report.test_srcc:
        hops = " ".join(f"{v:.3f}" for v in report.test_srcc["hops"])
        print(f"test srcc hops [{hops}] pred {report.test_srcc['pred']:.3f}")
    return EXIT_OK


def cmd_stats(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    model = pred.load_checkpoint(manifest.add_input(args.model), spec)
    records = _load_records(manifest, args.data, spec)
    hop_stats = scorer.compute_hop_stats(model, spec, records)
    stats = scorer.compute_stage_label_stats(
        records, spec, target=model.config.target, floor=args.floor
    )
    model.stage_label_stats = stats.entries
    manifest.emit(args.out, lambda p: pred.save_checkpoint(model, p))
    for m, (mu, sd) in enumerate(zip(hop_stats.mean, hop_stats.std)):
        print(f"hop {m}: norm mean {mu:.4f} std {sd:.4f}")
    return EXIT_OK


def cmd_eval_srcc(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    model = pred.load_checkpoint(manifest.add_input(args.model), spec)
    records = _load_records(manifest, args.data, spec)
    result = pred.eval_srcc(model, spec, records)
    payload = {"format": "macronas-srcc/1", "hops": result["hops"], "pred": result["pred"]}
    if args.out:
        manifest.emit(args.out, _write_json(payload))
    for m, v in enumerate(result["hops"]):
        print(f"hop {m}: srcc {v:.4f}")
    print(f"prediction: srcc {result['pred']:.4f}")
    return EXIT_OK


def cmd_score(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    model = pred.load_checkpoint(manifest.add_input(args.model), spec)
    table = scorer.build_score_table(model, spec, mode=args.mode)
    manifest.emit(args.out, lambda p: scorer.write_table_csv(table, p))
    rows = sum(len(r) for r in table.stages.values())
    print(f"scored {rows} subgraphs across {len(table.stages)} stages (mode={args.mode})")
    return EXIT_OK


def cmd_feat_importance(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    model = pred.load_checkpoint(manifest.add_input(args.model), spec)
    imp = scorer.feature_importance(model)

    def write(path):
        with open(path, "w") as fh:
            fh.write("category,choice,score\n")
            for name, entry in imp.items():
                for choice, score in entry["choices"]:
                    fh.write(f"{name},{choice},{score:.17g}\n")

    manifest.emit(args.out, write)
    for name, entry in imp.items():
        print(f"{name}: range [{entry['range'][0]:.4f}, {entry['range'][1]:.4f}]")
    return EXIT_OK


def cmd_reduce(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    table = scorer.read_table_csv(manifest.add_input(args.table), spec)
    reduced = builder.reduce_space(table, spec, args.k, selection=args.selection)
    manifest.emit(args.out, lambda p: builder.save_reduced_space(reduced, p))
    sizes = {u: len(v) for u, v in reduced.retained.items()}
    print(f"reduced space sizes per stage: {sizes}; product bound {reduced.size_bound()}")
    return EXIT_OK


def cmd_union(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    spaces = [builder.load_reduced_space(manifest.add_input(p), spec) for p in args.reduced]
    merged = builder.union_spaces(spaces)
    manifest.emit(args.out, lambda p: builder.save_reduced_space(merged, p))
    print(f"union of {len(spaces)} spaces; product bound {merged.size_bound()}")
    return EXIT_OK


def cmd_build(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    table = scorer.read_table_csv(manifest.add_input(args.table), spec)
    reduced = (
        builder.load_reduced_space(manifest.add_input(args.reduced), spec)
        if args.reduced
        else None
    )
    top = builder.build_top(table, spec, args.n, reduced=reduced)
    records = [sp.DatasetRecord(a, {"total_score": s}) for a, s in top]
    manifest.emit(args.out, lambda p: sp.write_dataset(p, records))
    for arch, score in top:
        print(f"{arch.arch_id} total_score={score:.6f}")
    return EXIT_OK


def cmd_enumerate(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    reduced = builder.load_reduced_space(manifest.add_input(args.reduced), spec)
    archs = list(builder.enumerate_reduced(reduced, spec, cap=args.cap))
    records = [sp.DatasetRecord(a, {}) for a in archs]
    manifest.emit(args.out, lambda p: sp.write_dataset(p, records))
    print(f"enumerated {len(archs)} valid architectures")
    return EXIT_OK


def cmd_nas(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    oracle = _load_oracle(manifest, args.oracle)
    reduced = (
        builder.load_reduced_space(manifest.add_input(args.reduced), spec)
        if args.reduced
        else None
    )
    directions = []
    for item in args.objective:
        name, _, direction = item.partition(":")
        if direction not in ("max", "min"):
            raise CliError(
                EXIT_USAGE, "bad-objective", f"--objective needs name:max|min, got {item!r}"
            )
        directions.append((name, direction))
    config = evonas.SearchConfig(
        initial_archs=args.initial,
        iters=args.iters,
        evals_per_iter=args.per_iter,
        mutation=args.mutation,
        directions=tuple(directions),
        seed=args.seed,
    )
    result = evonas.run_ea(spec, oracle.evaluate, config, reduced=reduced)

    def write_log(path):
        with open(path, "w") as fh:
            for entry in result.log:
                fh.write(json.dumps(entry, sort_keys=True))
                fh.write("\n")

    manifest.emit(args.out, write_log)
    front_payload = {
        "format": "macronas-front/1",
        "directions": [list(d) for d in config.directions],
        "members": [
            {
                "arch_id": m.arch_id,
                "objectives": dict(zip([n for n, _ in config.directions], m.objectives)),
                "arch": m.encoding,
            }
            for m in result.front.members
        ],
    }
    if args.front_out:
        manifest.emit(args.front_out, _write_json(front_payload))
    print(
        f"evaluations={result.evaluations} front={len(result.front)} "
        f"exhausted={str(result.exhausted).lower()}"
    )
    return EXIT_OK


def cmd_ensemble_train(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    records = _load_records(manifest, args.data, spec)
    base = _predictor_config(args)
    models, weights = train_ensemble(
        spec, records, base, folds=args.folds, fold_seeds=args.fold_seeds
    )
    os.makedirs(_out_path(args.out_dir), exist_ok=True)
    paths = []
    for i, model in enumerate(models):
        path = os.path.join(args.out_dir, f"model_{i:03d}.json")
        manifest.emit(path, lambda p, m=model: pred.save_checkpoint(m, p))
        paths.append(os.path.basename(path))
    payload = {
        "format": "macronas-ensemble/1",
        "models": paths,
        "hop_srcc": weights.raw.tolist(),
    }
    manifest.emit(os.path.join(args.out_dir, "ensemble.json"), _write_json(payload))
    print(f"trained {len(models)} ensemble members into {args.out_dir}")
    return EXIT_OK


def cmd_ensemble_score(args, manifest: Manifest) -> int:
    spec = _load_spec(manifest, args.spec)
    ens_path = manifest.add_input(os.path.join(args.models, "ensemble.json"))
    with open(ens_path) as fh:
        meta = json.load(fh)
    if meta.get("format") != "macronas-ensemble/1":
        raise CliError(EXIT_VALIDATION, "bad-ensemble", f"not an ensemble dir: {args.models}")
    models = [
        pred.load_checkpoint(manifest.add_input(os.path.join(args.models, name)), spec)
        for name in meta["models"]
    ]
    weights = scorer.EnsembleWeights(meta["hop_srcc"])
    table = scorer.build_score_table(models, spec, mode=args.mode, weights=weights)
    manifest.emit(args.out, lambda p: scorer.write_table_csv(table, p))
    rows = sum(len(r) for r in table.stages.values())
    print(f"ensemble of {len(models)} scored {rows} subgraphs (mode={args.mode})")
    return EXIT_OK


def train_ensemble(
    spec: sp.SearchSpaceSpec,
    records: list[sp.DatasetRecord],
    base: pred.PredictorConfig,
    folds: int = 5,
    fold_seeds: int = 4,
) -> tuple[list[pred.PredictorModel], scorer.EnsembleWeights]:
    """K-fold x reshuffle-seed ensemble with held-out per-hop SRCC weights.

    Every member trains on folds-1 folds; its weight row is the exact
    per-hop SRCC on the held-out fold. Each reshuffle seed reshuffles the
    fold assignment and offsets the member's init/shuffle seed.
    """
    if len(records) < folds:
        raise ValueError(f"need at least {folds} records for {folds}-fold training")
    models: list[pred.PredictorModel] = []
    rows: list[list[float]] = []
    for fs in range(fold_seeds):
        perm = np.random.default_rng([base.seed, 0xF0, fs]).permutation(len(records))
        for fold in range(folds):
            held = [records[i] for i in perm[fold::folds]]
            rest = [records[i] for i in perm if i not in {int(j) for j in perm[fold::folds]}]
            member_cfg = replace(base, seed=base.seed + 1000 * fs + fold)
            model, _ = pred.train(spec, rest, member_cfg)
            scorer.compute_hop_stats(model, spec, rest)
            held_srcc = pred.eval_srcc(model, spec, held)
            models.append(model)
            rows.append(held_srcc["hops"])
    return models, scorer.EnsembleWeights(rows)


def cmd_report(args, manifest: Manifest) -> int:
    path = manifest.add_input(args.input)
    kind, payload = _detect_artifact(path)
    if args.format == "csv":
        manifest.emit(args.out, lambda p: _report_csv(kind, payload, p))
    elif args.format == "svg":
        if kind != "front":
            raise CliError(EXIT_VALIDATION, "bad-format", f"svg reports need a front, got {kind}")
        manifest.emit(args.out, lambda p: _report_svg(payload, p))
    else:
        raise CliError(EXIT_USAGE, "bad-format", f"unsupported format {args.format!r}")
    print(f"wrote {args.format} report for {kind}")
    return EXIT_OK


def _detect_artifact(path):
    with open(path) as fh:
        head = fh.read(1)
        fh.seek(0)
        if head == "#":
            line = fh.readline()
            if scorer.TABLE_FORMAT in line:
                return "table", path
        else:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError:
                payload = None
            if isinstance(payload, dict):
                if payload.get("format") == "macronas-front/1":
                    return "front", payload
                if payload.get("format") == "macronas-srcc/1":
                    return "srcc", payload
    raise CliError(EXIT_VALIDATION, "unknown-artifact", f"cannot detect artifact kind: {path}")


def _report_csv(kind, payload, out):
    with open(out, "w") as fh:
        if kind == "front":
            names = [n for n, _ in payload["directions"]]
            fh.write(",".join(["arch_id"] + names) + "\n")
            for m in payload["members"]:
                row = [m["arch_id"]] + [f"{m['objectives'][n]:.17g}" for n in names]
                fh.write(",".join(row) + "\n")
        elif kind == "srcc":
            fh.write("level,srcc\n")
            for m, v in enumerate(payload["hops"]):
                fh.write(f"hop_{m},{v:.17g}\n")
            fh.write(f"pred,{payload['pred']:.17g}\n")
        else:  # table csv: canonical copy
            with open(payload) as src:
                fh.write(src.read())


def _report_svg(payload, out):
    """Scatter of the two objectives with the front polyline."""
    names = [n for n, _ in payload["directions"]]
    pts = [(m["objectives"][names[0]], m["objectives"][names[1]]) for m in payload["members"]]
    w, h, pad = 640, 480, 50
    with open(out, "w") as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">\n')
        fh.write(f'<rect width="{w}" height="{h}" fill="white"/>\n')
        if pts:
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            x0, x1 = min(xs), max(xs)
            y0, y1 = min(ys), max(ys)
            sx = lambda x: pad + (w - 2 * pad) * (0.5 if x1 == x0 else (x - x0) / (x1 - x0))
            sy = lambda y: h - pad - (h - 2 * pad) * (0.5 if y1 == y0 else (y - y0) / (y1 - y0))
            ordered = sorted(pts)
            line = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in ordered)
            fh.write(f'<polyline points="{line}" fill="none" stroke="steelblue"/>\n')
            for x, y in pts:
                fh.write(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="4" fill="crimson"/>\n')
        fh.write(
            f'<text x="{w / 2:.0f}" y="{h - 12}" text-anchor="middle">{names[0]}</text>\n'
        )
        fh.write(
            f'<text x="14" y="{h / 2:.0f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {h / 2:.0f})">{names[1]}</text>\n'
        )
        fh.write("</svg>\n")


# ---------------------------------------------------------------------------
# argument wiring


def _add_train_flags(p):
    p.add_argument("--target", default="y")
    p.add_argument("--loss", default="ranked", choices=pred.model.LOSS_MODES)
    p.add_argument("--hops", type=int, default=4)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--aggregation", default="mean", choices=["mean", "sum"])
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--weight-decay", type=float, default=1e-5)
    p.add_argument("--soft-rank-eps", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macronas",
        description="Macro search-space toolkit: predictors, module scores, reduction, search.",
    )
    parser.add_argument("--config", help="JSON file of per-subcommand flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    space = sub.add_parser("space", help="generate or measure search spaces")
    space_sub = space.add_subparsers(dest="space_command", required=True)
    g = space_sub.add_parser("gen", help="write a bundled space (and optional oracle)")
    g.add_argument("--template", required=True, choices=sp.TEMPLATE_NAMES)
    g.add_argument("--out", required=True)
    g.add_argument("--oracle-out")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise", type=float, default=0.05)
    g.add_argument("--interaction", type=float, default=0.1)
    g.set_defaults(fn=cmd_space_gen, name="space gen")
    c = space_sub.add_parser("count", help="count subgraphs and space size")
    c.add_argument("--spec", required=True)
    c.set_defaults(fn=cmd_space_count, name="space count", seed=None)

    p = sub.add_parser("sample", help="sample random valid architectures")
    p.add_argument("--spec", required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sample, name="sample")

    p = sub.add_parser("label", help="evaluate architectures against an oracle")
    p.add_argument("--spec", required=True)
    p.add_argument("--oracle", required=True)
    p.add_argument("--archs", required=True)
    p.add_argument("--target", action="append", metavar="NAME=EXPR")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_label, name="label", seed=None)

    p = sub.add_parser("train", help="train a predictor")
    p.add_argument("--spec", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--test")
    p.add_argument("--out", required=True)
    p.add_argument("--with-stats", action="store_true",
                   help="also compute hop and stage-label statistics")
    _add_train_flags(p)
    p.set_defaults(fn=cmd_train, name="train")

    p = sub.add_parser("stats", help="compute hop/label statistics into a checkpoint")
    p.add_argument("--spec", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--floor", type=int, default=scorer.DEFAULT_COUNT_FLOOR)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_stats, name="stats", seed=None)

    p = sub.add_parser("eval-srcc", help="per-hop and prediction SRCC on a dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval_srcc, name="eval-srcc", seed=None)

    p = sub.add_parser("score", help="score every stage subgraph with one model")
    p.add_argument("--spec", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--mode", default="shifted", choices=["shifted", "zscore"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_score, name="score", seed=None)

    p = sub.add_parser("feat-importance", help="per-category feature choice scores")
    p.add_argument("--spec", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_feat_importance, name="feat-importance", seed=None)

    p = sub.add_parser("reduce", help="top-K subgraphs per stage from a score table")
    p.add_argument("--spec", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--selection", default="unconstrained",
                   choices=["unconstrained", "hop_constrained"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_reduce, name="reduce", seed=None)

    p = sub.add_parser("union", help="union of reduced spaces")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("reduced", nargs="+")
    p.set_defaults(fn=cmd_union, name="union", seed=None)

    p = sub.add_parser("build", help="exact top-n architectures by total score")
    p.add_argument("--spec", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--reduced")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_build, name="build", seed=None)

    p = sub.add_parser("enumerate", help="list all architectures of a reduced space")
    p.add_argument("--spec", required=True)
    p.add_argument("--reduced", required=True)
    p.add_argument("--cap", type=int, default=builder.DEFAULT_REDUCED_CAP)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_enumerate, name="enumerate", seed=None)

    p = sub.add_parser("nas", help="multi-objective evolutionary search")
    p.add_argument("--spec", required=True)
    p.add_argument("--oracle", required=True)
    p.add_argument("--reduced")
    p.add_argument("--initial", type=int, default=50)
    p.add_argument("--iters", type=int, default=4)
    p.add_argument("--per-iter", type=int, default=50)
    p.add_argument("--mutation", default="stage_swap", choices=["stage_swap", "layer_edit"])
    p.add_argument("--objective", action="append", default=None, metavar="NAME:max|min")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="evaluation log (jsonl)")
    p.add_argument("--front-out")
    p.set_defaults(fn=cmd_nas, name="nas")

    ens = sub.add_parser("ensemble", help="k-fold ensembles")
    ens_sub = ens.add_subparsers(dest="ensemble_command", required=True)
    p = ens_sub.add_parser("train", help="train folds x seeds members")
    p.add_argument("--spec", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--fold-seeds", type=int, default=4)
    p.add_argument("--out-dir", required=True)
    _add_train_flags(p)
    p.set_defaults(fn=cmd_ensemble_train, name="ensemble train")
    p = ens_sub.add_parser("score", help="SRCC-weighted ensemble score table")
    p.add_argument("--spec", required=True)
    p.add_argument("--models", required=True, help="directory from ensemble train")
    p.add_argument("--mode", default="zscore", choices=["shifted", "zscore"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ensemble_score, name="ensemble score", seed=None)

    p = sub.add_parser("report", help="render fronts/tables/SRCC vectors to csv or svg")
    p.add_argument("--input", required=True)
    p.add_argument("--format", required=True, choices=["csv", "svg"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report, name="report", seed=None)

    return parser


def _apply_config_file(parser, argv):
    """--config file entries become flag defaults (flags still win)."""
    if "--config" not in argv:
        return argv, {}
    idx = argv.index("--config")
    try:
        path = argv[idx + 1]
    except IndexError:
        raise CliError(EXIT_USAGE, "bad-config", "--config needs a path") from None
    try:
        with open(path) as fh:
            config = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_IO, "config-io", f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_VALIDATION, "config-parse", f"bad config JSON: {exc}") from exc
    return argv, config


def run(argv=None) -> int:
    """Entry point used by tests; returns the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv, file_config = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        section = file_config.get(getattr(args, "name", args.command), {})
        for key, value in section.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise CliError(
                    EXIT_VALIDATION, "config-key", f"unknown config key '{key}'"
                )
            # Flags given on the command line take precedence: argparse has
            # already set them, so only overwrite values still at default.
            if parser.get_default(attr) == getattr(args, attr, None):
                setattr(args, attr, value)
        effective = {
            k: v
            for k, v in sorted(vars(args).items())
            if k not in ("fn", "name", "command", "config") and not callable(v)
        }
        manifest = Manifest(args.name, getattr(args, "seed", None), effective)
        return args.fn(args, manifest)
    except CliError as exc:
        print(f"error code={exc.code} kind={exc.kind} msg={exc}", file=sys.stderr)
        return exc.code
    except (sp.SpaceError, scorer.ScoringError, builder.BuilderError,
            bench.TargetSyntaxError, bench.TargetEvalError, pred.CheckpointError,
            nm.DegenerateTargetsError, evonas.EvaluationError, evonas.MutationError,
            ValueError) as exc:
        print(f"error code={EXIT_VALIDATION} kind={type(exc).__name__} msg={exc}",
              file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error code={EXIT_IO} kind={type(exc).__name__} msg={exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(run())


if __name__ == "__main__":
    entrypoint()
