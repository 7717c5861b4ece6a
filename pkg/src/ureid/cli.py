"""Command line entry points: gen | train | eval | ablate.

All commands read a JSON config file. ``--seed`` overrides the config's
top-level seed, ``--mode`` overrides the distance mode. Exit codes: 0 on
success, 2 on bad user input (config, files, dimensions), 1 on internal
errors. Outputs are byte-identical across reruns with the same inputs and
seed, except for the timestamps and timing fields inside run manifests and
summaries.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import Dataset, GenConfig, export, generate, load_dir
from .encoder import Encoder, FREE, INIT_UNIFORM, LINEAR
from .errors import (DimMismatchError, InvalidConfigError, ParseError, UreidError)
from .estimator import build_encoder
from .evaluation import evaluate
from .trainer import (TrainConfig, TrainResult, VARIANTS, reports_to_csv, train)

SWEEP_AXES = ("cam_weight", "cluster_momentum", "instance_momentum", "centroid_fraction")

_GEN_KEYS = {
    "n_identities": int, "n_cameras": int, "images_per_id_per_cam": int,
    "input_dim": int, "camera_shift": float, "noise_sigma": float,
}
_TRAIN_KEYS = {
    "variant": str, "epochs": int, "centroid_fraction": float, "use_temporal": bool,
    "use_camera_offset": bool, "cam_weight": float, "cluster_momentum": float,
    "instance_momentum": float, "temperature": float, "eps": float, "min_samples": int,
    "distance_mode": str, "learning_rate": float, "P": int, "K": int,
}
_ENCODER_KEYS = {"encoder_kind": str, "encoder_init": str, "embedding_dim": int}


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise InvalidConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InvalidConfigError("config root must be a JSON object")
    return cfg


def _coerce(section: str, key: str, value, want):
    if want is bool:
        if not isinstance(value, bool):
            raise InvalidConfigError(f"{section}.{key} must be a boolean, got {value!r}")
        return value
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return value
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidConfigError(f"{section}.{key} must be a number, got {value!r}")
        return float(value)
    if want is str:
        if not isinstance(value, str):
            raise InvalidConfigError(f"{section}.{key} must be a string, got {value!r}")
        return value
    raise AssertionError(want)


def _section(cfg: dict, name: str, required: bool) -> dict:
    section = cfg.get(name)
    if section is None:
        if required:
            raise InvalidConfigError(f"config is missing the {name!r} section")
        return {}
    if not isinstance(section, dict):
        raise InvalidConfigError(f"config section {name!r} must be an object")
    return section


def _seed_of(cfg: dict, override: int | None) -> int:
    if override is not None:
        return override
    seed = cfg.get("seed", 0)
    return _coerce("<root>", "seed", seed, int)


def _gen_config(cfg: dict, seed: int) -> GenConfig:
    section = _section(cfg, "gen", required=True)
    kwargs = {}
    for key, want in _GEN_KEYS.items():
        if key not in section:
            raise InvalidConfigError(f"gen.{key} is required")
        kwargs[key] = _coerce("gen", key, section[key], want)
    unknown = set(section) - set(_GEN_KEYS)
    if unknown:
        raise InvalidConfigError(f"unknown gen keys: {sorted(unknown)}")
    gc = GenConfig(seed=seed, **kwargs)
    gc.validate()
    return gc


def _train_config(cfg: dict, seed: int, mode_override: str | None) -> tuple[TrainConfig, dict]:
    section = dict(_section(cfg, "train", required=True))
    encoder_spec = {"encoder_kind": LINEAR, "encoder_init": INIT_UNIFORM, "embedding_dim": 32}
    for key, want in _ENCODER_KEYS.items():
        if key in section:
            encoder_spec[key] = _coerce("train", key, section.pop(key), want)
    unknown = set(section) - set(_TRAIN_KEYS)
    if unknown:
        raise InvalidConfigError(f"unknown train keys: {sorted(unknown)}")
    kwargs = {key: _coerce("train", key, value, _TRAIN_KEYS[key])
              for key, value in section.items()}
    if mode_override is not None:
        kwargs["distance_mode"] = mode_override
    tc = TrainConfig(seed=seed, **kwargs)
    tc.validate()
    return tc, encoder_spec


def _run_manifest(out: Path, command: str, cfg: dict, seed: int, files: list[str]) -> None:
    manifest = {
        "command": command,
        "version": f"ureid-{__version__}",
        "seed": seed,
        "config": cfg,
        "outputs": files,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_gen(args) -> int:
    cfg = _load_config(args.config)
    seed = _seed_of(cfg, args.seed)
    ds = generate(_gen_config(cfg, seed))
    out = Path(args.out)
    paths = export(ds, out)
    _run_manifest(out, "gen", cfg, seed, sorted(p.name for p in paths.values()))
    print(json.dumps({"instances": len(ds), "counts": ds.counts(), "out": str(out)}))
    return 0


def _train_once(ds: Dataset, tc: TrainConfig, encoder_spec: dict) -> tuple[TrainResult, Encoder]:
    view = ds.train_view()
    if len(view) == 0:
        raise InvalidConfigError("dataset has no train split")
    encoder = build_encoder(encoder_spec["encoder_kind"], encoder_spec["encoder_init"],
                            view.raws, len(ds), encoder_spec["embedding_dim"], tc.seed)
    if encoder.kind == LINEAR and encoder.input_dim != ds.input_dim:
        raise DimMismatchError(
            f"encoder input_dim {encoder.input_dim} != dataset d_in {ds.input_dim}")
    result = train(ds, encoder, tc)
    return result, encoder


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    seed = _seed_of(cfg, args.seed)
    tc, encoder_spec = _train_config(cfg, seed, args.mode)
    ds = load_dir(args.data)
    result, encoder = _train_once(ds, tc, encoder_spec)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "epochs.csv").write_text(reports_to_csv(result.reports))
    encoder.save(out / "checkpoint")
    summary = {
        "epochs": tc.epochs,
        "final_num_clusters": result.final_labeling.num_clusters,
        "final_clustering_acc": result.final_clustering_acc,
        "seconds_per_epoch": [r.seconds for r in result.reports],  # wall time, not reproducible
        "train_instances": len(ds.train_view()),
        "seed": seed,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _run_manifest(out, "train", cfg, seed,
                  ["epochs.csv", "checkpoint.json", "checkpoint.bin", "summary.json"])
    print(json.dumps({"out": str(out), "final_num_clusters": result.final_labeling.num_clusters}))
    return 0


def cmd_eval(args) -> int:
    ds = load_dir(args.data)
    encoder = Encoder.load(Path(args.checkpoint))
    if encoder.kind == LINEAR and encoder.input_dim != ds.input_dim:
        raise DimMismatchError(
            f"checkpoint input_dim {encoder.input_dim} != dataset d_in {ds.input_dim}")
    if encoder.kind == FREE and encoder.theta.shape[0] < len(ds):
        raise DimMismatchError(
            f"checkpoint holds {encoder.theta.shape[0]} rows for {len(ds)} instances")
    result = evaluate(encoder, ds)
    print(json.dumps(result.to_dict()))
    return 0


def _ablate_cells(cfg: dict) -> tuple[list[dict], list[int]]:
    section = _section(cfg, "ablate", required=True)
    variants = section.get("variants", [])
    if not isinstance(variants, list) or not all(isinstance(v, str) for v in variants):
        raise InvalidConfigError("ablate.variants must be a list of variant names")
    for v in variants:
        if v not in VARIANTS:
            raise InvalidConfigError(f"ablate.variants: unknown variant {v!r}")
    sweep = section.get("sweep")
    axis_values: list[tuple[str, float]] = []
    if sweep is not None:
        if not isinstance(sweep, dict) or "axis" not in sweep or "values" not in sweep:
            raise InvalidConfigError("ablate.sweep must be {axis, values}")
        axis = sweep["axis"]
        if axis not in SWEEP_AXES:
            raise InvalidConfigError(f"ablate.sweep.axis must be one of {SWEEP_AXES}")
        values = sweep["values"]
        if not isinstance(values, list) or not values:
            raise InvalidConfigError("ablate.sweep.values must be a non-empty list")
        axis_values = [(axis, _coerce("ablate.sweep", "values", v, float)) for v in values]
    seeds = section.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds \
            or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise InvalidConfigError("ablate.seeds must be a non-empty list of non-negative ints")

    cells: list[dict] = []
    variant_list = variants or [None]
    value_list = axis_values or [None]
    for variant in variant_list:
        for axis_value in value_list:
            overrides: dict = {}
            name_parts: list[str] = []
            if variant is not None:
                overrides["variant"] = variant
                name_parts.append(f"variant={variant}")
            if axis_value is not None:
                overrides[axis_value[0]] = axis_value[1]
                name_parts.append(f"{axis_value[0]}={axis_value[1]:g}")
            # "|" keeps the name a single CSV field
            cells.append({"name": "|".join(name_parts) or "base", "overrides": overrides})
    if not cells:
        raise InvalidConfigError("ablate: empty grid (give variants and/or sweep)")
    return cells, seeds


def cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    seed = _seed_of(cfg, args.seed)
    base_tc, encoder_spec = _train_config(cfg, seed, args.mode)
    cells, seeds = _ablate_cells(cfg)

    rows = ["cell,seed,mAP,rank1,clu_acc"]
    for cell_seed in seeds:
        ds = generate(_gen_config(cfg, cell_seed))
        for cell in cells:
            tc = dataclasses.replace(base_tc, seed=cell_seed, **cell["overrides"])
            tc.validate()
            result, encoder = _train_once(ds, tc, encoder_spec)
            retrieval = evaluate(encoder, ds)
            rows.append(f"{cell['name']},{cell_seed},{retrieval.mean_ap!r},"
                        f"{retrieval.cmc_at(1)!r},{result.final_clustering_acc!r}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.csv").write_text("\n".join(rows) + "\n")
    _run_manifest(out, "ablate", cfg, seed, ["ablation.csv"])
    print(json.dumps({"out": str(out), "cells": len(cells), "seeds": seeds}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ureid",
        description="Unsupervised re-identification training on plain feature vectors")
    parser.add_argument("--version", action="version", version=f"ureid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="train an encoder on a dataset directory")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--mode", choices=["direct", "softmax"], default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint on a dataset's query/gallery split")
    p_eval.add_argument("--checkpoint", required=True, help="path prefix of checkpoint.{json,bin}")
    p_eval.add_argument("--data", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_ablate = sub.add_parser("ablate", help="run a variant grid / parameter sweep")
    p_ablate.add_argument("--config", required=True)
    p_ablate.add_argument("--out", required=True)
    p_ablate.add_argument("--seed", type=int, default=None)
    p_ablate.add_argument("--mode", choices=["direct", "softmax"], default=None)
    p_ablate.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "mode", None) == "softmax":
        args.mode = "softmax_relative"
    try:
        return args.func(args)
    except (InvalidConfigError, ParseError, DimMismatchError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UreidError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
