"""Synthetic feature datasets, disk IO, and the train-view accessor.

A dataset is a flat list of instances (raw feature vector, camera id, and
ground-truth identity when known) plus a query/gallery/train split. The
generator draws identity prototypes uniformly on the unit sphere, adds one
fixed offset vector per camera (norm = ``camera_shift``) and i.i.d. Gaussian
noise, then renormalizes. Split rule per (identity, camera) cell: first image
to query, second to gallery, remainder to train.

File formats:
  features.csv  one instance per row, ``d_in`` real fields, no header
  labels.csv    rows ``index,camera[,identity]``
  manifest.json ``{n_cam, d_in, counts, seed, splits}``
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimMismatchError, InvalidConfigError, ParseError
from .numerics import l2_normalize, spawn_rng

TRAIN = "train"
QUERY = "query"
GALLERY = "gallery"
SPLITS = (TRAIN, QUERY, GALLERY)

UNKNOWN_IDENTITY = -1


@dataclass(frozen=True)
class Instance:
    index: int
    raw: np.ndarray
    camera: int
    identity: int  # UNKNOWN_IDENTITY when not available


@dataclass(frozen=True)
class GenConfig:
    n_identities: int
    n_cameras: int
    images_per_id_per_cam: int
    input_dim: int
    camera_shift: float
    noise_sigma: float
    seed: int

    def validate(self) -> None:
        for name in ("n_identities", "n_cameras", "images_per_id_per_cam", "input_dim"):
            if getattr(self, name) < 1:
                raise InvalidConfigError(f"gen.{name} must be >= 1, got {getattr(self, name)}")
        if self.camera_shift < 0:
            raise InvalidConfigError(f"gen.camera_shift must be >= 0, got {self.camera_shift}")
        if self.noise_sigma < 0:
            raise InvalidConfigError(f"gen.noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.seed < 0:
            raise InvalidConfigError(f"gen.seed must be >= 0, got {self.seed}")


class TrainView:
    """Read-only view of the train split: raw vectors and cameras only.

    Training code sees no identities through this accessor; ground truth
    stays on the Dataset for evaluation and reporting.
    """

    def __init__(self, instances: list[Instance]):
        self._instances = instances
        self.raws = np.stack([inst.raw for inst in instances]) if instances else np.empty((0, 0))
        self.cameras = np.array([inst.camera for inst in instances], dtype=np.int64)
        self.dataset_indices = np.array([inst.index for inst in instances], dtype=np.int64)

    def __len__(self) -> int:
        return len(self._instances)


@dataclass
class Dataset:
    instances: list[Instance]
    n_cam: int
    input_dim: int
    split: list[str]
    seed: int | None = None

    def __post_init__(self) -> None:
        if len(self.split) != len(self.instances):
            raise DimMismatchError("split list and instance list differ in length")
        for s in self.split:
            if s not in SPLITS:
                raise InvalidConfigError(f"unknown split tag {s!r}")

    def __len__(self) -> int:
        return len(self.instances)

    def subset(self, split: str) -> list[Instance]:
        return [inst for inst, s in zip(self.instances, self.split) if s == split]

    def train_view(self) -> TrainView:
        return TrainView(self.subset(TRAIN))

    def identities(self, instances: list[Instance] | None = None) -> np.ndarray:
        pool = self.instances if instances is None else instances
        return np.array([inst.identity for inst in pool], dtype=np.int64)

    def counts(self) -> dict[str, int]:
        out = {"total": len(self.instances)}
        for s in SPLITS:
            out[s] = sum(1 for tag in self.split if tag == s)
        return out


def generate(cfg: GenConfig) -> Dataset:
    """Draw a synthetic dataset. Deterministic in cfg.seed."""
    cfg.validate()
    rng = spawn_rng(cfg.seed, "dataset")
    d = cfg.input_dim

    prototypes = np.stack([l2_normalize(rng.standard_normal(d)) for _ in range(cfg.n_identities)])
    offsets = np.zeros((cfg.n_cameras, d))
    for c in range(cfg.n_cameras):
        direction = rng.standard_normal(d)  # drawn even for shift 0, keeps streams comparable
        if cfg.camera_shift > 0:
            offsets[c] = l2_normalize(direction) * cfg.camera_shift

    instances: list[Instance] = []
    split: list[str] = []
    index = 0
    m = cfg.images_per_id_per_cam
    for ident in range(cfg.n_identities):
        for cam in range(cfg.n_cameras):
            for k in range(m):
                noise = rng.normal(0.0, cfg.noise_sigma, d) if cfg.noise_sigma > 0 else np.zeros(d)
                raw = l2_normalize(prototypes[ident] + offsets[cam] + noise)
                instances.append(Instance(index=index, raw=raw, camera=cam, identity=ident))
                split.append(QUERY if k == 0 else GALLERY if k == 1 else TRAIN)
                index += 1

    return Dataset(instances=instances, n_cam=cfg.n_cameras, input_dim=d, split=split, seed=cfg.seed)


def _parse_float(token: str, path: Path, row: int) -> float:
    try:
        value = float(token)
    except ValueError as exc:
        raise ParseError(f"{path.name} row {row}: not a number: {token!r}") from exc
    if not math.isfinite(value):
        raise ParseError(f"{path.name} row {row}: non-finite value {token!r}")
    return value


def ingest(features_path: str | Path, labels_path: str | Path,
           manifest_path: str | Path | None = None) -> Dataset:
    """Load a dataset from the CSV pair (plus optional manifest with splits)."""
    features_path = Path(features_path)
    labels_path = Path(labels_path)

    raws: list[np.ndarray] = []
    width: int | None = None
    with features_path.open() as fh:
        for row, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ParseError(
                    f"{features_path.name} row {row}: expected {width} fields, got {len(fields)}")
            raws.append(np.array([_parse_float(tok, features_path, row) for tok in fields]))
    if not raws:
        raise ParseError(f"{features_path.name}: no rows")

    cameras: dict[int, int] = {}
    identities: dict[int, int] = {}
    with labels_path.open() as fh:
        for row, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) not in (2, 3):
                raise ParseError(
                    f"{labels_path.name} row {row}: expected 'index,camera[,identity]'")
            try:
                idx = int(fields[0])
                cam = int(fields[1])
                ident = int(fields[2]) if len(fields) == 3 else UNKNOWN_IDENTITY
            except ValueError as exc:
                raise ParseError(f"{labels_path.name} row {row}: non-integer field") from exc
            if idx in cameras:
                raise ParseError(f"{labels_path.name} row {row}: duplicate index {idx}")
            cameras[idx] = cam
            identities[idx] = ident

    n = len(raws)
    if sorted(cameras) != list(range(n)):
        raise ParseError(
            f"{labels_path.name}: indices must cover 0..{n - 1} exactly (got {len(cameras)} rows)")

    cam_ids = sorted(set(cameras.values()))
    if cam_ids[0] < 0:
        raise ParseError(f"{labels_path.name}: negative camera id {cam_ids[0]}")
    n_cam = cam_ids[-1] + 1
    if cam_ids != list(range(n_cam)):
        missing = sorted(set(range(n_cam)) - set(cam_ids))
        raise ParseError(f"{labels_path.name}: camera ids must be contiguous; missing {missing}")

    split = [TRAIN] * n
    seed = None
    if manifest_path is not None and Path(manifest_path).exists():
        manifest = json.loads(Path(manifest_path).read_text())
        seed = manifest.get("seed")
        declared = manifest.get("d_in")
        if declared is not None and declared != len(raws[0]):
            raise DimMismatchError(
                f"manifest d_in {declared} != features width {len(raws[0])}")
        for tag in (QUERY, GALLERY):
            for idx in manifest.get("splits", {}).get(tag, []):
                if not 0 <= idx < n:
                    raise ParseError(f"manifest splits[{tag}]: index {idx} out of range")
                split[idx] = tag

    instances = [
        Instance(index=i, raw=raws[i], camera=cameras[i], identity=identities[i])
        for i in range(n)
    ]
    return Dataset(instances=instances, n_cam=n_cam, input_dim=len(raws[0]),
                   split=split, seed=seed)


def export(ds: Dataset, out_dir: str | Path) -> dict[str, Path]:
    """Write features.csv / labels.csv / manifest.json. Deterministic bytes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    features_path = out / "features.csv"
    labels_path = out / "labels.csv"
    manifest_path = out / "manifest.json"

    with features_path.open("w") as fh:
        for inst in ds.instances:
            fh.write(",".join(f"{x:.17g}" for x in inst.raw) + "\n")
    with labels_path.open("w") as fh:
        for inst in ds.instances:
            if inst.identity == UNKNOWN_IDENTITY:
                fh.write(f"{inst.index},{inst.camera}\n")
            else:
                fh.write(f"{inst.index},{inst.camera},{inst.identity}\n")

    manifest = {
        "n_cam": ds.n_cam,
        "d_in": ds.input_dim,
        "counts": ds.counts(),
        "seed": ds.seed,
        "splits": {
            QUERY: [i for i, s in enumerate(ds.split) if s == QUERY],
            GALLERY: [i for i, s in enumerate(ds.split) if s == GALLERY],
        },
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {"features": features_path, "labels": labels_path, "manifest": manifest_path}


def load_dir(data_dir: str | Path) -> Dataset:
    """Load the features/labels/manifest triple from a directory."""
    data_dir = Path(data_dir)
    features = data_dir / "features.csv"
    labels = data_dir / "labels.csv"
    if not features.exists() or not labels.exists():
        raise ParseError(f"{data_dir}: expected features.csv and labels.csv")
    return ingest(features, labels, data_dir / "manifest.json")
