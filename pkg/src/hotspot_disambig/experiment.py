"""Feature-set x model experiment runner.

Config schema (JSON)::

    {
      "data": {"synthetic": {...SceneConfig fields...}}
              | {"hotspots": "...csv", "burned_areas": "...geojson", "patches": "...hspt"},
      "featuresets": ["FS1", "FS4"]        # or "featureset": "FS1" | {flags}
      "models": [{"type": "gbdt", ...}]    # or "model": {...}; types lr, mlp, gbdt, patch_cnn, fusion_net
      "sampling": {"undersample": false, "target_pos_frac": 0.1, "n_splits": 50, "cell_deg": 1.0},
      "seed": 0
    }
"""
from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import sampling
from .data import read_burned_areas, read_hotspot_csv, read_patches
from .data.synthetic import SceneConfig, generate_synthetic_scene
from .features import ALL_FEATURES, FeatureSetConfig, feature_matrix, select_columns
from .geo import STIndex
from .labeling import label_hotspots, with_extinction_dates
from .metrics import compute_metrics, threshold
from .models import Standardizer, gbdt, logreg, mlp
from .models.io import save_model
from .patch_net import config_from as patch_config_from
from .patch_net import stack_patches, train_patch_net

MODEL_TYPES = ("lr", "mlp", "gbdt", "patch_cnn", "fusion_net")
FUSION_TABULAR = FeatureSetConfig("tabular", modis_viirs=True, time=True, nph=True)


class ConfigError(ValueError):
    pass


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:12]


def normalize_config(config: dict) -> dict:
    """Validate and fill defaults; raises ConfigError on schema violations."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    known = {"data", "featureset", "featuresets", "model", "models", "sampling", "seed"}
    unknown = set(config) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "data" not in config or not isinstance(config["data"], dict):
        raise ConfigError("config.data is required")
    data = config["data"]
    if "synthetic" not in data and not {"hotspots", "burned_areas"} <= set(data):
        raise ConfigError("config.data needs either 'synthetic' or 'hotspots' + 'burned_areas'")
    fsets = config.get("featuresets", [config["featureset"]] if "featureset" in config else ["FS1"])
    try:
        fsets = [FeatureSetConfig.parse(f) for f in fsets]
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    models = config.get("models", [config["model"]] if "model" in config else [])
    if not isinstance(models, list):
        raise ConfigError("config.models must be a list")
    for m in models:
        if not isinstance(m, dict) or m.get("type") not in MODEL_TYPES:
            raise ConfigError(f"each model needs a 'type' in {MODEL_TYPES}, got {m!r}")
    samp = {"undersample": False, "target_pos_frac": 0.10, "n_splits": 50, "cell_deg": 1.0}
    extra = set(config.get("sampling", {})) - set(samp)
    if extra:
        raise ConfigError(f"unknown sampling keys {sorted(extra)}")
    samp.update(config.get("sampling", {}))
    seed = config.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    return {
        "data": data,
        "featuresets": [f.name if f.name != "custom" else {k: getattr(f, k) for k in ("modis_viirs", "time", "land_cover", "sentinel3", "nph")} for f in fsets],
        "models": models,
        "sampling": samp,
        "seed": seed,
    }


@dataclass
class Dataset:
    ids: np.ndarray  # hotspot ids, one per row
    X: np.ndarray  # all feature blocks
    names: tuple
    y: np.ndarray
    patches: object = None  # mapping hotspot id -> RasterPatch
    splits: sampling.SplitAssignment = None
    label_summary: dict = field(default_factory=dict)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.ids.tobytes())
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(self.y.astype(np.int64).tobytes())
        h.update(self.splits.split.tobytes())
        return h.hexdigest()


def load_inputs(data: dict, seed: int):
    """(hotspots, burned_areas, patches) from a synthetic spec or file paths."""
    if "synthetic" in data:
        scene = generate_synthetic_scene(SceneConfig.from_dict(data["synthetic"]), seed)
        return scene.hotspots, scene.burned_areas, scene.patches
    hotspots = read_hotspot_csv(data["hotspots"])
    areas = read_burned_areas(data["burned_areas"])
    patches = None
    if data.get("patches"):
        patches = {p.hotspot_id: p for p in read_patches(data["patches"])}
    return hotspots, areas, patches


def build_dataset(config: dict, need_patches: bool = True) -> Dataset:
    config = normalize_config(config)
    seed = config["seed"]
    samp = config["sampling"]
    hotspots, areas, patches = load_inputs(config["data"], seed)
    idx = STIndex.from_records(hotspots)
    areas = with_extinction_dates(areas, idx)
    report = label_hotspots(hotspots, areas, idx)
    hotspots = [dataclasses.replace(h, label=report.labels[h.id]) for h in hotspots]
    if samp["undersample"]:
        hotspots = sampling.undersample(hotspots, samp["target_pos_frac"], seed, samp["cell_deg"])
    fs = ALL_FEATURES if (need_patches and patches is not None) else FUSION_TABULAR
    X, names = feature_matrix(hotspots, fs, patches, idx)
    y = np.array([h.label for h in hotspots], dtype=np.int64)
    splits = sampling.make_record_splits(hotspots, samp["n_splits"], seed, samp["cell_deg"])
    ids = np.array([h.id for h in hotspots], dtype=np.int64)
    return Dataset(ids, X, names, y, patches, splits, report.summary())


def _patch_array(ds: Dataset, rows) -> np.ndarray:
    if ds.patches is None:
        raise ConfigError("patch models need raster patches")
    return stack_patches([ds.patches[int(i)] for i in ds.ids[rows]])[1]


def fit_model(spec: dict, ds: Dataset, fs: FeatureSetConfig, train: np.ndarray, seed: int):
    """Train one model of ``spec["type"]`` on the rows selected by ``train``."""
    kind = spec["type"]
    hp = {k: v for k, v in spec.items() if k != "type"}
    if kind == "gbdt":
        X, _ = select_columns(ds.X, ds.names, fs)
        return gbdt.train_gbdt(X[train], ds.y[train], gbdt.config_from(hp), seed)
    if kind in ("lr", "mlp"):
        X, _ = select_columns(ds.X, ds.names, fs)
        std = Standardizer().fit(X[train])
        if kind == "lr":
            model = logreg.train_logreg(std.transform(X[train]), ds.y[train], logreg.config_from(hp), seed)
        else:
            model = mlp.train_mlp(std.transform(X[train]), ds.y[train], mlp.config_from(hp), seed)
        model.standardizer = std
        return model
    cfg = patch_config_from({**hp, "seed": hp.get("seed", seed)})
    patches = [ds.patches[int(i)] for i in ds.ids[train]] if ds.patches is not None else None
    if patches is None:
        raise ConfigError(f"model {kind} needs raster patches")
    if kind == "patch_cnn":
        return train_patch_net(patches, ds.y[train], cfg)
    # the fused tabular block is always sensor + time + nph, whatever the feature set
    T = select_columns(ds.X, ds.names, FUSION_TABULAR)[0]
    return train_patch_net(patches, ds.y[train], cfg, tabular=T[train])


def predict_model(model, ds: Dataset, fs: FeatureSetConfig, rows: np.ndarray) -> np.ndarray:
    """Positive-class probabilities for the selected rows."""
    if model.model_type == "patch_cnn":
        return model.predict_proba(_patch_array(ds, rows))
    if model.model_type == "fusion_net":
        T = select_columns(ds.X, ds.names, FUSION_TABULAR)[0]
        return model.predict_proba(_patch_array(ds, rows), T[rows])
    X, _ = select_columns(ds.X, ds.names, fs)
    return model.predict_proba(X[rows])


@dataclass
class ExperimentReport:
    cells: list
    config: dict
    seed: int
    fingerprint: str
    label_summary: dict
    timing: dict = field(default_factory=dict)
    run_dir: str = None

    def to_dict(self) -> dict:
        return {
            "cells": self.cells,
            "config": self.config,
            "seed": self.seed,
            "dataset_fingerprint": self.fingerprint,
            "label_summary": self.label_summary,
            "timing": self.timing,
        }

    def f1(self, featureset: str, model: str, role: str = "test") -> float:
        for c in self.cells:
            if c["featureset"] == featureset and c["model"] == model:
                return c[role]["f1"]
        raise KeyError((featureset, model))

    def table(self) -> str:
        lines = [f"{'featureset':<10} {'model':<11} {'val F1':>8} {'test F1':>8}"]
        for c in self.cells:
            lines.append(f"{c['featureset']:<10} {c['model']:<11} {100 * c['val']['f1']:8.2f} {100 * c['test']['f1']:8.2f}")
        return "\n".join(lines)


def run_experiment(config: dict, out_dir=None, run_dir=None, dataset: Dataset = None) -> ExperimentReport:
    """Fit every (feature set, model) cell on train and score val and test.

    With ``out_dir`` the run is stored under ``out_dir/<UTC timestamp>-<config hash>/``
    (or exactly ``run_dir``) as config.json, models/, report.json and report.csv.
    """
    t0 = time.perf_counter()
    config = normalize_config(config)
    seed = config["seed"]
    if run_dir is None and out_dir is not None:
        stamp = dt.datetime.now(dt.timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        run_dir = Path(out_dir) / f"{stamp}-{config_hash(config)}"
    if run_dir is not None:
        run_dir = Path(run_dir)
        (run_dir / "models").mkdir(parents=True, exist_ok=True)
        (run_dir / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True), encoding="utf-8")

    needs_patch = any(FeatureSetConfig.parse(f).needs_patch for f in config["featuresets"]) or any(
        m["type"] in ("patch_cnn", "fusion_net") for m in config["models"])
    ds = dataset if dataset is not None else (build_dataset(config, need_patches=needs_patch) if config["models"] else None)
    cells = []
    for fs_spec in config["featuresets"]:
        fs = FeatureSetConfig.parse(fs_spec)
        for spec in config["models"]:
            train, val, test = (ds.splits.mask(r) for r in sampling.ROLES)
            model = fit_model(spec, ds, fs, train, seed)
            cell = {"featureset": fs.name, "model": spec["type"]}
            for role, rows in (("val", val), ("test", test)):
                cell[role] = compute_metrics(ds.y[rows], threshold(predict_model(model, ds, fs, rows))).to_dict()
            if run_dir is not None:
                fname = f"models/{fs.name}-{spec['type']}.json"
                save_model(model, run_dir / fname, metadata={"featureset": fs.name, "feature_names": list(fs.names)})
                cell["model_file"] = fname
            cells.append(cell)
    report = ExperimentReport(
        cells=cells,
        config=config,
        seed=seed,
        fingerprint=ds.fingerprint() if ds is not None else "",
        label_summary=ds.label_summary if ds is not None else {},
        timing={"wall_clock_s": time.perf_counter() - t0},
        run_dir=str(run_dir) if run_dir is not None else None,
    )
    if run_dir is not None:
        (run_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
        with (run_dir / "report.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["featureset", "model", "val_f1", "test_f1", "model_file"])
            for c in cells:
                w.writerow([c["featureset"], c["model"], c["val"]["f1"], c["test"]["f1"], c.get("model_file", "")])
    return report


BENCHMARK_MODELS = ({"type": "lr"}, {"type": "mlp"}, {"type": "gbdt"})


def synthetic_benchmark(seeds=range(5), featuresets=("FS1", "FS3", "FS4"), models=BENCHMARK_MODELS,
                        scene: dict = None) -> dict:
    """Median test F1 over seeds on the planted-signal scene; {(fs, model): (median, per-seed)}."""
    scene = {"n_points": 4000, **(scene or {})}
    per_cell = {}
    for seed in seeds:
        cfg = {"data": {"synthetic": scene}, "featuresets": list(featuresets), "models": list(models), "seed": seed}
        for c in run_experiment(cfg).cells:
            per_cell.setdefault((c["featureset"], c["model"]), []).append(c["test"]["f1"])
    return {k: (float(np.median(v)), v) for k, v in per_cell.items()}
