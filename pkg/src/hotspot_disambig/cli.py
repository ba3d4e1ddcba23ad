"""Command-line entry point: ``python -m hotspot_disambig <command>``.

Every command reads its inputs from explicit flags, then the config's ``data``
section, then the default file names in ``--out`` written by earlier commands.
Exit codes: 0 success, 1 validation error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import sampling
from .data import (
    generate_synthetic_scene, read_burned_areas, read_hotspot_csv, read_patches,
    write_burned_areas, write_hotspot_csv, write_patches,
)
from .data.synthetic import SceneConfig
from .density import density_grid
from .experiment import (
    ConfigError, Dataset, fit_model, normalize_config, predict_model, run_experiment,
)
from .features import ALL_FEATURES, FeatureSetConfig, feature_matrix, read_feature_csv, write_feature_csv
from .geo import STIndex
from .labeling import label_campaign
from .metrics import compute_metrics, threshold
from .models.io import load_model, save_model

log = logging.getLogger("hotspot_disambig")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2

DEFAULT_FILES = {
    "hotspots": "hotspots.csv",
    "burned_areas": "burned_areas.geojson",
    "patches": "patches.hspt",
    "labeled": "labeled.csv",
    "features": "features.csv",
    "splits": "splits.csv",
    "model": "model.json",
}


def _load_config(path) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return cfg


def _input(args, flag: str, cfg_key: str = None, default: str = None) -> Path:
    explicit = getattr(args, flag, None)
    if explicit:
        return Path(explicit)
    data = args.cfg.get("data", {})
    if cfg_key and data.get(cfg_key):
        return Path(data[cfg_key])
    return args.out / DEFAULT_FILES[default or flag]


def _seed(args) -> int:
    return args.seed if args.seed is not None else args.cfg.get("seed", 0)


def _featureset(args) -> FeatureSetConfig:
    spec = args.featureset or args.cfg.get("featureset", "FS1")
    try:
        return FeatureSetConfig.parse(spec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _sampling(args) -> dict:
    return normalize_config({"data": {"synthetic": {}}, "sampling": args.cfg.get("sampling", {})})["sampling"]


def cmd_synth(args) -> None:
    spec = dict(args.cfg.get("data", {}).get("synthetic", {}))
    if args.n_points is not None:
        spec["n_points"] = args.n_points
    scene = generate_synthetic_scene(SceneConfig.from_dict(spec), _seed(args))
    write_hotspot_csv(args.out / DEFAULT_FILES["hotspots"], scene.hotspots)
    write_burned_areas(args.out / DEFAULT_FILES["burned_areas"], scene.burned_areas)
    (args.out / "truth.json").write_text(json.dumps(scene.truth.to_json(), sort_keys=True), encoding="utf-8")
    if not args.no_patches:
        ids = sorted(scene.patches)
        write_patches(args.out / DEFAULT_FILES["patches"], (scene.patches[i] for i in ids), count=len(ids))
    print(f"synth: {len(scene.hotspots)} hotspots, {len(scene.burned_areas)} burned areas -> {args.out}")


def cmd_label(args) -> None:
    hotspots = read_hotspot_csv(_input(args, "hotspots", "hotspots"))
    areas = read_burned_areas(_input(args, "burned_areas", "burned_areas"))
    report, areas = label_campaign(hotspots, areas)
    labeled = [dataclasses.replace(h, label=report.labels[h.id]) for h in hotspots]
    write_hotspot_csv(args.out / DEFAULT_FILES["labeled"], labeled, with_label=True)
    write_burned_areas(args.out / "burned_areas_estimated.geojson", areas)
    (args.out / "label_summary.json").write_text(json.dumps(report.summary(), indent=2, sort_keys=True), encoding="utf-8")
    print(f"label: {report.positives} positive / {report.negatives} negative")


def cmd_features(args) -> None:
    hotspots = read_hotspot_csv(_input(args, "hotspots", "labeled", "labeled"))
    fs = _featureset(args) if args.featureset or "featureset" in args.cfg else ALL_FEATURES
    patches = None
    if fs.needs_patch:
        patches = {p.hotspot_id: p for p in read_patches(_input(args, "patches", "patches"))}
        missing = [h.id for h in hotspots if h.id not in patches]
        if missing:
            raise ConfigError(f"{len(missing)} hotspots have no raster patch (first: {missing[0]})")
    X, names = feature_matrix(hotspots, fs, patches, STIndex.from_records(hotspots))
    labels = [h.label for h in hotspots]
    write_feature_csv(args.out / DEFAULT_FILES["features"], [h.id for h in hotspots], X, names,
                      labels if None not in labels else None)
    print(f"features: {X.shape[0]} x {X.shape[1]} ({fs.name})")


def cmd_split(args) -> None:
    hotspots = read_hotspot_csv(_input(args, "hotspots", "labeled", "labeled"))
    if any(h.label is None for h in hotspots):
        raise ConfigError("split needs labeled hotspots (run `label` first)")
    samp = _sampling(args)
    seed = _seed(args)
    if samp["undersample"]:
        hotspots = sampling.undersample(hotspots, samp["target_pos_frac"], seed, samp["cell_deg"])
    assign = sampling.make_record_splits(hotspots, samp["n_splits"], seed, samp["cell_deg"])
    roles = assign.roles
    with (args.out / DEFAULT_FILES["splits"]).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "split", "role"])
        for h, s, r in zip(hotspots, assign.split, roles):
            w.writerow([h.id, int(s), r])
    print("split: " + ", ".join(f"{r}={int(np.count_nonzero(roles == r))}" for r in sampling.ROLES))


def _read_splits(path) -> dict:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "role"} <= set(reader.fieldnames):
            raise ConfigError(f"{path}: splits file needs 'id' and 'role' columns")
        try:
            return {int(r["id"]): r["role"] for r in reader}
        except ValueError as exc:
            raise ConfigError(f"{path}: bad split row ({exc})") from None


def _load_table(args, model_type: str = None) -> tuple:
    """(Dataset restricted to split rows, role per row)."""
    ids, X, names, labels = read_feature_csv(_input(args, "features", "features"))
    if labels is None:
        raise ConfigError("feature table has no label column")
    roles = _read_splits(_input(args, "splits", "splits"))
    keep = np.array([i in roles for i in ids], dtype=bool)
    patches = None
    if model_type in ("patch_cnn", "fusion_net"):
        patches = {p.hotspot_id: p for p in read_patches(_input(args, "patches", "patches"))}
    ds = Dataset(ids[keep], X[keep], names, labels[keep], patches)
    return ds, np.array([roles[int(i)] for i in ds.ids])


def _model_spec(args) -> dict:
    spec = args.cfg.get("model", {"type": "gbdt"})
    if args.model_type:
        spec = {**spec, "type": args.model_type}
    normalize_config({"data": {"synthetic": {}}, "models": [spec]})
    return spec


def cmd_train(args) -> None:
    spec = _model_spec(args)
    fs = _featureset(args)
    ds, roles = _load_table(args, spec["type"])
    model = fit_model(spec, ds, fs, roles == "train", _seed(args))
    out = Path(args.model_out) if args.model_out else args.out / DEFAULT_FILES["model"]
    save_model(model, out, metadata={"featureset": fs.name, "feature_names": list(fs.names)})
    print(f"train: {spec['type']} on {fs.name}, {int(np.count_nonzero(roles == 'train'))} rows -> {out}")


class _ColumnSet:
    """Feature set given by an explicit column list (as stored in model metadata)."""

    name = "stored"

    def __init__(self, names):
        self.names = tuple(names)


def cmd_eval(args) -> None:
    model_path = Path(args.model) if args.model else args.out / DEFAULT_FILES["model"]
    model = load_model(model_path)
    meta = json.loads(model_path.read_text(encoding="utf-8")).get("metadata", {})
    if args.featureset:
        fs = _featureset(args)
    elif meta.get("feature_names"):
        fs = _ColumnSet(meta["feature_names"])
    else:
        raise ConfigError(f"{model_path}: no feature names stored; pass --featureset")
    ds, roles = _load_table(args, model.model_type)
    result = {}
    for role in args.roles:
        rows = roles == role
        pred = threshold(predict_model(model, ds, fs, rows)) if rows.any() else np.zeros(0, dtype=np.int64)
        result[role] = compute_metrics(ds.y[rows], pred).to_dict()
    (args.out / "eval.json").write_text(json.dumps(result, indent=2, sort_keys=True), encoding="utf-8")
    for role, m in result.items():
        print(f"eval {role}: F1 {m['f1_x100']:.2f} (tp={m['tp']} fp={m['fp']} fn={m['fn']} tn={m['tn']})")


def cmd_report(args) -> None:
    if not args.cfg:
        raise ConfigError("report needs --config")
    cfg = dict(args.cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    report = run_experiment(cfg, out_dir=args.out)
    print(report.table())
    if report.run_dir:
        print(f"report: {report.run_dir}")


def cmd_density(args) -> None:
    hotspots = read_hotspot_csv(_input(args, "hotspots", "hotspots"))
    grid = density_grid(hotspots, args.cell_deg, args.positives_only)
    grid.write_csv(args.out / "density.csv")
    grid.write_image(args.out / "density.png")
    print(f"density: {grid.total} hotspots in {len(grid.counts)} cells")


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    parser = argparse.ArgumentParser(prog="hotspot_disambig",
                                     description="Wildfire vs non-wildfire hotspot classification.")
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--seed", type=int, help="overrides config seed")
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "generate a synthetic campaign")
    p.add_argument("--n-points", type=int, default=None)
    p.add_argument("--no-patches", action="store_true", default=False, help="skip the (large) patch store")
    p = add("label", cmd_label, "cross-reference hotspots with burned areas")
    p.add_argument("--hotspots")
    p.add_argument("--burned-areas", dest="burned_areas")
    p = add("features", cmd_features, "build the feature table")
    p.add_argument("--hotspots")
    p.add_argument("--patches")
    p.add_argument("--featureset", default=None)
    p = add("split", cmd_split, "undersample (optional) and assign splits")
    p.add_argument("--hotspots")
    p = add("train", cmd_train, "fit one model on the train role")
    for flag in ("--features", "--splits", "--patches"):
        p.add_argument(flag)
    p.add_argument("--featureset", default=None)
    p.add_argument("--model-type", dest="model_type", default=None)
    p.add_argument("--model-out", dest="model_out", default=None)
    p = add("eval", cmd_eval, "score a stored model")
    for flag in ("--model", "--features", "--splits", "--patches"):
        p.add_argument(flag)
    p.add_argument("--featureset", default=None)
    p.add_argument("--roles", nargs="+", default=["val", "test"], choices=sampling.ROLES)
    add("report", cmd_report, "run the full feature-set x model grid")
    p = add("density", cmd_density, "hotspot density grid (CSV + PNG)")
    p.add_argument("--hotspots")
    p.add_argument("--cell-deg", dest="cell_deg", type=float, default=0.1)
    p.add_argument("--positives-only", dest="positives_only", action="store_true", default=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.cfg = _load_config(args.config)
        args.out = Path(args.out)
        args.out.mkdir(parents=True, exist_ok=True)
        args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
