"""Hotspot density map (CSV + log-scaled grayscale PNG) from a hotspot CSV or a fresh synthetic scene.

    python scripts/make_density.py --hotspots hotspots.csv --cell-deg 0.1 --out density
    python scripts/make_density.py --synthetic 20000 --out density
"""
import argparse
import dataclasses
from pathlib import Path

from hotspot_disambig.data import SceneConfig, generate_synthetic_scene, read_hotspot_csv
from hotspot_disambig.density import density_grid
from hotspot_disambig.labeling import label_campaign


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--hotspots", help="hotspot CSV (with a label column for --positives-only)")
    src.add_argument("--synthetic", type=int, metavar="N", help="generate and label N synthetic hotspots")
    ap.add_argument("--cell-deg", type=float, default=0.1)
    ap.add_argument("--positives-only", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="density")
    args = ap.parse_args()

    if args.hotspots:
        hotspots = read_hotspot_csv(args.hotspots)
    else:
        scene = generate_synthetic_scene(SceneConfig(n_points=args.synthetic), seed=args.seed)
        report, _ = label_campaign(scene.hotspots, scene.burned_areas)
        hotspots = [dataclasses.replace(h, label=report.labels[h.id]) for h in scene.hotspots]
    grid = density_grid(hotspots, args.cell_deg, args.positives_only)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid.write_csv(out / "density.csv")
    grid.write_image(out / "density.png")
    print(f"{grid.total} hotspots in {len(grid.counts)} cells -> {out}")


if __name__ == "__main__":
    main()
