"""Feature-set ablation on the planted-signal synthetic benchmark.

Prints the median-over-seeds test F1 (x100) for every feature set and model,
plus the per-seed values, and optionally writes them as JSON.

    python scripts/run_ablation.py --seeds 5 --featuresets FS1 FS3 FS4 --out ablation.json
"""
import argparse
import json
import time

from hotspot_disambig.experiment import BENCHMARK_MODELS, synthetic_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--featuresets", nargs="+", default=["FS1", "FS2", "FS3", "FS4", "FS5", "FS6"])
    ap.add_argument("--models", nargs="+", default=["gbdt"], choices=[m["type"] for m in BENCHMARK_MODELS])
    ap.add_argument("--n-points", type=int, default=4000)
    ap.add_argument("--out", help="optional JSON output path")
    args = ap.parse_args()

    models = [m for m in BENCHMARK_MODELS if m["type"] in args.models]
    start = time.perf_counter()
    result = synthetic_benchmark(range(args.seeds), args.featuresets, models, {"n_points": args.n_points})
    elapsed = time.perf_counter() - start

    print(f"{'featureset':<10} {'model':<6} {'median F1':>9}  per-seed")
    for (fs, model), (median, per_seed) in result.items():
        seeds = " ".join(f"{100 * v:5.1f}" for v in per_seed)
        print(f"{fs:<10} {model:<6} {100 * median:9.2f}  {seeds}")
    print(f"{elapsed / 60:.1f} min")
    if args.out:
        rows = [{"featureset": fs, "model": m, "median_f1": med, "per_seed_f1": ps}
                for (fs, m), (med, ps) in result.items()]
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
