"""Tabular baselines (LR, MLP, GBDT) on FS1 over several seeds.

    python scripts/run_baselines.py --seeds 5
"""
import argparse

from hotspot_disambig.experiment import BENCHMARK_MODELS, synthetic_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--featureset", default="FS1")
    ap.add_argument("--n-points", type=int, default=4000)
    args = ap.parse_args()

    result = synthetic_benchmark(range(args.seeds), [args.featureset], BENCHMARK_MODELS, {"n_points": args.n_points})
    for m in BENCHMARK_MODELS:
        median, per_seed = result[(args.featureset, m["type"])]
        print(f"{m['type']:<5} median test F1 {100 * median:6.2f}  ({', '.join(f'{100 * v:.1f}' for v in per_seed)})")


if __name__ == "__main__":
    main()
