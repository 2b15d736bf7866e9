"""DRAM traffic per variant over many synthetic clouds (feature fetch / write / weight fetch).

    python scripts/traffic_breakdown.py --model model0 --seeds 10 --out out/traffic_breakdown.csv
"""

import argparse
import csv
import sys
from pathlib import Path

from pointer_sim.experiment import REFERENCE_REDUCTIONS, ExperimentConfig, prepare_workload, run_variants
from pointer_sim.scheduler import VARIANTS


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="model0")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--capacity-bytes", type=int, default=9216)
    ap.add_argument("--dist", default="uniform_cube")
    ap.add_argument("--out", default="out/traffic_breakdown.csv")
    args = ap.parse_args(argv)

    rows = []
    totals = {v: 0 for v in VARIANTS}
    for seed in range(args.seeds):
        exp = ExperimentConfig.from_dict({
            "model": args.model,
            "seed": seed,
            "input": {"synthetic": {"n": 1024, "dist": args.dist}},
            "buffer": {"capacity_bytes": args.capacity_bytes},
        })
        for res, rep, _ in run_variants(exp, prepare_workload(exp)):
            totals[res.variant] += rep.feature_fetch_bytes
            rows.append({
                "seed": seed,
                "variant": res.variant,
                "feature_fetch_bytes": rep.feature_fetch_bytes,
                "feature_write_bytes": rep.feature_write_bytes,
                "weight_fetch_bytes": rep.weight_fetch_bytes,
                **{f"l{j}_hit_rate": h for j, h in enumerate(rep.hit_rates(), start=1)},
            })

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

    for v in VARIANTS:
        print(f"{v:<13} feature fetch {totals[v] / args.seeds / 1024:9.1f} KB/cloud")
    r1 = 1 - totals["pointer12"] / totals["pointer1"]
    r2 = 1 - totals["pointer"] / totals["pointer12"]
    print(f"pointer12 vs pointer1: {r1:.1%} less fetch (reference {REFERENCE_REDUCTIONS['pointer12_vs_pointer1']:.0%})")
    print(f"pointer vs pointer12:  {r2:.1%} less fetch (reference {REFERENCE_REDUCTIONS['pointer_vs_pointer12']:.0%})")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
