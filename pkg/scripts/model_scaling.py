"""Speedup and normalized energy of every variant on the three model presets.

    python scripts/model_scaling.py --seeds 3 --out out/model_scaling.csv
    python scripts/model_scaling.py --set hw.overlap=serial
"""

import argparse
import csv
import sys
from pathlib import Path

from pointer_sim.experiment import ExperimentConfig, apply_overrides, prepare_workload, run_variants
from pointer_sim.perfmodel import compare_variants
from pointer_sim.network import PRESETS


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--out", default="out/model_scaling.csv")
    args = ap.parse_args(argv)

    rows = []
    for model in PRESETS:
        for seed in range(args.seeds):
            exp = ExperimentConfig.from_dict(apply_overrides({"model": model, "seed": seed}, args.set))
            results = [r for r, _, _ in run_variants(exp, prepare_workload(exp))]
            for row in compare_variants(results):
                rows.append({"model": model, "seed": seed, "variant": row["variant"],
                             "speedup": row["speedup"], "normalized_energy": row["normalized_energy"]})

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

    print(f"{'model':<8}{'variant':<14}{'speedup':>9}{'energy':>9}")
    for model in PRESETS:
        for v in ("pointer1", "pointer12", "pointer"):
            sel = [r for r in rows if r["model"] == model and r["variant"] == v]
            sp = sum(r["speedup"] for r in sel) / len(sel)
            en = sum(r["normalized_energy"] for r in sel) / len(sel)
            print(f"{model:<8}{v:<14}{sp:>9.2f}{en:>9.4f}")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
