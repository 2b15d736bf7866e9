"""Layer-wise buffer hit rate against capacity, averaged over seeds, for pointer12 and pointer.

    python scripts/hitrate_sweep.py --seeds 10 --out out/hitrate_sweep.csv
"""

import argparse
import csv
import sys
from pathlib import Path

from pointer_sim.geometry import build_mapping, gen_synthetic_cloud
from pointer_sim.memsim import hit_rate_sweep
from pointer_sim.network import load_preset
from pointer_sim.scheduler import schedule_for_variant

VARIANTS = ("pointer12", "pointer")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="model0")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--capacities", default="16,32,64,128,256,384,512,768")
    ap.add_argument("--out", default="out/hitrate_sweep.csv")
    args = ap.parse_args(argv)

    caps = [int(c) for c in args.capacities.split(",")]
    cfg = load_preset(args.model)
    # (variant, capacity) -> per-layer [hits, fetches]
    acc = {}
    for seed in range(args.seeds):
        mp = build_mapping(gen_synthetic_cloud(seed, 1024), cfg)
        for v in VARIANTS:
            for row in hit_rate_sweep(schedule_for_variant(mp, v), mp, cfg, caps, variant=v):
                cell = acc.setdefault((v, row["capacity"]), [[0, 0] for _ in range(cfg.l)])
                for j in range(cfg.l):
                    cell[j][0] += row["hits"][j]
                    cell[j][1] += row["fetches"][j]

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["capacity"] + [f"{v}_l{j}_hit_rate" for v in VARIANTS for j in range(1, cfg.l + 1)])
        for cap in caps:
            rates = [h / f for v in VARIANTS for h, f in acc[(v, cap)]]
            w.writerow([cap] + [f"{r:.6f}" for r in rates])
            print(f"{cap:>5} entries  " + "  ".join(f"{r:.3f}" for r in rates))
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
