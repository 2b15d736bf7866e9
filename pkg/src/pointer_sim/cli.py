"""Command-line entry point: ``pointer-sim {run,sweep-buffer,golden,validate-config}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .experiment import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    fetch_reductions,
    prepare_workload,
    reram_check,
    run_variant,
    run_variants,
    with_buffer,
)
from .memsim import BufferConfig, buffer_timeline, min_zero_miss_capacity, simulate
from .network import config_from_dict, config_to_dict, validate_config
from .perfmodel import compare_variants, comparison_csv
from .scheduler import baseline_schedule, event_label, format_events, inter_layer_coordinate, intra_layer_order, validate_schedule
from .toy import TOYS, toy_config, toy_mapping

SWEEP_VARIANTS = ("pointer12", "pointer")
# bumped whenever a CSV column is renamed, removed or reordered
CSV_SCHEMA_VERSION = 1


def _load_experiment(args) -> ExperimentConfig:
    path = Path(args.config)
    d = json.loads(path.read_text())
    if "config" in d and "artifact_version" in d:
        d = d["config"]
    overrides = list(args.set or [])
    if args.out:
        overrides.append(f"output_dir={json.dumps(args.out)}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "variants", None):
        overrides.append("variants=" + json.dumps(args.variants.split(",")))
    if getattr(args, "trace", None):
        overrides.append(f"trace={json.dumps(args.trace)}")
    return ExperimentConfig.from_dict(apply_overrides(d, overrides))


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _manifest(exp: ExperimentConfig, outputs, wall_clock: float, command: str) -> dict:
    return {
        "artifact_version": __version__,
        "command": command,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "config": exp.to_dict(),
        "seeds": exp.seeds(),
        "outputs": sorted(outputs),
        "wall_clock_s": round(wall_clock, 3),
    }


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    exp = _load_experiment(args)
    cfg = exp.network()
    errors = [d for d in validate_config(cfg) if d.level == "error"]
    if errors:
        for d in errors:
            print(d, file=sys.stderr)
        return 2
    out = Path(exp.output_dir)
    wl = prepare_workload(exp)
    runs = run_variants(exp, wl)
    results = [r for r, _, _ in runs]
    reports = {r.variant: rep for r, rep, _ in runs}
    rows = compare_variants(results)

    traffic = {
        "workload": wl.name,
        "network": config_to_dict(cfg),
        "buffer": exp.buffer,
        "variants": {v: reports[v].to_dict() for v in exp.variants},
        "fetch_reductions": fetch_reductions(reports),
        "reram": reram_check(exp, wl),
    }
    outputs = {"comparison.csv": comparison_csv(rows), "traffic.json": _dumps(traffic)}
    for r, _, trace in runs:
        if trace is not None:
            outputs["trace.csv"] = trace.to_csv()
    for name, text in outputs.items():
        _write(out / name, text)
    manifest = _manifest(exp, list(outputs) + ["manifest.json"], time.perf_counter() - t0, "run")
    _write(out / "manifest.json", _dumps(manifest))

    print(f"workload {wl.name}")
    print(f"{'variant':<13}{'speedup':>10}{'energy':>10}{'fetch KB':>11}{'write KB':>11}{'weight KB':>12}  hit rates")
    for row in rows:
        print(f"{row['variant']:<13}{row['speedup']:>10.2f}{row['normalized_energy']:>10.4f}"
              f"{row['feature_fetch_bytes'] / 1024:>11.1f}{row['feature_write_bytes'] / 1024:>11.1f}"
              f"{row['weight_fetch_bytes'] / 1024:>12.1f}  {row['hit_rates']}")
    for name, red in traffic["fetch_reductions"].items():
        ref = red["reference"]
        ref_txt = f" (reference {ref:.0%})" if ref is not None else ""
        print(f"fetch reduction {name}: {red['measured']:.1%}{ref_txt}")
    print(f"wrote {', '.join(sorted(outputs))}, manifest.json to {out}")
    return 0


def cmd_sweep_buffer(args) -> int:
    t0 = time.perf_counter()
    exp = _load_experiment(args)
    if args.capacities:
        exp = replace(exp, capacities=[int(c) for c in args.capacities.split(",")])
    if not exp.capacities:
        raise ConfigError("need at least one capacity")
    wl = prepare_workload(exp)
    l = wl.cfg.l
    # the MAC baseline keeps the configured buffer; only the evaluated variants sweep
    base, _, _ = run_variant(exp, wl, "baseline_mac")
    header = ["capacity", "unit"]
    for v in SWEEP_VARIANTS:
        header += [f"{v}_l{j}_hit_rate" for j in range(1, l + 1)]
        header += [f"{v}_l{j}_hits" for j in range(1, l + 1)]
        header += [f"{v}_speedup"]
    body = io.StringIO()
    w = csv.writer(body, lineterminator="\n")
    w.writerow(header)
    for cap in exp.capacities:
        row = [cap, exp.sweep_unit]
        for v in SWEEP_VARIANTS:
            res, rep, _ = run_variant(with_buffer(exp, exp.sweep_unit, cap), wl, v)
            row += [repr(h) for h in rep.hit_rates()]
            row += [s.hits for s in rep.layers]
            row += [repr(base.cycles / res.cycles)]
        w.writerow(row)
    out = Path(exp.output_dir)
    _write(out / "hitrates.csv", body.getvalue())
    manifest = _manifest(exp, ["hitrates.csv", "manifest.json"], time.perf_counter() - t0, "sweep-buffer")
    _write(out / "manifest.json", _dumps(manifest))
    sys.stdout.write(body.getvalue())
    return 0


def golden_text(toy: str, capacity: int | None = None) -> str:
    """Schedules and buffer timelines of a toy instance, as printed by ``golden``."""
    if toy not in TOYS:
        raise ConfigError(f"unknown toy {toy!r}; choose from {TOYS}")
    mapping, cfg = toy_mapping(), toy_config()
    last = mapping.layers[-1]
    centers = last.centers.center_indices
    index_order = sorted(int(c) for c in centers)
    topo_order = intra_layer_order(centers, last.parent.coords[centers])
    schedules = {
        "a": ("layer by layer, index order", baseline_schedule(mapping)),
        "b": ("inter-layer coordination", inter_layer_coordinate(mapping, index_order)),
        "c": ("inter-layer coordination + intra-layer reordering", inter_layer_coordinate(mapping, topo_order)),
    }
    c_star = min_zero_miss_capacity(schedules["c"][1], mapping, cfg)
    cap = capacity or c_star
    lines = [
        f"inter-layer schedule:  {format_events(schedules['b'][1], mapping)}",
        f"reordered schedule:    {format_events(schedules['c'][1], mapping)}",
        f"min zero-miss capacity of reordered schedule: {c_star} entries",
        f"timelines at capacity {cap} (layer-2 buffer partition, labels are point ids)",
    ]
    ids = mapping.layers[0].parent.ids
    for key, (title, sched) in schedules.items():
        assert not validate_schedule(sched, mapping)
        trace, rep = simulate(sched, mapping, cfg, BufferConfig(capacity_entries=cap), "pointer1")
        lines.append("")
        lines.append(f"({key}) {title}: non-compulsory misses = {rep.non_compulsory_misses}")
        for step, row in enumerate(buffer_timeline(trace, sched, partition=2)):
            ev = row["event"]
            label = event_label(mapping, ev.layer, ev.point)
            content = " ".join(f"P{ids[p]}" for p in row["before"]) or "-"
            note = ""
            if ev.layer == 2:
                note = "  hit " + (",".join(f"P{ids[p]}" for p in row["hits"]) or "-")
                if row["misses"]:
                    note += "  MISS " + ",".join(f"P{ids[p]}" for p in row["misses"])
            lines.append(f"  t{step:<3}{label:<7} buffer [{content}]{note}")
    return "\n".join(lines) + "\n"


def cmd_golden(args) -> int:
    text = golden_text(args.toy, args.capacity)
    if args.out:
        _write(Path(args.out) / f"{args.toy}.txt", text)
    sys.stdout.write(text)
    return 0


def cmd_validate_config(args) -> int:
    d = json.loads(Path(args.config).read_text())
    if "layers" in d:
        cfg = config_from_dict(d)
    else:
        cfg = ExperimentConfig.from_dict(d.get("config", d)).network()
    diags = validate_config(cfg)
    for diag in diags:
        print(diag)
    if any(diag.level == "error" for diag in diags):
        return 1
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pointer-sim", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="experiment config JSON (or a manifest.json to re-run)")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, help="global seed")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. --set buffer.capacity_bytes=4096")

    r = sub.add_parser("run", help="simulate variants and write comparison/traffic reports")
    common(r)
    r.add_argument("--variants", help="comma-separated variant list")
    r.add_argument("--trace", metavar="VARIANT", help="dump this variant's access trace to trace.csv")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep-buffer", help="hit rate and speedup against buffer capacity")
    common(s)
    s.add_argument("--capacities", help="comma-separated capacities (overrides config)")
    s.set_defaults(func=cmd_sweep_buffer)

    g = sub.add_parser("golden", help="print a toy instance's schedules and buffer timelines")
    g.add_argument("toy", choices=TOYS)
    g.add_argument("--capacity", type=int, help="buffer entries (default: min zero-miss capacity)")
    g.add_argument("--out", help="also write the text to <out>/<toy>.txt")
    g.set_defaults(func=cmd_golden)

    v = sub.add_parser("validate-config", help="check a network or experiment config")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
