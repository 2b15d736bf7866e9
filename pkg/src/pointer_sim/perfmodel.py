"""Analytic latency and energy over traffic reports and compute counts.

All absolute numbers depend on the calibration in ``HwConfig`` and the
energy table; only ratios between variants run on the same workload are
meaningful.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from .reram import QuantSpec

__all__ = [
    "HwConfig",
    "ComputeCounts",
    "EnergyTable",
    "EnergyTableError",
    "Latency",
    "Energy",
    "SimResult",
    "ENERGY_KEYS",
    "compute_counts",
    "latency_estimate",
    "energy_estimate",
    "load_energy_table",
    "default_energy_table",
    "compare_variants",
    "comparison_csv",
    "RERAM_VARIANTS",
]

RERAM_VARIANTS = ("pointer1", "pointer12", "pointer")
ENERGY_KEYS = (
    "dram_per_byte",
    "buffer_read_per_byte",
    "buffer_write_per_byte",
    "crossbar_per_op",
    "mac_per_op",
    "digital_per_op",
)


@dataclass(frozen=True)
class HwConfig:
    clock_hz: float = 1e9
    dram_bw_bytes_per_s: float = 8e9
    # one crossbar matrix-vector product (all bit planes); calibration default
    crossbar_op_latency_cycles: float = 100.0
    mac_rows: int = 32
    mac_cols: int = 32
    replication: int = 1
    overlap: str = "max"  # "max": compute and memory overlap; "serial": they add

    def __post_init__(self):
        for name in ("clock_hz", "dram_bw_bytes_per_s", "crossbar_op_latency_cycles", "mac_rows", "mac_cols",
                     "replication"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.overlap not in ("max", "serial"):
            raise ValueError(f"overlap must be 'max' or 'serial', got {self.overlap!r}")


@dataclass(frozen=True)
class ComputeCounts:
    """Per-layer operation counts of one network pass (independent of the schedule)."""

    invocations: tuple  # MLP evaluations, one per (center, neighbor)
    stages: tuple
    crossbar_array_ops: tuple  # array activations: invocations x arrays per MLP
    mac_ops: tuple
    mac_tile_passes: tuple  # 32x32 weight-tile x one-vector steps on the MAC array
    digital_ops: tuple  # subtract, bias+ReLU, max

    def total(self, name: str) -> int:
        return sum(getattr(self, name))


def compute_counts(cfg, q: QuantSpec = QuantSpec(), hw: HwConfig = HwConfig(), array_dim: int = 128) -> ComputeCounts:
    inv, stages, xbar, mac, tiles, dig = [], [], [], [], [], []
    for lc in cfg.layers:
        n = lc.m * lc.k
        inv.append(n)
        stages.append(len(lc.mlp_shapes))
        arrays = sum(math.ceil(r / array_dim) * math.ceil(c / array_dim) for r, c in lc.mlp_shapes) * q.n_slices
        xbar.append(n * arrays)
        mac.append(n * sum(r * c for r, c in lc.mlp_shapes))
        tiles.append(n * sum(math.ceil(r / hw.mac_rows) * math.ceil(c / hw.mac_cols) for r, c in lc.mlp_shapes))
        dig.append(n * lc.in_feat_len + n * sum(c for _, c in lc.mlp_shapes) + lc.m * (lc.k - 1) * lc.out_feat_len)
    return ComputeCounts(tuple(inv), tuple(stages), tuple(xbar), tuple(mac), tuple(tiles), tuple(dig))


@dataclass(frozen=True)
class Latency:
    memory_cycles: float
    compute_cycles: float
    total_cycles: float
    per_layer_compute: tuple = ()


def latency_estimate(traffic, counts: ComputeCounts, hw: HwConfig, variant: str) -> Latency:
    """Cycles for one pass.

    Memory time is total DRAM bytes over bandwidth. ReRAM compute pipelines
    the MLP stages, so a layer costs one crossbar latency per invocation
    (divided by replication) plus the pipeline fill; layers sit on separate
    arrays and overlap once events are interleaved (coordinated variants),
    otherwise they run one after another. The MAC baseline spends one cycle
    per weight-tile pass, layer after layer.
    """
    memory = traffic.dram_bytes / hw.dram_bw_bytes_per_s * hw.clock_hz
    if variant == "baseline_mac":
        per_layer = tuple(float(t) for t in counts.mac_tile_passes)
        compute = sum(per_layer)
    elif variant in RERAM_VARIANTS:
        lat = hw.crossbar_op_latency_cycles
        per_layer = tuple(
            (math.ceil(n / hw.replication) + s - 1) * lat if n else 0.0
            for n, s in zip(counts.invocations, counts.stages)
        )
        if variant == "pointer1":
            compute = sum(per_layer)
        else:
            compute = max(per_layer, default=0.0)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    total = max(memory, compute) if hw.overlap == "max" else memory + compute
    return Latency(memory, compute, total, per_layer)


class EnergyTableError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyTable:
    values: dict  # key -> joules per unit
    provenance: dict = field(default_factory=dict)

    def __getitem__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise EnergyTableError(f"energy table has no entry {key!r}") from None

    @classmethod
    def from_dict(cls, d: dict, strict: bool = True) -> "EnergyTable":
        values, prov = {}, {}
        entries = d.get("entries", d)
        for key in ENERGY_KEYS:
            if key not in entries:
                raise EnergyTableError(f"energy table missing {key!r}")
            e = entries[key]
            if isinstance(e, dict):
                value, source = e.get("value"), e.get("provenance")
            else:
                value, source = e, None
            if value is None or float(value) < 0:
                raise EnergyTableError(f"{key}: value must be a non-negative number")
            if not source:
                if strict:
                    raise EnergyTableError(f"{key}: missing provenance")
                warnings.warn(f"energy entry {key!r} has no provenance", stacklevel=2)
            values[key] = float(value)
            prov[key] = source or ""
        return cls(values, prov)

    def to_dict(self) -> dict:
        return {"entries": {k: {"value": self.values[k], "provenance": self.provenance.get(k, "")}
                            for k in ENERGY_KEYS}}


def load_energy_table(path, strict: bool = True) -> EnergyTable:
    return EnergyTable.from_dict(json.loads(Path(path).read_text()), strict=strict)


def default_energy_table() -> EnergyTable:
    text = resources.files("pointer_sim").joinpath("data/energy_default.json").read_text()
    return EnergyTable.from_dict(json.loads(text))


@dataclass(frozen=True)
class Energy:
    dram: float
    buffer: float
    crossbar: float
    mac: float
    digital: float

    @property
    def total(self) -> float:
        return self.dram + self.buffer + self.crossbar + self.mac + self.digital


def energy_estimate(trace, counts: ComputeCounts, table: EnergyTable, variant: str) -> Energy:
    """Linear energy model. ``trace`` may be an ``AccessTrace`` or a ``TrafficReport``."""
    if hasattr(trace, "records"):
        t = trace.totals()
        dram_bytes = t["fetch"] + t["write"] + t["weight"]
        buf_read, buf_write = trace.buffer_bytes()
    else:
        dram_bytes = trace.dram_bytes
        buf_read, buf_write = trace.buffer_read_bytes, trace.buffer_write_bytes
    reram = variant in RERAM_VARIANTS
    if not reram and variant != "baseline_mac":
        raise ValueError(f"unknown variant {variant!r}")
    return Energy(
        dram=dram_bytes * table["dram_per_byte"],
        buffer=buf_read * table["buffer_read_per_byte"] + buf_write * table["buffer_write_per_byte"],
        crossbar=counts.total("crossbar_array_ops") * table["crossbar_per_op"] if reram else 0.0,
        mac=0.0 if reram else counts.total("mac_ops") * table["mac_per_op"],
        digital=counts.total("digital_ops") * table["digital_per_op"],
    )


@dataclass(frozen=True)
class SimResult:
    workload: str
    variant: str
    latency: Latency
    energy: Energy
    feature_fetch_bytes: int = 0
    feature_write_bytes: int = 0
    weight_fetch_bytes: int = 0
    hit_rates: tuple = ()

    @property
    def cycles(self) -> float:
        return self.latency.total_cycles

    @property
    def energy_joules(self) -> float:
        return self.energy.total


COMPARISON_COLUMNS = (
    "workload", "variant", "cycles", "memory_cycles", "compute_cycles", "energy_j",
    "speedup", "normalized_energy", "feature_fetch_bytes", "feature_write_bytes", "weight_fetch_bytes",
    "hit_rates",
)


def compare_variants(results, baseline: str = "baseline_mac") -> list[dict]:
    """Speedup and normalized energy of every result against the baseline variant.

    Without a baseline in ``results`` the first result is the reference.
    """
    results = list(results)
    if not results:
        return []
    workloads = {r.workload for r in results}
    if len(workloads) != 1:
        raise ValueError(f"results mix workloads: {sorted(workloads)}")
    ref = next((r for r in results if r.variant == baseline), results[0])
    rows = []
    for r in results:
        rows.append({
            "workload": r.workload,
            "variant": r.variant,
            "cycles": r.cycles,
            "memory_cycles": r.latency.memory_cycles,
            "compute_cycles": r.latency.compute_cycles,
            "energy_j": r.energy_joules,
            "speedup": ref.cycles / r.cycles if r.cycles else (1.0 if ref.cycles == 0 else math.inf),
            "normalized_energy": r.energy_joules / ref.energy_joules if ref.energy_joules else 1.0,
            "feature_fetch_bytes": r.feature_fetch_bytes,
            "feature_write_bytes": r.feature_write_bytes,
            "weight_fetch_bytes": r.weight_fetch_bytes,
            "hit_rates": ";".join(f"{h:.6f}" for h in r.hit_rates),
        })
    return rows


def comparison_csv(rows) -> str:
    out = io.StringIO()
    w = csv.DictWriter(out, fieldnames=COMPARISON_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return out.getvalue()


def result_to_dict(r: SimResult) -> dict:
    d = asdict(r)
    d["cycles"] = r.cycles
    d["energy_joules"] = r.energy_joules
    return d
