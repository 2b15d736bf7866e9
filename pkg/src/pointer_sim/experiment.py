"""Experiment configuration and the end-to-end pipeline behind the CLI.

One global seed feeds named sub-streams (``cloud``, ``weights``,
``scheduler``) so that every report can be regenerated from its manifest.
"""

from __future__ import annotations

import json
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .geometry import build_mapping, gen_synthetic_cloud, load_cloud, truncate_cloud
from .memsim import BufferConfig, SimParams, simulate
from .network import (
    NetworkConfig,
    config_from_dict,
    init_weights,
    fit_features,
    load_preset,
    mlp_forward_ref,
)
from .perfmodel import (
    EnergyTable,
    HwConfig,
    SimResult,
    compute_counts,
    default_energy_table,
    energy_estimate,
    latency_estimate,
    load_energy_table,
)
from .reram import QuantSpec, map_mlp, mlp_forward_reram, program_weights
from .scheduler import VARIANTS, schedule_for_variant

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "substream_seed",
    "Workload",
    "prepare_workload",
    "run_variant",
    "run_variants",
    "fetch_reductions",
    "apply_overrides",
    "REFERENCE_REDUCTIONS",
]

# published fetch-traffic reductions, echoed next to the measured ones
REFERENCE_REDUCTIONS = {"pointer12_vs_pointer1": 0.37, "pointer_vs_pointer12": 0.69}


class ConfigError(ValueError):
    pass


def substream_seed(seed: int, name: str) -> int:
    """Stable child seed for a named stream; independent of Python's hash randomization."""
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode())]).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    model: object = "model0"  # preset name or a NetworkConfig dict
    extra_column: bool = False
    input: dict = field(default_factory=lambda: {"synthetic": {"n": 1024, "dist": "uniform_cube"}})
    variants: list = field(default_factory=lambda: list(VARIANTS))
    buffer: dict = field(default_factory=lambda: {"capacity_bytes": 9216})
    capacities: list = field(default_factory=lambda: [32, 64, 128, 256, 512])
    sweep_unit: str = "entries"
    hw: dict = field(default_factory=dict)
    quant: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    energy_table: str | None = None
    strict_energy: bool = True
    output_dir: str = "out"
    seed: int = 0
    fps_start: int = 0
    order_start: object = None  # None: lowest index, "random": scheduler sub-stream, int: that point
    trace: str | None = None  # variant whose access trace is dumped to trace.csv

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        d = json.loads(Path(path).read_text())
        if "config" in d and "artifact_version" in d:  # a run manifest
            d = d["config"]
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    def check(self):
        if not self.variants:
            raise ConfigError("at least one variant is required")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise ConfigError(f"unknown variants {bad}; choose from {list(VARIANTS)}")
        if any(int(c) < 1 for c in self.capacities):
            raise ConfigError("capacities must be positive")
        if self.sweep_unit not in ("entries", "bytes"):
            raise ConfigError("sweep_unit must be 'entries' or 'bytes'")
        if self.trace is not None and self.trace not in self.variants:
            raise ConfigError(f"trace variant {self.trace!r} is not being run")
        if not ("synthetic" in self.input) ^ ("file" in self.input):
            raise ConfigError("input needs exactly one of 'synthetic' or 'file'")
        try:
            self.buffer_config()
            self.hw_config()
            self.quant_spec()
            self.sim_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def network(self) -> NetworkConfig:
        if isinstance(self.model, str):
            return load_preset(self.model, extra_column=self.extra_column)
        d = dict(self.model)
        d.setdefault("extra_column", self.extra_column)
        return config_from_dict(d)

    def buffer_config(self) -> BufferConfig:
        return BufferConfig(**self.buffer)

    def hw_config(self) -> HwConfig:
        return HwConfig(**self.hw)

    def quant_spec(self) -> QuantSpec:
        return QuantSpec(**self.quant)

    def sim_params(self) -> SimParams:
        return SimParams(**self.sim)

    def energy(self) -> EnergyTable:
        if self.energy_table is None:
            return default_energy_table()
        return load_energy_table(self.energy_table, strict=self.strict_energy)

    def seeds(self) -> dict:
        syn = self.input.get("synthetic", {})
        cloud = syn.get("seed", substream_seed(self.seed, "cloud"))
        return {
            "global": self.seed,
            "cloud": int(cloud),
            "weights": substream_seed(self.seed, "weights"),
            "scheduler": substream_seed(self.seed, "scheduler"),
        }


def apply_overrides(d: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` overrides; values parse as JSON, falling back to strings."""
    d = json.loads(json.dumps(d))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return d


@dataclass
class Workload:
    name: str
    cfg: NetworkConfig
    cloud: object
    mapping: object


def prepare_workload(exp: ExperimentConfig) -> Workload:
    cfg = exp.network()
    seeds = exp.seeds()
    if "synthetic" in exp.input:
        syn = exp.input["synthetic"]
        cloud = gen_synthetic_cloud(seeds["cloud"], int(syn.get("n", 1024)), syn.get("dist", "uniform_cube"))
        source = f"synthetic:{syn.get('dist', 'uniform_cube')}:{seeds['cloud']}:{cloud.n}"
    else:
        spec = exp.input["file"]
        spec = {"path": spec} if isinstance(spec, str) else spec
        cloud = load_cloud(spec["path"], spec.get("format", "xyz_ascii"))
        if "n" in spec:
            cloud = truncate_cloud(cloud, int(spec["n"]))
        source = f"file:{Path(spec['path']).name}:{cloud.n}"
    mapping = build_mapping(cloud, cfg, start=exp.fps_start)
    return Workload(f"{cfg.preset}|{source}", cfg, cloud, mapping)


def _order_start(exp: ExperimentConfig):
    if exp.order_start == "random":
        return None, exp.seeds()["scheduler"]
    return exp.order_start, None


def run_variant(exp: ExperimentConfig, wl: Workload, variant: str, record_trace: bool = False):
    start, seed = _order_start(exp)
    sched = schedule_for_variant(wl.mapping, variant, start=start, seed=seed)
    trace, report = simulate(sched, wl.mapping, wl.cfg, exp.buffer_config(), variant, exp.sim_params(),
                             record_trace=record_trace)
    counts = compute_counts(wl.cfg, exp.quant_spec(), exp.hw_config())
    lat = latency_estimate(report, counts, exp.hw_config(), variant)
    en = energy_estimate(trace if trace is not None else report, counts, exp.energy(), variant)
    result = SimResult(wl.name, variant, lat, en, report.feature_fetch_bytes, report.feature_write_bytes,
                       report.weight_fetch_bytes, tuple(report.hit_rates()))
    return result, report, trace


def _worker(args):
    exp_dict, variant, record = args
    exp = ExperimentConfig.from_dict(exp_dict)
    return run_variant(exp, prepare_workload(exp), variant, record)


def max_workers() -> int:
    """Worker processes for independent variants: ``POINTER_SIM_THREADS`` if set, else the CPU count."""
    cap = os.environ.get("POINTER_SIM_THREADS")
    return max(1, int(cap)) if cap else (os.cpu_count() or 1)


def run_variants(exp: ExperimentConfig, wl: Workload | None = None) -> list:
    """``[(SimResult, TrafficReport, AccessTrace | None)]`` in ``exp.variants`` order."""
    jobs = [(v, v == exp.trace) for v in exp.variants]
    workers = min(max_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_worker, [(exp.to_dict(), v, rec) for v, rec in jobs]))
    wl = wl or prepare_workload(exp)
    return [run_variant(exp, wl, v, rec) for v, rec in jobs]


def fetch_reductions(reports: dict) -> dict:
    """Measured feature-fetch reductions between the ablation variants that were run."""
    out = {}
    pairs = (("pointer12_vs_pointer1", "pointer12", "pointer1"), ("pointer_vs_pointer12", "pointer", "pointer12"),
             ("pointer_vs_pointer1", "pointer", "pointer1"))
    for name, new, old in pairs:
        if new in reports and old in reports and reports[old].feature_fetch_bytes:
            out[name] = {
                "measured": 1.0 - reports[new].feature_fetch_bytes / reports[old].feature_fetch_bytes,
                "reference": REFERENCE_REDUCTIONS.get(name),
            }
    return out


def reram_check(exp: ExperimentConfig, wl: Workload, n_centers: int = 4) -> dict:
    """Relative L2 error of the crossbar MLP against full precision on a few layer-1 centers."""
    weights = init_weights(wl.cfg, exp.seeds()["weights"])
    q = exp.quant_spec()
    lc = wl.cfg.layers[0]
    lm = wl.mapping.layers[0]
    feats = fit_features(wl.cloud.features, lc.in_feat_len)
    rows = []
    for r in range(min(n_centers, lm.centers.m)):
        c = lm.centers.center_indices[r]
        rows.append(feats[lm.table.neighbors[r]] - feats[c])
    x = np.concatenate(rows)
    ref = mlp_forward_ref(weights.layers[0], x)
    got = mlp_forward_reram(program_weights(weights.layers[0], q), x, q)
    denom = float(np.linalg.norm(ref))
    err = float(np.linalg.norm(got - ref)) / denom if denom else float(np.linalg.norm(got))
    alloc = map_mlp(wl.cfg, q, replication=exp.hw_config().replication)
    return {"layer": 1, "vectors": int(len(x)), "relative_l2_error": err, "allocation": alloc.summary(wl.cfg)}


def with_buffer(exp: ExperimentConfig, unit: str, cap: int) -> ExperimentConfig:
    key = "capacity_entries" if unit == "entries" else "capacity_bytes"
    return replace(exp, buffer={key: int(cap)})

