"""Replay a schedule against an on-chip feature buffer backed by DRAM.

The buffer holds whole feature vectors keyed by ``(producer level, point)``;
level 0 is the raw input cloud, level ``j`` the outputs of layer ``j``. It is
partitioned by consuming layer: layer ``j`` reads level ``j-1`` entries from
its own partition, so the per-layer hit rates are independent curves over
one capacity axis. Raw inputs are produced off chip, which makes their first
fetch a compulsory miss; every later-layer entry is inserted when it is
produced, so a miss on it means the buffer let it go too early.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import NamedTuple

from .geometry import Mapping
from .network import NetworkConfig
from .scheduler import Schedule, receptive_fields, validate_schedule

__all__ = [
    "BufferConfig",
    "SimParams",
    "LRUBuffer",
    "POLICIES",
    "TraceRecord",
    "AccessTrace",
    "LayerStats",
    "TrafficReport",
    "simulate",
    "replay_trace",
    "min_zero_miss_capacity",
    "hit_rate_sweep",
    "buffer_timeline",
    "TRACE_COLUMNS",
]

TRACE_COLUMNS = ("step", "layer", "point", "entry_layer", "entry_point", "hit", "bytes", "cause")
REPORT_SCHEMA = "pointer-sim-traffic/1"


@dataclass(frozen=True)
class BufferConfig:
    """Capacity of each layer's partition, in entries or in bytes.

    In byte mode a partition holds ``capacity_bytes // entry size`` vectors of
    the layer it serves, so the same budget buys many narrow input vectors
    but few wide deep-layer ones. Leaving both unset gives an unbounded buffer.
    """

    capacity_entries: int | None = None
    capacity_bytes: int | None = None
    policy: str = "lru"

    def __post_init__(self):
        if self.capacity_entries is not None and self.capacity_bytes is not None:
            raise ValueError("give capacity in entries or bytes, not both")
        if self.capacity_entries is not None and self.capacity_entries < 1:
            raise ValueError("capacity must be at least one entry")
        if self.capacity_bytes is not None and self.capacity_bytes < 1:
            raise ValueError("capacity must be positive")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")

    def partition_entries(self, entry_bytes) -> tuple:
        """Entries per partition for the given per-partition entry sizes (None = unbounded)."""
        if self.capacity_entries is not None:
            return tuple(self.capacity_entries for _ in entry_bytes)
        if self.capacity_bytes is not None:
            return tuple(max(1, self.capacity_bytes // b) for b in entry_bytes)
        return tuple(None for _ in entry_bytes)


@dataclass(frozen=True)
class SimParams:
    elem_bytes: int = 2
    weight_bytes: int = 2
    # MAC-array baseline: on-chip weight budget, and how many MLP
    # invocations share one streamed pass over a layer's weights when they don't fit
    weight_buffer_bytes: int = 9 * 1024
    weight_batch: int = 32


class LRUBuffer:
    def __init__(self, capacity: int | None):
        self.capacity = capacity
        self._d: OrderedDict = OrderedDict()

    def __contains__(self, key):
        return key in self._d

    def __len__(self):
        return len(self._d)

    def access(self, key) -> bool:
        if key in self._d:
            self._d.move_to_end(key)
            return True
        return False

    def insert(self, key) -> list:
        """Insert (or refresh) ``key`` as most recent; returns evicted keys."""
        if key in self._d:
            self._d.move_to_end(key)
            return []
        self._d[key] = None
        evicted = []
        while self.capacity is not None and len(self._d) > self.capacity:
            evicted.append(self._d.popitem(last=False)[0])
        return evicted

    def contents(self) -> list:
        """Entries from least to most recently used."""
        return list(self._d)


POLICIES = {"lru": LRUBuffer}


class TraceRecord(NamedTuple):
    step: int
    layer: int
    point: int
    entry_layer: int
    entry_point: int
    hit: bool | None  # None for records that are not fetches
    bytes: int
    cause: str  # fetch | write | evict | weight


@dataclass
class AccessTrace:
    records: list
    capacities: tuple  # entries per partition, partition j serves layer j+1
    entry_bytes: tuple
    policy: str = "lru"

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            hit = "" if r.hit is None else int(r.hit)
            w.writerow((r.step, r.layer, r.point, r.entry_layer, r.entry_point, hit, r.bytes, r.cause))
        return out.getvalue()

    def totals(self) -> dict:
        t = {"fetch": 0, "write": 0, "weight": 0, "evict": 0}
        for r in self.records:
            t[r.cause] += r.bytes
        return t

    def buffer_bytes(self) -> tuple:
        """``(read, write)`` bytes seen by the buffer: every fetch reads, fills and outputs write."""
        read = write = 0
        for r in self.records:
            if r.cause == "fetch":
                size = self.entry_bytes[r.layer - 1]
                read += size
                if not r.hit:
                    write += size
            elif r.cause == "write" and r.layer < len(self.entry_bytes):
                write += self.entry_bytes[r.layer]
        return read, write


@dataclass
class LayerStats:
    fetches: int = 0
    hits: int = 0
    compulsory: int = 0

    @property
    def misses(self) -> int:
        return self.fetches - self.hits

    @property
    def non_compulsory(self) -> int:
        return self.misses - self.compulsory

    @property
    def hit_rate(self) -> float:
        return self.hits / self.fetches if self.fetches else 1.0


@dataclass
class TrafficReport:
    variant: str
    feature_fetch_bytes: int = 0
    feature_write_bytes: int = 0
    weight_fetch_bytes: int = 0
    buffer_read_bytes: int = 0
    buffer_write_bytes: int = 0
    layers: list = field(default_factory=list)
    capacities: tuple = ()

    @property
    def dram_bytes(self) -> int:
        return self.feature_fetch_bytes + self.feature_write_bytes + self.weight_fetch_bytes

    @property
    def non_compulsory_misses(self) -> int:
        return sum(s.non_compulsory for s in self.layers)

    def hit_rates(self) -> list[float]:
        return [s.hit_rate for s in self.layers]

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "variant": self.variant,
            "feature_fetch_bytes": self.feature_fetch_bytes,
            "feature_write_bytes": self.feature_write_bytes,
            "weight_fetch_bytes": self.weight_fetch_bytes,
            "buffer_read_bytes": self.buffer_read_bytes,
            "buffer_write_bytes": self.buffer_write_bytes,
            "capacities": list(self.capacities),
            "layers": [
                {
                    "layer": j,
                    "fetches": s.fetches,
                    "hits": s.hits,
                    "misses": s.misses,
                    "compulsory_misses": s.compulsory,
                    "hit_rate": s.hit_rate,
                }
                for j, s in enumerate(self.layers, start=1)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _entry_bytes(cfg: NetworkConfig, params: SimParams) -> tuple:
    return tuple(lc.in_feat_len * params.elem_bytes for lc in cfg.layers)


def _weight_bytes(lc, params: SimParams) -> int:
    return sum(r * c for r, c in lc.mlp_shapes) * params.weight_bytes


def simulate(
    schedule: Schedule,
    mapping: Mapping,
    cfg: NetworkConfig,
    buf: BufferConfig,
    variant: str,
    params: SimParams = SimParams(),
    record_trace: bool = True,
    check: bool = True,
):
    """Walk the schedule and account every feature fetch, output write and weight fetch.

    Per event: fetch each receptive-field entry (hit is free, miss costs DRAM
    bytes and fills the buffer), charge weight streaming for the MAC-array
    baseline, then write the output to DRAM once and insert it into the
    partition of the layer that consumes it.
    """
    if mapping.l != cfg.l:
        raise ValueError(f"mapping has {mapping.l} layers but config has {cfg.l}")
    if check:
        problems = validate_schedule(schedule, mapping)
        if problems:
            raise ValueError(f"schedule does not fit mapping: {problems[0]} (+{len(problems) - 1} more)")
    fields = receptive_fields(mapping)
    l = cfg.l
    entry_bytes = _entry_bytes(cfg, params)
    caps = buf.partition_entries(entry_bytes)
    policy = POLICIES[buf.policy]
    buffers = [policy(c) for c in caps]
    out_bytes = [lc.out_feat_len * params.elem_bytes for lc in cfg.layers]
    stats = [LayerStats() for _ in range(l)]
    seen_inputs = set()
    records = [] if record_trace else None
    report = TrafficReport(variant, layers=stats, capacities=caps)

    streaming = variant == "baseline_mac"
    layer_events = [0] * l
    for step, (layer, point) in enumerate(schedule.events):
        j = layer - 1
        b = buffers[j]
        st = stats[j]
        size = entry_bytes[j]
        for dep in fields[layer][point]:
            key = (j, dep)
            st.fetches += 1
            report.buffer_read_bytes += size
            if b.access(key):
                st.hits += 1
                if records is not None:
                    records.append(TraceRecord(step, layer, point, j, dep, True, 0, "fetch"))
                continue
            if j == 0 and key not in seen_inputs:
                st.compulsory += 1
                seen_inputs.add(key)
            report.feature_fetch_bytes += size
            report.buffer_write_bytes += size
            if records is not None:
                records.append(TraceRecord(step, layer, point, j, dep, False, size, "fetch"))
            for ev in b.insert(key):
                if records is not None:
                    records.append(TraceRecord(step, layer, point, ev[0], ev[1], None, 0, "evict"))

        if streaming:
            lc = cfg.layers[j]
            wbytes = _weight_bytes(lc, params)
            c = layer_events[j]
            if wbytes <= params.weight_buffer_bytes:
                passes = 1 if c == 0 else 0
            else:
                kb = lc.k
                passes = math.ceil((c + 1) * kb / params.weight_batch) - math.ceil(c * kb / params.weight_batch)
            if passes:
                report.weight_fetch_bytes += passes * wbytes
                if records is not None:
                    records.append(TraceRecord(step, layer, point, layer, -1, None, passes * wbytes, "weight"))
        layer_events[j] += 1

        report.feature_write_bytes += out_bytes[j]
        if records is not None:
            records.append(TraceRecord(step, layer, point, layer, point, None, out_bytes[j], "write"))
        if layer < l:
            report.buffer_write_bytes += entry_bytes[layer]
            for ev in buffers[layer].insert((layer, point)):
                if records is not None:
                    records.append(TraceRecord(step, layer, point, ev[0], ev[1], None, 0, "evict"))

    trace = AccessTrace(records, caps, entry_bytes, buf.policy) if record_trace else None
    return trace, report


def replay_trace(trace: AccessTrace) -> list[int]:
    """Re-run the fetch/insert sequence of ``trace`` on fresh buffers.

    Returns the indices of records whose hit/miss label or eviction does not
    reproduce; an empty list means the trace is self-consistent.
    """
    policy = POLICIES[trace.policy]
    buffers = [policy(c) for c in trace.capacities]
    l = len(trace.capacities)
    expected_evictions: list = []
    bad = []
    for i, r in enumerate(trace.records):
        if r.cause == "fetch":
            b = buffers[r.layer - 1]
            hit = b.access((r.entry_layer, r.entry_point))
            if hit != r.hit:
                bad.append(i)
            if not hit:
                expected_evictions.extend(b.insert((r.entry_layer, r.entry_point)))
        elif r.cause == "write" and r.layer < l:
            expected_evictions.extend(buffers[r.layer].insert((r.layer, r.point)))
        elif r.cause == "evict":
            if not expected_evictions or expected_evictions.pop(0) != (r.entry_layer, r.entry_point):
                bad.append(i)
    return bad


def min_zero_miss_capacity(
    schedule: Schedule, mapping: Mapping, cfg: NetworkConfig, params: SimParams = SimParams()
) -> int:
    """Smallest per-partition entry capacity with no non-compulsory misses (linear sweep)."""
    upper = max(
        [len(mapping.layers[0].parent.ids)] + [lm.centers.m for lm in mapping.layers]
    )
    for cap in range(1, upper + 1):
        _, rep = simulate(schedule, mapping, cfg, BufferConfig(capacity_entries=cap), "pointer1",
                          params, record_trace=False, check=cap == 1)
        if rep.non_compulsory_misses == 0:
            return cap
    raise AssertionError("unbounded capacity should never miss non-compulsorily")


def hit_rate_sweep(
    schedule: Schedule,
    mapping: Mapping,
    cfg: NetworkConfig,
    capacities,
    variant: str = "pointer",
    unit: str = "entries",
    params: SimParams = SimParams(),
) -> list[dict]:
    """One simulation per capacity; returns rows with per-layer hits, fetches and hit rates."""
    capacities = list(capacities)
    if not capacities:
        raise ValueError("need at least one capacity")
    rows = []
    for i, cap in enumerate(capacities):
        buf = BufferConfig(capacity_entries=cap) if unit == "entries" else BufferConfig(capacity_bytes=cap)
        _, rep = simulate(schedule, mapping, cfg, buf, variant, params, record_trace=False, check=i == 0)
        rows.append({
            "capacity": cap,
            "unit": unit,
            "variant": variant,
            "hits": [s.hits for s in rep.layers],
            "fetches": [s.fetches for s in rep.layers],
            "hit_rates": rep.hit_rates(),
            "report": rep,
        })
    return rows


def buffer_timeline(trace: AccessTrace, schedule: Schedule, partition: int) -> list[dict]:
    """Per event: contents of one partition at the start of the step, plus its hits and misses.

    ``partition`` is the 1-based consuming layer.
    """
    policy = POLICIES[trace.policy]
    buffers = [policy(c) for c in trace.capacities]
    l = len(buffers)
    by_step: dict = {}
    for r in trace.records:
        by_step.setdefault(r.step, []).append(r)
    rows = []
    for step, ev in enumerate(schedule.events):
        before = buffers[partition - 1].contents()
        hits, misses = [], []
        for r in by_step.get(step, ()):
            if r.cause == "fetch":
                b = buffers[r.layer - 1]
                if b.access((r.entry_layer, r.entry_point)):
                    hit = True
                else:
                    b.insert((r.entry_layer, r.entry_point))
                    hit = False
                if r.layer == partition:
                    (hits if hit else misses).append(r.entry_point)
            elif r.cause == "write" and r.layer < l:
                buffers[r.layer].insert((r.layer, r.point))
        rows.append({"event": ev, "before": [p for _, p in before], "hits": hits, "misses": misses})
    return rows
