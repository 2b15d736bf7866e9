"""Execution-order generation for multi-layer point workloads.

An event ``(layer, point)`` is the computation of one center of one layer;
``point`` indexes that layer's parent cloud. Three orders are produced:

* the baseline: layer after layer, each in ascending index order;
* inter-layer coordination: previous-layer events are pulled in receptive
  field by receptive field, following a given last-layer order, and each
  event runs right after its last dependency;
* intra-layer reordering: a greedy nearest-neighbor chain over the
  last-layer centers, used as the last-layer order fed to coordination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import Mapping, sq_distances_to

__all__ = [
    "ExecEvent",
    "Schedule",
    "ReceptiveField",
    "VARIANTS",
    "receptive_fields",
    "baseline_schedule",
    "intra_layer_order",
    "inter_layer_coordinate",
    "schedule_for_variant",
    "validate_schedule",
    "event_label",
    "format_events",
    "dump_schedule",
    "parse_schedule_dump",
    "schedule_to_json",
]

VARIANTS = ("baseline_mac", "pointer1", "pointer12", "pointer")


class ExecEvent(NamedTuple):
    layer: int  # 1-based
    point: int


@dataclass(frozen=True)
class Schedule:
    events: tuple

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(ExecEvent(int(a), int(b)) for a, b in self.events))

    def __len__(self):
        return len(self.events)

    def projection(self, layer: int) -> list[int]:
        return [e.point for e in self.events if e.layer == layer]

    def projections(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for e in self.events:
            out.setdefault(e.layer, []).append(e.point)
        return dict(sorted(out.items()))


@dataclass(frozen=True)
class ReceptiveField:
    # deps[j][point] -> points of the producing level, ascending (a field is a set).
    # Level 0 is the raw input cloud, so deps[1] names input indices and
    # deps[k], k >= 2, names layer-(k-1) event points.
    deps: tuple

    def __getitem__(self, layer: int) -> dict:
        return self.deps[layer]

    @property
    def l(self) -> int:
        return len(self.deps) - 1


def receptive_fields(mapping: Mapping) -> ReceptiveField:
    deps = [dict()]
    for j, lm in enumerate(mapping.layers):
        table = lm.table.neighbors
        if j == 0:
            to_event = None
        else:
            to_event = mapping.layers[j - 1].centers.center_indices
        level = {}
        for r, c in enumerate(lm.centers.center_indices):
            nbrs = table[r]
            level[int(c)] = tuple(sorted(int(v) for v in (nbrs if to_event is None else to_event[nbrs])))
        deps.append(level)
    return ReceptiveField(tuple(deps))


def baseline_schedule(mapping: Mapping) -> Schedule:
    events = []
    for j, lm in enumerate(mapping.layers, start=1):
        events.extend((j, int(p)) for p in sorted(lm.centers.center_indices))
    return Schedule(tuple(events))


def intra_layer_order(points, coords, start=None, seed=None) -> list[int]:
    """Greedy nearest-neighbor chain: each next point is the closest remaining one.

    ``start`` picks the first point (a member of ``points``); by default the
    lowest index is used, or a seeded random member when ``seed`` is given.
    Distance ties go to the lowest point index.
    """
    points = np.asarray(points, dtype=np.int64)
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise ValueError("intra_layer_order needs at least one point")
    if len(coords) != len(points):
        raise ValueError("one coordinate row per point required")
    # work in ascending point order so argmin's first-hit rule is the index tie-break
    perm = np.argsort(points, kind="stable")
    points, coords = points[perm], coords[perm]
    if start is None:
        cur = 0 if seed is None else int(np.random.default_rng(seed).integers(len(points)))
    else:
        hits = np.flatnonzero(points == start)
        if len(hits) == 0:
            raise ValueError(f"start point {start} is not among the points")
        cur = int(hits[0])
    remaining = np.ones(len(points), dtype=bool)
    order = []
    while True:
        order.append(int(points[cur]))
        remaining[cur] = False
        if not remaining.any():
            return order
        d = np.where(remaining, sq_distances_to(coords, coords[cur]), np.inf)
        cur = int(np.argmin(d))


def inter_layer_coordinate(mapping: Mapping, last_layer_order, fields: ReceptiveField | None = None) -> Schedule:
    """Pull earlier layers in receptive field by receptive field behind ``last_layer_order``.

    Walking the last-layer order, every event is emitted immediately after
    its not-yet-executed dependencies (recursively, deepest layer first);
    shared dependencies run once, at their first occurrence. Centers that
    no last-layer event reaches are appended at the end, later layers first
    and in index order within a layer (pulling in their own dependencies the
    same way), so every center still executes exactly once.
    """
    l = mapping.l
    last = [int(p) for p in last_layer_order]
    expected = sorted(int(p) for p in mapping.layers[-1].centers.center_indices)
    if sorted(last) != expected:
        raise ValueError("last_layer_order is not a permutation of the last layer's centers")
    fields = fields or receptive_fields(mapping)
    done = set()
    events = []

    def emit(layer, point):
        stack = [(layer, point, False)]
        while stack:
            lay, pt, expanded = stack.pop()
            if (lay, pt) in done:
                continue
            if expanded or lay == 1:
                done.add((lay, pt))
                events.append((lay, pt))
                continue
            stack.append((lay, pt, True))
            for dep in reversed(fields[lay][pt]):
                if (lay - 1, dep) not in done:
                    stack.append((lay - 1, dep, False))

    for p in last:
        emit(l, p)
    for j in range(l - 1, 0, -1):
        for p in sorted(int(c) for c in mapping.layers[j - 1].centers.center_indices):
            emit(j, p)
    return Schedule(tuple(events))


def schedule_for_variant(mapping: Mapping, variant: str, start=None, seed=None) -> Schedule:
    if variant in ("baseline_mac", "pointer1"):
        return baseline_schedule(mapping)
    last = mapping.layers[-1]
    centers = last.centers.center_indices
    if variant == "pointer12":
        return inter_layer_coordinate(mapping, sorted(int(c) for c in centers))
    if variant == "pointer":
        order = intra_layer_order(centers, last.parent.coords[centers], start=start, seed=seed)
        return inter_layer_coordinate(mapping, order)
    raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")


def event_label(mapping: Mapping, layer: int, point: int) -> str:
    """``E<global id>_<layer>`` using the labels the parent cloud inherited from the input."""
    pid = int(mapping.layers[layer - 1].parent.ids[point])
    return f"E{pid}_{layer}"


def format_events(schedule: Schedule, mapping: Mapping) -> str:
    return " ".join(event_label(mapping, e.layer, e.point) for e in schedule.events)


def validate_schedule(schedule: Schedule, mapping: Mapping) -> list[str]:
    """Return every violation (empty list means valid).

    Checks that each layer's events are a permutation of its centers and
    that every event comes after all events in its receptive field.
    """
    violations = []
    fields = receptive_fields(mapping)
    position = {}
    for pos, ev in enumerate(schedule.events):
        if not 1 <= ev.layer <= mapping.l:
            violations.append(f"position {pos}: layer {ev.layer} outside 1..{mapping.l}")
            continue
        if ev.point not in fields[ev.layer]:
            violations.append(f"position {pos}: point {ev.point} is not a center of layer {ev.layer}")
            continue
        if ev in position:
            violations.append(
                f"position {pos}: {event_label(mapping, *ev)} repeats position {position[ev]}"
            )
            continue
        position[ev] = pos
    for j in range(1, mapping.l + 1):
        for p in sorted(fields[j]):
            if (j, p) not in position:
                violations.append(f"layer {j} missing {event_label(mapping, j, p)}")
    for ev, pos in sorted(position.items(), key=lambda kv: kv[1]):
        if ev.layer == 1:
            continue
        for dep in fields[ev.layer][ev.point]:
            dpos = position.get(ExecEvent(ev.layer - 1, dep))
            if dpos is None or dpos > pos:
                where = "never executed" if dpos is None else f"position {dpos}"
                violations.append(
                    f"{event_label(mapping, *ev)} before dependency {event_label(mapping, ev.layer - 1, dep)} "
                    f"(event at position {pos}, dependency {where})"
                )
    return violations


def dump_schedule(schedule: Schedule) -> str:
    return "".join(f"L{e.layer} P{e.point}\n" for e in schedule.events)


def parse_schedule_dump(text: str) -> Schedule:
    events = []
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0][0] != "L" or parts[1][0] != "P":
            raise ValueError(f"line {n}: expected 'L<layer> P<point>', got {line!r}")
        events.append((int(parts[0][1:]), int(parts[1][1:])))
    return Schedule(tuple(events))


def schedule_to_json(schedule: Schedule, mapping: Mapping | None = None) -> str:
    doc = {
        "events": [[e.layer, e.point] for e in schedule.events],
        "projections": {str(k): v for k, v in schedule.projections().items()},
    }
    if mapping is not None:
        doc["labels"] = format_events(schedule, mapping).split()
    return json.dumps(doc, indent=2)
