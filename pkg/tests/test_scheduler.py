import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pointer_sim.geometry import LayerMapping, Mapping, PointCloud, SampledSet, knn, sq_distance
from pointer_sim.scheduler import (
    Schedule,
    baseline_schedule,
    dump_schedule,
    format_events,
    inter_layer_coordinate,
    intra_layer_order,
    parse_schedule_dump,
    receptive_fields,
    schedule_for_variant,
    schedule_to_json,
    validate_schedule,
)
from pointer_sim.toy import TOY_INTER_LAYER, TOY_REORDERED, toy_mapping

from conftest import random_mapping


def test_toy_fields():
    f = receptive_fields(toy_mapping())
    assert dict(f.deps[2]) == {0: (1, 4, 7), 2: (2, 3, 6), 4: (4, 5, 7)}
    assert all(f.deps[1][p] == (p,) for p in range(1, 8))


def test_toy_baseline():
    mp = toy_mapping()
    s = baseline_schedule(mp)
    assert s.projection(1) == list(range(1, 8)) and s.projection(2) == [0, 2, 4]
    assert format_events(s, mp).split()[-3:] == ["E1_2", "E3_2", "E5_2"]


def test_toy_greedy_order():
    mp = toy_mapping()
    last = mp[-1]
    c = last.centers.center_indices
    assert intra_layer_order(c, last.parent.coords[c]) == [0, 4, 2]  # P1, P5, P3


def test_toy_schedules():
    mp = toy_mapping()
    assert format_events(schedule_for_variant(mp, "pointer12"), mp) == TOY_INTER_LAYER
    assert format_events(schedule_for_variant(mp, "pointer"), mp) == TOY_REORDERED


def test_missing_dependency_is_reported():
    mp = toy_mapping()
    inter = schedule_for_variant(mp, "pointer12")
    cut = Schedule(tuple(e for e in inter.events if (e.layer, e.point) != (1, 4)))
    msgs = validate_schedule(cut, mp)
    assert any(m.startswith("E1_2 before dependency E4_1") for m in msgs)
    assert any("missing E4_1" in m for m in msgs)
    dup = Schedule(inter.events + inter.events[:1])
    assert any("repeats" in m for m in validate_schedule(dup, mp))


def test_single_layer_and_self_fields():
    coords = np.array([[2.0, 0, 0], [0, 0, 0], [1, 0, 0]])
    cloud = PointCloud(coords, coords)
    centers = SampledSet(np.array([2, 0, 1]))
    mp = Mapping((LayerMapping(cloud, centers, knn(cloud, centers, 1)),))
    assert [e.point for e in baseline_schedule(mp).events] == [0, 1, 2]
    f = receptive_fields(mp)
    assert all(f.deps[1][p] == (p,) for p in (0, 1, 2))
    assert [e.point for e in inter_layer_coordinate(mp, [1, 2, 0]).events] == [1, 2, 0]


def test_chain_on_a_line():
    pts = np.arange(4)
    coords = np.column_stack([pts, np.zeros(4), np.zeros(4)]).astype(float)
    assert intra_layer_order(pts, coords, start=0) == [0, 1, 2, 3]
    assert intra_layer_order(pts, coords, start=2) == [2, 1, 0, 3]  # tie 1 vs 3 goes to 1
    with pytest.raises(ValueError):
        intra_layer_order([], np.zeros((0, 3)))
    with pytest.raises(ValueError):
        intra_layer_order(pts, coords, start=9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 25))
def test_greedy_step_is_true_argmin(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.permutation(100)[:n]
    coords = np.round(rng.random((n, 3)), 1)
    order = intra_layer_order(pts, coords, seed=seed)
    assert sorted(order) == sorted(pts.tolist())
    where = {int(p): i for i, p in enumerate(pts)}
    for i in range(len(order) - 1):
        rest = order[i + 1:]
        d = {p: sq_distance(coords[where[order[i]]], coords[where[p]]) for p in rest}
        best = min(rest, key=lambda p: (d[p], p))
        assert order[i + 1] == best


def _layerwise_projections(mapping, last_order):
    """Later-to-earlier: each O_k is the deduplicated concatenation of the fields of O_(k+1)."""
    fields = receptive_fields(mapping)
    orders = {mapping.l: list(last_order)}
    for k in range(mapping.l - 1, 0, -1):
        seen, o = set(), []
        for p in orders[k + 1]:
            for d in fields.deps[k + 1][p]:
                if d not in seen:
                    seen.add(d)
                    o.append(d)
        o += sorted(set(int(c) for c in mapping[k - 1].centers.center_indices) - seen)
        orders[k] = o
    return orders


def _brute_fields(mapping):
    out = {}
    for j, lm in enumerate(mapping.layers, start=1):
        out[j] = {}
        for r in range(lm.centers.m):
            c = int(lm.centers.center_indices[r])
            if j == 1:
                out[j][c] = tuple(sorted(int(v) for v in lm.table.neighbors[r]))
            else:
                prev = mapping.layers[j - 2].centers.center_indices
                # neighbors index the previous layer's output; map them back to producer points
                out[j][c] = tuple(sorted(int(prev[v]) for v in lm.table.neighbors[r]))
    return out


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]))
def test_schedules_valid_on_random_mappings(seed, n_layers):
    rng = np.random.default_rng(seed)
    mp, _ = random_mapping(rng, n_layers)
    f = receptive_fields(mp)
    brute = _brute_fields(mp)
    assert {j: dict(f.deps[j]) for j in brute} == brute
    for v in ("pointer1", "pointer12", "pointer"):
        s = schedule_for_variant(mp, v, seed=seed if v == "pointer" else None)
        assert validate_schedule(s, mp) == []
        assert len(set(s.events)) == len(s.events) == sum(lm.centers.m for lm in mp.layers)
        if v != "pointer1":
            assert s.projections() == _layerwise_projections(mp, s.projection(mp.l))


def test_bad_last_order_rejected():
    mp = toy_mapping()
    with pytest.raises(ValueError):
        inter_layer_coordinate(mp, [0, 2])
    with pytest.raises(ValueError):
        schedule_for_variant(mp, "fastest")


def test_dump_round_trip():
    mp = toy_mapping()
    s = schedule_for_variant(mp, "pointer")
    assert parse_schedule_dump(dump_schedule(s)) == s
    assert '"E5_2"' in schedule_to_json(s, mp)
    with pytest.raises(ValueError):
        parse_schedule_dump("L1 X3\n")
