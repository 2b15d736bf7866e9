import json
import math

import pytest

from pointer_sim.memsim import TrafficReport
from pointer_sim.network import load_preset
from pointer_sim.perfmodel import (
    ENERGY_KEYS,
    EnergyTable,
    EnergyTableError,
    HwConfig,
    SimResult,
    compare_variants,
    comparison_csv,
    compute_counts,
    default_energy_table,
    energy_estimate,
    latency_estimate,
    load_energy_table,
)


def _report(fetch=0, write=0, weight=0):
    r = TrafficReport("x", layers=[], capacities=())
    r.feature_fetch_bytes, r.feature_write_bytes, r.weight_fetch_bytes = fetch, write, weight
    return r


def test_compute_counts_model0():
    c = compute_counts(load_preset("model0"))
    assert c.invocations == (512 * 16, 128 * 16)
    assert c.stages == (3, 3)
    assert c.crossbar_array_ops == (512 * 16 * 12, 128 * 16 * 16)
    assert c.mac_ops[0] == 512 * 16 * (4 * 64 + 64 * 64 + 64 * 128)
    assert c.mac_tile_passes[1] == 128 * 16 * (16 + 16 + 32)


def test_memory_bound_latency():
    c = compute_counts(load_preset("model0"))
    hw = HwConfig()
    lat = latency_estimate(_report(fetch=8_000_000), c, hw, "pointer")
    assert lat.memory_cycles == pytest.approx(1e6)
    assert lat.total_cycles == lat.memory_cycles > lat.compute_cycles


def test_reram_pipelining():
    c = compute_counts(load_preset("model0"))
    hw = HwConfig(replication=2)
    per = [(math.ceil(n / 2) + 2) * 100 for n in c.invocations]
    assert latency_estimate(_report(), c, hw, "pointer1").compute_cycles == sum(per)
    assert latency_estimate(_report(), c, hw, "pointer12").compute_cycles == max(per)


def test_serial_overlap_adds():
    c = compute_counts(load_preset("model0"))
    hw = HwConfig(overlap="serial")
    lat = latency_estimate(_report(fetch=800), c, hw, "baseline_mac")
    assert lat.total_cycles == lat.memory_cycles + lat.compute_cycles


def test_zero_traffic_is_compute_only():
    c = compute_counts(load_preset("model0"))
    lat = latency_estimate(_report(), c, HwConfig(), "baseline_mac")
    assert lat.memory_cycles == 0 and lat.total_cycles == sum(c.mac_tile_passes)


def test_hw_validation():
    with pytest.raises(ValueError):
        HwConfig(clock_hz=0)
    with pytest.raises(ValueError):
        HwConfig(overlap="sometimes")
    with pytest.raises(ValueError):
        latency_estimate(_report(), compute_counts(load_preset("model0")), HwConfig(), "gpu")


def test_energy_is_linear():
    t = default_energy_table()
    c = compute_counts(load_preset("model0"))
    a = energy_estimate(_report(fetch=1000), c, t, "pointer")
    b = energy_estimate(_report(fetch=2000), c, t, "pointer")
    assert b.dram == pytest.approx(2 * a.dram)
    assert a.mac == 0 and a.crossbar > 0
    m = energy_estimate(_report(fetch=1000), c, t, "baseline_mac")
    assert m.crossbar == 0 and m.mac > 0


def test_energy_table_provenance(tmp_path):
    t = default_energy_table()
    assert set(t.values) == set(ENERGY_KEYS) and all(t.provenance.values())
    d = t.to_dict()
    d["entries"]["mac_per_op"]["provenance"] = ""
    p = tmp_path / "e.json"
    p.write_text(json.dumps(d))
    with pytest.raises(EnergyTableError):
        load_energy_table(p)
    with pytest.warns(UserWarning):
        assert load_energy_table(p, strict=False)["mac_per_op"] == t["mac_per_op"]
    del d["entries"]["dram_per_byte"]
    with pytest.raises(EnergyTableError):
        EnergyTable.from_dict(d, strict=False)


def test_compare_variants():
    c = compute_counts(load_preset("model0"))
    hw, t = HwConfig(), default_energy_table()

    def result(variant, fetch, workload="w"):
        rep = _report(fetch=fetch)
        return SimResult(workload, variant, latency_estimate(rep, c, hw, variant),
                         energy_estimate(rep, c, t, variant), fetch, 0, 0, (1.0,))

    rows = compare_variants([result("baseline_mac", 10**7), result("pointer", 10**5)])
    assert rows[0]["speedup"] == 1.0 and rows[1]["speedup"] > 1.0
    assert rows[1]["normalized_energy"] < 1.0
    assert comparison_csv(rows).splitlines()[0].startswith("workload,variant,cycles")
    with pytest.raises(ValueError):
        compare_variants([result("pointer", 1, "a"), result("pointer", 1, "b")])
    assert compare_variants([]) == []
