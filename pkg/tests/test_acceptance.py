"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line for the run summary."""

import csv
import json
import shutil
import time
from pathlib import Path

import numpy as np

from pointer_sim.cli import main
from pointer_sim.experiment import ExperimentConfig, prepare_workload, run_variants
from pointer_sim.geometry import PointCloud, build_mapping, fps, gen_synthetic_cloud, knn
from pointer_sim.memsim import BufferConfig, min_zero_miss_capacity, simulate
from pointer_sim.network import forward_with_schedule, init_weights, load_preset, network_forward_ref
from pointer_sim.reram import QuantSpec, crossbar_matvec, recombine_slices, slice_weights
from pointer_sim.scheduler import format_events, schedule_for_variant, validate_schedule
from pointer_sim.toy import toy_config, toy_mapping

from conftest import ACCEPTANCE, random_mapping

GOLDEN = Path(__file__).parent / "golden"
SEEDS = range(10)


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    assert ok, detail


def _model0_reports(seed, buf, variants=("pointer1", "pointer12", "pointer", "baseline_mac")):
    cfg = load_preset("model0")
    mp = build_mapping(gen_synthetic_cloud(seed, 1024), cfg)
    out = {}
    for v in variants:
        _, out[v] = simulate(schedule_for_variant(mp, v), mp, cfg, buf, v, record_trace=False)
    return out


def test_c01_golden_schedules():
    t0 = time.perf_counter()
    mp = toy_mapping()
    inter = format_events(schedule_for_variant(mp, "pointer12"), mp)
    reord = format_events(schedule_for_variant(mp, "pointer"), mp)
    dt = time.perf_counter() - t0
    ok = (inter == (GOLDEN / "toy_inter_layer.txt").read_text().strip()
          and reord == (GOLDEN / "toy_reordered.txt").read_text().strip() and dt < 1.0)
    record(1, ok, f"golden schedules match, {dt * 1000:.1f} ms")


def test_c02_zero_miss_at_cstar():
    mp, cfg = toy_mapping(), toy_config()
    inter, reord = schedule_for_variant(mp, "pointer12"), schedule_for_variant(mp, "pointer")
    c = min_zero_miss_capacity(reord, mp, cfg)
    buf = BufferConfig(capacity_entries=c)
    _, r1 = simulate(inter, mp, cfg, buf, "pointer12")
    _, r2 = simulate(reord, mp, cfg, buf, "pointer")
    extra = r1.non_compulsory_misses - r2.non_compulsory_misses
    record(2, r2.non_compulsory_misses == 0 and extra >= 2,
           f"C*={c}: reordered {r2.non_compulsory_misses} non-compulsory misses, inter-layer +{extra}")


def _fps_bruteforce(coords, m):
    d = coords[:, None, :] - coords[None, :, :]
    dist = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2]
    chosen = [0]
    for _ in range(1, m):
        score = dist[chosen].min(axis=0)
        score[chosen] = -1.0
        chosen.append(int(np.argmax(score)))
    return chosen, dist


def test_c03_oracle_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    counts = dict(fps=0, knn=0, xbar_exhaustive=0, xbar_random=0, recombine=0)
    for _ in range(1000):
        n = int(rng.integers(2, 201))
        coords = rng.random((n, 3))
        if rng.random() < 0.3:
            coords = np.round(coords, 1)  # force distance ties
        m = int(rng.integers(1, n + 1))
        want, _ = _fps_bruteforce(coords, m)
        assert fps(PointCloud(coords, coords), m).center_indices.tolist() == want
        counts["fps"] += 1
    for _ in range(1000):
        n = int(rng.integers(1, 501))
        coords = rng.random((n, 3))
        if rng.random() < 0.3:
            coords = np.round(coords, 1)
        cloud = PointCloud(coords, coords)
        k = int(rng.integers(1, min(n, 32) + 1))
        centers = fps(cloud, min(n, 8))
        table = knn(cloud, centers, k)
        for r, c in enumerate(centers.center_indices):
            d = coords - coords[c]
            dist = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
            assert table.neighbors[r].tolist() == np.lexsort((np.arange(n), dist))[:k].tolist()
        counts["knn"] += 1
    q3 = QuantSpec(weight_bits=3, bits_per_cell=1, input_bits=3)
    full = np.array(np.meshgrid(*[np.arange(-4, 4)] * 4, indexing="ij")).reshape(4, -1).T
    for i in range(0, len(full), 4):
        wq = full[i:i + 4].T
        assert np.array_equal(crossbar_matvec(slice_weights(wq, q3), full, q3), full @ wq)
        counts["xbar_exhaustive"] += len(full)
    q = QuantSpec()
    for _ in range(1000):
        wq = rng.integers(-128, 128, size=(128, 128))
        xq = rng.integers(-128, 128, size=128)
        arrays = slice_weights(wq, q)
        assert np.array_equal(crossbar_matvec(arrays, xq, q), xq @ wq)
        assert np.array_equal(recombine_slices(arrays, q), wq)
        counts["xbar_random"] += 1
        counts["recombine"] += 1
    dt = time.perf_counter() - t0
    ok = min(counts.values()) >= 1000 and dt < 120
    record(3, ok, f"{counts} in {dt:.1f} s")


def test_c04_schedule_validity():
    rng = np.random.default_rng(7)
    n = 0
    for i in range(1000):
        mp, _ = random_mapping(rng, 2 + i % 2)
        for v in ("pointer12", "pointer"):
            s = schedule_for_variant(mp, v, seed=i if v == "pointer" else None)
            assert validate_schedule(s, mp) == []
            assert len(set(s.events)) == len(s.events) == sum(lm.centers.m for lm in mp.layers)
        n += 1
    record(4, n >= 1000, f"{n} random 2/3-layer mappings, both schedulers valid")


def test_c05_numeric_neutrality():
    cfg = load_preset("model0")
    n = 0
    for seed in range(20):
        cloud = gen_synthetic_cloud(1000 + seed, 1024)
        mp = build_mapping(cloud, cfg)
        w = init_weights(cfg, seed)
        ref = network_forward_ref(cloud, cfg, w, mp).features
        for v in ("pointer1", "pointer12", "pointer"):
            got = forward_with_schedule(cloud, cfg, w, mp, schedule_for_variant(mp, v).events).features
            assert got.tobytes() == ref.tobytes(), (seed, v)
        n += 1
    record(5, n == 20, f"{n} Model-0 instances bit-identical under baseline/pointer12/pointer")


def test_c06_traffic_trends():
    buf = BufferConfig(capacity_bytes=9216)
    tot = {v: 0 for v in ("pointer1", "pointer12", "pointer")}
    ok = True
    for seed in SEEDS:
        reps = _model0_reports(seed, buf)
        for v in tot:
            tot[v] += reps[v].feature_fetch_bytes
            ok &= reps[v].weight_fetch_bytes == 0
        ok &= len({reps[v].feature_write_bytes for v in reps}) == 1
        ok &= reps["baseline_mac"].weight_fetch_bytes > 0
    r1 = 1 - tot["pointer12"] / tot["pointer1"]
    r2 = 1 - tot["pointer"] / tot["pointer12"]
    ok &= tot["pointer"] <= tot["pointer12"] <= tot["pointer1"] and r1 >= 0.15 and r2 >= 0.40
    record(6, ok, f"fetch reduction pointer12/pointer1 {r1:.1%} (reference 37%), "
                  f"pointer/pointer12 {r2:.1%} (reference 69%) over {len(SEEDS)} seeds")


def test_c07_hit_rate_saturation(tmp_path):
    caps = [32, 64, 128, 256, 512, 768, 1024]
    ok = True
    for seed in (0, 1, 2):
        cfg = tmp_path / f"c{seed}.json"
        cfg.write_text(json.dumps({"model": "model0", "seed": seed, "capacities": caps,
                                   "output_dir": str(tmp_path / f"o{seed}")}))
        assert main(["sweep-buffer", str(cfg)]) == 0
        with open(tmp_path / f"o{seed}" / "hitrates.csv") as fh:
            rows = list(csv.DictReader(fh))
        for v in ("pointer12", "pointer"):
            for j in (1, 2):
                hits = [int(r[f"{v}_l{j}_hits"]) for r in rows]
                ok &= all(a <= b for a, b in zip(hits, hits[1:]))
            ok &= all(float(r[f"{v}_l2_hit_rate"]) == 1.0 for r in rows if int(r["capacity"]) >= 512)
    record(7, ok, "layer-2 hit rate 100% at >=512 entries; hits monotone at every sweep point (3 seeds)")


def test_c08_ordering_benefit():
    detail = []
    ok = True
    for cap in (32, 64, 128, 256):
        hits = {"pointer12": [0, 0], "pointer": [0, 0]}
        for seed in SEEDS:
            reps = _model0_reports(seed, BufferConfig(capacity_entries=cap), variants=("pointer12", "pointer"))
            for v, rep in reps.items():
                hits[v][0] += rep.layers[1].hits
                hits[v][1] += rep.layers[1].fetches
        a, b = (hits[v][0] / hits[v][1] for v in ("pointer", "pointer12"))
        ok &= a > b
        detail.append(f"{cap}: {a:.3f}>{b:.3f}")
    record(8, ok, "layer-2 hit rate pointer>pointer12 at " + ", ".join(detail))


def test_c09_scalability():
    t0 = time.perf_counter()
    speedups = []
    for model in ("model0", "model1", "model2"):
        exp = ExperimentConfig.from_dict({"model": model, "variants": ["baseline_mac", "pointer"]})
        base, ptr = (r for r, _, _ in run_variants(exp, prepare_workload(exp)))
        speedups.append(base.cycles / ptr.cycles)
    dt = time.perf_counter() - t0
    ok = speedups[0] < speedups[1] < speedups[2] and dt < 300
    record(9, ok, "speedup vs baseline_mac " + " < ".join(f"{s:.2f}" for s in speedups) + f" ({dt:.1f} s)")


def _outputs(d: Path) -> dict:
    out = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
    man = json.loads(out.pop("manifest.json"))
    man.pop("wall_clock_s")
    out["manifest.json"] = json.dumps(man, sort_keys=True).encode()
    return out


def test_c10_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": "model0", "seed": 5, "trace": "pointer", "output_dir": str(tmp_path / "run")}))
    assert main(["run", str(cfg)]) == 0
    manifest = tmp_path / "manifest.json"
    shutil.copy(tmp_path / "run" / "manifest.json", manifest)
    shutil.rmtree(tmp_path / "run")
    assert main(["run", str(manifest)]) == 0
    first = _outputs(tmp_path / "run")
    assert main(["run", str(manifest)]) == 0
    second = _outputs(tmp_path / "run")
    same = first == second and {"comparison.csv", "traffic.json", "trace.csv"} <= set(first)
    record(10, same, f"{len(first)} outputs byte-identical across manifest re-runs (wall clock excluded)")
