"""Full-precision PointNet++ feature processing: aggregation, MLP, max reduction.

This is the numeric reference the ReRAM engine is checked against and the
workload description (vector lengths, MLP shapes) the simulator consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import Mapping, PointCloud

__all__ = [
    "LayerConfig",
    "NetworkConfig",
    "Diagnostic",
    "Weights",
    "PRESETS",
    "load_preset",
    "config_from_dict",
    "config_to_dict",
    "validate_config",
    "init_weights",
    "save_weights",
    "load_weights",
    "fit_features",
    "aggregate_diff",
    "mlp_forward_ref",
    "reduce_max",
    "point_forward",
    "layer_forward_ref",
    "network_forward_ref",
    "forward_with_schedule",
]

PRESETS = ("model0", "model1", "model2")
WEIGHTS_SCHEMA = "pointer-sim-weights/1"


@dataclass(frozen=True)
class LayerConfig:
    in_feat_len: int
    out_feat_len: int
    mlp_shapes: tuple
    k: int
    m: int
    # input length as published, when it differs from what the aggregation rule gives
    table_in_feat_len: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mlp_shapes", tuple(tuple(int(v) for v in s) for s in self.mlp_shapes))


@dataclass(frozen=True)
class NetworkConfig:
    layers: tuple
    preset: str = "custom"
    extra_column: bool = False

    @property
    def l(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" | "warning"
    message: str

    def __str__(self):
        return f"{self.level}: {self.message}"


@dataclass
class Weights:
    # layers[j][s] = (matrix rows x cols, bias of length cols)
    layers: list = field(default_factory=list)

    def stage(self, layer: int, stage: int):
        return self.layers[layer][stage]


def config_from_dict(d: dict) -> NetworkConfig:
    layers = tuple(LayerConfig(**lc) for lc in d["layers"])
    cfg = NetworkConfig(layers, preset=d.get("preset", "custom"))
    if d.get("extra_column"):
        cfg = _with_extra_column(cfg)
    return cfg


def config_to_dict(cfg: NetworkConfig) -> dict:
    layers = []
    for lc in cfg.layers:
        d = {
            "in_feat_len": lc.in_feat_len,
            "out_feat_len": lc.out_feat_len,
            "mlp_shapes": [list(s) for s in lc.mlp_shapes],
            "k": lc.k,
            "m": lc.m,
        }
        if lc.table_in_feat_len is not None:
            d["table_in_feat_len"] = lc.table_in_feat_len
        layers.append(d)
    return {"preset": cfg.preset, "extra_column": cfg.extra_column, "layers": layers}


def load_preset(name: str, extra_column: bool = False) -> NetworkConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("pointer_sim").joinpath(f"data/presets/{name}.json").read_text()
    cfg = config_from_dict(json.loads(text))
    return _with_extra_column(cfg) if extra_column else cfg


def _with_extra_column(cfg: NetworkConfig) -> NetworkConfig:
    """Widen every layer after the first by one zero-padded input column."""
    layers = [cfg.layers[0]]
    for lc in cfg.layers[1:]:
        shapes = list(lc.mlp_shapes)
        shapes[0] = (shapes[0][0] + 1, shapes[0][1])
        layers.append(replace(lc, in_feat_len=lc.in_feat_len + 1, mlp_shapes=tuple(shapes)))
    return NetworkConfig(tuple(layers), preset=cfg.preset, extra_column=True)


def validate_config(cfg: NetworkConfig) -> list[Diagnostic]:
    """Check every layer invariant; returns all findings, errors and warnings alike."""
    diags = []
    if not cfg.layers:
        diags.append(Diagnostic("error", "network has no layers"))
    for j, lc in enumerate(cfg.layers, start=1):
        if lc.k < 1 or lc.m < 1:
            diags.append(Diagnostic("error", f"layer {j}: k and m must be positive (k={lc.k}, m={lc.m})"))
        if not lc.mlp_shapes:
            diags.append(Diagnostic("error", f"layer {j}: empty MLP"))
            continue
        if lc.mlp_shapes[0][0] != lc.in_feat_len:
            diags.append(Diagnostic(
                "error",
                f"chain break at layer {j} stage 1: rows {lc.mlp_shapes[0][0]} != in_feat_len {lc.in_feat_len}",
            ))
        for s in range(1, len(lc.mlp_shapes)):
            prev_cols, rows = lc.mlp_shapes[s - 1][1], lc.mlp_shapes[s][0]
            if prev_cols != rows:
                diags.append(Diagnostic(
                    "error", f"chain break at layer {j} stage {s + 1}: rows {rows} != previous cols {prev_cols}"
                ))
        last = len(lc.mlp_shapes)
        if lc.mlp_shapes[-1][1] != lc.out_feat_len:
            diags.append(Diagnostic(
                "error",
                f"chain break at layer {j} stage {last}: cols {lc.mlp_shapes[-1][1]} != out_feat_len {lc.out_feat_len}",
            ))
        if j > 1:
            prev = cfg.layers[j - 2]
            expected = prev.out_feat_len + (1 if cfg.extra_column else 0)
            if lc.in_feat_len != expected:
                diags.append(Diagnostic(
                    "warning",
                    f"layer {j}: in_feat_len {lc.in_feat_len} != previous out_feat_len {prev.out_feat_len}; "
                    "features are zero-padded/truncated",
                ))
            if prev.m < lc.m:
                diags.append(Diagnostic("error", f"layer {j}: m={lc.m} exceeds previous layer's {prev.m} points"))
            if lc.k > prev.m:
                diags.append(Diagnostic("error", f"layer {j}: k={lc.k} exceeds previous layer's {prev.m} points"))
        if lc.table_in_feat_len is not None and lc.table_in_feat_len != lc.in_feat_len:
            diags.append(Diagnostic(
                "warning",
                f"layer {j}: published input length {lc.table_in_feat_len} treated as {lc.in_feat_len} "
                "(set extra_column to use the wider input)",
            ))
    return diags


def init_weights(cfg: NetworkConfig, seed: int) -> Weights:
    """Uniform[-1, 1] matrices drawn layer by layer, stage by stage, from one stream; zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for lc in cfg.layers:
        stages = []
        for rows, cols in lc.mlp_shapes:
            stages.append((rng.uniform(-1.0, 1.0, (rows, cols)), np.zeros(cols)))
        layers.append(stages)
    return Weights(layers)


def save_weights(weights: Weights, path) -> None:
    """Write an ``.npz`` with keys ``layer<j>.stage<s>.weight`` / ``.bias`` (1-based)."""
    arrays = {"schema": np.array(WEIGHTS_SCHEMA)}
    for j, stages in enumerate(weights.layers, start=1):
        for s, (w, b) in enumerate(stages, start=1):
            arrays[f"layer{j}.stage{s}.weight"] = np.asarray(w, dtype=np.float64)
            arrays[f"layer{j}.stage{s}.bias"] = np.asarray(b, dtype=np.float64)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_weights(path) -> Weights:
    with np.load(Path(path), allow_pickle=False) as z:
        if "schema" not in z.files or str(z["schema"]) != WEIGHTS_SCHEMA:
            raise ValueError(f"{path}: not a {WEIGHTS_SCHEMA} file")
        layers = []
        j = 1
        while f"layer{j}.stage1.weight" in z.files:
            stages = []
            s = 1
            while f"layer{j}.stage{s}.weight" in z.files:
                stages.append((z[f"layer{j}.stage{s}.weight"], z[f"layer{j}.stage{s}.bias"]))
                s += 1
            layers.append(stages)
            j += 1
    return Weights(layers)


def fit_features(features: np.ndarray, length: int) -> np.ndarray:
    """Zero-pad or truncate feature rows to ``length`` columns."""
    n, f = features.shape
    if f == length:
        return features
    if f > length:
        return features[:, :length].copy()
    out = np.zeros((n, length))
    out[:, :f] = features
    return out


def aggregate_diff(center_feat, neighbor_feat) -> np.ndarray:
    center_feat = np.asarray(center_feat, dtype=np.float64)
    neighbor_feat = np.asarray(neighbor_feat, dtype=np.float64)
    if center_feat.shape[-1] != neighbor_feat.shape[-1]:
        raise ValueError(f"length mismatch: {center_feat.shape[-1]} vs {neighbor_feat.shape[-1]}")
    return neighbor_feat - center_feat


def mlp_forward_ref(stages, x) -> np.ndarray:
    """Apply ``relu(x @ W + b)`` for every stage; ``x`` is one vector or a batch of rows."""
    h = np.asarray(x, dtype=np.float64)
    for s, (w, b) in enumerate(stages, start=1):
        if h.shape[-1] != w.shape[0]:
            raise ValueError(f"stage {s}: input length {h.shape[-1]} != weight rows {w.shape[0]}")
        h = np.maximum(h @ w + b, 0.0)
    return h


def reduce_max(rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("reduce_max needs at least one row")
    return rows.max(axis=0)


def point_forward(features: np.ndarray, center: int, neighbors, stages) -> np.ndarray:
    """Output feature of one center: max over neighbors of MLP(neighbor - center)."""
    diffs = aggregate_diff(features[center], features[np.asarray(neighbors)])
    return reduce_max(mlp_forward_ref(stages, diffs))


def layer_forward_ref(cloud: PointCloud, layer_mapping, layer_weights, in_feat_len: int | None = None) -> PointCloud:
    if in_feat_len is None:
        in_feat_len = layer_weights[0][0].shape[0]
    feats = fit_features(cloud.features, in_feat_len)
    centers = layer_mapping.centers.center_indices
    table = layer_mapping.table.neighbors
    out = np.stack([point_forward(feats, c, table[r], layer_weights) for r, c in enumerate(centers)])
    return cloud.subset(centers, features=out)


def network_forward_ref(cloud: PointCloud, cfg: NetworkConfig, weights: Weights, mapping: Mapping) -> PointCloud:
    if mapping.l != cfg.l:
        raise ValueError(f"mapping has {mapping.l} layers, config {cfg.l}")
    for lc, lm, lw in zip(cfg.layers, mapping.layers, weights.layers):
        cloud = layer_forward_ref(cloud, lm, lw, lc.in_feat_len)
    return cloud


def forward_with_schedule(cloud: PointCloud, cfg: NetworkConfig, weights: Weights, mapping: Mapping, events):
    """Evaluate the network by executing ``(layer, point)`` events in the given order.

    Each event only reads outputs of events that must already have run; an
    out-of-order schedule raises ``KeyError`` instead of reading stale data.
    """
    inputs = fit_features(cloud.features, cfg.layers[0].in_feat_len)
    # produced[j][point] -> output feature of layer j+1 at that parent index
    produced = [dict() for _ in cfg.layers]
    row_of = [{int(c): r for r, c in enumerate(lm.centers.center_indices)} for lm in mapping.layers]
    for layer, point in events:
        j = layer - 1
        lm = mapping.layers[j]
        r = row_of[j][point]
        nbrs = lm.table.neighbors[r]
        if j == 0:
            feats, center, idx = inputs, point, nbrs
        else:
            prev_centers = mapping.layers[j - 1].centers.center_indices
            need = [int(prev_centers[q]) for q in nbrs] + [int(prev_centers[point])]
            rows = np.stack([produced[j - 1][p] for p in need])
            feats = fit_features(rows, cfg.layers[j].in_feat_len)
            center, idx = len(need) - 1, np.arange(len(nbrs))
        produced[j][point] = point_forward(feats, center, idx, weights.layers[j])
    lm = mapping.layers[-1]
    out = np.stack([produced[-1][int(c)] for c in lm.centers.center_indices])
    return PointCloud(lm.parent.coords[lm.centers.center_indices], out, lm.parent.ids[lm.centers.center_indices])
