"""Point clouds, farthest point sampling and top-k neighbor search.

Everything here is the "point mapping" half of a set-abstraction layer: it
decides which points survive each layer and which points feed each survivor.
Distances are squared Euclidean and every tie is broken by the lowest index,
so the same cloud always yields the same mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PointCloud",
    "SampledSet",
    "NeighborTable",
    "LayerMapping",
    "Mapping",
    "GeometryError",
    "load_cloud",
    "truncate_cloud",
    "gen_synthetic_cloud",
    "sq_distance",
    "sq_distances_to",
    "fps",
    "knn",
    "build_mapping",
    "N_CLUSTERS",
    "CLUSTER_SIGMA",
]

N_CLUSTERS = 8
CLUSTER_SIGMA = 0.05


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class PointCloud:
    coords: np.ndarray
    features: np.ndarray
    # global point labels; raw input clouds use 0..n-1 and every downsampled
    # cloud inherits the labels of the points it kept
    ids: np.ndarray = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 3)
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(len(coords), -1)
        if len(coords) != len(features):
            raise GeometryError(f"{len(coords)} coordinates but {len(features)} feature rows")
        ids = np.arange(len(coords)) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if ids.shape != (len(coords),):
            raise GeometryError("ids must hold one label per point")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def feat_len(self) -> int:
        return self.features.shape[1]

    def subset(self, indices, features=None) -> "PointCloud":
        indices = np.asarray(indices, dtype=np.int64)
        feats = self.features[indices] if features is None else features
        return PointCloud(self.coords[indices], feats, self.ids[indices])


@dataclass(frozen=True)
class SampledSet:
    center_indices: np.ndarray

    @property
    def m(self) -> int:
        return len(self.center_indices)


@dataclass(frozen=True)
class NeighborTable:
    # row r holds the k neighbors of center r of the matching SampledSet
    neighbors: np.ndarray

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]


@dataclass(frozen=True)
class LayerMapping:
    parent: PointCloud
    centers: SampledSet
    table: NeighborTable

    @property
    def output(self) -> PointCloud:
        """Coordinates and labels of the cloud this layer produces (features unset)."""
        idx = self.centers.center_indices
        return PointCloud(self.parent.coords[idx], np.zeros((len(idx), 0)), self.parent.ids[idx])


@dataclass(frozen=True)
class Mapping:
    layers: tuple = field(default_factory=tuple)

    @property
    def l(self) -> int:
        return len(self.layers)

    def __getitem__(self, j):
        return self.layers[j]


def load_cloud(path, format: str = "xyz_ascii") -> PointCloud:
    """Read a point cloud from ``xyz_ascii`` or ``off_ascii`` text.

    Values may be separated by whitespace or commas. Columns past the first
    three of an xyz file become auxiliary features, so the resulting
    ``feat_len`` is ``3 + n_aux``. OFF faces are ignored.
    """
    text = Path(path).read_text()
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise GeometryError(f"{path}: empty file")
    if format == "xyz_ascii":
        rows = _parse_rows(lines, path, first_line=1)
    elif format == "off_ascii":
        rows = _parse_off(lines, path)
    else:
        raise GeometryError(f"unknown cloud format {format!r}")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise GeometryError(f"{path}: inconsistent column count {sorted(widths)}")
    width = widths.pop()
    if width < 3:
        raise GeometryError(f"{path}: need at least 3 columns, got {width}")
    data = np.array(rows, dtype=np.float64)
    return PointCloud(data[:, :3], data)


def _parse_rows(lines, path, first_line):
    rows = []
    for offset, ln in enumerate(lines):
        try:
            rows.append([float(tok) for tok in ln.replace(",", " ").split()])
        except ValueError:
            raise GeometryError(f"{path}: malformed line {first_line + offset}: {ln!r}") from None
    return rows


def _parse_off(lines, path):
    head = lines[0]
    if not head.startswith("OFF"):
        raise GeometryError(f"{path}: missing OFF header")
    # some exporters glue the counts onto the header ("OFF1024 0 0")
    rest = head[3:].strip()
    body = lines[1:]
    if not rest:
        if not body:
            raise GeometryError(f"{path}: missing OFF counts line")
        rest, body = body[0], body[1:]
    try:
        n_vertices = int(rest.split()[0])
    except (ValueError, IndexError):
        raise GeometryError(f"{path}: malformed OFF counts {rest!r}") from None
    if n_vertices < 1:
        raise GeometryError(f"{path}: empty vertex list")
    if len(body) < n_vertices:
        raise GeometryError(f"{path}: header promises {n_vertices} vertices, found {len(body)}")
    rows = _parse_rows(body[:n_vertices], path, first_line=3)
    if any(len(r) != 3 for r in rows):
        raise GeometryError(f"{path}: OFF vertex lines must have 3 columns")
    return rows


def truncate_cloud(cloud: PointCloud, n: int) -> PointCloud:
    """Keep the first ``n`` points in file order (ModelNet-style fixed-size input)."""
    if n < 1 or n > cloud.n:
        raise GeometryError(f"cannot truncate {cloud.n} points to {n}")
    return PointCloud(cloud.coords[:n], cloud.features[:n], np.arange(n))


def gen_synthetic_cloud(seed: int, n: int, dist: str = "uniform_cube") -> PointCloud:
    """Deterministic synthetic cloud; features start as a copy of the coordinates.

    PRNG stream (``numpy.random.default_rng(seed)``):

    * ``uniform_cube``: ``rng.random((n, 3))``.
    * ``gaussian_clusters``: ``centers = rng.random((N_CLUSTERS, 3))``, then
      ``labels = rng.integers(0, N_CLUSTERS, n)``, then
      ``coords = centers[labels] + rng.normal(0, CLUSTER_SIGMA, (n, 3))``.
    """
    if n < 1:
        raise GeometryError("synthetic cloud needs n >= 1")
    rng = np.random.default_rng(seed)
    if dist == "uniform_cube":
        coords = rng.random((n, 3))
    elif dist == "gaussian_clusters":
        centers = rng.random((N_CLUSTERS, 3))
        labels = rng.integers(0, N_CLUSTERS, n)
        coords = centers[labels] + rng.normal(0.0, CLUSTER_SIGMA, (n, 3))
    else:
        raise GeometryError(f"unknown distribution {dist!r}")
    return PointCloud(coords, coords.copy())


def sq_distance(a, b) -> float:
    dx = float(a[0]) - float(b[0])
    dy = float(a[1]) - float(b[1])
    dz = float(a[2]) - float(b[2])
    return dx * dx + dy * dy + dz * dz


def sq_distances_to(coords: np.ndarray, p) -> np.ndarray:
    # same operation order as sq_distance so both paths round identically
    d = coords - np.asarray(p, dtype=np.float64)
    return d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]


def fps(cloud: PointCloud, m: int, start: int = 0) -> SampledSet:
    """Farthest point sampling: ``m`` indices, the first being ``start``."""
    n = cloud.n
    if not 1 <= m <= n:
        raise GeometryError(f"fps needs 1 <= m <= n, got m={m}, n={n}")
    if not 0 <= start < n:
        raise GeometryError(f"fps start {start} outside [0, {n})")
    selected = np.empty(m, dtype=np.int64)
    selected[0] = start
    min_d = sq_distances_to(cloud.coords, cloud.coords[start])
    taken = np.zeros(n, dtype=bool)
    taken[start] = True
    for i in range(1, m):
        # -1 keeps already-taken points out even when duplicates tie at 0
        nxt = int(np.argmax(np.where(taken, -1.0, min_d)))
        selected[i] = nxt
        taken[nxt] = True
        np.minimum(min_d, sq_distances_to(cloud.coords, cloud.coords[nxt]), out=min_d)
    return SampledSet(selected)


def knn(cloud: PointCloud, centers: SampledSet, k: int) -> NeighborTable:
    if not 1 <= k <= cloud.n:
        raise GeometryError(f"knn needs 1 <= k <= n, got k={k}, n={cloud.n}")
    out = np.empty((centers.m, k), dtype=np.int64)
    for r, c in enumerate(centers.center_indices):
        d = sq_distances_to(cloud.coords, cloud.coords[c])
        # stable sort: equal distances keep ascending index order
        out[r] = np.argsort(d, kind="stable")[:k]
    return NeighborTable(out)


def build_mapping(cloud: PointCloud, cfg, start: int = 0) -> Mapping:
    """Run fps + knn layer by layer; each layer's parent is the previous layer's centers."""
    layers = []
    parent = cloud
    for lc in cfg.layers:
        centers = fps(parent, lc.m, start=start)
        table = knn(parent, centers, lc.k)
        lm = LayerMapping(parent, centers, table)
        layers.append(lm)
        parent = lm.output
    return Mapping(tuple(layers))
