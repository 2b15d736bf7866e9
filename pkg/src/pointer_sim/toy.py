"""Hand-placed two-layer example: seven layer-1 points, three layer-2 points, k = 3.

Point ``Pi`` has global label ``i``. Layer 1 keeps ``P1..P7`` of an 8-point
input (``P0`` is dropped) and each layer-1 point reads only its own input
(k = 1). Layer 2 keeps ``P1, P3, P5``, and the coordinates are placed so the
3-nearest-neighbor fields come out as

* ``P1 -> {P1, P4, P7}``
* ``P3 -> {P2, P3, P6}``
* ``P5 -> {P4, P5, P7}``

with ``P5`` closer to ``P1`` than ``P3`` is.
"""

from __future__ import annotations

import numpy as np

from .geometry import LayerMapping, Mapping, PointCloud, SampledSet, knn
from .network import LayerConfig, NetworkConfig

__all__ = ["TOY_COORDS", "toy_cloud", "toy_config", "toy_mapping", "TOY_INTER_LAYER", "TOY_REORDERED", "TOYS"]

TOY_COORDS = np.array([
    [3.0, 3.0, 0.0],  # P0, not sampled
    [0.0, 0.0, 0.0],  # P1
    [5.0, 0.9, 0.0],  # P2
    [5.0, 0.0, 0.0],  # P3
    [1.0, 0.0, 0.0],  # P4
    [1.5, 0.8, 0.0],  # P5
    [6.0, 0.0, 0.0],  # P6
    [0.5, 0.8, 0.0],  # P7
])

TOY_INTER_LAYER = "E1_1 E4_1 E7_1 E1_2 E2_1 E3_1 E6_1 E3_2 E5_1 E5_2"
TOY_REORDERED = "E1_1 E4_1 E7_1 E1_2 E5_1 E5_2 E2_1 E3_1 E6_1 E3_2"

TOYS = ("fig2",)


def toy_cloud() -> PointCloud:
    return PointCloud(TOY_COORDS, TOY_COORDS.copy())


def toy_config() -> NetworkConfig:
    return NetworkConfig((
        LayerConfig(3, 4, ((3, 4),), k=1, m=7),
        LayerConfig(4, 4, ((4, 4),), k=3, m=3),
    ), preset="toy")


def toy_mapping() -> Mapping:
    cloud = toy_cloud()
    l1_centers = SampledSet(np.arange(1, 8))
    l1 = LayerMapping(cloud, l1_centers, knn(cloud, l1_centers, 1))
    mid = l1.output
    # P1, P3, P5 sit at positions 0, 2, 4 of the layer-1 output
    l2_centers = SampledSet(np.array([0, 2, 4]))
    l2 = LayerMapping(mid, l2_centers, knn(mid, l2_centers, 3))
    return Mapping((l1, l2))
