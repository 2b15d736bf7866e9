"""Functional model of bit-sliced ReRAM crossbars running the MLP.

Cells are modeled as exact integer conductance levels and bitline currents as
exact integer dot products (no noise, no ADC clipping). Signed weights are
stored with an offset of ``2**(weight_bits-1)`` so every cell level is
non-negative; the offset contribution is removed after accumulation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuantSpec",
    "CrossbarArray",
    "MappedStage",
    "ArrayAllocation",
    "quantize_matrix",
    "dequantize_matrix",
    "quantize_input",
    "bit_slices",
    "slice_weights",
    "recombine_slices",
    "crossbar_matvec",
    "map_mlp",
    "program_stage",
    "program_weights",
    "mlp_forward_reram",
]


@dataclass(frozen=True)
class QuantSpec:
    weight_bits: int = 8
    bits_per_cell: int = 2
    input_bits: int = 8

    def __post_init__(self):
        if self.bits_per_cell not in (1, 2, 4):
            raise ValueError(f"bits_per_cell must be 1, 2 or 4, got {self.bits_per_cell}")
        if self.weight_bits % self.bits_per_cell:
            raise ValueError(f"weight_bits {self.weight_bits} not divisible by bits_per_cell {self.bits_per_cell}")
        if self.input_bits < 2:
            raise ValueError("input_bits must be >= 2 (one sign bit plus magnitude)")

    @property
    def n_slices(self) -> int:
        return self.weight_bits // self.bits_per_cell

    @property
    def offset(self) -> int:
        return 1 << (self.weight_bits - 1)

    @property
    def weight_qmax(self) -> int:
        return (1 << (self.weight_bits - 1)) - 1

    @property
    def input_qmax(self) -> int:
        return (1 << (self.input_bits - 1)) - 1


@dataclass(frozen=True)
class CrossbarArray:
    cell_levels: np.ndarray  # rows x cols, values in [0, 2**bits_per_cell)
    slice_index: int

    @property
    def rows(self) -> int:
        return self.cell_levels.shape[0]

    @property
    def cols(self) -> int:
        return self.cell_levels.shape[1]


def quantize_matrix(w, q: QuantSpec):
    """Symmetric per-matrix quantization; returns ``(int matrix, scale)``."""
    w = np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError("cannot quantize non-finite weights")
    peak = float(np.max(np.abs(w))) if w.size else 0.0
    if peak == 0.0:
        return np.zeros(w.shape, dtype=np.int64), 1.0
    scale = peak / q.weight_qmax
    wq = np.clip(np.rint(w / scale), -q.weight_qmax, q.weight_qmax).astype(np.int64)
    return wq, scale


def dequantize_matrix(wq, scale: float) -> np.ndarray:
    return np.asarray(wq, dtype=np.float64) * scale


def quantize_input(x, q: QuantSpec):
    """Dynamic symmetric quantization of activations to signed ``input_bits`` integers."""
    x = np.asarray(x, dtype=np.float64)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak == 0.0:
        return np.zeros(x.shape, dtype=np.int64), 1.0
    scale = peak / q.input_qmax
    return np.clip(np.rint(x / scale), -q.input_qmax, q.input_qmax).astype(np.int64), scale


def bit_slices(u, bits_per_cell: int, n_slices: int) -> list[np.ndarray]:
    """Split non-negative integers into ``n_slices`` digits of ``bits_per_cell`` bits, LSB first."""
    u = np.asarray(u, dtype=np.int64)
    mask = (1 << bits_per_cell) - 1
    return [(u >> (s * bits_per_cell)) & mask for s in range(n_slices)]


def slice_weights(wq, q: QuantSpec) -> list[CrossbarArray]:
    wq = np.asarray(wq, dtype=np.int64)
    lo, hi = -q.offset, q.offset - 1
    if wq.size and (wq.min() < lo or wq.max() > hi):
        raise ValueError(f"weights outside signed {q.weight_bits}-bit range [{lo}, {hi}]")
    digits = bit_slices(wq + q.offset, q.bits_per_cell, q.n_slices)
    return [CrossbarArray(d, s) for s, d in enumerate(digits)]


def recombine_slices(arrays, q: QuantSpec) -> np.ndarray:
    total = sum(a.cell_levels << (a.slice_index * q.bits_per_cell) for a in arrays)
    return total - q.offset


def crossbar_matvec(arrays, xq, q: QuantSpec) -> np.ndarray:
    """Bit-serial evaluation of ``xq @ wq`` on the sliced arrays of one tile.

    ``xq`` holds signed ``input_bits`` integers (one vector or a batch of
    rows). Each two's-complement bit plane drives the wordlines in turn; the
    top plane carries negative weight. Every (plane, slice) bitline current is
    shifted into place and the offset term ``offset * sum(xq)`` is removed.
    """
    xq = np.asarray(xq, dtype=np.int64)
    rows = arrays[0].rows
    if xq.shape[-1] > rows:
        raise ValueError(f"input length {xq.shape[-1]} exceeds {rows} crossbar rows; tile it first")
    lim = 1 << (q.input_bits - 1)
    if xq.size and (xq.min() < -lim or xq.max() >= lim):
        raise ValueError(f"inputs outside signed {q.input_bits}-bit range")
    if xq.shape[-1] < rows:
        pad = [(0, 0)] * (xq.ndim - 1) + [(0, rows - xq.shape[-1])]
        xq = np.pad(xq, pad)
    twos = xq & ((1 << q.input_bits) - 1)
    acc = np.zeros(xq.shape[:-1] + (arrays[0].cols,), dtype=np.int64)
    plane_sum = np.zeros(xq.shape[:-1], dtype=np.int64)
    for b in range(q.input_bits):
        plane = (twos >> b) & 1
        sign = -1 if b == q.input_bits - 1 else 1
        for arr in arrays:
            current = plane @ arr.cell_levels
            acc += sign * (current << (b + arr.slice_index * q.bits_per_cell))
        plane_sum += sign * (plane.sum(axis=-1) << b)
    return acc - q.offset * plane_sum[..., None]


@dataclass(frozen=True)
class MappedStage:
    """One MLP stage programmed onto a grid of row-tiles x col-tiles x slices arrays."""

    rows: int
    cols: int
    scale: float
    bias: np.ndarray
    tiles: tuple  # tiles[rt][ct] -> list of CrossbarArray (one per slice)
    array_dim: int

    @property
    def n_arrays(self) -> int:
        return sum(len(t) for row in self.tiles for t in row)


@dataclass(frozen=True)
class ArrayAllocation:
    # per layer, per stage: (row tiles, col tiles, slices)
    grids: tuple
    array_dim: int = 128
    arrays_per_ima: int = 8
    replication: int = 1

    @property
    def n_arrays(self) -> int:
        return self.replication * sum(rt * ct * s for layer in self.grids for rt, ct, s in layer)

    @property
    def n_imas(self) -> int:
        # layers never share an IMA
        per_layer = [self.replication * sum(rt * ct * s for rt, ct, s in layer) for layer in self.grids]
        return sum(math.ceil(a / self.arrays_per_ima) for a in per_layer)

    def utilization(self, cfg) -> float:
        cells = sum(r * c for lc in cfg.layers for r, c in lc.mlp_shapes)
        slices = self.grids[0][0][2] if self.grids and self.grids[0] else 1
        used = cells * slices * self.replication
        return used / (self.n_arrays * self.array_dim * self.array_dim) if self.n_arrays else 0.0

    def summary(self, cfg) -> dict:
        return {
            "arrays": self.n_arrays,
            "imas": self.n_imas,
            "arrays_per_ima": self.arrays_per_ima,
            "array_dim": self.array_dim,
            "replication": self.replication,
            "utilization": round(self.utilization(cfg), 6),
            "tiles": [[list(g) for g in layer] for layer in self.grids],
        }

    def to_json(self, cfg) -> str:
        return json.dumps(self.summary(cfg), indent=2)


def map_mlp(cfg, q: QuantSpec, array_dim: int = 128, arrays_per_ima: int = 8, replication: int = 1) -> ArrayAllocation:
    grids = tuple(
        tuple((math.ceil(r / array_dim), math.ceil(c / array_dim), q.n_slices) for r, c in lc.mlp_shapes)
        for lc in cfg.layers
    )
    return ArrayAllocation(grids, array_dim, arrays_per_ima, replication)


def program_stage(w, b, q: QuantSpec, array_dim: int = 128) -> MappedStage:
    wq, scale = quantize_matrix(w, q)
    rows, cols = wq.shape
    tiles = []
    for r0 in range(0, rows, array_dim):
        row = []
        for c0 in range(0, cols, array_dim):
            row.append(slice_weights(wq[r0:r0 + array_dim, c0:c0 + array_dim], q))
        tiles.append(tuple(row))
    return MappedStage(rows, cols, scale, np.asarray(b, dtype=np.float64), tuple(tiles), array_dim)


def program_weights(stages, q: QuantSpec, array_dim: int = 128) -> list[MappedStage]:
    """Program one layer's MLP stages onto crossbars."""
    return [program_stage(w, b, q, array_dim) for w, b in stages]


def mlp_forward_reram(mapped, x, q: QuantSpec) -> np.ndarray:
    """Run a programmed MLP: crossbar matvec per tile, partial sums across row tiles,
    dequantize, bias, ReLU, and re-quantize before the next stage."""
    h = np.asarray(x, dtype=np.float64)
    for st in mapped:
        if h.shape[-1] != st.rows:
            raise ValueError(f"input length {h.shape[-1]} != stage rows {st.rows}")
        hq, h_scale = quantize_input(h, q)
        acc = np.zeros(h.shape[:-1] + (st.cols,), dtype=np.int64)
        for rt, row in enumerate(st.tiles):
            xs = hq[..., rt * st.array_dim:(rt + 1) * st.array_dim]
            for ct, arrays in enumerate(row):
                c0 = ct * st.array_dim
                acc[..., c0:c0 + arrays[0].cols] += crossbar_matvec(arrays, xs, q)
        h = np.maximum(acc * (st.scale * h_scale) + st.bias, 0.0)
    return h
