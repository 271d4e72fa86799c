"""Sparse row-stochastic transition matrices built from energy weights.

The unnormalised weight for a move ``i -> j`` is ``exp(-E_ij)`` with

    E_ij = beta_d * d(i, j) + beta_r * road_cost(j)
           - beta_s * seclusion(j) - beta_c * corridor(j)

Rows are normalised over the neighbour set and then share ``1 - self_loop``
of the mass; the remaining ``self_loop`` stays in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatch, InvalidSpec, IsolatedCell
from .features import FeatureLayers
from .grid import Grid, great_circle_miles


@dataclass(frozen=True)
class TransitionParams:
    beta_d: float = 0.0
    beta_r: float = 0.0
    beta_s: float = 0.0
    beta_c: float = 0.0

    def __post_init__(self):
        for name in ("beta_d", "beta_r", "beta_s", "beta_c"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidSpec(f"{name} must be finite and non-negative, got {v}")


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """CSR matrix ``P`` with ``P[i, j] = Pr(next = j | now = i)``."""

    matrix: sp.csr_array
    tag: str = "day"

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row(self, i):
        s, e = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.indices[s:e], self.matrix.data[s:e]

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def to_triplets(self, path):
        coo = self.matrix.tocoo()
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("row,col,value\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r},{c},{v!r}\n")


def _energy(dist, layers: FeatureLayers, j, params: TransitionParams):
    return (
        params.beta_d * dist
        + params.beta_r * layers.road_cost[j]
        - params.beta_s * layers.seclusion[j]
        - params.beta_c * layers.corridor[j]
    )


def energy_weight(i: int, j: int, grid: Grid, layers: FeatureLayers, params: TransitionParams) -> float:
    """Unnormalised weight ``exp(-E_ij)`` for a single move (self-loop has d = 0)."""
    d = 0.0 if i == j else great_circle_miles(grid.center(i), grid.center(j))
    return math.exp(-float(_energy(d, layers, j, params)))


def build_transition(
    grid: Grid,
    layers: FeatureLayers,
    params: TransitionParams,
    self_loop: float = 0.2,
    tag: str = "day",
) -> TransitionMatrix:
    """Assemble the sparse row-stochastic matrix over the grid's KNN graph.

    Out-of-mask rows are identity rows. An in-mask cell with no neighbours
    keeps all of its mass when ``self_loop > 0`` and raises otherwise.
    """
    if grid.neighbors is None:
        raise InvalidSpec("grid has no adjacency; call knn_adjacency first")
    if len(layers) != grid.n:
        raise GridMismatch("feature layers and grid differ in length")
    if not 0.0 <= self_loop < 1.0:
        raise InvalidSpec("self_loop must lie in [0, 1)")

    nbr = grid.neighbors
    valid = nbr >= 0
    safe = np.where(valid, nbr, 0)
    dist = np.where(valid, grid.neighbor_dist, 0.0)
    energy = _energy(dist, layers, safe, params)
    energy = np.where(valid, energy, np.inf)
    # shift by the row minimum; the constant cancels in normalisation
    shift = np.min(energy, axis=1, keepdims=True, initial=np.inf)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    w = np.where(valid, np.exp(-(energy - shift)), 0.0)
    totals = w.sum(axis=1)

    rows, cols, vals = [], [], []
    for i in range(grid.n):
        if not grid.mask[i]:
            rows.append(i), cols.append(i), vals.append(1.0)
            continue
        if totals[i] == 0.0:
            if self_loop == 0.0:
                raise IsolatedCell(f"cell {i} has no in-mask neighbours and self_loop = 0")
            rows.append(i), cols.append(i), vals.append(1.0)
            continue
        if self_loop > 0.0:
            rows.append(i), cols.append(i), vals.append(self_loop)
        keep = valid[i]
        p = (1.0 - self_loop) * (w[i, keep] / totals[i])
        rows.extend([i] * p.size)
        cols.extend(nbr[i, keep].tolist())
        vals.extend(p.tolist())
    mat = sp.csr_array((vals, (rows, cols)), shape=(grid.n, grid.n))
    mat.sum_duplicates()
    mat.sort_indices()
    return TransitionMatrix(mat, tag)


def day_night_pair(grid, layers, day_params, night_params, self_loop=0.2):
    """Independent day and night matrices over the same graph and layers."""
    return (
        build_transition(grid, layers, day_params, self_loop, tag="day"),
        build_transition(grid, layers, night_params, self_loop, tag="night"),
    )
