"""Per-cell feature layers: road cost, seclusion and corridor proximity."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import LengthMismatch, NonFiniteValue
from .grid import EARTH_RADIUS_MILES, Grid

LAYER_NAMES = ("road_cost", "seclusion", "corridor")
CORRIDOR_DECAY_MILES = 5.0


@dataclass(frozen=True, eq=False)
class FeatureLayers:
    """Destination-cell features, each a length-N vector in [0, 1].

    road_cost: lower means easier movement.
    seclusion: higher means more concealment.
    corridor: higher means closer to a major corridor.
    """

    road_cost: np.ndarray
    seclusion: np.ndarray
    corridor: np.ndarray

    def __post_init__(self):
        n = len(self.road_cost)
        for name in LAYER_NAMES:
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (n,):
                raise LengthMismatch(f"layer {name} has shape {v.shape}, expected ({n},)")
            if not np.all(np.isfinite(v)):
                raise NonFiniteValue(f"layer {name} contains NaN or inf")
            v = v.copy()
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def __len__(self):
        return len(self.road_cost)

    def to_csv(self, path):
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cell_index", *LAYER_NAMES])
            for i in range(len(self)):
                w.writerow([i, *(repr(float(getattr(self, n)[i])) for n in LAYER_NAMES)])


def normalize_minmax(values) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant vector maps to all zeros."""
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue("cannot normalise NaN or inf")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def load_layers(path, grid: Grid) -> FeatureLayers:
    """Read ``cell_index,road_cost,seclusion,corridor`` rows and min-max normalise."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["cell_index", *LAYER_NAMES]:
            raise LengthMismatch(f"unexpected header {header}")
        rows = [r for r in reader if r]
    if len(rows) != grid.n:
        raise LengthMismatch(f"{len(rows)} rows for a grid of {grid.n} cells")
    data = np.empty((grid.n, 3))
    for expected, row in enumerate(rows):
        if len(row) != 4:
            raise LengthMismatch(f"row {expected} has {len(row)} columns")
        if int(row[0]) != expected:
            raise LengthMismatch(f"cell_index {row[0]} out of order (expected {expected})")
        data[expected] = [float(x) for x in row[1:]]
    if not np.all(np.isfinite(data)):
        raise NonFiniteValue("feature file contains NaN or inf")
    return FeatureLayers(*(normalize_minmax(data[:, c]) for c in range(3)))


def _planar_miles(grid: Grid, lon, lat):
    """Equirectangular projection to miles about the grid's mid latitude."""
    lat0 = np.radians(0.5 * (grid.spec.lat_min + grid.spec.lat_max))
    x = np.radians(np.asarray(lon, dtype=float)) * np.cos(lat0) * EARTH_RADIUS_MILES
    y = np.radians(np.asarray(lat, dtype=float)) * EARTH_RADIUS_MILES
    return x, y


def distance_to_polyline(grid: Grid, polyline) -> np.ndarray:
    """Planar distance (miles) from every cell centre to a lon/lat polyline."""
    pts = np.asarray(polyline, dtype=float)
    px, py = _planar_miles(grid, grid.lon, grid.lat)
    vx, vy = _planar_miles(grid, pts[:, 0], pts[:, 1])
    best = np.full(grid.n, np.inf)
    for a in range(len(pts) - 1):
        ax, ay, bx, by = vx[a], vy[a], vx[a + 1], vy[a + 1]
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        t = np.zeros(grid.n) if seg2 == 0 else np.clip(((px - ax) * dx + (py - ay) * dy) / seg2, 0.0, 1.0)
        best = np.minimum(best, np.hypot(px - (ax + t * dx), py - (ay + t * dy)))
    return best


def _smooth_noise(rng, grid: Grid, sigma_cells=2.0):
    raw = rng.standard_normal((grid.spec.n_rows, grid.spec.n_cols))
    sm = gaussian_filter(raw, sigma=sigma_cells, mode="reflect").ravel()
    return normalize_minmax(sm)


def random_polyline(rng, grid: Grid, n_vertices=4):
    """A west-to-east polyline with jittered latitudes inside the grid box."""
    s = grid.spec
    lons = np.linspace(s.lon_min, s.lon_max, n_vertices)
    lats = rng.uniform(s.lat_min + 0.2 * (s.lat_max - s.lat_min), s.lat_max - 0.2 * (s.lat_max - s.lat_min), n_vertices)
    return np.column_stack([lons, lats])


def synth_layers(grid: Grid, seed: int, polyline=None, noise=0.15) -> FeatureLayers:
    """Deterministic smooth synthetic layers standing in for map-derived ones.

    corridor = exp(-distance/5 mi) to ``polyline`` (random if omitted),
    road_cost = 1 - 0.6 * corridor plus smooth noise, seclusion = independent
    smooth noise. Everything is clamped to [0, 1].
    """
    rng = np.random.default_rng(seed)
    if polyline is None:
        polyline = random_polyline(rng, grid)
    corridor = np.exp(-distance_to_polyline(grid, polyline) / CORRIDOR_DECAY_MILES)
    road_noise = noise * (2.0 * _smooth_noise(rng, grid) - 1.0)
    road_cost = np.clip(1.0 - 0.6 * corridor + road_noise, 0.0, 1.0)
    seclusion = _smooth_noise(rng, grid)
    return FeatureLayers(road_cost, seclusion, np.clip(corridor, 0.0, 1.0))
