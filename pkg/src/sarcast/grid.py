"""Masked lon/lat grid, great-circle distances and KNN adjacency.

Cells are laid out row-major with row 0 at ``lat_min`` and column 0 at
``lon_min``, so ``index = row * n_cols + col``. Cells outside the boundary
stay in the index (fields keep length N) but are flagged out of the mask.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np
import shapely
from shapely.geometry import MultiPolygon, Polygon, box, shape

from .errors import EmptyDomain, InvalidCoordinate, InvalidSpec

EARTH_RADIUS_MILES = 3958.761

# Distances are compared after rounding to this many decimals (miles) so that
# mirror-symmetric neighbours tie exactly and fall back to index order.
TIE_DECIMALS = 9


def _check_lat(lat):
    lat = np.asarray(lat, dtype=float)
    if not np.all(np.isfinite(lat)) or np.any(np.abs(lat) > 90.0):
        raise InvalidCoordinate("latitude must be finite and within [-90, 90]")


def haversine_miles(lon1, lat1, lon2, lat2):
    """Vectorised haversine distance in miles (inputs in degrees, broadcastable)."""
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(v, dtype=float)) for v in (lon1, lat1, lon2, lat2))
    a = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_MILES * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def great_circle_miles(a, b) -> float:
    """Great-circle distance between two ``(lon, lat)`` points in miles."""
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidCoordinate("coordinates must be finite")
    _check_lat([a[1], b[1]])
    if a[0] == b[0] and a[1] == b[1]:
        return 0.0
    return float(haversine_miles(a[0], a[1], b[0], b[1]))


@dataclass(frozen=True)
class GridSpec:
    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float
    n_cols: int
    n_rows: int

    def __post_init__(self):
        vals = (self.lon_min, self.lon_max, self.lat_min, self.lat_max)
        if not all(np.isfinite(vals)):
            raise InvalidSpec("grid bounds must be finite")
        if not (self.lon_min < self.lon_max and self.lat_min < self.lat_max):
            raise InvalidSpec("grid bounds are degenerate")
        if self.lat_min < -90 or self.lat_max > 90:
            raise InvalidSpec("latitude bounds outside [-90, 90]")
        if int(self.n_cols) < 1 or int(self.n_rows) < 1 or self.n_cols * self.n_rows < 4:
            raise InvalidSpec("grid needs positive dimensions and at least 4 cells")

    @property
    def n_cells(self) -> int:
        return self.n_cols * self.n_rows

    @property
    def dlon(self) -> float:
        return (self.lon_max - self.lon_min) / self.n_cols

    @property
    def dlat(self) -> float:
        return (self.lat_max - self.lat_min) / self.n_rows

    def contains(self, lon, lat) -> bool:
        return self.lon_min <= lon <= self.lon_max and self.lat_min <= lat <= self.lat_max


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Grid:
    """Cell centres, boundary mask and (optionally) KNN adjacency.

    ``neighbors`` is an ``(N, k)`` index array padded with ``-1``;
    ``neighbor_dist`` holds the matching distances in miles (NaN on padding).
    """

    spec: GridSpec
    lon: np.ndarray
    lat: np.ndarray
    mask: np.ndarray
    neighbors: np.ndarray = field(default=None)
    neighbor_dist: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.lon.shape[0]

    @property
    def k(self) -> int:
        return 0 if self.neighbors is None else self.neighbors.shape[1]

    @property
    def in_mask(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def neighbor_list(self, i):
        """Ordered neighbour indices and distances for cell ``i``."""
        if self.neighbors is None:
            raise InvalidSpec("grid has no adjacency; call knn_adjacency first")
        row = self.neighbors[i]
        keep = row >= 0
        return row[keep], self.neighbor_dist[i][keep]

    def index(self, row, col) -> int:
        return row * self.spec.n_cols + col

    def center(self, i):
        return float(self.lon[i]), float(self.lat[i])

    def distances_from(self, lon, lat) -> np.ndarray:
        """Distance in miles from ``(lon, lat)`` to every cell centre."""
        _check_lat(lat)
        return haversine_miles(lon, lat, self.lon, self.lat)

    def nearest_cell(self, lon, lat, in_mask_only=True) -> int:
        """Index of the nearest cell centre; ties go to the lowest index."""
        d = np.round(self.distances_from(lon, lat), TIE_DECIMALS)
        if in_mask_only:
            d = np.where(self.mask, d, np.inf)
        return int(np.argmin(d))

    @property
    def cell_spacing_miles(self) -> float:
        """Smaller of the east-west (at mid latitude) and north-south spacings."""
        mid = 0.5 * (self.spec.lat_min + self.spec.lat_max)
        ew = float(haversine_miles(0.0, mid, self.spec.dlon, mid))
        ns = float(haversine_miles(0.0, 0.0, 0.0, self.spec.dlat))
        return min(ew, ns)

    def to_csv(self, path):
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "lon", "lat", "mask"])
            for i in range(self.n):
                w.writerow([i, repr(float(self.lon[i])), repr(float(self.lat[i])), int(self.mask[i])])


def read_boundary(path):
    """Read a boundary polygon from a GeoJSON-style file.

    Accepts a FeatureCollection, Feature, Polygon/MultiPolygon geometry, or a
    bare list of ``[lon, lat]`` rings (each ring treated as a separate part).
    """
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return parse_boundary(obj)


def parse_boundary(obj):
    if isinstance(obj, list):
        parts = [Polygon(ring) for ring in obj]
        geom = parts[0] if len(parts) == 1 else MultiPolygon(parts)
    elif obj.get("type") == "FeatureCollection":
        geoms = [shape(f["geometry"]) for f in obj["features"]]
        geom = shapely.union_all(geoms)
    elif obj.get("type") == "Feature":
        geom = shape(obj["geometry"])
    else:
        geom = shape(obj)
    if not geom.is_valid or geom.is_empty:
        raise InvalidSpec("boundary polygon is empty or invalid")
    return geom


def build_grid(spec: GridSpec, boundary=None) -> Grid:
    """Lay out cell centres row-major and flag those inside ``boundary``.

    Centres lying exactly on the boundary count as inside. With no boundary
    the whole bounding box is used.
    """
    cols = np.arange(spec.n_cols)
    rows = np.arange(spec.n_rows)
    lon_c = spec.lon_min + (cols + 0.5) * spec.dlon
    lat_c = spec.lat_min + (rows + 0.5) * spec.dlat
    lon = np.tile(lon_c, spec.n_rows)
    lat = np.repeat(lat_c, spec.n_cols)
    if boundary is None:
        boundary = box(spec.lon_min, spec.lat_min, spec.lon_max, spec.lat_max)
    mask = np.asarray(shapely.intersects_xy(boundary, lon, lat), dtype=bool)
    if not mask.any():
        raise EmptyDomain("no cell centre falls inside the boundary")
    return Grid(spec, _frozen(lon), _frozen(lat), _frozen(mask))


def knn_adjacency(grid: Grid, k: int = 8, chunk: int = 256) -> Grid:
    """Attach the ``k`` nearest in-mask neighbours of every in-mask cell.

    ``k`` is clamped to the number of other in-mask cells. Ties in distance
    are broken by ascending cell index. Out-of-mask cells get no neighbours.
    """
    if k < 1:
        raise InvalidSpec("k must be >= 1")
    idx = grid.in_mask
    m = idx.size
    k_eff = min(k, m - 1)
    neighbors = np.full((grid.n, k_eff), -1, dtype=np.int64)
    dist = np.full((grid.n, k_eff), np.nan)
    if k_eff == 0:
        return replace(grid, neighbors=_frozen(neighbors), neighbor_dist=_frozen(dist))
    lon, lat = grid.lon[idx], grid.lat[idx]
    for start in range(0, m, chunk):
        rows = slice(start, min(start + chunk, m))
        d = haversine_miles(lon[rows, None], lat[rows, None], lon[None, :], lat[None, :])
        d[np.arange(d.shape[0]), np.arange(start, start + d.shape[0])] = np.inf
        # stable sort keeps ascending index order among equal rounded distances
        order = np.argsort(np.round(d, TIE_DECIMALS), axis=1, kind="stable")[:, :k_eff]
        neighbors[idx[rows]] = idx[order]
        dist[idx[rows]] = np.take_along_axis(d, order, axis=1)
    return replace(grid, neighbors=_frozen(neighbors), neighbor_dist=_frozen(dist))


def initial_bearing(lon1, lat1, lon2, lat2) -> float:
    """Initial great-circle bearing from point 1 to point 2, radians from north."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dl = np.radians(lon2 - lon1)
    return float(np.arctan2(np.sin(dl) * np.cos(p2), np.cos(p1) * np.sin(p2) - np.sin(p1) * np.cos(p2) * np.cos(dl)))


def destination_point(lon, lat, bearing, miles):
    """Point reached travelling ``miles`` along ``bearing`` (radians) from ``(lon, lat)``."""
    delta = miles / EARTH_RADIUS_MILES
    p1, l1 = np.radians(lat), np.radians(lon)
    p2 = np.arcsin(np.sin(p1) * np.cos(delta) + np.cos(p1) * np.sin(delta) * np.cos(bearing))
    l2 = l1 + np.arctan2(np.sin(bearing) * np.sin(delta) * np.cos(p1), np.cos(delta) - np.sin(p1) * np.sin(p2))
    return float(np.degrees(l2)), float(np.degrees(p2))
