"""Investigator-facing summaries of a belief field."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import Polygon, box, shape

from .errors import InvalidSpec
from .grid import TIE_DECIMALS, Grid

UNASSIGNED = "UNASSIGNED"
DEFAULT_QUANTILES = (0.5, 0.75, 0.9)


@dataclass(frozen=True, eq=False)
class SectorSet:
    """Named sector geometries and the per-cell label assignment.

    Overlaps resolve by declaration order; in-mask cells outside every
    sector get :data:`UNASSIGNED`, out-of-mask cells get ``None``.
    """

    names: tuple
    geometries: tuple
    assignment: tuple

    def labels(self):
        present = {a for a in self.assignment if a is not None}
        return [n for n in self.names if n in present] + ([UNASSIGNED] if UNASSIGNED in present else [])

    def centroid_cells(self, grid: Grid):
        """For each populated sector, the in-sector cell nearest its centroid."""
        out = {}
        labels = np.array([a if a is not None else "" for a in self.assignment], dtype=object)
        for name in self.names:
            idx = np.flatnonzero(labels == name)
            if idx.size == 0:
                continue
            clon, clat = grid.lon[idx].mean(), grid.lat[idx].mean()
            d = np.round(grid.distances_from(clon, clat)[idx], TIE_DECIMALS)
            out[name] = int(idx[np.argmin(d)])
        return out


def _geometry(spec):
    if isinstance(spec, dict) and "bbox" in spec:
        return box(*spec["bbox"])
    if isinstance(spec, dict) and "type" in spec:
        return shape(spec)
    if isinstance(spec, (list, tuple)) and len(spec) == 4 and all(np.isscalar(v) for v in spec):
        return box(*spec)
    return Polygon(spec)


def assign_sectors(grid: Grid, sectors) -> SectorSet:
    """Label cells from ``[(name, geometry), ...]``.

    A geometry may be a ``(lon_min, lat_min, lon_max, lat_max)`` rectangle,
    ``{"bbox": [...]}``, a GeoJSON geometry dict or a lon/lat ring.
    """
    names = [n for n, _ in sectors]
    if len(set(names)) != len(names) or UNASSIGNED in names:
        raise InvalidSpec("sector names must be unique and not UNASSIGNED")
    geoms = [_geometry(g) for _, g in sectors]
    labels = [None] * grid.n
    todo = grid.mask.copy()
    for name, geom in zip(names, geoms):
        hit = todo & np.asarray(shapely.intersects_xy(geom, grid.lon, grid.lat), dtype=bool)
        for i in np.flatnonzero(hit):
            labels[i] = name
        todo &= ~hit
    for i in np.flatnonzero(todo):
        labels[i] = UNASSIGNED
    return SectorSet(tuple(names), tuple(geoms), tuple(labels))


def read_sectors(path):
    """``[{"name": ..., "bbox": [lon_min, lat_min, lon_max, lat_max]} | {"name", "geometry"}]``."""
    with open(path, encoding="utf-8") as fh:
        items = json.load(fh)
    return [(it["name"], it.get("geometry") or {"bbox": it["bbox"]}) for it in items]


def sector_masses(field, sectors: SectorSet):
    """Ranked ``[(name, mass)]``, descending by mass then ascending by name."""
    field = np.asarray(field, dtype=float)
    totals = {}
    for i, lab in enumerate(sectors.assignment):
        if lab is not None:
            totals[lab] = totals.get(lab, 0.0) + field[i]
    return sorted(((n, float(totals[n])) for n in sectors.labels()), key=lambda t: (-t[1], t[0]))


@dataclass(frozen=True)
class ContainmentRing:
    quantile: float
    radius_miles: float


def containment_rings(field, ipp, quantiles, grid: Grid):
    """Discrete containment radii around ``ipp``.

    In-mask cells are visited in ascending distance (ties by index, distances
    rounded to ``TIE_DECIMALS``); the radius for ``q`` is the distance of the
    first equal-distance group whose running mass reaches ``q``.
    """
    qs = [float(q) for q in quantiles]
    if any(not 0 < q < 1 for q in qs) or any(b <= a for a, b in zip(qs, qs[1:])):
        raise InvalidSpec("quantiles must lie in (0, 1) and increase strictly")
    idx = grid.in_mask
    d = np.round(grid.distances_from(*ipp)[idx], TIE_DECIMALS)
    order = np.argsort(d, kind="stable")
    d_sorted = d[order]
    cum = np.cumsum(np.asarray(field, dtype=float)[idx][order])
    # running mass at the end of each equal-distance group
    last_in_group = np.r_[d_sorted[1:] != d_sorted[:-1], True]
    group_d, group_cum = d_sorted[last_in_group], cum[last_in_group]
    rings = []
    for q in qs:
        pos = np.flatnonzero(group_cum >= q)
        r = group_d[pos[0]] if pos.size else group_d[-1]
        rings.append(ContainmentRing(q, float(r)))
    return rings


def hotspot_concentration(field, top_k: int = 50) -> float:
    """Mass of the ``top_k`` most probable cells (cutoff ties by lowest index)."""
    if top_k < 1:
        raise InvalidSpec("top_k must be >= 1")
    field = np.asarray(field, dtype=float)
    order = np.lexsort((np.arange(field.size), -field))
    return float(field[order[:top_k]].sum())


def top_cells(field, m: int):
    """Indices of the ``m`` largest positive entries, ties by lowest index."""
    field = np.asarray(field, dtype=float)
    order = np.lexsort((np.arange(field.size), -field))
    order = order[field[order] > 0]
    return order[:m]
