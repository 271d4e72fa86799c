"""Plot-ready GeoJSON: probability cells, zone circles, containment rings."""

from __future__ import annotations

import math

from .grid import destination_point

CIRCLE_VERTICES = 64


def circle_ring(lon, lat, radius_miles, n=CIRCLE_VERTICES):
    pts = [list(destination_point(lon, lat, 2 * math.pi * i / n, radius_miles)) for i in range(n)]
    return pts + [pts[0]]


def _cell_ring(grid, i):
    hx, hy = grid.spec.dlon / 2, grid.spec.dlat / 2
    x, y = float(grid.lon[i]), float(grid.lat[i])
    return [[x - hx, y - hy], [x + hx, y - hy], [x + hx, y + hy], [x - hx, y + hy], [x - hx, y - hy]]


def plan_geojson(plan, grid, zones_by_window=None, min_prob=0.0):
    """FeatureCollection of in-mask cells (with ``p`` and per-horizon values), zones, rings and the IPP."""
    feats = []
    horizons = sorted(plan.forecasts_by_horizon, key=int)
    for i in grid.in_mask:
        if plan.p[i] < min_prob:
            continue
        props = {"layer": "cell", "index": int(i), "p": plan.p[i]}
        for h in horizons:
            props[f"p_{h}"] = plan.forecasts_by_horizon[h][i]
        feats.append({"type": "Feature", "properties": props,
                      "geometry": {"type": "Polygon", "coordinates": [_cell_ring(grid, i)]}})
    for window, zones in (zones_by_window or {}).items():
        for z in zones:
            feats.append({"type": "Feature",
                          "properties": {"layer": "zone", **z.to_json()},
                          "geometry": {"type": "Polygon", "coordinates": [circle_ring(*z.center, z.radius_miles)]}})
    lon, lat = plan.ipp
    for ring in plan.rings:
        feats.append({"type": "Feature", "properties": {"layer": "ring", **ring},
                      "geometry": {"type": "LineString", "coordinates": circle_ring(lon, lat, ring["radius_miles"])}})
    for hs in plan.hotspots:
        feats.append({"type": "Feature", "properties": {"layer": "hotspot", "weight": hs["weight"]},
                      "geometry": {"type": "Point", "coordinates": [hs["lon"], hs["lat"]]}})
    feats.append({"type": "Feature", "properties": {"layer": "ipp", "case_id": plan.case_id},
                  "geometry": {"type": "Point", "coordinates": [lon, lat]}})
    return {"type": "FeatureCollection", "features": feats}
