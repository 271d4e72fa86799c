"""Ground-truth metrics for ranked zone plans: Geo-hit@K, ASUH, time-to-first-hit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import timedelta

import numpy as np

from .grid import EARTH_RADIUS_MILES, haversine_miles
from .products import hotspot_concentration
from .zones import WINDOWS, window_end_hours

DEFAULT_KS = (1, 3, 5, 10)


def merge_ranked(zones):
    """Flatten ``{window: [zones]}`` by priority (desc), then window order, then rank."""
    if not isinstance(zones, dict):
        return list(zones)
    keyed = []
    for w_idx, window in enumerate(w for w in WINDOWS if w in zones):
        for rank, z in enumerate(zones[window]):
            keyed.append(((-z.priority, w_idx, rank), z))
    for extra in sorted(set(zones) - set(WINDOWS)):
        for rank, z in enumerate(zones[extra]):
            keyed.append(((-z.priority, len(WINDOWS), rank), z))
    return [z for _, z in sorted(keyed, key=lambda t: t[0])]


def covers(zone, point) -> bool:
    d = float(haversine_miles(zone.center[0], zone.center[1], point[0], point[1]))
    return d <= zone.radius_miles


def geo_hit_at_k(zones, truth, k: int) -> int:
    """1 if any of the top-``k`` zones contains ``truth``, else 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return int(any(covers(z, truth) for z in merge_ranked(zones)[:k]))


def _project(centers):
    """Equirectangular projection (miles) about the centres' mean latitude."""
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    lat0 = math.radians(float(c[:, 1].mean()))
    x = np.radians(c[:, 0]) * math.cos(lat0) * EARTH_RADIUS_MILES
    y = np.radians(c[:, 1]) * EARTH_RADIUS_MILES
    return np.column_stack([x, y])


def circle_union_area(xy, radii) -> float:
    """Exact planar area of a union of circles.

    Integrates ``(x dy - y dx) / 2`` along the boundary arcs of each circle
    that are not covered by any other circle.
    """
    circles = []
    for (x, y), r in zip(np.asarray(xy, dtype=float), radii):
        if r > 0 and (x, y, r) not in circles:
            circles.append((float(x), float(y), float(r)))
    total = 0.0
    for i, (xi, yi, ri) in enumerate(circles):
        covered, inside = [], False
        for j, (xj, yj, rj) in enumerate(circles):
            if i == j:
                continue
            d = math.hypot(xj - xi, yj - yi)
            if d >= ri + rj:
                continue
            if d + ri <= rj:
                inside = True
                break
            if d + rj <= ri:
                continue
            phi = math.atan2(yj - yi, xj - xi)
            alpha = math.acos(max(-1.0, min(1.0, (ri * ri + d * d - rj * rj) / (2.0 * ri * d))))
            a, b = (phi - alpha) % (2 * math.pi), (phi + alpha) % (2 * math.pi)
            if a <= b:
                covered.append((a, b))
            else:
                covered.extend([(a, 2 * math.pi), (0.0, b)])
        if inside:
            continue
        covered.sort()
        free, cursor = [], 0.0
        for a, b in covered:
            if a > cursor:
                free.append((cursor, a))
            cursor = max(cursor, b)
        if cursor < 2 * math.pi:
            free.append((cursor, 2 * math.pi))
        for a, b in free:
            total += ri * ri * (b - a) + ri * xi * (math.sin(b) - math.sin(a)) - ri * yi * (math.cos(b) - math.cos(a))
    return 0.5 * total


def zones_union_area(zones) -> float:
    zones = list(zones)
    if not zones:
        return 0.0
    return circle_union_area(_project([z.center for z in zones]), [z.radius_miles for z in zones])


def asuh(zones, truth):
    """Union area (sq mi) searched in rank order up to the first zone covering ``truth``.

    Returns ``(area, True)`` on a hit, ``(area of all zones, False)`` otherwise.
    """
    ranked = merge_ranked(zones)
    for n, z in enumerate(ranked, start=1):
        if covers(z, truth):
            return zones_union_area(ranked[:n]), True
    return zones_union_area(ranked), False


def truth_at(case, hours: float):
    """Last ground-truth point at or before ``hours`` after last seen."""
    if not case.ground_truth:
        return None
    cutoff = case.last_seen_time + timedelta(hours=hours)
    pts = [p for p in case.ground_truth if p.time <= cutoff]
    p = pts[-1] if pts else case.ground_truth[0]
    return (p.lon, p.lat)


def final_truth(case):
    if not case.ground_truth:
        return None
    p = case.ground_truth[-1]
    return (p.lon, p.lat)


def time_to_first_hit_window(zones_by_window, case):
    """First window whose zones contain the truth position at the window's end."""
    for window in WINDOWS:
        pt = truth_at(case, window_end_hours(window))
        if pt is not None and any(covers(z, pt) for z in zones_by_window.get(window, [])):
            return window
    return None


@dataclass
class EvalReport:
    case_id: str
    truth: tuple | None
    geo_hit_at_k: dict = field(default_factory=dict)
    asuh_sq_miles: dict = field(default_factory=dict)
    asuh_hit: dict = field(default_factory=dict)
    time_to_first_hit_window: dict = field(default_factory=dict)
    hotspot_concentration_by_horizon: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "case_id": self.case_id,
            "truth": None if self.truth is None else [float(self.truth[0]), float(self.truth[1])],
            "geo_hit_at_k": self.geo_hit_at_k,
            "asuh_sq_miles": self.asuh_sq_miles,
            "asuh_hit": self.asuh_hit,
            "time_to_first_hit_window": self.time_to_first_hit_window,
            "hotspot_concentration_by_horizon": self.hotspot_concentration_by_horizon,
        }


def evaluate_case(case, rankings: dict, fields: dict, ks=DEFAULT_KS, top_k=50) -> EvalReport:
    """Metrics for each named ranking (e.g. ``baseline`` and ``qa``) of the same zones.

    Geo-hit and ASUH use the final ground-truth position; without ground
    truth only the hotspot concentration is reported.
    """
    truth = final_truth(case)
    rep = EvalReport(case.case_id, truth)
    rep.hotspot_concentration_by_horizon = {str(h): hotspot_concentration(f, top_k) for h, f in fields.items()}
    if truth is None:
        return rep
    for name, zones in rankings.items():
        rep.geo_hit_at_k[name] = {str(k): geo_hit_at_k(zones, truth, k) for k in ks}
        area, hit = asuh(zones, truth)
        rep.asuh_sq_miles[name] = area
        rep.asuh_hit[name] = hit
        rep.time_to_first_hit_window[name] = time_to_first_hit_window(zones, case)
    return rep


def summarize(reports):
    """Mean Geo-hit@K, mean ASUH over hits and hit rate per ranking."""
    reports = [r for r in reports if r.truth is not None]
    out = {"n_cases": len(reports), "geo_hit_at_k": {}, "mean_asuh_sq_miles_on_hit": {}, "hit_rate": {}}
    if not reports:
        return out
    for name in reports[0].geo_hit_at_k:
        ks = reports[0].geo_hit_at_k[name]
        out["geo_hit_at_k"][name] = {k: float(np.mean([r.geo_hit_at_k[name][k] for r in reports])) for k in ks}
        hits = [r.asuh_sq_miles[name] for r in reports if r.asuh_hit[name]]
        out["mean_asuh_sq_miles_on_hit"][name] = float(np.mean(hits)) if hits else None
        out["hit_rate"][name] = len(hits) / len(reports)
    return out
