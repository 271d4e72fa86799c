import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from sarcast.cases import CaseRecord, TimedPoint
from sarcast.evaluation import (
    asuh,
    circle_union_area,
    evaluate_case,
    geo_hit_at_k,
    merge_ranked,
    summarize,
    time_to_first_hit_window,
)
from sarcast.grid import destination_point
from sarcast.zones import Zone

ORIGIN = (-77.0, 37.0)
EAST = math.pi / 2


def east(miles):
    return destination_point(*ORIGIN, EAST, miles)


def mc_union_area(xy, radii, n=400_000, seed=0):
    xy, radii = np.asarray(xy, float), np.asarray(radii, float)
    lo, hi = (xy - radii[:, None]).min(axis=0), (xy + radii[:, None]).max(axis=0)
    pts = np.random.default_rng(seed).uniform(lo, hi, size=(n, 2))
    inside = np.zeros(n, dtype=bool)
    for (x, y), r in zip(xy, radii):
        inside |= (pts[:, 0] - x) ** 2 + (pts[:, 1] - y) ** 2 <= r * r
    return inside.mean() * np.prod(hi - lo)


def ranked(*specs):
    """Zones in one window with strictly decreasing priority."""
    return {"0-24": [Zone(c, r, "0-24", priority=1.0 - 0.1 * n, zone_id=f"0-24#{n + 1}") for n, (c, r) in enumerate(specs)]}


def test_truth_at_top_zone_centre():
    zones = ranked((east(0), 5.0), (east(50), 5.0))
    assert all(geo_hit_at_k(zones, east(0), k) == 1 for k in (1, 3, 5, 10))


def test_truth_missed():
    zones = ranked((east(0), 5.0), (east(50), 5.0))
    assert all(geo_hit_at_k(zones, east(200), k) == 0 for k in (1, 3, 5, 10))


def test_only_third_zone_hits():
    zones = ranked((east(0), 5.0), (east(30), 5.0), (east(60), 5.0))
    truth = east(62)
    assert [geo_hit_at_k(zones, truth, k) for k in (1, 2, 3)] == [0, 0, 1]


def test_merge_by_priority_across_windows():
    a = Zone(east(0), 5.0, "0-24", priority=0.5, zone_id="a")
    b = Zone(east(30), 5.0, "24-48", priority=1.0, zone_id="b")
    assert [z.zone_id for z in merge_ranked({"0-24": [a], "24-48": [b]})] == ["b", "a"]
    assert geo_hit_at_k({"0-24": [a], "24-48": [b]}, east(30), 1) == 1


def test_asuh_single_zone():
    area, hit = asuh(ranked((east(0), 5.0)), east(1))
    assert hit and area == pytest.approx(25 * math.pi, rel=1e-12)


def test_asuh_disjoint_pair():
    area, hit = asuh(ranked((east(0), 5.0), (east(40), 3.0), (east(100), 9.0)), east(40))
    assert hit and area == pytest.approx(34 * math.pi, rel=1e-12)


def test_asuh_miss_reports_everything():
    area, hit = asuh(ranked((east(0), 5.0), (east(40), 3.0)), east(200))
    assert not hit and area == pytest.approx(34 * math.pi, rel=1e-12)


def test_half_overlapping_circles():
    r = 10.0
    xy = [(0.0, 0.0), (r, 0.0)]
    lens = 2 * r * r * math.acos(0.5) - 0.5 * r * math.sqrt(4 * r * r - r * r)
    exact = 2 * math.pi * r * r - lens
    assert circle_union_area(xy, [r, r]) == pytest.approx(exact, rel=1e-12)
    assert circle_union_area(xy, [r, r]) == pytest.approx(mc_union_area(xy, [r, r]), rel=0.01)
    zones = ranked((east(0), r), (east(r), r))
    area, hit = asuh(zones, east(r + 0.5 * r))
    assert hit and area == pytest.approx(exact, rel=1e-3)


def test_union_edge_cases():
    assert circle_union_area([(0, 0), (1, 0)], [10.0, 2.0]) == pytest.approx(100 * math.pi)
    assert circle_union_area([(0, 0), (0, 0)], [3.0, 3.0]) == pytest.approx(9 * math.pi)
    assert circle_union_area([(0, 0), (20, 0)], [10.0, 10.0]) == pytest.approx(200 * math.pi)


@pytest.mark.parametrize("seed", range(5))
def test_random_unions_match_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0, 30, size=(6, 2))
    radii = rng.uniform(3, 12, 6)
    assert circle_union_area(xy, radii) == pytest.approx(mc_union_area(xy, radii, seed=seed), rel=0.01)


def make_case(truth_points):
    t0 = datetime(2025, 6, 14, 3, 58, tzinfo=timezone(timedelta(hours=-4)))
    gt = tuple(TimedPoint(lon, lat, t0 + timedelta(hours=h)) for h, (lon, lat) in truth_points)
    return CaseRecord("T-1", ORIGIN, t0, "on-foot", ground_truth=gt)


def test_time_to_first_hit():
    case = make_case([(0, east(0)), (24, east(20)), (48, east(40)), (72, east(60))])
    zones = {"0-24": [Zone(east(0), 5.0, "0-24")], "24-48": [Zone(east(40), 5.0, "24-48")], "48-72": []}
    assert time_to_first_hit_window(zones, case) == "24-48"
    zones["0-24"] = [Zone(east(20), 5.0, "0-24")]
    assert time_to_first_hit_window(zones, case) == "0-24"


def test_evaluate_and_summarize():
    case = make_case([(0, east(0)), (72, east(60))])
    zones = ranked((east(60), 5.0), (east(0), 5.0))
    f = np.full(10, 0.1)
    rep = evaluate_case(case, {"baseline": zones}, {24: f}, top_k=3)
    assert rep.geo_hit_at_k["baseline"] == {"1": 1, "3": 1, "5": 1, "10": 1}
    assert rep.asuh_hit["baseline"] and rep.hotspot_concentration_by_horizon["24"] == pytest.approx(0.3)
    miss = evaluate_case(make_case([(72, east(500))]), {"baseline": zones}, {24: f})
    s = summarize([rep, miss])
    assert s["n_cases"] == 2 and s["hit_rate"]["baseline"] == 0.5
    assert s["mean_asuh_sq_miles_on_hit"]["baseline"] == pytest.approx(25 * math.pi)


def test_no_ground_truth():
    case = CaseRecord("T-2", ORIGIN, datetime(2025, 1, 1, tzinfo=timezone.utc))
    rep = evaluate_case(case, {"baseline": {}}, {24: np.ones(4) / 4})
    assert rep.truth is None and rep.geo_hit_at_k == {}
    assert summarize([rep])["n_cases"] == 0
