import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import box

from sarcast.belief import (
    HotspotSet,
    cluster_hotspots,
    gaussian_seed,
    kde_prior,
    mix_initial,
    normalize_on_mask,
    read_incidents,
    seed_sigma,
)
from sarcast.config import builtin_path
from sarcast.errors import DegenerateSeed, GridMismatch, InvalidSpec, NoClusters
from sarcast.grid import great_circle_miles, haversine_miles

from conftest import make_g5


def dbscan_oracle(pts, eps, min_pts):
    """Textbook density clustering: index-order expansion from core points."""
    n = len(pts)
    d = [[great_circle_miles(pts[a], pts[b]) for b in range(n)] for a in range(n)]
    nbhd = [[b for b in range(n) if d[a][b] <= eps] for a in range(n)]
    core = [len(nb) >= min_pts for nb in nbhd]
    label = [-1] * n
    cid = 0
    for a in range(n):
        if label[a] != -1 or not core[a]:
            continue
        label[a] = cid
        queue = list(nbhd[a])
        while queue:
            b = queue.pop()
            if label[b] == -1:
                label[b] = cid
                if core[b]:
                    queue.extend(nbhd[b])
        cid += 1
    return label


def partition(labels):
    groups = {}
    for i, lab in enumerate(labels):
        if lab >= 0:
            groups.setdefault(lab, []).append(i)
    return sorted(tuple(g) for g in groups.values())


def blobs(rng, centers, n_each, spread):
    pts = []
    for cx, cy in centers:
        pts.extend(zip(rng.normal(cx, spread, n_each), rng.normal(cy, spread, n_each)))
    return pts


def test_sigma_table():
    assert seed_sigma("on-foot") == 3.0
    assert seed_sigma("vehicle", 4.0) == 17.0
    assert seed_sigma("unknown", -1.0) == 8.0


def test_tiny_sigma_is_delta(g5):
    p = gaussian_seed(g5, g5.center(12), 0.01)
    assert p[12] == 1.0 and p.sum() == 1.0


def test_underflow_falls_back_to_point_mass(g5):
    with pytest.warns(DegenerateSeed):
        p = gaussian_seed(g5, (2.3, 2.4), 0.01)
    assert p[12] == 1.0


def test_huge_sigma_is_flat(g5):
    p = gaussian_seed(g5, g5.center(12), 1e6)
    assert p.max() / p.min() < 1.001


def test_seed_ratio_matches_formula(g5):
    sigma = great_circle_miles(g5.center(12), g5.center(13))
    p = gaussian_seed(g5, g5.center(12), sigma)
    d7 = great_circle_miles(g5.center(12), g5.center(7))
    assert p[12] / p[7] == pytest.approx(math.exp(0.5 * d7**2 / sigma**2), rel=1e-12)


def test_seed_monotone_in_distance(g5_half):
    ipp = (1.2, 2.7)
    p = gaussian_seed(g5_half, ipp, 60.0)
    d = g5_half.distances_from(*ipp)
    idx = g5_half.in_mask
    order = idx[np.argsort(d[idx])]
    assert np.all(np.diff(p[order]) <= 1e-15)
    assert np.all(p[~g5_half.mask] == 0.0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_seed_rejects_bad_sigma(g5):
    with pytest.raises(InvalidSpec):
        gaussian_seed(g5, (2.5, 2.5), 0.0)


def test_two_blobs_match_oracle():
    rng = np.random.default_rng(11)
    pts = blobs(rng, [(-77.0, 37.0), (-79.0, 38.0)], 10, 0.01)
    hs = cluster_hotspots(pts, eps=5.0, min_pts=4)
    assert len(hs) == 2 and hs.weights == (10.0, 10.0)
    assert partition(dbscan_oracle(pts, 5.0, 4)) == [tuple(range(10)), tuple(range(10, 20))]
    assert hs.centers[0] == pytest.approx(tuple(np.mean(pts[:10], axis=0)))


@pytest.mark.parametrize("seed", range(5))
def test_cluster_weights_match_oracle(seed):
    rng = np.random.default_rng(seed)
    pts = blobs(rng, [(-77, 37), (-78, 37.5), (-79, 38)], 12, 0.03)
    pts += list(zip(rng.uniform(-80, -76, 6), rng.uniform(36.5, 39, 6)))
    labels = dbscan_oracle(pts, 6.0, 4)
    expected = sorted(len(g) for g in partition(labels))
    hs = cluster_hotspots(pts, 6.0, 4)
    assert sorted(hs.weights) == expected


def test_identical_points_single_cluster():
    hs = cluster_hotspots([(-77.5, 37.5)] * 6, 1.0, 3)
    assert len(hs) == 1 and hs.centers[0] == (-77.5, 37.5) and hs.weights == (6.0,)


def test_min_pts_one_every_point_own_cluster():
    pts = [(-77.0, 37.0), (-78.0, 37.0), (-79.0, 37.0)]
    hs = cluster_hotspots(pts, 1.0, 1)
    assert hs.centers == tuple(pts) and hs.weights == (1.0, 1.0, 1.0)


def test_all_noise_raises():
    with pytest.raises(NoClusters):
        cluster_hotspots([(-77.0, 37.0), (-78.0, 37.0)], 1.0, 2)


def test_bundled_incidents_cluster():
    hs = cluster_hotspots(read_incidents(builtin_path("incidents.csv")), 6.0, 4)
    assert len(hs) >= 3


def test_hotspot_json_round_trip():
    hs = HotspotSet(((1.0, 2.0), (3.0, 4.0)), (2.0, 5.0))
    assert HotspotSet.from_json(hs.to_json()) == hs


def test_single_hotspot_kde_is_seed(g5):
    c = (1.7, 3.1)
    np.testing.assert_allclose(kde_prior(g5, HotspotSet((c,), (4.0,)), 50.0), gaussian_seed(g5, c, 50.0), atol=1e-15)


def test_symmetric_hotspots(g5):
    p = kde_prior(g5, HotspotSet(((1.5, 2.5), (3.5, 2.5)), (1.0, 1.0)), 60.0).reshape(5, 5)
    np.testing.assert_allclose(p, p[:, ::-1], atol=1e-12)


def test_weighted_kernel_sums(g5):
    a, b = g5.center(6), g5.center(18)
    bw = 70.0
    p = kde_prior(g5, HotspotSet((a, b), (1.0, 3.0)), bw)
    k = math.exp(-great_circle_miles(a, b) ** 2 / (2 * bw**2))
    assert p[6] / p[18] == pytest.approx((1.0 + 3.0 * k) / (k + 3.0), rel=1e-12)
    raw = np.array([math.exp(-float(haversine_miles(*a, g5.lon[i], g5.lat[i])) ** 2 / (2 * bw**2))
                    + 3 * math.exp(-float(haversine_miles(*b, g5.lon[i], g5.lat[i])) ** 2 / (2 * bw**2))
                    for i in range(25)])
    np.testing.assert_allclose(p, raw / raw.sum(), rtol=1e-12)


def test_mixture_boundaries_and_interior(g5):
    seed = gaussian_seed(g5, (2.5, 2.5), 40.0)
    prior = kde_prior(g5, HotspotSet(((0.5, 0.5),), (1.0,)), 30.0)
    assert np.array_equal(mix_initial(seed, prior, 0.0), seed / seed.sum())
    assert np.array_equal(mix_initial(seed, prior, 1.0), prior / prior.sum())
    np.testing.assert_allclose(mix_initial(seed, prior, 0.3), 0.7 * seed + 0.3 * prior, rtol=0, atol=1e-12)


def test_mixture_errors(g5):
    with pytest.raises(InvalidSpec):
        mix_initial(np.ones(25) / 25, np.ones(25) / 25, 1.5)
    with pytest.raises(GridMismatch):
        mix_initial(np.ones(25), np.ones(24), 0.5)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(0, 10_000))
def test_mix_commutes_with_masking(alpha, seed):
    g_half = make_g5(k=4, boundary=box(0, 0, 3, 5))
    rng = np.random.default_rng(seed)
    a, b = rng.random(25) + 1e-3, rng.random(25) + 1e-3
    a, b = a / a.sum(), b / b.sum()
    left = normalize_on_mask(mix_initial(a, b, alpha), g_half)
    # mixing then masking equals masking each then mixing, up to renormalisation
    ma, mb = np.where(g_half.mask, a, 0.0), np.where(g_half.mask, b, 0.0)
    right = (1 - alpha) * ma + alpha * mb
    np.testing.assert_allclose(left, right / right.sum(), atol=1e-12)
