"""Acceptance gate. Each test is one criterion; a summary of PASS/FAIL lines
is printed at the end of the pytest run."""

import math
import time

import numpy as np
import pytest

from sarcast.belief import gaussian_seed, mix_initial, seed_sigma
from sarcast.cases import load_case
from sarcast.cli import main
from sarcast.config import Config, builtin_path
from sarcast.evaluation import asuh, circle_union_area, geo_hit_at_k
from sarcast.grid import destination_point
from sarcast.pipeline import build_environment, forecast, plan_zones, run_pipeline
from sarcast.products import containment_rings
from sarcast.propagation import step, survival_weight
from sarcast.qa import HeuristicScorer, Score, review_zones, reweight
from sarcast.transitions import TransitionParams, build_transition
from sarcast.zones import RewardSpec, Zone, coverage_value, select_zones

from conftest import make_g5
from test_evaluation import mc_union_area
from test_transitions import random_layers
from test_zones import exhaustive_best, small_grid


@pytest.fixture(scope="module")
def demo():
    cfg = Config()
    env = build_environment(cfg)
    case = load_case(builtin_path("demo_case.json"))
    p0, fields, cumulative = forecast(case, env, cfg)
    return cfg, env, case, p0, fields, cumulative


def test_ac01_conservation(demo, criterion):
    """AC-1 conservation: 200 random fields keep mass within 1e-9, rows sum to 1 within 1e-12, < 5 s"""
    t0 = time.perf_counter()
    _, env, *_ = demo
    rng = np.random.default_rng(101)
    worst_step = 0.0
    for n in range(200):
        p = np.where(env.grid.mask, rng.random(env.grid.n), 0.0)
        p /= p.sum()
        worst_step = max(worst_step, abs(step(p, env.matrices[n % 2]).sum() - 1.0))
    worst_row = max(float(np.max(np.abs(np.asarray(T.matrix.sum(axis=1)).ravel() - 1.0))) for T in env.matrices)
    elapsed = time.perf_counter() - t0
    criterion["detail"] = f"step err {worst_step:.1e}, row err {worst_row:.1e}, {elapsed:.2f} s"
    assert worst_step < 1e-9
    assert worst_row < 1e-12
    assert elapsed < 5.0


def test_ac02_dense_oracle(criterion):
    """AC-2 dense oracle: sparse (P^T)^3 p matches dense matrix power on G5 within 1e-10"""
    g = make_g5(k=4)
    T = build_transition(g, random_layers(25, 202), TransitionParams(0.3, 1.0, 0.5, 1.5), 0.2)
    P = T.to_dense()
    P3 = np.linalg.matrix_power(P.T, 3)
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(20):
        p = rng.random(25)
        p /= p.sum()
        worst = max(worst, float(np.max(np.abs(step(step(step(p, T), T), T) - P3 @ p))))
    criterion["detail"] = f"max diff {worst:.1e}"
    assert worst < 1e-10


def test_ac03_ring_oracle(demo, criterion):
    """AC-3 ring oracle: containment radii equal brute-force sort-and-accumulate for 100 random fields"""
    _, env, *_ = demo
    g = env.grid
    rng = np.random.default_rng(303)
    idx = g.in_mask.tolist()
    mismatches = 0
    for _ in range(100):
        f = np.where(g.mask, rng.random(g.n) ** 3, 0.0)
        f /= f.sum()
        ipp = g.center(int(rng.choice(idx)))
        d = np.round(g.distances_from(*ipp), 9)
        cells = sorted(idx, key=lambda i: (d[i], i))
        expected = []
        for q in (0.5, 0.75, 0.9):
            acc = 0.0
            for i in cells:
                acc += f[i]
                if acc >= q:
                    break
            expected.append(float(d[i]))
        got = [r.radius_miles for r in containment_rings(f, ipp, (0.5, 0.75, 0.9), g)]
        mismatches += got != expected
    criterion["detail"] = f"{mismatches} mismatches"
    assert mismatches == 0


def test_ac04_decay_anchors(criterion):
    """AC-4 decay anchors: w(0)=1, w(T)=0.5, w(2T)=0.25 exactly"""
    for half_life in (18.0, 24.0, 36.0):
        assert survival_weight(0.0, half_life) == 1.0
        assert survival_weight(half_life, half_life) == 0.5
        assert survival_weight(2 * half_life, half_life) == 0.25


def test_ac05_mixture_boundaries(demo, criterion):
    """AC-5 mixture boundaries: alpha=0 gives the seed, alpha=1 the prior, within 1e-12"""
    _, env, case, *_ = demo
    seed = gaussian_seed(env.grid, case.ipp, seed_sigma(case.movement_profile, case.reporting_delay_hours))
    e0 = float(np.max(np.abs(mix_initial(seed, env.prior, 0.0) - seed)))
    e1 = float(np.max(np.abs(mix_initial(seed, env.prior, 1.0) - env.prior)))
    criterion["detail"] = f"errors {e0:.1e} / {e1:.1e}"
    assert e0 <= 1e-12 and e1 <= 1e-12


def test_ac06_mask_leak_freedom(demo, criterion):
    """AC-6 mask leak-freedom: masked-out cells hold exactly zero mass at every horizon"""
    _, env, _, p0, fields, cumulative = demo
    out = ~env.grid.mask
    assert np.all(p0[out] == 0.0)
    for h, f in fields.items():
        assert np.all(f[out] == 0.0), h
    assert np.all(cumulative[out] == 0.0)


def test_ac07_greedy_bound(criterion):
    """AC-7 greedy bound: greedy coverage >= (1-1/e) x exhaustive on 30 fixtures, < 30 s"""
    t0 = time.perf_counter()
    g = small_grid()
    worst = math.inf
    for seed in range(30):
        rng = np.random.default_rng(700 + seed)
        f = rng.random(g.n) ** 3
        f /= f.sum()
        n_cand = int(rng.integers(4, 11))
        budget = int(rng.integers(1, 4))
        cands = [Zone(g.center(int(i)), float(rng.uniform(4, 20)), "0-24")
                 for i in rng.choice(g.n, n_cand, replace=False)]
        spec = RewardSpec(budget=budget, lambda_area=0.0, lambda_overlap=0.0, lambda_plaus=0.0, r_max=20.0)
        zones, _ = select_zones(cands, {24: f}, spec, g)
        ratio = coverage_value(zones["0-24"], f, g) / exhaustive_best(cands, f, g, budget, 1.0)
        worst = min(worst, ratio)
    elapsed = time.perf_counter() - t0
    criterion["detail"] = f"worst ratio {worst:.4f}, {elapsed:.2f} s"
    assert worst >= 1 - 1 / math.e
    assert elapsed < 30.0


class Uniform:
    name = "uniform"

    def __init__(self, value):
        self.value = value

    def __call__(self, req):
        return Score(self.value, "uniform", scorer=self.name)


def test_ac08_qa_invariances(demo, criterion):
    """AC-8 QA invariances: uniform plausibility keeps ranking, new = original x plausibility, zone sets unchanged"""
    cfg, env, case, _, fields, cumulative = demo
    zones, _ = plan_zones(case, env, cfg, fields, cumulative)
    for value in (1.0, 0.5):
        reviews = review_zones(zones, case.ipp, case.summary(), case.movement_profile, Uniform(value))
        out = reweight(zones, reviews)
        for w in zones:
            assert [z.zone_id for z in out[w]] == [z.zone_id for z in zones[w]]
    reviews = review_zones(zones, case.ipp, case.summary(), case.movement_profile, HeuristicScorer())
    for r in reviews:
        assert r.new_priority == r.original_priority * r.plausibility
    out = reweight(zones, reviews)
    for w in zones:
        key = lambda z: (z.zone_id, z.center, z.radius_miles, z.kind, z.window)
        assert sorted(map(key, out[w])) == sorted(map(key, zones[w]))


def test_ac09_trend_reproduction(criterion):
    """AC-9 trends on the bundled fixture: top sector > 50%, 50% ring grows within 10-40 mi, concentration falls, < 60 s"""
    t0 = time.perf_counter()
    cfg = Config()
    case = load_case(builtin_path("demo_case.json"))
    result = run_pipeline(case, cfg)
    elapsed = time.perf_counter() - t0
    plan = result.plan
    n_mask = int(result.env.grid.mask.sum())
    tops = [plan.sectors_ranked["by_horizon"][h][0]["mass_pct"] for h in ("24", "48", "72")]
    tops.append(plan.sectors_ranked["cumulative"][0]["mass_pct"])
    r50 = [next(r["radius_miles"] for r in plan.rings_by_horizon[h] if r["q"] == 0.5) for h in ("24", "48", "72")]
    conc = [plan.hotspot_concentration[h] for h in ("24", "48", "72")]
    criterion["detail"] = (f"top sector {min(tops):.3f}; r50 {r50[0]:.1f}/{r50[1]:.1f}/{r50[2]:.1f} mi; "
                           f"top-50 {conc[0]:.3f}/{conc[1]:.3f}/{conc[2]:.3f}; {n_mask} cells; {elapsed:.1f} s")
    assert 2000 <= n_mask <= 4000
    assert min(tops) > 0.5
    assert r50[0] < r50[1] < r50[2]
    assert all(10.0 <= r <= 40.0 for r in r50)
    assert conc[0] > conc[1] > conc[2]
    assert elapsed < 60.0


def test_ac10_determinism(tmp_path, criterion):
    """AC-10 determinism: two demo runs give byte-identical plan, zones and review files"""
    for name in ("a", "b"):
        assert main(["demo", "--out-dir", str(tmp_path / name)]) == 0
    for f in ("search_plan.json", "zones.jsonl", "zones_review.jsonl", "zone_qa_metrics.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_ac11_day_night_effect(demo, criterion):
    """AC-11 day/night: higher night seclusion weight puts strictly more mass on top-decile seclusion cells"""
    _, env, _, p0, *_ = demo
    g, lay = env.grid, env.layers
    day_p = TransitionParams(0.15, 1.0, 0.5, 1.5)
    night_p = TransitionParams(0.15, 1.0, 1.5, 1.5)
    day = build_transition(g, lay, day_p, 0.2, "day")
    night = build_transition(g, lay, night_p, 0.2, "night")
    sec = np.where(g.mask, lay.seclusion, -np.inf)
    cut = np.quantile(lay.seclusion[g.mask], 0.9)
    top = g.mask & (sec >= cut)
    rng = np.random.default_rng(1101)
    inputs = [p0] + [np.where(g.mask, rng.random(g.n), 0.0) for _ in range(10)]
    margins = []
    for p in inputs:
        p = p / p.sum()
        margins.append(float(step(p, night)[top].sum() - step(p, day)[top].sum()))
    criterion["detail"] = f"min margin {min(margins):.2e}"
    assert min(margins) > 0


def east(miles):
    return destination_point(-77.0, 37.0, math.pi / 2, miles)


def test_ac12_evaluation_oracles(criterion):
    """AC-12 evaluation oracles: hit@K and ASUH match geometric fixtures; union area within 1% of Monte-Carlo"""
    zones = {"0-24": [Zone(east(0), 5.0, "0-24", priority=1.0), Zone(east(30), 5.0, "0-24", priority=0.9),
                      Zone(east(60), 5.0, "0-24", priority=0.8)]}
    assert [geo_hit_at_k(zones, east(62), k) for k in (1, 2, 3)] == [0, 0, 1]
    assert geo_hit_at_k(zones, east(0), 1) == 1
    assert geo_hit_at_k(zones, east(500), 3) == 0
    area, hit = asuh({"0-24": zones["0-24"][:1]}, east(1))
    assert hit and area == pytest.approx(25 * math.pi, rel=1e-12)
    two = {"0-24": [Zone(east(0), 5.0, "0-24", priority=1.0), Zone(east(40), 3.0, "0-24", priority=0.5)]}
    area, hit = asuh(two, east(40))
    assert hit and area == pytest.approx(34 * math.pi, rel=1e-12)
    r = 10.0
    exact = circle_union_area([(0, 0), (r, 0)], [r, r])
    mc = mc_union_area([(0, 0), (r, 0)], [r, r], seed=1212)
    half = {"0-24": [Zone(east(0), r, "0-24", priority=1.0), Zone(east(r), r, "0-24", priority=0.5)]}
    area, hit = asuh(half, east(1.5 * r))
    criterion["detail"] = f"union {exact:.2f} vs MC {mc:.2f} sq mi"
    assert hit and area == pytest.approx(exact, rel=1e-3)
    assert abs(exact - mc) / mc < 0.01
