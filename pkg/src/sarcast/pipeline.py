"""End-to-end run: case -> layers -> forecast -> zones -> QA -> evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import belief, products
from .cases import CaseRecord, SearchPlan, write_plan
from .config import Config
from .errors import NoClusters, SarcastError, StageError
from .evaluation import evaluate_case
from .features import load_layers, synth_layers
from .geojson import plan_geojson
from .grid import GridSpec, build_grid, knn_adjacency, read_boundary
from .jsonio import write_canonical, write_jsonl
from .propagation import DecaySpec, HorizonSchedule, cumulative_blend, propagate_horizons
from .qa import HeuristicScorer, RemoteScorer, qa_metrics, review_zones, reweight
from .transitions import TransitionParams, day_night_pair
from .zones import WINDOWS, RewardSpec, generate_candidates, select_zones

log = logging.getLogger(__name__)


@dataclass(eq=False)
class Environment:
    """Case-independent inputs: grid, layers, matrices, sectors and hotspot prior."""

    grid: object
    layers: object
    matrices: tuple
    sectors: object
    hotspots: object
    prior: object


@dataclass(eq=False)
class PipelineResult:
    case: CaseRecord
    plan: SearchPlan
    fields: dict
    zones: dict
    traces: dict
    zones_qa: dict | None
    reviews: list
    qa_summary: dict | None
    report: object
    env: Environment = field(repr=False, default=None)


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except (SarcastError, OSError, ValueError, KeyError) as exc:
                raise StageError(name, exc) from exc
        return inner
    return wrap


def reward_spec(cfg: Config) -> RewardSpec:
    z = cfg.zones
    return RewardSpec(
        window_weights=dict(z.window_weights), lambda_area=z.lambda_area, lambda_overlap=z.lambda_overlap,
        lambda_plaus=z.lambda_plaus, budget=z.budget, r_max=z.r_max, top_m=z.top_m,
        peak_radius=z.peak_radius, hotspot_radius=z.hotspot_radius, improve=z.improve,
        improve_iters=z.improve_iters, epsilon=z.epsilon, seed=cfg.seed,
    )


@_stage("layers")
def build_environment(cfg: Config) -> Environment:
    g = cfg.grid
    spec = GridSpec(g.lon_min, g.lon_max, g.lat_min, g.lat_max, g.n_cols, g.n_rows)
    boundary = read_boundary(cfg.resolve(g.boundary)) if g.boundary else None
    grid = knn_adjacency(build_grid(spec, boundary), g.k)
    if cfg.layers.path:
        layers = load_layers(cfg.resolve(cfg.layers.path), grid)
    else:
        layers = synth_layers(grid, cfg.layers.synth_seed, polyline=cfg.layers.corridor or None)
    t = cfg.transition
    matrices = day_night_pair(grid, layers, TransitionParams(**vars(t.day)), TransitionParams(**vars(t.night)), t.self_loop)
    sectors = None
    if cfg.products.sectors:
        sectors = products.assign_sectors(grid, products.read_sectors(cfg.resolve(cfg.products.sectors)))
    hotspots = prior = None
    if cfg.belief.incidents:
        incidents = belief.read_incidents(cfg.resolve(cfg.belief.incidents))
        try:
            hotspots = belief.cluster_hotspots(incidents, cfg.belief.cluster_eps_miles, cfg.belief.cluster_min_pts)
            prior = belief.kde_prior(grid, hotspots, cfg.belief.bandwidth_miles)
        except NoClusters:
            log.warning("no incident clusters; falling back to a uniform prior")
    if prior is None:
        prior = belief.normalize_on_mask(np.ones(grid.n), grid)
    return Environment(grid, layers, matrices, sectors, hotspots, prior)


@_stage("forecast")
def forecast(case: CaseRecord, env: Environment, cfg: Config):
    grid = env.grid
    if not grid.spec.contains(*case.ipp):
        raise ValueError(f"IPP {case.ipp} lies outside the grid bounding box")
    b, f = cfg.belief, cfg.forecast
    sigma = belief.seed_sigma(case.movement_profile, case.reporting_delay_hours, b.sigma_miles, b.sigma_per_delay_hour)
    p0 = belief.mix_initial(belief.gaussian_seed(grid, case.ipp, sigma), env.prior, b.alpha_prior)
    schedule = HorizonSchedule(case.last_seen_time, f.step_hours, tuple(f.horizons), f.day_start, f.day_end)
    fields = propagate_horizons(p0, env.matrices, schedule, grid)
    decay = DecaySpec(f.half_life_hours[case.movement_profile], tuple(f.gamma))
    cumulative = cumulative_blend(fields, decay, tuple(f.horizons))
    return p0, fields, cumulative


def build_plan(case, env: Environment, cfg: Config, fields, cumulative) -> SearchPlan:
    grid, q, top_k = env.grid, cfg.products.quantiles, cfg.products.top_k

    def ranked(field_):
        if env.sectors is None:
            return []
        return [{"name": n, "mass_pct": m} for n, m in products.sector_masses(field_, env.sectors)]

    def rings(field_):
        return [{"q": r.quantile, "radius_miles": r.radius_miles}
                for r in products.containment_rings(field_, case.ipp, q, grid)]

    return SearchPlan(
        case_id=case.case_id,
        ipp=case.ipp,
        grid_xy=list(zip(grid.lon.tolist(), grid.lat.tolist())),
        mask=grid.mask.astype(int).tolist(),
        p=cumulative.tolist(),
        forecasts_by_horizon={str(h): v.tolist() for h, v in fields.items()},
        sectors_ranked={"cumulative": ranked(cumulative), "by_horizon": {str(h): ranked(v) for h, v in fields.items()}},
        rings=rings(cumulative),
        rings_by_horizon={str(h): rings(v) for h, v in fields.items()},
        hotspots=env.hotspots.to_json() if env.hotspots is not None else [],
        hotspot_concentration={str(h): products.hotspot_concentration(v, top_k) for h, v in fields.items()},
    )


@_stage("zones")
def plan_zones(case, env: Environment, cfg: Config, fields, cumulative):
    spec = reward_spec(cfg)
    rings = products.containment_rings(cumulative, case.ipp, cfg.products.quantiles, env.grid)
    cands = generate_candidates(env.grid, fields, spec, ipp=case.ipp, hotspots=env.hotspots, rings=rings, sectors=env.sectors)
    return select_zones(cands, fields, spec, env.grid, env.layers)


def make_scorer(cfg: Config):
    if cfg.qa.endpoint:
        return RemoteScorer(cfg.qa.endpoint, cfg.qa.timeout)
    return HeuristicScorer()


@_stage("qa")
def quality_check(case, zones, cfg: Config, scorer=None):
    reviews = review_zones(zones, case.ipp, case.summary(), case.movement_profile,
                           scorer or make_scorer(cfg), cfg.qa.max_in_flight)
    adjusted = reweight(zones, reviews)
    return adjusted, reviews, qa_metrics(zones, adjusted, reviews)


def run_pipeline(case: CaseRecord, cfg: Config, env: Environment | None = None, scorer=None, qa=None) -> PipelineResult:
    """Run all five stages for one case. Deterministic given (case, config)."""
    env = env or build_environment(cfg)
    _, fields, cumulative = forecast(case, env, cfg)
    plan = build_plan(case, env, cfg, fields, cumulative)
    zones, traces = plan_zones(case, env, cfg, fields, cumulative)
    run_qa = cfg.qa.enabled if qa is None else qa
    zones_qa = reviews = summary = None
    if run_qa:
        zones_qa, reviews, summary = quality_check(case, zones, cfg, scorer)
    rankings = {"baseline": zones}
    if zones_qa is not None:
        rankings["qa"] = zones_qa
    report = evaluate_case(case, rankings, fields, top_k=cfg.products.top_k)
    return PipelineResult(case, plan, fields, zones, traces, zones_qa, reviews or [], summary, report, env)


def zones_record(result: PipelineResult) -> dict:
    case = result.case
    return {
        "schema_version": result.plan.schema_version,
        "case_id": case.case_id,
        "ipp": {"lon": float(case.ipp[0]), "lat": float(case.ipp[1])},
        "movement_profile": case.movement_profile,
        "case_summary": case.summary(),
        "zones": {w: [z.to_json() for z in result.zones.get(w, [])] for w in WINDOWS},
        "zone_scores": result.traces,
    }


def write_outputs(result: PipelineResult, out_dir, export_geojson=False) -> dict:
    """Write every artifact for a run; returns ``{name: path}``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"search_plan": out / "search_plan.json", "zones": out / "zones.jsonl", "eval_report": out / "eval_report.json"}
    write_plan(result.plan, paths["search_plan"])
    write_jsonl([zones_record(result)], paths["zones"])
    write_canonical(result.report.to_json(), paths["eval_report"])
    if result.zones_qa is not None:
        paths["zones_review"] = out / "zones_review.jsonl"
        paths["zone_qa_metrics"] = out / "zone_qa_metrics.json"
        write_jsonl([r.to_json() for r in result.reviews], paths["zones_review"])
        write_canonical({"case_id": result.case.case_id, **result.qa_summary}, paths["zone_qa_metrics"])
    if export_geojson:
        paths["geojson"] = out / "forecast.geojson"
        write_canonical(plan_geojson(result.plan, result.env.grid, result.zones_qa or result.zones), paths["geojson"])
    return paths
