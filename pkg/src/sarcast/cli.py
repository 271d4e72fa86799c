"""Command-line entry point.

Exit codes: 0 success, 2 schema violation, 3 domain or config error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .cases import generate_case, load_case, write_case, write_plan
from .config import builtin_path, load_config
from .errors import SarcastError, SchemaViolation, StageError
from .evaluation import summarize
from .geojson import plan_geojson
from .jsonio import read_jsonl, write_canonical, write_jsonl
from .pipeline import build_environment, build_plan, forecast, make_scorer, run_pipeline, write_outputs
from .qa import qa_metrics, review_zones, reweight
from .zones import WINDOWS, Zone

log = logging.getLogger("sarcast")

EXIT_OK, EXIT_SCHEMA, EXIT_DOMAIN, EXIT_IO = 0, 2, 3, 4


def _common(p):
    p.add_argument("--config", help="TOML config file (defaults to the bundled Virginia demo setup)")
    p.add_argument("--out-dir", default="out", help="directory for output artifacts")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--qa-endpoint", help="URL of a remote plausibility scorer")
    p.add_argument("--no-qa", action="store_true", help="skip plausibility review")
    p.add_argument("--export-geojson", action="store_true", help="also write forecast.geojson")
    p.add_argument("-v", "--verbose", action="store_true")


def _config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.qa_endpoint:
        cfg.qa.endpoint = args.qa_endpoint
    if args.no_qa:
        cfg.qa.enabled = False
    return cfg


def _bbox(cfg):
    g = cfg.grid
    return (g.lon_min, g.lat_min, g.lon_max, g.lat_max)


def cmd_forecast(args):
    cfg = _config(args)
    case = load_case(args.case, _bbox(cfg))
    env = build_environment(cfg)
    _, fields, cumulative = forecast(case, env, cfg)
    plan = build_plan(case, env, cfg, fields, cumulative)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_plan(plan, out / "search_plan.json")
    if args.export_geojson:
        write_canonical(plan_geojson(plan, env.grid), out / "forecast.geojson")
    print(out / "search_plan.json")


def _run(args, cfg, case, qa):
    result = run_pipeline(case, cfg, qa=qa)
    paths = write_outputs(result, args.out_dir, export_geojson=args.export_geojson)
    for p in paths.values():
        print(p)
    return result


def cmd_zones(args):
    cfg = _config(args)
    _run(args, cfg, load_case(args.case, _bbox(cfg)), qa=False)


def cmd_qa(args):
    cfg = _config(args)
    scorer = make_scorer(cfg)
    reviews_out, metrics_out = [], []
    for rec in read_jsonl(args.zones):
        zones = {w: [Zone.from_json(z) for z in rec["zones"].get(w, [])] for w in WINDOWS}
        ipp = (rec["ipp"]["lon"], rec["ipp"]["lat"])
        reviews = review_zones(zones, ipp, rec.get("case_summary", ""), rec.get("movement_profile", "unknown"),
                               scorer, cfg.qa.max_in_flight)
        adjusted = reweight(zones, reviews)
        reviews_out.extend({"case_id": rec["case_id"], **r.to_json()} for r in reviews)
        metrics_out.append({"case_id": rec["case_id"], **qa_metrics(zones, adjusted, reviews)})
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(reviews_out, out / "zones_review.jsonl")
    write_canonical(metrics_out[0] if len(metrics_out) == 1 else metrics_out, out / "zone_qa_metrics.json")
    print(out / "zones_review.jsonl")
    print(out / "zone_qa_metrics.json")


def cmd_evaluate(args):
    cfg = _config(args)
    env = build_environment(cfg)
    reports = []
    for path in args.cases:
        case = load_case(path, _bbox(cfg))
        result = run_pipeline(case, cfg, env=env)
        sub = Path(args.out_dir) / case.case_id if len(args.cases) > 1 else Path(args.out_dir)
        write_outputs(result, sub, export_geojson=args.export_geojson)
        reports.append(result.report)
    summary = summarize(reports)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    write_canonical(summary, Path(args.out_dir) / "eval_summary.json")
    print(Path(args.out_dir) / "eval_summary.json")


def cmd_generate(args):
    cfg = _config(args)
    env = build_environment(cfg)
    case = generate_case(env.grid, env.matrices, cfg.seed, args.profile,
                         step_hours=cfg.forecast.step_hours)
    out = Path(args.output) if args.output else Path(args.out_dir) / f"{case.case_id}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_case(case, out)
    print(out)


def cmd_demo(args):
    cfg = _config(args)
    case = load_case(builtin_path("demo_case.json"), _bbox(cfg))
    result = _run(args, cfg, case, qa=None)
    plan = result.plan
    top = plan.sectors_ranked["cumulative"][0]
    print(f"top sector: {top['name']} ({top['mass_pct']:.1%} of cumulative mass)")
    for h in sorted(plan.rings_by_horizon, key=int):
        r50 = next(r["radius_miles"] for r in plan.rings_by_horizon[h] if r["q"] == 0.5)
        print(f"{h}h: 50% ring {r50:.1f} mi, top-{cfg.products.top_k} concentration {plan.hotspot_concentration[h]:.3f}")


def build_parser():
    parser = argparse.ArgumentParser(prog="sarcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("forecast", help="write search_plan.json for a case")
    p.add_argument("case")
    p.set_defaults(func=cmd_forecast)
    p = sub.add_parser("zones", help="forecast and select zones (search_plan.json, zones.jsonl)")
    p.add_argument("case")
    p.set_defaults(func=cmd_zones)
    p = sub.add_parser("qa", help="review zones.jsonl with a plausibility scorer")
    p.add_argument("zones")
    p.set_defaults(func=cmd_qa)
    p = sub.add_parser("evaluate", help="run the full pipeline and score against ground truth")
    p.add_argument("cases", nargs="+")
    p.set_defaults(func=cmd_evaluate)
    p = sub.add_parser("generate", help="write a synthetic case with ground truth")
    p.add_argument("--profile", default="on-foot", choices=["on-foot", "vehicle", "unknown"])
    p.add_argument("-o", "--output", help="case file path (default: OUT_DIR/<case_id>.json)")
    p.set_defaults(func=cmd_generate)
    p = sub.add_parser("demo", help="run the bundled GRD-2025-001541 fixture end to end")
    p.set_defaults(func=cmd_demo)
    for name, sp in sub.choices.items():
        _common(sp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        log.error("%s", exc)
        inner = exc.error
        if isinstance(inner, SchemaViolation):
            return EXIT_SCHEMA
        return EXIT_IO if isinstance(inner, OSError) else EXIT_DOMAIN
    except SchemaViolation as exc:
        log.error("%s", exc)
        return EXIT_SCHEMA
    except (SarcastError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_DOMAIN
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
