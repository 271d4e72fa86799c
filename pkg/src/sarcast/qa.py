"""Post-hoc plausibility review and reweighting of selected zones.

Scorers map a :class:`ScorerRequest` to a :class:`Score`. The heuristic
scorer compares a zone's distance from the IPP with how far the person could
plausibly travel by the end of the window; the remote scorer posts the
request as JSON to an HTTP endpoint and falls back to the heuristic when the
service is unreachable or keeps answering with malformed payloads.
"""

from __future__ import annotations

import json
import logging
import math
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

from .errors import MalformedResponse, MissingReview
from .grid import great_circle_miles
from .zones import WINDOWS, Zone, window_end_hours

log = logging.getLogger(__name__)

PROFILE_SPEED_MPH = {"on-foot": 3.0, "vehicle": 50.0, "unknown": 20.0}
PLAUSIBILITY_FLOOR = 0.05


@dataclass(frozen=True)
class ScorerRequest:
    case_summary: str
    movement_profile: str
    window: str
    center_lon: float
    center_lat: float
    radius_miles: float
    distance_from_ipp_miles: float

    def __post_init__(self):
        if self.distance_from_ipp_miles < 0:
            raise ValueError("distance_from_ipp_miles must be non-negative")

    def to_json(self):
        return {
            "case_summary": self.case_summary,
            "movement_profile": self.movement_profile,
            "window": self.window,
            "zone_geometry": {
                "center_lon": self.center_lon,
                "center_lat": self.center_lat,
                "radius_miles": self.radius_miles,
                "distance_from_ipp_miles": self.distance_from_ipp_miles,
            },
        }


@dataclass(frozen=True)
class Score:
    plausibility: float
    rationale: str
    scorer: str = "heuristic"
    fallback: bool = False
    warnings: tuple = ()


@dataclass(frozen=True)
class PlausibilityReview:
    zone_id: str
    plausibility: float
    rationale: str
    original_priority: float
    new_priority: float
    scorer: str
    fallback: bool = False
    warnings: tuple = field(default=())

    def to_json(self):
        d = asdict(self)
        d["warnings"] = list(self.warnings)
        return d


def build_request(zone: Zone, ipp, case_summary: str, movement_profile: str) -> ScorerRequest:
    return ScorerRequest(
        case_summary=case_summary,
        movement_profile=movement_profile,
        window=zone.window,
        center_lon=float(zone.center[0]),
        center_lat=float(zone.center[1]),
        radius_miles=float(zone.radius_miles),
        distance_from_ipp_miles=great_circle_miles(tuple(ipp), tuple(zone.center)),
    )


def heuristic_score(req: ScorerRequest) -> Score:
    """Travel-reachability plausibility with a floor of 0.05."""
    speed = PROFILE_SPEED_MPH.get(req.movement_profile, PROFILE_SPEED_MPH["unknown"])
    reach = speed * window_end_hours(req.window)
    dist = req.distance_from_ipp_miles
    if dist <= reach:
        return Score(1.0, f"{dist:.1f} mi from IPP is within the {reach:.0f} mi reachable {req.movement_profile} by {req.window} h")
    p = max(PLAUSIBILITY_FLOOR, math.exp(-(dist - reach) / reach))
    return Score(p, f"{dist:.1f} mi from IPP exceeds the {reach:.0f} mi reachable {req.movement_profile} by {req.window} h")


def parse_response(payload) -> Score:
    """Validate ``{"plausibility": number, "rationale": non-empty string}``."""
    if not isinstance(payload, dict):
        raise MalformedResponse("response is not a JSON object")
    p, r = payload.get("plausibility"), payload.get("rationale")
    if isinstance(p, bool) or not isinstance(p, (int, float)) or not math.isfinite(p):
        raise MalformedResponse("plausibility missing or not a finite number")
    if not isinstance(r, str) or not r.strip():
        raise MalformedResponse("rationale missing or empty")
    warnings = ()
    if not 0.0 <= p <= 1.0:
        warnings = (f"plausibility {p} clamped to [0, 1]",)
        log.warning(warnings[0])
        p = min(1.0, max(0.0, p))
    return Score(float(p), r, scorer="remote", warnings=warnings)


def remote_score(req: ScorerRequest, endpoint: str, timeout: float = 10.0, retries: int = 1) -> Score:
    """POST the request to ``endpoint``; fall back to the heuristic on repeated failure."""
    body = json.dumps(req.to_json(), sort_keys=True).encode("utf-8")
    errors = []
    for _ in range(retries + 1):
        http_req = urllib.request.Request(endpoint, data=body, headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(http_req, timeout=timeout) as resp:
                return parse_response(json.loads(resp.read().decode("utf-8")))
        except (MalformedResponse, ValueError) as exc:
            errors.append(f"malformed: {exc}")
        except (urllib.error.URLError, OSError) as exc:
            errors.append(f"transport: {exc}")
    log.warning("remote scorer failed (%s); using heuristic", "; ".join(errors))
    fb = heuristic_score(req)
    return replace(fb, fallback=True, warnings=tuple(errors))


class HeuristicScorer:
    name = "heuristic"

    def __call__(self, req: ScorerRequest) -> Score:
        return heuristic_score(req)


class RemoteScorer:
    name = "remote"

    def __init__(self, endpoint, timeout=10.0, retries=1):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def __call__(self, req: ScorerRequest) -> Score:
        return remote_score(req, self.endpoint, self.timeout, self.retries)


def review_zones(zones_by_window, ipp, case_summary, movement_profile, scorer=None, max_in_flight=4):
    """Score every zone (concurrently, capped) and return reviews in zone order."""
    scorer = scorer or HeuristicScorer()
    flat = [z for w in WINDOWS for z in zones_by_window.get(w, [])]
    requests = [build_request(z, ipp, case_summary, movement_profile) for z in flat]
    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        scores = list(pool.map(scorer, requests))
    return [
        PlausibilityReview(
            zone_id=z.zone_id,
            plausibility=s.plausibility,
            rationale=s.rationale,
            original_priority=z.priority,
            new_priority=z.priority * s.plausibility,
            scorer=s.scorer,
            fallback=s.fallback,
            warnings=s.warnings,
        )
        for z, s in zip(flat, scores)
    ]


def reweight(zones_by_window, reviews):
    """Multiply priorities by plausibility and re-rank each window.

    Ties keep the original rank. Geometry, membership and ids are untouched.
    """
    by_id = {r.zone_id: r for r in reviews}
    out = {}
    for window, zones in zones_by_window.items():
        scored = []
        for rank, z in enumerate(zones):
            if z.zone_id not in by_id:
                raise MissingReview(z.zone_id)
            scored.append((z.priority * by_id[z.zone_id].plausibility, rank, z))
        scored.sort(key=lambda t: (-t[0], t[1]))
        out[window] = [replace(z, priority=p) for p, _, z in scored]
    return out


def qa_metrics(zones_by_window, reweighted, reviews):
    """Case-level QA summary: counts, mean plausibility, fallbacks, rank changes."""
    n = len(reviews)
    changes = 0
    for window, zones in zones_by_window.items():
        before = [z.zone_id for z in zones]
        after = [z.zone_id for z in reweighted.get(window, [])]
        changes += sum(a != b for a, b in zip(before, after))
    return {
        "n_zones": n,
        "mean_plausibility": (sum(r.plausibility for r in reviews) / n) if n else 0.0,
        "n_fallbacks": sum(1 for r in reviews if r.fallback),
        "n_rank_changes": changes,
    }
