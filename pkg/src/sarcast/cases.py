"""Case records, synthetic case generation and search-plan serialisation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import jsonschema
import numpy as np

from .errors import SchemaViolation
from .grid import EARTH_RADIUS_MILES, Grid
from .jsonio import write_canonical

SCHEMA_VERSION = "1.0"
PROFILES = ("on-foot", "vehicle", "unknown")

_POINT = {
    "type": "object",
    "required": ["lon", "lat", "time"],
    "properties": {
        "lon": {"type": "number", "minimum": -180, "maximum": 180},
        "lat": {"type": "number", "minimum": -90, "maximum": 90},
        "time": {"type": "string"},
    },
}

CASE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["case_id", "ipp", "last_seen_time", "movement_profile"],
    "properties": {
        "schema_version": {"type": "string"},
        "case_id": {"type": "string", "minLength": 1},
        "ipp": {
            "type": "object",
            "required": ["lon", "lat"],
            "properties": {
                "lon": {"type": "number", "minimum": -180, "maximum": 180},
                "lat": {"type": "number", "minimum": -90, "maximum": 90},
            },
        },
        "last_seen_time": {"type": "string"},
        "reported_time": {"type": ["string", "null"]},
        "age": {"type": ["number", "null"], "minimum": 0},
        "sex": {"type": ["string", "null"]},
        "movement_profile": {"enum": list(PROFILES)},
        "context": {"type": "string"},
        "sightings": {"type": "array", "items": _POINT},
        "ground_truth": {"type": ["array", "null"], "items": _POINT},
    },
}


def _parse_time(text):
    t = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if t.tzinfo is None:
        raise ValueError("timestamp needs a UTC offset")
    return t


def _fmt_time(t: datetime) -> str:
    return t.isoformat()


@dataclass(frozen=True)
class TimedPoint:
    lon: float
    lat: float
    time: datetime

    def to_json(self):
        return {"lon": float(self.lon), "lat": float(self.lat), "time": _fmt_time(self.time)}


@dataclass(frozen=True)
class CaseRecord:
    """Structured case evidence. Timestamps keep their original UTC offset."""

    case_id: str
    ipp: tuple
    last_seen_time: datetime
    movement_profile: str = "unknown"
    age: float | None = None
    sex: str | None = None
    context: str = ""
    reported_time: datetime | None = None
    sightings: tuple = ()
    ground_truth: tuple | None = None

    @property
    def last_seen_utc(self) -> datetime:
        return self.last_seen_time.astimezone(timezone.utc)

    @property
    def reporting_delay_hours(self) -> float:
        if self.reported_time is None:
            return 0.0
        return max(0.0, (self.reported_time - self.last_seen_time).total_seconds() / 3600.0)

    def summary(self) -> str:
        who = []
        if self.age is not None:
            who.append(f"{self.age:g}-year-old")
        if self.sex:
            who.append(self.sex)
        who = " ".join(who) or "person"
        text = (
            f"Case {self.case_id}: {who}, last seen {self.last_seen_time.isoformat()} at "
            f"({self.ipp[0]:.4f}, {self.ipp[1]:.4f}); movement profile {self.movement_profile}; "
            f"{len(self.sightings)} follow-up sighting(s)."
        )
        return f"{text} {self.context}".strip()

    def to_json(self):
        d = {
            "schema_version": SCHEMA_VERSION,
            "case_id": self.case_id,
            "ipp": {"lon": float(self.ipp[0]), "lat": float(self.ipp[1])},
            "last_seen_time": _fmt_time(self.last_seen_time),
            "movement_profile": self.movement_profile,
            "context": self.context,
            "sightings": [s.to_json() for s in self.sightings],
        }
        if self.age is not None:
            d["age"] = self.age
        if self.sex is not None:
            d["sex"] = self.sex
        if self.reported_time is not None:
            d["reported_time"] = _fmt_time(self.reported_time)
        if self.ground_truth is not None:
            d["ground_truth"] = [g.to_json() for g in self.ground_truth]
        return d


def _path(err_path):
    out = ""
    for p in err_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate_case(obj, bbox=None):
    """Return the list of ``(field, message)`` problems in a case document."""
    problems = []
    validator = jsonschema.Draft202012Validator(CASE_SCHEMA)
    for err in sorted(validator.iter_errors(obj), key=lambda e: list(map(str, e.path))):
        if err.validator == "required":
            base = _path(err.path)
            for name in err.validator_value:
                if isinstance(err.instance, dict) and name not in err.instance:
                    problems.append((name if base == "<root>" else f"{base}.{name}", "required field missing"))
        else:
            problems.append((_path(err.path), err.message))
    if problems or not isinstance(obj, dict):
        return problems

    try:
        seen = _parse_time(obj["last_seen_time"])
    except ValueError as exc:
        return [("last_seen_time", str(exc))]
    if obj.get("reported_time"):
        try:
            if _parse_time(obj["reported_time"]) < seen:
                problems.append(("reported_time", "reported before last seen"))
        except ValueError as exc:
            problems.append(("reported_time", str(exc)))
    for key in ("sightings", "ground_truth"):
        for n, pt in enumerate(obj.get(key) or []):
            try:
                if _parse_time(pt["time"]) < seen:
                    problems.append((f"{key}[{n}].time", "earlier than last_seen_time"))
            except ValueError as exc:
                problems.append((f"{key}[{n}].time", str(exc)))
    if bbox is not None:
        lon_min, lat_min, lon_max, lat_max = bbox
        ipp = obj["ipp"]
        if not (lon_min <= ipp["lon"] <= lon_max and lat_min <= ipp["lat"] <= lat_max):
            problems.append(("ipp", "outside the grid bounding box"))
    return problems


def _points(items):
    return tuple(TimedPoint(p["lon"], p["lat"], _parse_time(p["time"])) for p in items)


def case_from_json(obj, bbox=None) -> CaseRecord:
    problems = validate_case(obj, bbox)
    if problems:
        raise SchemaViolation(problems)
    gt = obj.get("ground_truth")
    return CaseRecord(
        case_id=obj["case_id"],
        ipp=(float(obj["ipp"]["lon"]), float(obj["ipp"]["lat"])),
        last_seen_time=_parse_time(obj["last_seen_time"]),
        movement_profile=obj["movement_profile"],
        age=obj.get("age"),
        sex=obj.get("sex"),
        context=obj.get("context", ""),
        reported_time=_parse_time(obj["reported_time"]) if obj.get("reported_time") else None,
        sightings=_points(obj.get("sightings") or []),
        ground_truth=_points(gt) if gt is not None else None,
    )


def load_case(path, bbox=None) -> CaseRecord:
    """Load and validate a case JSON file; every failing field is reported."""
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaViolation([("<root>", f"invalid JSON: {exc}")]) from exc
    return case_from_json(obj, bbox)


def write_case(case: CaseRecord, path):
    write_canonical(case.to_json(), path)


# -- synthetic cases ---------------------------------------------------------

def tempered_row(matrix, i: int, tau: float):
    """Support and probabilities of row ``i`` flattened by exponent ``1/tau``."""
    cols, probs = matrix.row(i)
    if math.isinf(tau):
        q = np.ones_like(probs)
    else:
        q = probs ** (1.0 / tau)
    return cols, q / q.sum()


def sample_trajectory(matrices, schedule, start: int, n_steps: int, rng, tau: float = 1.5):
    """Cell indices visited by a walk over the day/night matrices (length n_steps + 1)."""
    day, night = matrices
    path = [start]
    for tag in schedule.tags(n_steps):
        cols, q = tempered_row(day if tag == "day" else night, path[-1], tau)
        path.append(int(cols[rng.choice(len(cols), p=q)]))
    return path


def generate_case(
    grid: Grid,
    matrices,
    seed: int,
    profile: str = "on-foot",
    step_hours: float = 3.0,
    hours: int = 72,
    tau: float = 1.5,
    n_sightings: int = 3,
    jitter_miles: float = 1.0,
    utc_offset_hours: float = -4.0,
) -> CaseRecord:
    """Schema-conformant synthetic case with a ground-truth walk.

    The IPP is a random in-mask cell centre, the truth walk is sampled from
    tempered day/night rows, and sightings are jittered subsamples of it.
    """
    from .propagation import HorizonSchedule  # local: avoids an import cycle

    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    rng = np.random.default_rng(seed)
    tz = timezone(timedelta(hours=utc_offset_hours))
    start = grid.in_mask[int(rng.integers(grid.in_mask.size))]
    day_of_year = int(rng.integers(0, 365))
    minute = int(rng.integers(0, 24 * 60))
    seen = datetime(2025, 1, 1, tzinfo=tz) + timedelta(days=day_of_year, minutes=minute)
    n_steps = int(round(hours / step_hours))
    schedule = HorizonSchedule(seen, step_hours=step_hours, horizons=(hours,))
    path = sample_trajectory(matrices, schedule, int(start), n_steps, rng, tau)
    truth = tuple(
        TimedPoint(float(grid.lon[c]), float(grid.lat[c]), seen + timedelta(hours=s * step_hours))
        for s, c in enumerate(path)
    )
    picks = np.sort(rng.choice(np.arange(1, len(truth)), size=min(n_sightings, len(truth) - 1), replace=False))
    sightings = []
    s = grid.spec
    for p in picks:
        t = truth[p]
        dy, dx = rng.normal(0.0, jitter_miles, 2)
        lat = t.lat + math.degrees(dy / EARTH_RADIUS_MILES)
        lon = t.lon + math.degrees(dx / (EARTH_RADIUS_MILES * math.cos(math.radians(t.lat))))
        sightings.append(TimedPoint(min(max(lon, s.lon_min), s.lon_max), min(max(lat, s.lat_min), s.lat_max), t.time))
    delay = float(rng.integers(0, 7))
    return CaseRecord(
        case_id=f"SYN-{seed:06d}-{profile}",
        ipp=grid.center(int(start)),
        last_seen_time=seen,
        movement_profile=profile,
        age=float(rng.integers(8, 18)),
        context=f"Synthetic {profile} case generated with seed {seed}.",
        reported_time=seen + timedelta(hours=delay),
        sightings=tuple(sightings),
        ground_truth=truth,
    )


# -- search plan -------------------------------------------------------------

@dataclass
class SearchPlan:
    case_id: str
    ipp: tuple
    grid_xy: list
    mask: list
    p: list
    forecasts_by_horizon: dict
    sectors_ranked: dict
    rings: list
    rings_by_horizon: dict
    hotspots: list
    hotspot_concentration: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        n = len(self.grid_xy)
        if len(self.p) != n or len(self.mask) != n:
            raise ValueError("p and mask must align with grid_xy")
        for h, v in self.forecasts_by_horizon.items():
            if len(v) != n:
                raise ValueError(f"horizon {h} is not aligned with grid_xy")

    def to_json(self):
        return {
            "schema_version": self.schema_version,
            "case_id": self.case_id,
            "ipp": {"lon": float(self.ipp[0]), "lat": float(self.ipp[1])},
            "grid_xy": [[float(x), float(y)] for x, y in self.grid_xy],
            "mask": [int(m) for m in self.mask],
            "p": [float(v) for v in self.p],
            "forecasts_by_horizon": {str(h): [float(v) for v in f] for h, f in self.forecasts_by_horizon.items()},
            "sectors_ranked": self.sectors_ranked,
            "rings": self.rings,
            "rings_by_horizon": {str(h): r for h, r in self.rings_by_horizon.items()},
            "hotspots": self.hotspots,
            "hotspot_concentration": {str(h): float(v) for h, v in self.hotspot_concentration.items()},
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            case_id=d["case_id"],
            ipp=(d["ipp"]["lon"], d["ipp"]["lat"]),
            grid_xy=[tuple(xy) for xy in d["grid_xy"]],
            mask=d["mask"],
            p=d["p"],
            forecasts_by_horizon=d["forecasts_by_horizon"],
            sectors_ranked=d["sectors_ranked"],
            rings=d["rings"],
            rings_by_horizon=d.get("rings_by_horizon", {}),
            hotspots=d["hotspots"],
            hotspot_concentration=d.get("hotspot_concentration", {}),
            schema_version=d.get("schema_version", SCHEMA_VERSION),
        )


def write_plan(plan: SearchPlan, path):
    write_canonical(plan.to_json(), path)


def read_plan(path) -> SearchPlan:
    with open(path, encoding="utf-8") as fh:
        return SearchPlan.from_json(json.load(fh))
