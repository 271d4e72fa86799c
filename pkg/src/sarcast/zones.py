"""Search-zone candidates and reward-shaped greedy selection per time window.

The reward for adding a zone to a window's plan is

    w_window * (new probability mass covered)
    - lambda_area * area / (pi * r_max**2)
    - lambda_overlap * (fraction of the zone's cells already covered)
    + lambda_plaus * mean((corridor + seclusion) / 2 over covered cells)

The coverage term is monotone submodular, so plain greedy keeps the usual
``1 - 1/e`` guarantee when the penalties are switched off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidSpec
from .grid import Grid, destination_point, great_circle_miles, initial_bearing
from .products import TIE_DECIMALS, top_cells

WINDOWS = ("0-24", "24-48", "48-72")
WINDOW_HORIZON = {"0-24": 24, "24-48": 48, "48-72": 72}
KINDS = ("cell-peak", "hotspot", "ring-band", "sector-centroid")


def window_end_hours(window: str) -> float:
    return float(window.split("-")[1])


@dataclass(frozen=True)
class Zone:
    center: tuple
    radius_miles: float
    window: str
    kind: str = "cell-peak"
    priority: float = 0.0
    mass: float = 0.0
    zone_id: str = ""

    def to_json(self):
        return {
            "zone_id": self.zone_id,
            "window": self.window,
            "kind": self.kind,
            "center_lon": float(self.center[0]),
            "center_lat": float(self.center[1]),
            "radius_miles": float(self.radius_miles),
            "priority": float(self.priority),
            "mass": float(self.mass),
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            center=(d["center_lon"], d["center_lat"]),
            radius_miles=d["radius_miles"],
            window=d["window"],
            kind=d.get("kind", "cell-peak"),
            priority=d.get("priority", 0.0),
            mass=d.get("mass", 0.0),
            zone_id=d.get("zone_id", ""),
        )


@dataclass(frozen=True)
class RewardSpec:
    window_weights: dict = field(default_factory=lambda: {"0-24": 1.0, "24-48": 0.7, "48-72": 0.5})
    lambda_area: float = 0.1
    lambda_overlap: float = 0.3
    lambda_plaus: float = 0.05
    budget: int = 5
    r_max: float = 15.0
    top_m: int = 25
    peak_radius: float = 8.0
    hotspot_radius: float = 10.0
    improve: bool = False
    improve_iters: int = 50
    epsilon: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise InvalidSpec("budget must be >= 1")
        if any(not w > 0 for w in self.window_weights.values()):
            raise InvalidSpec("window weights must be positive")
        if min(self.lambda_area, self.lambda_overlap, self.lambda_plaus) < 0:
            raise InvalidSpec("reward lambdas must be non-negative")
        if not self.r_max > 0:
            raise InvalidSpec("r_max must be positive")

    @property
    def area_norm(self) -> float:
        return math.pi * self.r_max**2


def zone_cover(grid: Grid, zone: Zone) -> np.ndarray:
    """Boolean mask of in-mask cells whose centre lies within the zone."""
    d = np.round(grid.distances_from(*zone.center), TIE_DECIMALS)
    return grid.mask & (d <= zone.radius_miles)


def _snap(grid: Grid, lon, lat, fallback=None):
    """Keep a centre whose nearest cell is in-mask, else move it to a cell centre."""
    if grid.spec.contains(lon, lat) and grid.mask[grid.nearest_cell(lon, lat, in_mask_only=False)]:
        return (float(lon), float(lat))
    i = grid.nearest_cell(lon, lat) if fallback is None else fallback
    return grid.center(i)


def reward_terms(cover, covered_before, field, window, spec: RewardSpec, radius, layers=None):
    """Individual reward components for one candidate given what is already covered."""
    new = cover & ~covered_before
    marginal = float(np.asarray(field)[new].sum())
    n_cover = int(cover.sum())
    overlap = float((cover & covered_before).sum()) / n_cover if n_cover else 0.0
    if layers is not None and n_cover:
        context = float(np.mean(0.5 * (layers.corridor[cover] + layers.seclusion[cover])))
    else:
        context = 0.0
    terms = {
        "marginal_mass": marginal,
        "coverage": spec.window_weights[window] * marginal,
        "area_penalty": spec.lambda_area * math.pi * radius**2 / spec.area_norm,
        "overlap_penalty": spec.lambda_overlap * overlap,
        "plausibility_bonus": spec.lambda_plaus * min(1.0, max(0.0, context)),
    }
    terms["reward"] = terms["coverage"] - terms["area_penalty"] - terms["overlap_penalty"] + terms["plausibility_bonus"]
    return terms


def zone_reward(selected, candidate: Zone, field, spec: RewardSpec, grid: Grid, layers=None) -> float:
    """Marginal shaped reward of adding ``candidate`` to ``selected``."""
    before = np.zeros(grid.n, dtype=bool)
    for z in selected:
        before |= zone_cover(grid, z)
    cover = zone_cover(grid, candidate)
    return reward_terms(cover, before, field, candidate.window, spec, candidate.radius_miles, layers)["reward"]


def generate_candidates(grid: Grid, fields: dict, spec: RewardSpec, ipp=None, hotspots=None, rings=(), sectors=None):
    """Deterministic candidate zones for every window.

    ``fields`` maps horizons (24, 48, 72) to belief vectors. Per window the
    candidates are the top-M cells, hotspot centres, one zone per band
    between consecutive containment rings and one per sector centroid. Within
    a window, centres closer than half a cell spacing are de-duplicated in
    favour of the candidate covering more mass.
    """
    min_sep = 0.5 * grid.cell_spacing_miles
    sector_cells = sectors.centroid_cells(grid) if sectors is not None else {}
    radii = sorted({float(r.radius_miles) for r in rings})
    out = []
    for window in WINDOWS:
        h = WINDOW_HORIZON[window]
        if h not in fields:
            continue
        f = np.asarray(fields[h], dtype=float)
        raw = []
        for i in top_cells(f, spec.top_m):
            raw.append(Zone(grid.center(i), min(spec.peak_radius, spec.r_max), window, "cell-peak"))
        if hotspots is not None:
            for lon, lat in hotspots.centers:
                raw.append(Zone(_snap(grid, lon, lat), min(spec.hotspot_radius, spec.r_max), window, "hotspot"))
        if ipp is not None:
            d_ipp = grid.distances_from(*ipp)
            for lo, hi in zip(radii, radii[1:]):
                band = np.flatnonzero(grid.mask & (d_ipp >= lo) & (d_ipp <= hi))
                if band.size == 0:
                    continue
                anchor = int(band[np.lexsort((band, -f[band]))[0]])
                if d_ipp[anchor] > 0:
                    brg = initial_bearing(ipp[0], ipp[1], *grid.center(anchor))
                    lon, lat = destination_point(ipp[0], ipp[1], brg, 0.5 * (lo + hi))
                    center = _snap(grid, lon, lat, fallback=anchor)
                else:
                    center = grid.center(anchor)
                raw.append(Zone(center, min(0.5 * (hi - lo), spec.r_max), window, "ring-band"))
        for name in sorted(sector_cells):
            raw.append(Zone(grid.center(sector_cells[name]), spec.r_max, window, "sector-centroid"))

        priced = [replace(z, mass=float(f[zone_cover(grid, z)].sum())) for z in raw if z.radius_miles > 0]
        priced.sort(key=lambda z: (-z.mass, KINDS.index(z.kind), z.center[1], z.center[0]))
        kept = []
        for z in priced:
            if all(great_circle_miles(z.center, k.center) >= min_sep for k in kept):
                kept.append(z)
        out.extend(kept)
    return out


def _tiebreak(z: Zone, marginal: float):
    return (-marginal, z.center[1], z.center[0])


def _sequence_value(order, covers, field, window, spec, radii, layers, n):
    before = np.zeros(n, dtype=bool)
    total = 0.0
    for c in order:
        total += reward_terms(covers[c], before, field, window, spec, radii[c], layers)["reward"]
        before |= covers[c]
    return total


def _greedy(cands, covers, field, window, spec: RewardSpec, layers, n):
    chosen, trace = [], []
    before = np.zeros(n, dtype=bool)
    remaining = list(range(len(cands)))
    while remaining and len(chosen) < spec.budget:
        best = None
        for c in remaining:
            t = reward_terms(covers[c], before, field, window, spec, cands[c].radius_miles, layers)
            key = (-t["reward"],) + _tiebreak(cands[c], t["marginal_mass"])
            if best is None or key < best[0]:
                best = (key, c, t)
        _, c, t = best
        if chosen and t["reward"] <= 0:
            break
        chosen.append(c)
        trace.append(t)
        before |= covers[c]
        remaining.remove(c)
    return chosen, trace


def _improve(chosen, cands, covers, field, window, spec: RewardSpec, layers, n):
    """Epsilon-greedy swap search; only strictly better plans are accepted."""
    rng = np.random.default_rng(spec.seed)
    radii = [z.radius_miles for z in cands]
    best_val = _sequence_value(chosen, covers, field, window, spec, radii, layers, n)
    for _ in range(spec.improve_iters):
        outside = [c for c in range(len(cands)) if c not in chosen]
        if not outside or not chosen:
            break
        pos = int(rng.integers(len(chosen)))
        if rng.random() < spec.epsilon:
            options = [outside[int(rng.integers(len(outside)))]]
        else:
            options = outside
        for c in options:
            trial = chosen[:pos] + [c] + chosen[pos + 1:]
            val = _sequence_value(trial, covers, field, window, spec, radii, layers, n)
            if val > best_val + 1e-15:
                chosen, best_val = trial, val
    return chosen


def select_zones(candidates, fields: dict, spec: RewardSpec, grid: Grid, layers=None):
    """Greedy per-window selection.

    Returns ``(zones_by_window, traces)``. Each window keeps up to ``budget``
    zones; after the first pick, selection stops once no candidate has a
    positive marginal reward. Zones are ranked by covered mass at selection
    time (desc), then centre latitude and longitude (asc); priority is that
    mass divided by the window's largest. Windows without candidates are
    returned empty and flagged in their trace.
    """
    zones, traces = {}, {}
    for window in WINDOWS:
        cands = [z for z in candidates if z.window == window]
        h = WINDOW_HORIZON[window]
        if not cands or h not in fields:
            zones[window] = []
            traces[window] = {"no_candidates": True, "steps": []}
            continue
        f = np.asarray(fields[h], dtype=float)
        covers = [zone_cover(grid, z) for z in cands]
        chosen, steps = _greedy(cands, covers, f, window, spec, layers, grid.n)
        if spec.improve:
            chosen = _improve(chosen, cands, covers, f, window, spec, layers, grid.n)
            steps = []
            before = np.zeros(grid.n, dtype=bool)
            for c in chosen:
                steps.append(reward_terms(covers[c], before, f, window, spec, cands[c].radius_miles, layers))
                before |= covers[c]
        picked = [(step_no, cands[c], t) for step_no, (c, t) in enumerate(zip(chosen, steps), start=1)]
        picked.sort(key=lambda p: _tiebreak(p[1], p[2]["marginal_mass"]))
        top = max((t["marginal_mass"] for _, _, t in picked), default=0.0)
        ranked, trace = [], []
        for rank, (step_no, z, t) in enumerate(picked, start=1):
            zid = f"{window}#{rank}"
            prio = t["marginal_mass"] / top if top > 0 else 0.0
            ranked.append(replace(z, priority=prio, mass=t["marginal_mass"], zone_id=zid))
            trace.append({"zone_id": zid, "selection_step": step_no, **t})
        zones[window] = ranked
        traces[window] = {"no_candidates": False, "steps": trace}
    return zones, traces


def coverage_value(zones, field, grid: Grid, weight=1.0) -> float:
    """``weight`` times the probability mass of the union of the zones."""
    covered = np.zeros(grid.n, dtype=bool)
    for z in zones:
        covered |= zone_cover(grid, z)
    return weight * float(np.asarray(field)[covered].sum())

