"""Day/night Markov propagation, masking, survival decay and horizon blending."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .errors import AllMassMasked, GridMismatch, InvalidSpec, MissingHorizon
from .grid import Grid
from .transitions import TransitionMatrix

HALF_LIFE_HOURS = {"on-foot": 36.0, "vehicle": 18.0, "unknown": 24.0}
DEFAULT_GAMMA = (1.0, 0.7, 0.5)


@dataclass(frozen=True)
class HorizonSchedule:
    """Step length, output horizons and the local day window.

    The matrix for step ``s`` is chosen from the local wall-clock hour at the
    step's start, ``last_seen_local + s * step_hours``; ``day_start <= hour <
    day_end`` is day.
    """

    last_seen_local: datetime
    step_hours: float = 3.0
    horizons: tuple = (24, 48, 72)
    day_start: float = 6.0
    day_end: float = 18.0

    def __post_init__(self):
        if not self.step_hours > 0 or (24.0 / self.step_hours) != int(24.0 / self.step_hours):
            raise InvalidSpec("step_hours must evenly divide 24")
        hs = tuple(self.horizons)
        if not hs or any(b <= a for a, b in zip((0,) + hs, hs)):
            raise InvalidSpec("horizons must be positive and strictly increasing")
        for h in hs:
            if (h / self.step_hours) != int(h / self.step_hours):
                raise InvalidSpec(f"horizon {h} is not a whole number of steps")
        if not 0 <= self.day_start < self.day_end <= 24:
            raise InvalidSpec("need 0 <= day_start < day_end <= 24")
        object.__setattr__(self, "horizons", hs)

    def steps_to(self, hours) -> int:
        return int(round(hours / self.step_hours))

    def step_start(self, step: int) -> datetime:
        return self.last_seen_local + timedelta(hours=step * self.step_hours)

    def is_day(self, step: int) -> bool:
        t = self.step_start(step)
        hour = t.hour + t.minute / 60.0 + t.second / 3600.0
        return self.day_start <= hour < self.day_end

    def tags(self, n_steps: int, start_step: int = 0):
        return ["day" if self.is_day(s) else "night" for s in range(start_step, start_step + n_steps)]


@dataclass(frozen=True)
class DecaySpec:
    half_life_hours: float = 24.0
    gamma: tuple = field(default=DEFAULT_GAMMA)

    def __post_init__(self):
        if not self.half_life_hours > 0:
            raise InvalidSpec("half-life must be positive")
        if any(not g > 0 for g in self.gamma):
            raise InvalidSpec("gamma weights must be positive")


def survival_weight(t: float, half_life: float) -> float:
    """``2 ** (-t / half_life)``; an infinite half-life disables decay."""
    if t < 0 or not half_life > 0:
        raise InvalidSpec("need t >= 0 and half_life > 0")
    if math.isinf(half_life):
        return 1.0
    return 2.0 ** (-t / half_life)


def step(field: np.ndarray, matrix: TransitionMatrix) -> np.ndarray:
    """One forward step: ``out[j] = sum_i P[i, j] * field[i]``."""
    field = np.asarray(field, dtype=float)
    if field.shape != (matrix.n,):
        raise GridMismatch(f"field of length {field.shape} vs matrix of size {matrix.n}")
    return matrix.matrix.T @ field


def mask_renormalize(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Zero out-of-mask cells and rescale the in-mask mass to 1."""
    out = np.where(grid.mask, np.asarray(field, dtype=float), 0.0)
    total = out.sum()
    if not total > 0:
        raise AllMassMasked("no probability mass left inside the mask")
    return out / total


def run_steps(field, matrices, schedule: HorizonSchedule, grid: Grid, start_step: int, n_steps: int):
    """Advance ``n_steps`` from global step ``start_step``, masking after each."""
    day, night = matrices
    p = np.asarray(field, dtype=float)
    for tag in schedule.tags(n_steps, start_step):
        p = mask_renormalize(step(p, day if tag == "day" else night), grid)
    return p


def propagate_horizons(p0, matrices, schedule: HorizonSchedule, grid: Grid) -> dict:
    """Sequential forecasts ``{H: p_H}``; each horizon continues from the previous one."""
    out = {}
    p = mask_renormalize(p0, grid)
    prev = 0
    for h in schedule.horizons:
        n = schedule.steps_to(h - prev)
        p = run_steps(p, matrices, schedule, grid, schedule.steps_to(prev), n)
        out[h] = p
        prev = h
    return out


def blend_weights(horizons, decay: DecaySpec) -> np.ndarray:
    """Normalised ``gamma_H * w(H)`` for each horizon."""
    if len(decay.gamma) != len(horizons):
        raise InvalidSpec("gamma must align with the horizons")
    w = np.array([g * survival_weight(h, decay.half_life_hours) for g, h in zip(decay.gamma, horizons)])
    return w / w.sum()


def cumulative_blend(fields: dict, decay: DecaySpec, horizons=(24, 48, 72)) -> np.ndarray:
    """Normalised ``sum_H gamma_H * w(H) * p_H`` over the given horizons."""
    missing = [h for h in horizons if h not in fields]
    if missing:
        raise MissingHorizon(f"missing horizons {missing}")
    w = blend_weights(horizons, decay)
    acc = sum(wi * np.asarray(fields[h], dtype=float) for wi, h in zip(w, horizons))
    return acc / acc.sum()
