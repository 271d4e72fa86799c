"""Initial belief: Gaussian seed at the IPP mixed with a hotspot KDE prior."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import DBSCAN

from .errors import DegenerateSeed, GridMismatch, InvalidSpec, NoClusters
from .grid import Grid, haversine_miles

SIGMA_BASE_MILES = {"on-foot": 3.0, "vehicle": 15.0, "unknown": 8.0}
SIGMA_DELAY_MILES_PER_HOUR = 0.5


def seed_sigma(profile: str, delay_hours: float = 0.0, base=None, per_hour=SIGMA_DELAY_MILES_PER_HOUR) -> float:
    """Seed spread for a movement profile, widened by the reporting delay."""
    table = SIGMA_BASE_MILES if base is None else base
    return float(table[profile]) + per_hour * max(0.0, float(delay_hours))


def normalize_on_mask(values, grid: Grid) -> np.ndarray:
    v = np.where(grid.mask, np.asarray(values, dtype=float), 0.0)
    total = v.sum()
    if not np.isfinite(total) or total <= 0:
        raise InvalidSpec("field has no positive mass inside the mask")
    return v / total


def gaussian_seed(grid: Grid, ipp, sigma: float) -> np.ndarray:
    """Isotropic Gaussian in great-circle distance around ``ipp``, normalised on the mask.

    If every in-mask weight underflows the seed collapses to a point mass at
    the nearest in-mask cell and a :class:`DegenerateSeed` warning is issued.
    """
    if not sigma > 0:
        raise InvalidSpec("sigma must be positive")
    if not np.all(np.isfinite(ipp)):
        raise InvalidSpec("ipp must be finite")
    d = grid.distances_from(ipp[0], ipp[1])
    w = np.where(grid.mask, np.exp(-(d**2) / (2.0 * sigma**2)), 0.0)
    if w.sum() <= 0.0:
        warnings.warn(f"seed with sigma={sigma} underflowed; using a point mass", DegenerateSeed, stacklevel=2)
        out = np.zeros(grid.n)
        out[grid.nearest_cell(*ipp)] = 1.0
        return out
    return w / w.sum()


@dataclass(frozen=True)
class HotspotSet:
    centers: tuple  # of (lon, lat)
    weights: tuple

    def __post_init__(self):
        if len(self.centers) != len(self.weights):
            raise InvalidSpec("centers and weights differ in length")
        if any(w <= 0 for w in self.weights):
            raise InvalidSpec("hotspot weights must be positive")

    def __len__(self):
        return len(self.centers)

    def to_json(self):
        return [
            {"lon": float(c[0]), "lat": float(c[1]), "weight": float(w)}
            for c, w in zip(self.centers, self.weights)
        ]

    @classmethod
    def from_json(cls, records):
        return cls(tuple((r["lon"], r["lat"]) for r in records), tuple(r["weight"] for r in records))


def read_incidents(path):
    """Historical incident coordinates from a CSV with ``lon,lat[,timestamp]``."""
    pts = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pts.append((float(row["lon"]), float(row["lat"])))
    return pts


def cluster_hotspots(incidents, eps: float, min_pts: int) -> HotspotSet:
    """Density clustering of incidents (great-circle ``eps`` in miles).

    Cluster centres are member centroids and weights are member counts, in
    order of first appearance. Noise points are dropped.
    """
    if not eps > 0 or min_pts < 1:
        raise InvalidSpec("eps must be positive and min_pts >= 1")
    pts = np.asarray(incidents, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise NoClusters("no incidents to cluster")
    dmat = haversine_miles(pts[:, None, 0], pts[:, None, 1], pts[None, :, 0], pts[None, :, 1])
    labels = DBSCAN(eps=eps, min_samples=min_pts, metric="precomputed").fit(dmat).labels_
    centers, weights = [], []
    for lab in dict.fromkeys(labels.tolist()):
        if lab < 0:
            continue
        members = pts[labels == lab]
        centers.append((float(members[:, 0].mean()), float(members[:, 1].mean())))
        weights.append(float(len(members)))
    if not centers:
        raise NoClusters("every incident was classified as noise")
    return HotspotSet(tuple(centers), tuple(weights))


def kde_prior(grid: Grid, hotspots: HotspotSet, bandwidth: float) -> np.ndarray:
    """Weighted Gaussian-kernel sum over hotspot centres, normalised on the mask."""
    if not bandwidth > 0:
        raise InvalidSpec("bandwidth must be positive")
    if len(hotspots) == 0:
        raise InvalidSpec("at least one hotspot is required")
    acc = np.zeros(grid.n)
    for (lon, lat), w in zip(hotspots.centers, hotspots.weights):
        d = grid.distances_from(lon, lat)
        acc += w * np.exp(-(d**2) / (2.0 * bandwidth**2))
    return normalize_on_mask(acc, grid)


def mix_initial(seed, prior, alpha_prior: float) -> np.ndarray:
    """``(1 - alpha) * seed + alpha * prior``, renormalised."""
    seed = np.asarray(seed, dtype=float)
    prior = np.asarray(prior, dtype=float)
    if seed.shape != prior.shape:
        raise GridMismatch("seed and prior have different lengths")
    if not 0.0 <= alpha_prior <= 1.0:
        raise InvalidSpec("alpha_prior must lie in [0, 1]")
    if alpha_prior == 0.0:
        return seed / seed.sum()
    if alpha_prior == 1.0:
        return prior / prior.sum()
    p = (1.0 - alpha_prior) * seed + alpha_prior * prior
    return p / p.sum()
