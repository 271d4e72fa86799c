"""Pipeline configuration.

Configs are TOML files whose tables mirror the dataclasses below; any key
left out keeps its default. Relative paths resolve against the config file's
directory, and ``builtin:NAME`` refers to a file bundled with the package.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidSpec


def builtin_path(name: str) -> Path:
    return Path(str(resources.files("sarcast") / "data" / name))


@dataclass
class GridConfig:
    lon_min: float = -83.7
    lon_max: float = -75.2
    lat_min: float = 36.5
    lat_max: float = 39.5
    n_cols: int = 117
    n_rows: int = 52
    k: int = 8
    boundary: str | None = "builtin:virginia_demo.geojson"


@dataclass
class LayerConfig:
    path: str | None = None
    synth_seed: int = 7
    # lon/lat vertices of the synthetic corridor; empty means random from the seed
    corridor: list = field(default_factory=lambda: [
        [-75.98, 36.85], [-76.29, 36.86], [-76.45, 37.05], [-76.72, 37.27],
        [-77.43, 37.54], [-77.47, 38.30], [-77.20, 38.85],
    ])


@dataclass
class BetaConfig:
    beta_d: float = 0.15
    beta_r: float = 1.0
    beta_s: float = 0.5
    beta_c: float = 1.5


@dataclass
class TransitionConfig:
    self_loop: float = 0.2
    day: BetaConfig = field(default_factory=BetaConfig)
    night: BetaConfig = field(default_factory=lambda: BetaConfig(beta_d=0.3, beta_r=1.0, beta_s=1.5, beta_c=0.5))


@dataclass
class BeliefConfig:
    sigma_miles: dict = field(default_factory=lambda: {"on-foot": 3.0, "vehicle": 15.0, "unknown": 8.0})
    sigma_per_delay_hour: float = 0.5
    alpha_prior: float = 0.25
    bandwidth_miles: float = 10.0
    incidents: str | None = "builtin:incidents.csv"
    cluster_eps_miles: float = 6.0
    cluster_min_pts: int = 4


@dataclass
class ForecastConfig:
    step_hours: float = 3.0
    horizons: list = field(default_factory=lambda: [24, 48, 72])
    day_start: float = 6.0
    day_end: float = 18.0
    half_life_hours: dict = field(default_factory=lambda: {"on-foot": 36.0, "vehicle": 18.0, "unknown": 24.0})
    gamma: list = field(default_factory=lambda: [1.0, 0.7, 0.5])


@dataclass
class ZoneConfig:
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


@dataclass
class ProductConfig:
    quantiles: list = field(default_factory=lambda: [0.5, 0.75, 0.9])
    top_k: int = 50
    sectors: str | None = "builtin:sectors.json"


@dataclass
class QAConfig:
    enabled: bool = True
    endpoint: str | None = None
    timeout: float = 10.0
    max_in_flight: int = 4


@dataclass
class Config:
    seed: int = 0
    grid: GridConfig = field(default_factory=GridConfig)
    layers: LayerConfig = field(default_factory=LayerConfig)
    transition: TransitionConfig = field(default_factory=TransitionConfig)
    belief: BeliefConfig = field(default_factory=BeliefConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    zones: ZoneConfig = field(default_factory=ZoneConfig)
    products: ProductConfig = field(default_factory=ProductConfig)
    qa: QAConfig = field(default_factory=QAConfig)
    base_dir: str = "."

    def resolve(self, path):
        """Absolute path for a config-relative or ``builtin:`` reference."""
        if path is None:
            return None
        if str(path).startswith("builtin:"):
            return builtin_path(str(path)[len("builtin:"):])
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


def _merge(obj, data: dict, where: str):
    for key, value in data.items():
        if not hasattr(obj, key) or key == "base_dir":
            raise InvalidSpec(f"unknown config key {where}{key}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise InvalidSpec(f"{where}{key} must be a table")
            _merge(current, value, f"{where}{key}.")
        elif isinstance(current, dict) and isinstance(value, dict):
            setattr(obj, key, {**current, **value})
        else:
            setattr(obj, key, value)
    return obj


def config_from_dict(data: dict, base_dir=".") -> Config:
    cfg = _merge(Config(), data, "")
    cfg.base_dir = str(base_dir)
    return cfg


def load_config(path=None) -> Config:
    """Defaults, overridden by the TOML file at ``path`` when given."""
    if path is None:
        return Config()
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InvalidSpec(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data, path.parent)
