"""Scenario configuration: every physical and learning constant in one place.

The config file is a flat YAML mapping with one key per ScenarioConfig field.
Defaults reproduce the standard simulation setup (30x30 grid, 50 users,
Rician air-to-ground link).
"""

import dataclasses
import math
from dataclasses import dataclass

import yaml


class ConfigError(ValueError):
    """Raised on unknown keys, unparsable values, or violated invariants."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"config key '{key}': {message}" if key else message)


@dataclass
class ScenarioConfig:
    # --- geometry ---
    grid_k: int = 30            # cells per side
    cell_size: float = 30.0     # m per cell edge; one straight move = uav_speed * slot_tau
    altitude_h: float = 40.0    # m

    # --- mobility ---
    uav_speed: float = 30.0     # m/s
    gu_mean_speed: float = 1.0  # m/s
    gu_inertia: float = 0.9     # velocity memory factor in [0, 1]
    steer_angle: float = math.pi / 2
    gu_greedy_eps: float = 0.9  # keep-direction probability

    # --- energy ---
    fly_power: float = 110.0    # W
    energy_budget: float = 1e7  # J

    # --- timing ---
    slot_tau: float = 1.0       # s
    hover_tau_c: float = 0.1    # s, hover-and-transmit fraction of a slot

    # --- radio ---
    bandwidth_w: float = 2e6    # Hz per user
    tx_power: float = 0.1       # W
    noise_sigma2: float = 1e-18  # W
    ref_gain_alpha: float = 1e-5
    pathloss_kps: float = 2.0
    rician_ks: float = 1.0
    h_min: float = 2.5e-9       # channel-coefficient magnitude threshold
    arrival_bits: float = 5e-3  # new data per user per slot

    # --- agent ---
    agent_eta: float = 0.9      # greedy coefficient of the planner
    discount_gamma: float = 0.9

    # --- trend prediction ---
    trend_steps: int = 3
    trend_gamma: float | None = None  # defaults to discount_gamma
    trend_mode: str = "expectation"   # "expectation" or "stochastic"

    # --- episode / reproducibility ---
    n_gus: int = 50
    max_steps_per_episode: int = 3000
    seed: int = 0

    def __post_init__(self):
        if self.trend_gamma is None:
            self.trend_gamma = self.discount_gamma
        self.validate()

    def validate(self):
        checks = [
            ("grid_k", self.grid_k >= 2, "must be >= 2"),
            ("gu_inertia", 0.0 <= self.gu_inertia <= 1.0, "must lie in [0, 1]"),
            ("gu_greedy_eps", 0.0 <= self.gu_greedy_eps <= 1.0, "must lie in [0, 1]"),
            ("agent_eta", 0.0 <= self.agent_eta <= 1.0, "must lie in [0, 1]"),
            ("discount_gamma", 0.0 < self.discount_gamma < 1.0, "must lie in (0, 1)"),
            ("trend_gamma", 0.0 < self.trend_gamma < 1.0, "must lie in (0, 1)"),
            ("hover_tau_c", self.hover_tau_c < self.slot_tau,
             "hover time must be shorter than the slot"),
            ("trend_mode", self.trend_mode in ("expectation", "stochastic"),
             "must be 'expectation' or 'stochastic'"),
            ("trend_steps", self.trend_steps >= 0, "must be >= 0"),
            ("n_gus", self.n_gus >= 1, "must be >= 1"),
            ("max_steps_per_episode", self.max_steps_per_episode >= 1, "must be >= 1"),
        ]
        for key in ("cell_size", "altitude_h", "uav_speed", "fly_power",
                    "energy_budget", "slot_tau", "hover_tau_c", "bandwidth_w",
                    "tx_power", "noise_sigma2", "h_min"):
            checks.append((key, getattr(self, key) > 0, "must be > 0"))
        for key in ("gu_mean_speed", "ref_gain_alpha", "rician_ks", "arrival_bits"):
            checks.append((key, getattr(self, key) >= 0, "must be >= 0"))
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(key, msg)

    @property
    def aoi_size(self):
        """Side length of the area of interest in meters."""
        return self.grid_k * self.cell_size


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_INT_FIELDS = {"grid_k", "trend_steps", "n_gus", "max_steps_per_episode", "seed"}


def _coerce(key, value):
    """Coerce a raw YAML/CLI value to the field's type, naming the key on failure."""
    if key not in _FIELDS:
        raise ConfigError(key, "unknown config key")
    try:
        if key == "trend_mode":
            return str(value)
        if key == "trend_gamma" and value in (None, "none", "null"):
            return None
        if key in _INT_FIELDS:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("not an integer")
            return int(value)
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"cannot parse value {value!r}: {exc}") from None


def load_config(path=None, overrides=None):
    """Build a ScenarioConfig from an optional YAML file plus key=value overrides."""
    raw = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(None, f"config file {path} is not a flat mapping")
        raw.update(loaded)
    for item in overrides or []:
        if isinstance(item, str):
            if "=" not in item:
                raise ConfigError(item, "override must look like key=value")
            key, value = item.split("=", 1)
            raw[key.strip()] = value.strip()
        else:
            key, value = item
            raw[key] = value
    kwargs = {key: _coerce(key, value) for key, value in raw.items()}
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(None, str(exc)) from None


def config_to_dict(cfg):
    return dataclasses.asdict(cfg)


def save_config(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=True)
