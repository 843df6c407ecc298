"""Run configuration: radio constants plus the JSON config file schema.

The config file is plain JSON with five mandatory blocks (``radio``,
``layout``, ``highway``, ``users``, ``seeds``) and three optional ones
(``channel``, ``codebook``, ``optimizer``). Every key has a default; unknown
keys are rejected so typos fail fast. Units: meters, Hz, dBm throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(Exception):
    """Invalid or missing configuration entry; message names the key."""


@dataclass(frozen=True)
class RadioConfig:
    """Carrier, bandwidth and power constants shared by all sectors."""

    carrier_freq_hz: float = 3.5e9
    bandwidth_hz: float = 30e6
    n_prb_total: int = 75
    prb_bandwidth_hz: float = 360e3
    noise_psd_dbm_per_hz: float = -174.0
    ue_noise_figure_db: float = 9.0
    # SSB measurement noise: thermal over 240 subcarriers x 30 kHz + NF.
    ssb_noise_power_dbm: float = field(default=None)  # type: ignore[assignment]
    max_ssb_power_dbm: float = 43.0
    sector_tx_power_dbm: float = 46.0

    def __post_init__(self):
        if self.ssb_noise_power_dbm is None:
            ssb_bw_hz = 240 * 30e3
            object.__setattr__(
                self,
                "ssb_noise_power_dbm",
                self.noise_psd_dbm_per_hz + 10.0 * math.log10(ssb_bw_hz) + self.ue_noise_figure_db,
            )
        if self.carrier_freq_hz <= 0:
            raise ConfigError("radio.carrier_freq_hz must be positive")
        if self.n_prb_total * self.prb_bandwidth_hz > self.bandwidth_hz + 1e-6:
            raise ConfigError("radio.n_prb_total x radio.prb_bandwidth_hz exceeds radio.bandwidth_hz")
        for name in ("max_ssb_power_dbm", "sector_tx_power_dbm", "ssb_noise_power_dbm"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"radio.{name} must be finite")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def ssb_noise_mw(self) -> float:
        return 10.0 ** (self.ssb_noise_power_dbm / 10.0)

    @property
    def noise_psd_mw_per_hz(self) -> float:
        return 10.0 ** (self.noise_psd_dbm_per_hz / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Statistical channel model knobs (standard urban-macro defaults)."""

    rician_k_los_db: float = 9.0
    rician_k_nlos_db: float = -math.inf  # pure Rayleigh when not in line of sight
    shadow_sigma_los_ground_db: float = 4.0
    shadow_sigma_nlos_ground_db: float = 6.0
    shadow_corr_dist_ground_m: float = 50.0
    shadow_corr_dist_aerial_m: float = 30.0
    # Aerial LoS shadowing follows the height-dependent urban-macro rule;
    # NLoS aerial sigma is fixed.
    shadow_sigma_nlos_aerial_db: float = 6.0

    def rician_k_linear(self, los: bool) -> float:
        k_db = self.rician_k_los_db if los else self.rician_k_nlos_db
        if k_db == -math.inf:
            return 0.0
        return 10.0 ** (k_db / 10.0)


@dataclass(frozen=True)
class CodebookParams:
    """DFT grid oversampling for broadcast and data-phase codebooks."""

    ssb_oversampling_h: int = 4
    ssb_oversampling_v: int = 1
    dl_oversampling_h: int = 1
    dl_oversampling_v: int = 1


@dataclass(frozen=True)
class OptimizerParams:
    """Beam-search hyperparameters (population sizes follow common practice)."""

    n_pop: int = 100
    n_parents: int = 75
    n_elites: int = 20
    p_cross: float = 0.2
    p_mut: float = 0.75
    max_iters: int = 15000
    stop_iters: int = 1000

    def __post_init__(self):
        if not (0 < self.n_elites <= self.n_parents <= self.n_pop):
            raise ConfigError("optimizer requires 0 < n_elites <= n_parents <= n_pop")
        for name in ("p_cross", "p_mut"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"optimizer.{name} must lie in [0, 1]")


_DEFAULTS: dict[str, dict[str, Any]] = {
    "radio": {
        "carrier_freq_hz": 3.5e9,
        "bandwidth_hz": 30e6,
        "n_prb_total": 75,
        "prb_bandwidth_hz": 360e3,
        "noise_psd_dbm_per_hz": -174.0,
        "ue_noise_figure_db": 9.0,
        "ssb_noise_power_dbm": None,
        "max_ssb_power_dbm": 43.0,
        "sector_tx_power_dbm": 46.0,
    },
    "layout": {
        "tiers": 2,
        "isd_m": 500.0,
        "bs_height_m": 25.0,
        "panel_columns": 4,
        "panel_rows": 8,
        "element_spacing_h_wavelengths": 0.5,
        "element_spacing_v_wavelengths": 0.5,
        "downtilt_deg": 0.0,
    },
    "highway": {
        "polyline": None,  # defaults to a straight west-east chord across cell edges
        "altitude_m": 100.0,
        "point_spacing_m": 125.0,
        "points_per_segment": 2,
        "uav_spacing_m": 100.0,
    },
    "users": {
        "gues_per_cell": 4,
        "ground_height_m": 1.5,
    },
    "seeds": {
        "master": 1,
    },
    "channel": {
        "rician_k_los_db": 9.0,
        "rician_k_nlos_db": None,  # null means pure Rayleigh
        "shadow_sigma_los_ground_db": 4.0,
        "shadow_sigma_nlos_ground_db": 6.0,
        "shadow_corr_dist_ground_m": 50.0,
        "shadow_corr_dist_aerial_m": 30.0,
        "shadow_sigma_nlos_aerial_db": 6.0,
    },
    "codebook": {
        "ssb_oversampling_h": 4,
        "ssb_oversampling_v": 1,
        "dl_oversampling_h": 1,
        "dl_oversampling_v": 1,
    },
    "optimizer": {
        "n_pop": 100,
        "n_parents": 75,
        "n_elites": 20,
        "p_cross": 0.2,
        "p_mut": 0.75,
        "max_iters": 15000,
        "stop_iters": 1000,
    },
}

_REQUIRED_BLOCKS = ("radio", "layout", "highway", "users", "seeds")


def default_config() -> dict:
    """A complete config dict with all defaults filled in."""
    return json.loads(json.dumps(_DEFAULTS))


def _merge_block(name: str, block: dict | None) -> dict:
    merged = dict(_DEFAULTS[name])
    if block is None:
        return merged
    if not isinstance(block, dict):
        raise ConfigError(f"config block '{name}' must be an object")
    for key, value in block.items():
        if key not in merged:
            raise ConfigError(f"unknown config key '{name}.{key}'")
        merged[key] = value
    return merged


def validate_config(raw: dict) -> dict:
    """Merge a raw config dict with defaults, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for block in _REQUIRED_BLOCKS:
        if block not in raw:
            raise ConfigError(f"missing config block '{block}'")
    for block in raw:
        if block not in _DEFAULTS:
            raise ConfigError(f"unknown config block '{block}'")
    return {name: _merge_block(name, raw.get(name)) for name in _DEFAULTS}


def load_config(path: str | Path) -> dict:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    return validate_config(raw)


def _build_dataclass(cls, block: dict, prefix: str):
    kwargs = {}
    names = {f.name for f in fields(cls)}
    for key, value in block.items():
        if key in names:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad value in '{prefix}': {exc}")


def radio_from_config(cfg: dict) -> RadioConfig:
    return _build_dataclass(RadioConfig, cfg["radio"], "radio")


def channel_params_from_config(cfg: dict) -> ChannelParams:
    block = dict(cfg["channel"])
    if block.get("rician_k_nlos_db") is None:
        block["rician_k_nlos_db"] = -math.inf
    return _build_dataclass(ChannelParams, block, "channel")


def codebook_params_from_config(cfg: dict) -> CodebookParams:
    return _build_dataclass(CodebookParams, cfg["codebook"], "codebook")


def optimizer_params_from_config(cfg: dict) -> OptimizerParams:
    return _build_dataclass(OptimizerParams, cfg["optimizer"], "optimizer")
