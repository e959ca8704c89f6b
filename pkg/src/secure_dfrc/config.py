"""System configuration for the IRS-assisted secure DFRC simulator.

All quantities given in dB / dBm are converted to linear units exactly once,
in ``SystemConfig.__post_init__``; the rest of the package only reads the
linear attributes (``p_radar``, ``sigma_r2``, ``beta`` ...).
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

CHANNELS = ("g", "f", "h_dl", "h_ul")


class ConfigError(ValueError):
    """Raised for malformed or out-of-range configuration values."""


def db2lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin2db(x: float) -> float:
    return 10.0 * math.log10(x)


def _per_channel(value, name: str, default: float) -> dict[str, float]:
    if isinstance(value, Mapping):
        unknown = set(value) - set(CHANNELS)
        if unknown:
            raise ConfigError(f"{name}: unknown channel keys {sorted(unknown)}")
        out = {ch: float(value.get(ch, default)) for ch in CHANNELS}
    else:
        out = {ch: float(value) for ch in CHANNELS}
    if not all(math.isfinite(v) for v in out.values()):
        raise ConfigError(f"{name} must be finite")
    return out


@dataclass
class SystemConfig:
    # array sizes
    n_tx: int = 16
    n_rx: int = 16
    n_irs: int = 64
    irs_shape: tuple[int, int] | None = None  # (rows, cols); square by default
    spacing_over_lambda: float = 0.5

    # power / noise (dBm)
    p_radar_dbm: float = 30.0
    omega: float = 0.5
    noise_radar_dbm: float = 0.0
    noise_user_dbm: float = 0.0
    noise_ed_dbm: float = 0.0

    # path gains (dB)
    beta_db: float = -40.0
    beta_h_db: float = -20.0
    beta_scale: str = "amplitude"   # "amplitude": beta = 10^(dB/20); "power": beta = 10^(dB/10)
    gamma_r_th_db: float = -11.0

    # geometry (degrees)
    target_angles: tuple[float, float] = (60.0, 30.0)      # (elevation, azimuth) seen from IRS
    user_angles_irs: tuple[float, float] = (-45.0, -45.0)
    user_azimuth_radar: float = -30.0
    irs_azimuth_radar: float = 60.0
    radar_angles_irs: tuple[float, float] = (60.0, -120.0)

    # fading
    rician_db: Any = 20.0           # scalar or {"g":..,"f":..,"h_dl":..,"h_ul":..}
    sigma_e2_db: Any = "none"       # "none" means perfect CSI
    zeta: Any = 1.0                 # large-scale coefficients, linear

    # algorithm
    t_max: int = 15
    epsilon_db: float = -20.0
    randomization_count: int = 100
    x_ini: int = -20
    eps_in: float = 1e-2
    power_split: str = "omega"      # "omega" | "total"
    mm_shift: bool = False          # spectral shift making the qtMM tangent planes true lower bounds
    te_surrogate: str = "minorizer"  # "minorizer" | "transform": eavesdropper term of the waveform objective
    monotone: bool = True           # keep a block update only if the estimated secrecy rate does not drop
    init_phi: str = "random"        # "random" | "ones"
    seed: int = 0

    # linear-unit mirrors, filled in __post_init__
    p_radar: float = field(init=False, repr=False)
    sigma_r2: float = field(init=False, repr=False)
    sigma_u2: float = field(init=False, repr=False)
    sigma_te2: float = field(init=False, repr=False)
    beta: float = field(init=False, repr=False)
    beta_h: float = field(init=False, repr=False)
    gamma_r_th: float = field(init=False, repr=False)
    epsilon: float = field(init=False, repr=False)
    kappa: dict = field(init=False, repr=False)
    zeta_lin: dict = field(init=False, repr=False)
    sigma_e2: float = field(init=False, repr=False)

    def __post_init__(self):
        if self.irs_shape is None:
            side = math.isqrt(self.n_irs)
            if side * side != self.n_irs:
                raise ConfigError(
                    f"n_irs={self.n_irs} is not a perfect square; give irs_shape explicitly")
            self.irs_shape = (side, side)
        self.irs_shape = tuple(int(v) for v in self.irs_shape)
        self.target_angles = tuple(float(v) for v in self.target_angles)
        self.user_angles_irs = tuple(float(v) for v in self.user_angles_irs)
        self.radar_angles_irs = tuple(float(v) for v in self.radar_angles_irs)
        self._validate()

        self.p_radar = db2lin(self.p_radar_dbm)
        self.sigma_r2 = db2lin(self.noise_radar_dbm)
        self.sigma_u2 = db2lin(self.noise_user_dbm)
        self.sigma_te2 = db2lin(self.noise_ed_dbm)
        # beta multiplies the round-trip channel; beta_scale picks how its dB value is read
        self.beta = 10.0 ** (self.beta_db / (20.0 if self.beta_scale == "amplitude" else 10.0))
        self.beta_h = db2lin(self.beta_h_db)
        self.gamma_r_th = db2lin(self.gamma_r_th_db)
        self.epsilon = db2lin(self.epsilon_db)
        self.kappa = {ch: db2lin(v) for ch, v in _per_channel(self.rician_db, "rician_db", 20.0).items()}
        self.zeta_lin = _per_channel(self.zeta, "zeta", 1.0)
        if self.sigma_e2_db is None or self.sigma_e2_db == "none":
            self.sigma_e2 = 0.0
        else:
            self.sigma_e2 = db2lin(float(self.sigma_e2_db))
        if not 0.0 <= self.sigma_e2 < 1.0:
            raise ConfigError(f"sigma_e2 must lie in [0, 1), got {self.sigma_e2}")

    def _validate(self):
        if self.n_tx < 1 or self.n_rx < 1 or self.n_irs < 1:
            raise ConfigError("array sizes must be >= 1")
        rows, cols = self.irs_shape
        if rows * cols != self.n_irs:
            raise ConfigError(f"irs_shape {self.irs_shape} does not match n_irs={self.n_irs}")
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigError(f"omega must lie in [0, 1], got {self.omega}")
        for name in ("p_radar_dbm", "noise_radar_dbm", "noise_user_dbm", "noise_ed_dbm",
                     "beta_h_db", "gamma_r_th_db", "epsilon_db", "spacing_over_lambda"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if math.isnan(self.beta_db) or self.beta_db == math.inf:
            raise ConfigError("beta_db must be finite or -inf")
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if self.randomization_count < 1:
            raise ConfigError("randomization_count must be >= 1")
        if self.eps_in <= 0:
            raise ConfigError("eps_in must be positive")
        if self.power_split not in ("omega", "total"):
            raise ConfigError(f"power_split must be 'omega' or 'total', got {self.power_split!r}")
        if self.te_surrogate not in ("minorizer", "transform"):
            raise ConfigError(f"te_surrogate must be 'minorizer' or 'transform', got {self.te_surrogate!r}")
        if self.beta_scale not in ("amplitude", "power"):
            raise ConfigError(f"beta_scale must be 'amplitude' or 'power', got {self.beta_scale!r}")
        if self.init_phi not in ("random", "ones"):
            raise ConfigError(f"init_phi must be 'random' or 'ones', got {self.init_phi!r}")

    @property
    def noise(self) -> tuple[float, float]:
        return self.sigma_u2, self.sigma_te2

    def replace(self, **changes) -> "SystemConfig":
        """Copy with some input fields changed (linear mirrors are recomputed)."""
        if "n_irs" in changes and "irs_shape" not in changes:
            changes["irs_shape"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: _jsonable(getattr(self, f.name)) for f in dataclasses.fields(self) if f.init}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SystemConfig":
        names = {f.name for f in dataclasses.fields(cls) if f.init}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**dict(data))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "SystemConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
        return cls.from_dict(data)


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    return value
