"""Steering vectors, Rician channel draws and the imperfect-CSI model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


def steering_ula(n: int, spacing_over_lambda: float, theta_deg: float) -> np.ndarray:
    """ULA response, element k = exp(j 2pi d k sin(theta))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(n)
    return np.exp(2j * np.pi * spacing_over_lambda * k * np.sin(np.deg2rad(theta_deg)))


def steering_upa(rows: int, cols: int, spacing_over_lambda: float,
                 psi_e_deg: float, psi_a_deg: float) -> np.ndarray:
    """UPA response flattened row-major; element (m, n) carries phase
    2pi d (m sin(psi_e) cos(psi_a) + n sin(psi_e) sin(psi_a))."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    psi_e, psi_a = np.deg2rad(psi_e_deg), np.deg2rad(psi_a_deg)
    m = np.arange(rows)[:, None]
    n = np.arange(cols)[None, :]
    phase = 2 * np.pi * spacing_over_lambda * np.sin(psi_e) * (m * np.cos(psi_a) + n * np.sin(psi_a))
    return np.exp(1j * phase).ravel()


def complex_gaussian(shape, rng: np.random.Generator, variance: float = 1.0) -> np.ndarray:
    """i.i.d. CN(0, variance) samples."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_rician(los: np.ndarray, kappa_db: float, zeta: float, rng: np.random.Generator) -> np.ndarray:
    kappa = 10.0 ** (kappa_db / 10.0)
    los = np.asarray(los, dtype=complex)
    nlos = complex_gaussian(los.shape, rng, zeta)
    return np.sqrt(kappa / (kappa + 1.0)) * los + np.sqrt(1.0 / (kappa + 1.0)) * nlos


def apply_csi_error(truth_los: np.ndarray, kappa: float, zeta: float, sigma_e2: float,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw an (estimate, error) pair and return ``(truth, estimate)``.

    ``kappa`` is linear here. The estimate is CN(sqrt(k/(k+1)) los, (1-s)z/(1+k))
    and the independent error is CN(0, s z/(1+k)), so the truth has the usual
    Rician scattered variance z/(1+k). Both draws are always consumed so a seed
    produces the same estimate at every error level.
    """
    if not 0.0 <= sigma_e2 < 1.0:
        raise ValueError(f"sigma_e2 must lie in [0, 1), got {sigma_e2}")
    los = np.asarray(truth_los, dtype=complex)
    scattered = zeta / (1.0 + kappa)
    estimate = (np.sqrt(kappa / (kappa + 1.0)) * los
                + complex_gaussian(los.shape, rng, (1.0 - sigma_e2) * scattered))
    error = complex_gaussian(los.shape, rng, 1.0) * np.sqrt(sigma_e2 * scattered)
    return estimate + error, estimate


@dataclass
class ChannelSet:
    g: np.ndarray        # (N_T,)   radar -> user
    f: np.ndarray        # (N,)     IRS -> user
    h_dl: np.ndarray     # (N, N_T) radar -> IRS
    h_ul: np.ndarray     # (N_R, N) IRS -> radar
    a_target: np.ndarray  # (N,)    IRS steering toward the target

    def __post_init__(self):
        n_tx = self.g.shape[0]
        n = self.f.shape[0]
        if self.g.ndim != 1 or self.f.ndim != 1 or self.a_target.shape != (n,):
            raise ValueError("g, f and a_target must be vectors with len(a_target) == len(f)")
        if self.h_dl.shape != (n, n_tx):
            raise ValueError(f"h_dl must be {(n, n_tx)}, got {self.h_dl.shape}")
        if self.h_ul.ndim != 2 or self.h_ul.shape[1] != n:
            raise ValueError(f"h_ul must have {n} columns, got {self.h_ul.shape}")

    @property
    def n_tx(self) -> int:
        return self.g.shape[0]

    @property
    def n_irs(self) -> int:
        return self.f.shape[0]

    @property
    def n_rx(self) -> int:
        return self.h_ul.shape[0]


@dataclass
class CsiView:
    truth: ChannelSet
    estimate: ChannelSet


def realization_rngs(seed: int) -> dict[str, np.random.Generator]:
    """Independent generator streams for one Monte-Carlo realization."""
    channels, init, sdr = np.random.SeedSequence(seed).spawn(3)
    return {"channels": np.random.default_rng(channels),
            "init": np.random.default_rng(init),
            "sdr": np.random.default_rng(sdr)}


def los_components(config: SystemConfig) -> dict[str, np.ndarray]:
    d = config.spacing_over_lambda
    rows, cols = config.irs_shape
    a_irs_radar = steering_upa(rows, cols, d, *config.radar_angles_irs)
    a_tx = steering_ula(config.n_tx, d, config.irs_azimuth_radar)
    a_rx = steering_ula(config.n_rx, d, config.irs_azimuth_radar)
    return {
        "g": steering_ula(config.n_tx, d, config.user_azimuth_radar),
        "f": steering_upa(rows, cols, d, *config.user_angles_irs),
        "h_dl": np.outer(a_irs_radar, a_tx),
        "h_ul": np.outer(a_rx, a_irs_radar),
    }


def target_steering(config: SystemConfig) -> np.ndarray:
    rows, cols = config.irs_shape
    return steering_upa(rows, cols, config.spacing_over_lambda, *config.target_angles)


def draw_scenario(config: SystemConfig, rng: np.random.Generator) -> CsiView:
    """Draw true and estimated channels for one realization."""
    los = los_components(config)
    truth, estimate = {}, {}
    for name in ("g", "f", "h_dl", "h_ul"):
        truth[name], estimate[name] = apply_csi_error(
            los[name], config.kappa[name], config.zeta_lin[name], config.sigma_e2, rng)
    a_t = target_steering(config)
    return CsiView(truth=ChannelSet(a_target=a_t, **truth),
                   estimate=ChannelSet(a_target=a_t.copy(), **estimate))
