"""Effective channels, radar SNR, achievable rates and beampatterns.

Channel convention: a transmit vector ``x`` reaches a single-antenna receiver
with channel vector ``c`` as ``c^T x`` (plain transpose, no conjugate).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .scenario import ChannelSet, steering_ula, steering_upa

RADAR_GRID_DEG = np.arange(-90.0, 90.0 + 0.25, 0.5)
IRS_AZIMUTH_GRID_DEG = np.arange(-90.0, 90.0 + 0.25, 0.5)


class ZeroPowerPattern(UserWarning):
    """Emitted when a beampattern carries no power in any direction."""


@dataclass
class DesignState:
    w: np.ndarray     # (N_T,)
    w_n: np.ndarray   # (N_T, N_T)
    phi: np.ndarray   # (N,)

    def power(self) -> float:
        return float(np.real(np.vdot(self.w, self.w)) + np.sum(np.abs(self.w_n) ** 2))

    def check(self, p_max: float, umc_tol: float = 1e-12) -> None:
        """Raise if the unit-modulus or power invariants are violated."""
        dev = np.max(np.abs(np.abs(self.phi) - 1.0)) if self.phi.size else 0.0
        if dev > umc_tol:
            raise ValueError(f"phi violates unit modulus by {dev:.3e}")
        if self.power() > p_max * (1 + 1e-6) + 1e-12:
            raise ValueError(f"transmit power {self.power():.6g} exceeds budget {p_max:.6g}")

    def copy(self) -> "DesignState":
        return DesignState(self.w.copy(), self.w_n.copy(), self.phi.copy())


@dataclass
class EffectiveChannels:
    c_u: np.ndarray   # (N_T,)
    c_te: np.ndarray  # (N_T,)
    c_t: np.ndarray   # (N_R, N_T)


def irs_factors(channels: ChannelSet, config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """D = sqrt(beta_H) diag(f) H_dl and E = sqrt(beta) diag(a) H_dl."""
    d_mat = np.sqrt(config.beta_h) * channels.f[:, None] * channels.h_dl
    e_mat = np.sqrt(config.beta) * channels.a_target[:, None] * channels.h_dl
    return d_mat, e_mat


def effective_channels(channels: ChannelSet, phi: np.ndarray, config: SystemConfig) -> EffectiveChannels:
    phi = np.asarray(phi)
    if phi.shape != (channels.n_irs,):
        raise ValueError(f"phi must have shape ({channels.n_irs},), got {phi.shape}")
    d_mat, e_mat = irs_factors(channels, config)
    c_u = channels.g + phi @ d_mat
    c_te = phi @ e_mat
    a = channels.a_target
    # beta * H_ul Phi a a^T Phi H_dl, kept as an outer product of two vectors
    left = channels.h_ul @ (phi * a)
    right = (a * phi) @ channels.h_dl
    c_t = config.beta * np.outer(left, right)
    return EffectiveChannels(c_u=c_u, c_te=c_te, c_t=c_t)


def transmit_covariance(state: DesignState) -> np.ndarray:
    return np.outer(state.w, state.w.conj()) + state.w_n @ state.w_n.conj().T


def radar_snr(eff: EffectiveChannels, state: DesignState, sigma_r2: float) -> float:
    cov = transmit_covariance(state)
    return float(np.real(np.trace(eff.c_t @ cov @ eff.c_t.conj().T)) / sigma_r2)


def sinr(c: np.ndarray, state: DesignState, noise: float) -> float:
    signal = abs(c @ state.w) ** 2
    leak = float(np.sum(np.abs(c @ state.w_n) ** 2))
    return float(signal / (leak + noise))


def achievable_rates(eff: EffectiveChannels, state: DesignState, sigma_u2: float,
                     sigma_te2: float) -> tuple[float, float, float]:
    """Return (R_u, R_te, R_u - R_te) in bits/s/Hz."""
    r_u = float(np.log2(1.0 + sinr(eff.c_u, state, sigma_u2)))
    r_te = float(np.log2(1.0 + sinr(eff.c_te, state, sigma_te2)))
    return r_u, r_te, r_u - r_te


def evaluate(channels: ChannelSet, state: DesignState, config: SystemConfig) -> dict:
    """Rates and radar SNR of ``state`` against one channel view."""
    eff = effective_channels(channels, state.phi, config)
    r_u, r_te, secrecy = achievable_rates(eff, state, config.sigma_u2, config.sigma_te2)
    return {"r_u": r_u, "r_te": r_te, "secrecy": secrecy,
            "gamma_r": radar_snr(eff, state, config.sigma_r2)}


def _normalize_db(power: np.ndarray) -> np.ndarray:
    peak = power.max()
    if peak <= 0.0:
        warnings.warn("beampattern has zero power everywhere", ZeroPowerPattern, stacklevel=3)
        return np.zeros_like(power)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(power / peak)


def beampattern_radar(state: DesignState, config: SystemConfig,
                      theta_grid_deg=RADAR_GRID_DEG) -> tuple[np.ndarray, np.ndarray]:
    """Transmit patterns of the information beam and of the AN, each peak-normalized (dB).

    The far-field response toward theta is a_T(theta)^T x, consistent with the
    channel convention, so a precoder conj(a_T(theta0)) peaks at theta0.
    """
    theta = np.atleast_1d(np.asarray(theta_grid_deg, dtype=float))
    if theta.size == 0:
        raise ValueError("angle grid is empty")
    steer = np.stack([steering_ula(config.n_tx, config.spacing_over_lambda, t) for t in theta])
    info = np.abs(steer @ state.w) ** 2
    an = np.sum(np.abs(steer @ state.w_n) ** 2, axis=1)
    return _normalize_db(info), _normalize_db(an)


def beampattern_irs(channels: ChannelSet, state: DesignState, config: SystemConfig,
                    angle_grid=None) -> np.ndarray:
    """Power re-radiated by the IRS toward each (elevation, azimuth), peak-normalized (dB).

    With ``angle_grid=None`` the azimuth is swept over [-90, 90] deg at the
    target elevation.
    """
    if angle_grid is None:
        angle_grid = [(config.target_angles[0], az) for az in IRS_AZIMUTH_GRID_DEG]
    if len(angle_grid) == 0:
        raise ValueError("angle grid is empty")
    rows, cols = config.irs_shape
    steer = np.stack([steering_upa(rows, cols, config.spacing_over_lambda, e, a)
                      for e, a in angle_grid])
    incident = (state.phi[:, None] * channels.h_dl)   # Phi H_dl
    info = np.abs(steer @ (incident @ state.w)) ** 2
    an = np.sum(np.abs(steer @ (incident @ state.w_n)) ** 2, axis=1)
    return _normalize_db(info + an)


def irs_gain_absolute_db(channels: ChannelSet, state: DesignState, config: SystemConfig,
                         angle: tuple[float, float]) -> float:
    """Un-normalized IRS re-radiated power toward one direction (dB)."""
    rows, cols = config.irs_shape
    a = steering_upa(rows, cols, config.spacing_over_lambda, *angle)
    incident = state.phi[:, None] * channels.h_dl
    p = abs(a @ incident @ state.w) ** 2 + np.sum(np.abs(a @ incident @ state.w_n) ** 2)
    return float(10.0 * np.log10(p)) if p > 0 else -np.inf
