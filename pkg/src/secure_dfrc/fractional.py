"""Quadratic-transform auxiliaries and the non-fractional surrogate pieces.

For a rate log2(1 + A/B) with A = |c^T w|^2 and B = ||c^T W_n||^2 + sigma^2,
the surrogate

    -|alpha|^2 (A + B) + 2 sqrt(1 + gamma) Re(conj(alpha) c^T w) + log2(1 + gamma) - gamma

equals the rate when gamma = A/B and alpha = sqrt(1 + gamma) c^T w / (A + B).
``alpha`` is kept complex so the identity holds for any phase of c^T w; its
modulus is the usual real multiplier.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_model import DesignState, EffectiveChannels


@dataclass
class AuxState:
    gamma_u: float
    alpha_u: complex
    gamma_te: float
    alpha_te: complex


@dataclass
class SurrogatePieces:
    c: float
    v: np.ndarray   # (N_T,)
    m: np.ndarray   # (N_T, N_T) Hermitian


def _aux_for(c: np.ndarray, state: DesignState, noise: float) -> tuple[float, complex]:
    amp = c @ state.w
    signal = abs(amp) ** 2
    leak = float(np.sum(np.abs(c @ state.w_n) ** 2))
    gamma = signal / (leak + noise)
    alpha = np.sqrt(1.0 + gamma) * amp / (signal + leak + noise)
    return float(gamma), complex(alpha)


def update_aux(eff: EffectiveChannels, state: DesignState, noise: tuple[float, float]) -> AuxState:
    sigma_u2, sigma_te2 = noise
    if sigma_u2 <= 0 or sigma_te2 <= 0:
        raise ValueError("noise powers must be positive")
    gamma_u, alpha_u = _aux_for(eff.c_u, state, sigma_u2)
    gamma_te, alpha_te = _aux_for(eff.c_te, state, sigma_te2)
    return AuxState(gamma_u, alpha_u, gamma_te, alpha_te)


def assemble_pieces(aux: AuxState, eff: EffectiveChannels, noise: tuple[float, float],
                    natural_log: bool = True) -> SurrogatePieces:
    """Surrogate pieces (c, v, M) at fixed auxiliaries.

    With ``natural_log`` the transform is written in nats and converted to
    bits, which makes each rate term a true lower bound in (w, R). The
    literal form, log2(1 + gamma) next to the linear-in-gamma terms, is
    equally exact at the anchor but not a lower bound elsewhere.
    """
    sigma_u2, sigma_te2 = noise
    au2, ate2 = abs(aux.alpha_u) ** 2, abs(aux.alpha_te) ** 2
    log = np.log if natural_log else np.log2
    c = (log(1.0 + aux.gamma_u) - aux.gamma_u - log(1.0 + aux.gamma_te) + aux.gamma_te
         + ate2 * sigma_te2 - au2 * sigma_u2)
    v = (2.0 * np.sqrt(1.0 + aux.gamma_u) * np.conj(aux.alpha_u) * eff.c_u
         - 2.0 * np.sqrt(1.0 + aux.gamma_te) * np.conj(aux.alpha_te) * eff.c_te)
    m = ate2 * np.outer(eff.c_te.conj(), eff.c_te) - au2 * np.outer(eff.c_u.conj(), eff.c_u)
    m = 0.5 * (m + m.conj().T)
    if natural_log:
        c, v, m = c / np.log(2), v / np.log(2), m / np.log(2)
    return SurrogatePieces(c=float(c), v=v, m=m)


def user_only(aux: AuxState) -> AuxState:
    """Auxiliaries with the eavesdropper terms switched off."""
    return AuxState(aux.gamma_u, aux.alpha_u, 0.0, 0.0)


@dataclass
class EavesdropperBound:
    """Concave lower bound of -R_te in (w, R_n), tight at the anchor.

    With x = |c^T w|^2 / (c^T R_n c^* + sigma^2), -log2(1 + x) is convex in x,
    so its tangent at the anchor's x_t bounds it from below; -x itself is
    concave in (w, R_n) (negated quadratic-over-linear). Shrinking the AN
    costs nothing while the target is nulled, unlike a tangent of
    -log2(A + B) which would freeze the AN level.
    """
    c_te: np.ndarray
    sigma2: float
    sinr_t: float     # x at the anchor

    @property
    def slope(self) -> float:
        return 1.0 / ((1.0 + self.sinr_t) * np.log(2))

    def sinr(self, w: np.ndarray, r_n: np.ndarray) -> float:
        b = float(np.real(self.c_te @ r_n @ self.c_te.conj())) + self.sigma2
        return abs(self.c_te @ w) ** 2 / b

    def value(self, w: np.ndarray, r_n: np.ndarray) -> float:
        x = self.sinr(w, r_n)
        return float(-np.log2(1.0 + self.sinr_t) - (x - self.sinr_t) * self.slope)


def eavesdropper_bound(eff: EffectiveChannels, state: DesignState, sigma_te2: float) -> EavesdropperBound:
    if sigma_te2 <= 0:
        raise ValueError("noise power must be positive")
    bound = EavesdropperBound(eff.c_te.copy(), float(sigma_te2), 0.0)
    bound.sinr_t = bound.sinr(state.w, state.w_n @ state.w_n.conj().T)
    return bound


def surrogate_objective(pieces: SurrogatePieces, state: DesignState) -> float:
    cov = np.outer(state.w, state.w.conj()) + state.w_n @ state.w_n.conj().T
    value = np.real(pieces.v @ state.w) + np.trace(pieces.m @ cov) + pieces.c
    return float(np.real(value))
