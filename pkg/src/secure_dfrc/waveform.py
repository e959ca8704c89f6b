"""Waveform sub-problem: information precoder and AN covariance at a fixed IRS phase.

The relaxed problem

    max  Re(v^T w) + tr(M (R_w + R_n))
    s.t. tr(R_w + R_n) <= P           (or the omega split of the budget)
         tr(C_T^H C_T (R_w + R_n)) / sigma_R^2 >= gamma_th
         [[R_w, w], [w^H, 1]] >= 0,  R_n >= 0

is posed over real symmetric matrices through the embedding
Z -> [[Re Z, -Im Z], [Im Z, Re Z]]. Powers are normalized by P so the
solver always sees a unit budget.

Every term touches the precoders only through c_u^*, c_te^* and the range of
C_T^H. Projecting (w, R_w, R_n) onto that subspace keeps the objective and
the radar SNR unchanged, never raises a trace and preserves both PSD
constraints, so the program is solved exactly in that subspace (dimension 3
for the rank-one target response) and lifted back.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import cvxpy as cp
import numpy as np

from .config import SystemConfig
from .fractional import EavesdropperBound, SurrogatePieces
from .signal_model import EffectiveChannels

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"

CHECK_TOL = 1e-6


@dataclass
class WaveformSolution:
    w: np.ndarray
    r_wn: np.ndarray
    status: str
    objective_value: float
    r_w: np.ndarray | None = None
    violations: dict = field(default_factory=dict)


def psd_sqrt(r: np.ndarray) -> np.ndarray:
    """Hermitian PSD principal square root S with S S^H = r."""
    r = 0.5 * (r + np.conj(r).T)
    vals, vecs = np.linalg.eigh(r)
    if vals.size and vals.min() < -1e-6:
        raise ValueError(f"matrix is not PSD (min eigenvalue {vals.min():.3e})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def _hermitian_block(x: cp.Variable, m: int) -> list:
    """Equalities forcing a 2m x 2m symmetric variable to be a complex embedding."""
    return [x[:m, :m] == x[m:, m:], x[:m, m:] == -x[m:, :m]]


class _WaveformProblem:
    """Parametrized (DPP) program for one transmit-array size; compiled once."""

    def __init__(self, n: int, with_te: bool = False):
        self.n = n
        self.with_te = with_te
        m = n + 1
        self.xs = cp.Variable((2 * m, 2 * m), symmetric=True)   # Schur block [[R_w, w],[w^H, 1]]
        self.xn = cp.Variable((2 * n, 2 * n), symmetric=True)   # AN covariance

        self.vr = cp.Parameter(n)
        self.vi = cp.Parameter(n)
        self.mr = cp.Parameter((n, n), symmetric=True)
        self.mi = cp.Parameter((n, n))
        self.qr = cp.Parameter((n, n), symmetric=True)
        self.qi = cp.Parameter((n, n))
        self.gamma = cp.Parameter(nonneg=True)
        self.budget_w = cp.Parameter(nonneg=True)
        self.budget_n = cp.Parameter(nonneg=True)

        rw_re, rw_im = self.xs[:n, :n], self.xs[m:m + n, :n]
        rn_re, rn_im = self.xn[:n, :n], self.xn[n:, :n]
        w_re, w_im = self.xs[:n, n], self.xs[m:m + n, n]

        def re_trace(ar, ai, br, bi):
            # Re tr(A B) for Hermitian A, B given real/imag parts
            return cp.sum(cp.multiply(ar, br)) + cp.sum(cp.multiply(ai, bi))

        objective = (self.vr @ w_re - self.vi @ w_im
                     + re_trace(self.mr, self.mi, rw_re, rw_im)
                     + re_trace(self.mr, self.mi, rn_re, rn_im))
        if with_te:
            # minus slope * |s^T w|^2 / (1 + P c^T R_n c^* / sigma^2); slope folded into s
            self.ter = cp.Parameter((n, n), symmetric=True)
            self.tei = cp.Parameter((n, n))
            self.sr = cp.Parameter(n)
            self.si = cp.Parameter(n)
            den = 1 + re_trace(self.ter, self.tei, rn_re, rn_im)
            leak = cp.hstack([self.sr @ w_re - self.si @ w_im, self.sr @ w_im + self.si @ w_re])
            self.te_ratio = cp.Variable()     # epigraph of |leak|^2 / den (rotated cone, keeps DPP)
            te_cone = cp.SOC(den + self.te_ratio, cp.hstack([2 * leak, den - self.te_ratio]))
            objective = objective - self.te_ratio
        tr_w, tr_n = cp.trace(rw_re), cp.trace(rn_re)
        constraints = [
            self.xs >> 0, self.xn >> 0,
            self.xs[n, n] == 1,
            tr_w + tr_n <= 1,
            tr_w <= self.budget_w,
            tr_n <= self.budget_n,
            re_trace(self.qr, self.qi, rw_re, rw_im) + re_trace(self.qr, self.qi, rn_re, rn_im)
            >= self.gamma,
        ]
        constraints += _hermitian_block(self.xs, m) + _hermitian_block(self.xn, n)
        if with_te:
            constraints.append(te_cone)
        self.problem = cp.Problem(cp.Maximize(objective), constraints)

    def solve(self):
        with warnings.catch_warnings():
            # "inaccurate" solutions are re-verified by check_constraints
            warnings.filterwarnings("ignore", message="Solution may be inaccurate")
            try:
                # no warm start: reusing the cached solver makes results depend on solve history
                self.problem.solve(solver=cp.CLARABEL, warm_start=False)
            except cp.error.SolverError:
                log.debug("CLARABEL failed, retrying with SCS")
                self.problem.solve(solver=cp.SCS, eps=1e-9, max_iters=50000, warm_start=False)
        return self.problem.status

    def extract(self):
        n, m = self.n, self.n + 1
        xs, xn = self.xs.value, self.xn.value
        w = xs[:n, n] + 1j * xs[m:m + n, n]
        r_w = xs[:n, :n] + 1j * xs[m:m + n, :n]
        r_n = xn[:n, :n] + 1j * xn[n:, :n]
        return w, 0.5 * (r_w + r_w.conj().T), 0.5 * (r_n + r_n.conj().T)


@lru_cache(maxsize=None)
def _problem_for(n: int, with_te: bool = False) -> _WaveformProblem:
    return _WaveformProblem(n, with_te)


def relevant_subspace(pieces: SurrogatePieces, eff: EffectiveChannels, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (n x k) of span{c_u^*, c_te^*, range(C_T^H)}, k >= 1."""
    n = eff.c_u.shape[0]
    stack = np.column_stack([eff.c_u.conj(), eff.c_te.conj(), eff.c_t.conj().T])
    u, s, _ = np.linalg.svd(stack, full_matrices=True)
    k = int(np.sum(s > tol * max(s.max(initial=0.0), 1e-300)))
    return u[:, :max(min(k, n), 1)]


def solve_waveform_an(pieces: SurrogatePieces, eff: EffectiveChannels, config: SystemConfig,
                      power_split: str | None = None, reduce: bool = True,
                      te_bound: EavesdropperBound | None = None) -> WaveformSolution:
    """Solve the relaxed waveform/AN program at the current IRS phase.

    With ``te_bound`` the objective is Re(v^T w) + tr(M R) + te_bound(w, R_n),
    where ``pieces`` should then carry the user terms only.
    ``reduce=False`` solves the full N_T-dimensional program instead of the
    equivalent projected one (slower; kept as a cross-check).
    """
    split = power_split or config.power_split
    n = eff.c_u.shape[0]
    p = config.p_radar
    gamma_th = config.gamma_r_th
    if not np.isfinite(gamma_th):
        raise ValueError("gamma_r_th must be finite")

    q = eff.c_t.conj().T @ eff.c_t / config.sigma_r2 * p   # SNR per unit normalized trace
    q = 0.5 * (q + q.conj().T)
    q_scale = float(np.linalg.norm(q, 2)) if q.size else 0.0

    zeros = np.zeros((n, n), dtype=complex)
    if p <= 0.0:
        if gamma_th > 0:
            return WaveformSolution(np.zeros(n, complex), zeros, INFEASIBLE, -np.inf)
        return WaveformSolution(np.zeros(n, complex), zeros, OPTIMAL, pieces.c, r_w=zeros.copy())
    if q_scale == 0.0:
        if gamma_th > 0:
            return WaveformSolution(np.zeros(n, complex), zeros, INFEASIBLE, -np.inf)
        q_scale = 1.0
    # the attainable SNR is at most the top eigenvalue of q (unit budget)
    if gamma_th > q_scale * (1 + 1e-9):
        return WaveformSolution(np.zeros(n, complex), zeros, INFEASIBLE, -np.inf)

    basis = relevant_subspace(pieces, eff) if reduce else np.eye(n, dtype=complex)
    k = basis.shape[1]
    prob = _problem_for(k, te_bound is not None)
    if te_bound is not None:
        ct = basis.T @ te_bound.c_te
        qte = p / te_bound.sigma2 * np.outer(ct.conj(), ct)
        prob.ter.value = np.real(qte + qte.conj().T) / 2
        prob.tei.value = np.imag(qte)
        sv = np.sqrt(te_bound.slope * p / te_bound.sigma2) * ct
        prob.sr.value, prob.si.value = sv.real, sv.imag
    v = basis.T @ pieces.v / np.sqrt(p)
    m_red = basis.conj().T @ pieces.m @ basis
    prob.vr.value, prob.vi.value = v.real, v.imag
    prob.mr.value = np.real(m_red + m_red.conj().T) / 2
    prob.mi.value = np.imag(m_red)
    qn = basis.conj().T @ q @ basis / q_scale
    prob.qr.value = np.real(qn + qn.conj().T) / 2
    prob.qi.value = np.imag(qn)
    prob.gamma.value = gamma_th / q_scale
    if split == "omega":
        prob.budget_w.value, prob.budget_n.value = config.omega, 1.0 - config.omega
    elif split == "total":
        prob.budget_w.value, prob.budget_n.value = 1.0, 1.0
    else:
        raise ValueError(f"unknown power split {split!r}")

    try:
        status = prob.solve()
    except cp.error.SolverError as exc:
        log.warning("waveform SDP failed: %s", exc)
        return WaveformSolution(np.zeros(n, complex), zeros, NUMERICAL_FAILURE, -np.inf)
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return WaveformSolution(np.zeros(n, complex), zeros, INFEASIBLE, -np.inf)
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or prob.xs.value is None:
        return WaveformSolution(np.zeros(n, complex), zeros, NUMERICAL_FAILURE, -np.inf)

    x_t, xw_t, xn_t = prob.extract()
    w_t = basis @ x_t
    rw_t = basis @ xw_t @ basis.conj().T
    rn_t = _clip_psd(basis @ _clip_psd(xn_t) @ basis.conj().T)
    w, r_w, r_wn = np.sqrt(p) * w_t, p * rw_t, p * rn_t
    violations = check_constraints(w, r_w, r_wn, eff, config, split)
    status = OPTIMAL if max(violations.values()) <= CHECK_TOL else NUMERICAL_FAILURE
    if status != OPTIMAL:
        log.warning("waveform SDP post-check failed: %s", violations)
    value = float(np.real(pieces.v @ w + np.trace(pieces.m @ (r_w + r_wn))) + pieces.c)
    if te_bound is not None:
        value += te_bound.value(w, r_wn)
    return WaveformSolution(w, r_wn, status, value, r_w=r_w, violations=violations)


def _clip_psd(r: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(r)
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T


def check_constraints(w, r_w, r_wn, eff: EffectiveChannels, config: SystemConfig,
                      split: str) -> dict[str, float]:
    """Relative violations of every constraint, evaluated directly."""
    p = config.p_radar
    tr_w, tr_n = np.real(np.trace(r_w)), np.real(np.trace(r_wn))
    out = {"power": max(0.0, (tr_w + tr_n) / p - 1.0)}
    if split == "omega":
        out["power_info"] = max(0.0, (tr_w - config.omega * p) / p)
        out["power_an"] = max(0.0, (tr_n - (1 - config.omega) * p) / p)
    snr = np.real(np.trace(eff.c_t.conj().T @ eff.c_t @ (r_w + r_wn))) / config.sigma_r2
    out["radar_snr"] = max(0.0, (config.gamma_r_th - snr) / max(config.gamma_r_th, 1e-300))
    schur = np.block([[r_w / p, w[:, None] / np.sqrt(p)], [w.conj()[None, :] / np.sqrt(p), np.ones((1, 1))]])
    out["schur_psd"] = max(0.0, -np.linalg.eigvalsh(0.5 * (schur + schur.conj().T)).min())
    out["an_psd"] = max(0.0, -np.linalg.eigvalsh(r_wn / p).min())
    return out
