"""IRS sub-problem: the phase vector at fixed precoders.

``assemble_irs_data`` builds every quantity of the quadratic IRS problem
around the previous phase ``phi_t``. Two solvers consume it:

* ``qtsdr_step`` lifts ``[Re phi; Im phi; 1]`` to a PSD matrix, solves the
  relaxation and recovers a unit-modulus vector by Gaussian randomization;
* ``qtmm_step`` linearizes the objective and the radar-SNR surrogate at
  ``phi_t`` and maximizes the Lagrangian in closed form, picking the
  multiplier by doubling + bisection.

The radar term uses Z = B (x) A with A = H_ul^H H_ul and B^T = H_dl R H_dl^H
(R the transmit covariance). Z is never formed on the hot path: Z vec(U)
equals vec(A U B^T).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import cached_property

import cvxpy as cp
import numpy as np

from .config import SystemConfig
from .fractional import AuxState
from .scenario import ChannelSet
from .signal_model import DesignState, effective_channels, irs_factors, radar_snr

log = logging.getLogger(__name__)

DOUBLING_CAP = 64
BISECTION_CAP = 50


@dataclass
class IrsSubproblemData:
    phi_t: np.ndarray
    a: np.ndarray            # IRS steering toward the target
    d_mat: np.ndarray
    e_mat: np.ndarray
    eta: np.ndarray
    c1: float
    l1: np.ndarray
    mu: np.ndarray
    c2: float
    l1_bar: np.ndarray
    mu_bar: np.ndarray
    c2_bar: float
    a_ul: np.ndarray         # H_ul^H H_ul
    b_t: np.ndarray          # H_dl R H_dl^H, i.e. B^T
    u_t: np.ndarray          # vec(Phi_t a a^T Phi_t), column-major
    v_mat: np.ndarray
    y_mat: np.ndarray
    l2: np.ndarray
    l3: np.ndarray
    snr_scale: float         # beta^2 / sigma_R^2
    snr_t: float             # (beta^2/sigma_R^2) u_t^H Z u_t
    gamma_th: float
    gamma_th_prime: float

    @cached_property
    def z_mat(self) -> np.ndarray:
        """Explicit N^2 x N^2 Kronecker matrix; only meant for small N."""
        return np.kron(self.b_t.T, self.a_ul)

    @property
    def l_sum(self) -> np.ndarray:
        return self.l1 + self.l1_bar

    @property
    def l2_sym(self) -> np.ndarray:
        """Symmetric part of L2; phi^H L2 phi^* only sees this part, so tangents must use it."""
        return 0.5 * (self.l2 + self.l2.T)

    @property
    def l3_sym(self) -> np.ndarray:
        return 0.5 * (self.l3 + self.l3.T)

    @property
    def b_lin(self) -> np.ndarray:
        return self.eta - self.mu - self.mu_bar

    @property
    def n(self) -> int:
        return self.phi_t.shape[0]

    def quadratic_objective(self, phi: np.ndarray) -> float:
        """phi^T (L1 + L1bar) phi^* + Re[phi^T (eta - mu - mu_bar)]."""
        quad = phi @ self.l_sum @ phi.conj()
        return float(np.real(quad) + np.real(phi @ self.b_lin))

    def snr_quadratic(self, phi: np.ndarray) -> float:
        """phi^H L2 phi^* + phi^T L3 phi (the phi-dependent part of the SNR surrogate)."""
        val = phi.conj() @ self.l2 @ phi.conj() + phi @ self.l3 @ phi
        return float(np.real(val))

    def snr_surrogate(self, phi: np.ndarray) -> float:
        """Tangent lower bound of the radar SNR in u, anchored at phi_t."""
        return self.snr_quadratic(phi) - self.snr_t

    def radar_snr_exact(self, phi: np.ndarray) -> float:
        """(beta^2/sigma_R^2) u^H Z u at an arbitrary phi."""
        v = phi * self.a
        u = np.outer(v, v)
        return float(self.snr_scale * np.real(np.sum(u.conj() * (self.a_ul @ u @ self.b_t))))


def assemble_irs_data(channels: ChannelSet, state_prev: DesignState, aux: AuxState,
                      config: SystemConfig) -> IrsSubproblemData:
    phi_t = np.asarray(state_prev.phi)
    if phi_t.shape != (channels.n_irs,):
        raise ValueError(f"phi must have shape ({channels.n_irs},), got {phi_t.shape}")
    w, w_n = state_prev.w, state_prev.w_n
    if w.shape != (channels.n_tx,) or w_n.shape != (channels.n_tx, channels.n_tx):
        raise ValueError("precoder dimensions do not match the channels")
    d_mat, e_mat = irs_factors(channels, config)
    g, a = channels.g, channels.a_target
    su, ste = np.sqrt(1.0 + aux.gamma_u), np.sqrt(1.0 + aux.gamma_te)
    au_c, ate_c = np.conj(aux.alpha_u), np.conj(aux.alpha_te)
    au2, ate2 = abs(aux.alpha_u) ** 2, abs(aux.alpha_te) ** 2

    eta = 2.0 * (au_c * su * (d_mat @ w) - ate_c * ste * (e_mat @ w))
    c1 = float(2.0 * np.real(au_c * su * (g @ w)))

    r_n = w_n @ w_n.conj().T
    r_w = np.outer(w, w.conj())

    def herm(x):
        return 0.5 * (x + x.conj().T)

    l1 = herm(ate2 * e_mat @ r_n @ e_mat.conj().T - au2 * d_mat @ r_n @ d_mat.conj().T)
    mu = 2.0 * au2 * d_mat @ r_n @ g.conj()
    c2 = float(np.real(au2 * g @ r_n @ g.conj()))
    l1_bar = herm(ate2 * e_mat @ r_w @ e_mat.conj().T - au2 * d_mat @ r_w @ d_mat.conj().T)
    mu_bar = 2.0 * au2 * d_mat @ r_w @ g.conj()
    c2_bar = float(np.real(au2 * g @ r_w @ g.conj()))

    a_ul = herm(channels.h_ul.conj().T @ channels.h_ul)
    b_t = herm(channels.h_dl @ (r_w + r_n) @ channels.h_dl.conj().T)
    v_t = phi_t * a
    u_mat = np.outer(v_t, v_t)
    v_mat = a_ul @ u_mat @ b_t                  # vec(V) = Z u_t
    y_mat = a_ul.T @ u_mat.conj() @ b_t.T       # vec(Y) = Z^T conj(u_t)
    scale = config.beta ** 2 / config.sigma_r2
    l2 = scale * np.outer(a.conj(), a.conj()) * v_mat.T
    l3 = scale * np.outer(a, a) * y_mat.T
    snr_t = float(scale * np.real(np.sum(u_mat.conj() * v_mat)))
    return IrsSubproblemData(
        phi_t=phi_t.copy(), a=a, d_mat=d_mat, e_mat=e_mat, eta=eta, c1=c1,
        l1=l1, mu=mu, c2=c2, l1_bar=l1_bar, mu_bar=mu_bar, c2_bar=c2_bar,
        a_ul=a_ul, b_t=b_t, u_t=u_mat.ravel(order="F"), v_mat=v_mat, y_mat=y_mat,
        l2=l2, l3=l3, snr_scale=scale, snr_t=snr_t, gamma_th=config.gamma_r_th,
        gamma_th_prime=config.gamma_r_th + snr_t)


@dataclass
class IrsSolution:
    phi: np.ndarray
    rho_star: float | None = None
    feasible_true_snr: bool = False
    feasible_surrogate: bool = False
    failed: bool = False
    objective: float = float("nan")


def _true_feasible(phi, channels: ChannelSet, state: DesignState, config: SystemConfig) -> bool:
    eff = effective_channels(channels, phi, config)
    probe = DesignState(state.w, state.w_n, phi)
    return radar_snr(eff, probe, config.sigma_r2) >= config.gamma_r_th


# --------------------------------------------------------------------------- qtMM

@dataclass
class Linearization:
    """Both affine functionals written as Re(coef^H phi) + const."""
    coef0: np.ndarray
    const0: float
    coef1: np.ndarray
    const1: float

    def g0(self, phi: np.ndarray) -> float:
        return float(np.real(np.vdot(self.coef0, phi)) + self.const0)

    def g1(self, phi: np.ndarray) -> float:
        return float(np.real(np.vdot(self.coef1, phi)) + self.const1)


def mm_shifts(data: IrsSubproblemData) -> tuple[float, float]:
    """Diagonal loadings that make both quadratics convex as real forms.

    On the unit-modulus set ||phi||^2 = N is constant, so adding d ||phi||^2
    changes nothing but the curvature; with d >= -lambda_min the tangent plane
    becomes a global lower bound. The SNR quadratic 2 Re(phi^H S phi^*) has
    real eigenvalues +-2 sigma_k(S), hence the loading 2 sigma_max(S).
    """
    d_obj = max(0.0, -float(np.linalg.eigvalsh(data.l_sum).min()))
    sym = 0.5 * (data.l2 + data.l2.T)
    d_snr = 2.0 * float(np.linalg.norm(sym, 2)) if sym.size else 0.0
    return d_obj, d_snr


def qtmm_linearize(data: IrsSubproblemData, phi_t: np.ndarray,
                   shift: tuple[float, float] = (0.0, 0.0)) -> Linearization:
    """MM tangent lines of the quadratic objective and of the SNR surrogate at phi_t.

    A nonzero ``shift`` (see ``mm_shifts``) adds 2 d (Re(phi_t^H phi) - N) to
    each line, which keeps the touch point and turns it into a lower bound.
    """
    ls = data.l_sum
    # Re(phi_t^T L phi^*) = Re((L^T phi_t)^H phi); phi^T L phi_t^* is its conjugate
    s = ls.T @ phi_t
    coef0 = 2.0 * s + np.conj(data.b_lin)
    const0 = -float(np.real(phi_t @ ls @ phi_t.conj()))
    # Re(phi_t^H L2 phi^*) = Re((L2^T phi_t^*)^H phi);  phi_t^T L3 phi = (conj(L3^T phi_t))^H phi.
    # L2 and L3 are not symmetric in general, and only their symmetric parts give the gradient.
    l2, l3 = data.l2_sym, data.l3_sym
    coef1 = 2.0 * (l2.T @ phi_t.conj()) + 2.0 * np.conj(l3.T @ phi_t)
    anchor = phi_t.conj() @ data.l2 @ phi_t.conj() + phi_t @ data.l3 @ phi_t
    const1 = -float(np.real(anchor)) - data.gamma_th_prime
    n = phi_t.shape[0]
    d_obj, d_snr = shift
    coef0, const0 = coef0 + 2.0 * d_obj * phi_t, const0 - 2.0 * d_obj * n
    coef1, const1 = coef1 + 2.0 * d_snr * phi_t, const1 - 2.0 * d_snr * n
    return Linearization(coef0, const0, coef1, const1)


def phase_update(data: IrsSubproblemData, phi_t: np.ndarray, rho: float,
                 shift: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """exp(j arg(nu + conj(kappa))): maximizer of Re[g0 + rho g1] over unit-modulus vectors."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    ls = data.l_sum
    nu = (phi_t @ ls + 2.0 * rho * (phi_t.conj() @ data.l2_sym))
    kappa = (phi_t.conj() @ ls.T + 2.0 * rho * (phi_t @ data.l3_sym) + data.b_lin)
    total = nu + np.conj(kappa)
    if shift[0] or shift[1]:
        total = total + 2.0 * (shift[0] + rho * shift[1]) * phi_t
    return np.exp(1j * np.angle(total))


def qtmm_step(data: IrsSubproblemData, phi_t: np.ndarray, config: SystemConfig,
              channels: ChannelSet | None = None, state: DesignState | None = None,
              shift_scale: float | None = None) -> IrsSolution:
    """Closed-form dual update with the doubling/bisection multiplier search.

    ``shift_scale`` multiplies the spectral loadings of ``mm_shifts``
    (0 gives the plain tangent planes, 1 the certified lower bounds); by
    default it is 1 when ``config.mm_shift`` is set and 0 otherwise.
    """
    if config.eps_in <= 0:
        raise ValueError("eps_in must be positive")
    if shift_scale is None:
        shift_scale = 1.0 if config.mm_shift else 0.0
    shift = (0.0, 0.0)
    if shift_scale > 0:
        shift = tuple(shift_scale * d for d in mm_shifts(data))
    lin = qtmm_linearize(data, phi_t, shift)

    def update(rho):
        return phase_update(data, phi_t, rho, shift)

    def finish(phi, rho, surrogate_ok):
        true_ok = (_true_feasible(phi, channels, state, config)
                   if channels is not None else data.radar_snr_exact(phi) >= data.gamma_th)
        return IrsSolution(phi=phi, rho_star=rho, feasible_true_snr=bool(true_ok),
                           feasible_surrogate=bool(surrogate_ok), objective=data.quadratic_objective(phi))

    phi = update(0.0)
    if lin.g1(phi) >= 0:
        return finish(phi, 0.0, True)

    x = config.x_ini
    phi = update(2.0 ** x)
    while lin.g1(phi) < 0:
        x += 1
        if x > config.x_ini + DOUBLING_CAP:
            log.debug("qtMM: surrogate SNR constraint unattainable at this linearization")
            return finish(phi, 2.0 ** (x - 1), False)
        phi = update(2.0 ** x)

    rho_ub, rho_lb = 2.0 ** x, 2.0 ** (x - 1)
    phi_ub = phi
    rho_mid = 0.5 * (rho_lb + rho_ub)
    for _ in range(BISECTION_CAP):
        phi = update(rho_mid)
        val = lin.g1(phi)
        if 0.0 <= val <= config.eps_in:
            return finish(phi, rho_mid, True)
        if val < 0:
            rho_lb = rho_mid
        else:
            rho_ub, phi_ub = rho_mid, phi
        rho_mid = 0.5 * (rho_lb + rho_ub)
    return finish(phi_ub, rho_ub, True)


# --------------------------------------------------------------------------- qtSDR

def _real_hermitian_form(q: np.ndarray) -> np.ndarray:
    """Real symmetric K with z^H q z = x^T K x for x = [Re z; Im z] (q Hermitian)."""
    qr, qi = q.real, q.imag
    return np.block([[qr, -qi], [qi, qr]])


def _real_conj_symmetric_form(s: np.ndarray) -> np.ndarray:
    """Real symmetric K with 2 Re(phi^H s phi^*) = x^T K x for x = [Re phi; Im phi]."""
    s = 0.5 * (s + s.T)
    sr, si = s.real, s.imag
    return 2.0 * np.block([[sr, si], [si, -sr]])


SDR_EPS = 1e-6
# deterministic work cap; randomization only needs an approximate relaxed optimum
SDR_MAX_ITERS = 5000


def solve_lifted_sdp(c_mat: np.ndarray, k_mat: np.ndarray | None, rhs: float) -> tuple[np.ndarray | None, str]:
    """max tr(C X) s.t. X >= 0, X[-1,-1] = 1, X[n,n] + X[N+n,N+n] = 1, tr(K X) >= rhs.

    Returns (X, status); X is None when the relaxation is infeasible or every
    solver failed. A first-order solver is used: the interior-point KKT system
    of this cone grows like (2N+1)^6 and becomes impractical beyond N ~ 30.
    """
    dim = c_mat.shape[0]
    n = (dim - 1) // 2
    x = cp.Variable((dim, dim), symmetric=True)
    diag = cp.diag(x)
    constraints = [x >> 0, x[dim - 1, dim - 1] == 1, diag[:n] + diag[n:2 * n] == 1]
    if k_mat is not None:
        constraints.append(cp.trace(k_mat @ x) >= rhs)
    problem = cp.Problem(cp.Maximize(cp.trace(c_mat @ x)), constraints)
    status = "solver_error"
    for solver, opts in ((cp.SCS, {"eps": SDR_EPS, "max_iters": SDR_MAX_ITERS}), (cp.CLARABEL, {})):
        try:
            with warnings.catch_warnings():
                # a capped SCS run reports "inaccurate"; that is accepted below
                warnings.filterwarnings("ignore", message="Solution may be inaccurate")
                problem.solve(solver=solver, **opts)
        except cp.error.SolverError as exc:
            log.debug("lifted SDP: %s failed (%s)", solver, exc)
            continue
        status = problem.status
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) and x.value is not None:
            return 0.5 * (x.value + x.value.T), status
        if status == cp.INFEASIBLE:
            break
    return None, status


def qtsdr_step(data: IrsSubproblemData, state_prev: DesignState, config: SystemConfig,
               rng: np.random.Generator, channels: ChannelSet | None = None,
               constrained: bool = True) -> IrsSolution:
    """SDR of the quadratic IRS problem followed by Gaussian randomization.

    ``constrained=False`` drops the surrogate SNR constraint (used in tests).
    """
    n = data.n
    if config.randomization_count < 1:
        raise ValueError("randomization_count must be >= 1")
    k_obj = _real_hermitian_form(data.l_sum.T)
    b_obj = np.concatenate([data.b_lin.real, -data.b_lin.imag])
    k_snr = _real_conj_symmetric_form(data.l2)
    obj_scale = max(np.abs(k_obj).max(), np.abs(b_obj).max(), 1e-300)
    snr_scale = max(np.abs(k_snr).max(), 1e-300)

    dim = 2 * n + 1
    c_mat = np.zeros((dim, dim))
    c_mat[:2 * n, :2 * n] = k_obj / obj_scale
    c_mat[:2 * n, 2 * n] = c_mat[2 * n, :2 * n] = 0.5 * b_obj / obj_scale
    k_mat, rhs = None, 0.0
    if constrained:
        if snr_scale > 1e-300:
            k_mat = np.zeros((dim, dim))
            k_mat[:2 * n, :2 * n] = k_snr / snr_scale
            rhs = data.gamma_th_prime / snr_scale
        elif data.gamma_th_prime > 0:
            k_mat = np.zeros((dim, dim))     # 0 >= positive: infeasible
            rhs = 1.0
    x, status = solve_lifted_sdp(c_mat, k_mat, rhs)
    if x is None:
        if status == cp.INFEASIBLE:
            log.debug("qtSDR: relaxed SNR constraint unattainable, keeping previous phases")
        else:
            log.warning("qtSDR: lifted SDP failed (%s), keeping previous phases", status)
        phi = state_prev.phi.copy()
        return IrsSolution(phi=phi, failed=True,
                           feasible_true_snr=_feasible(phi, data, channels, state_prev, config),
                           feasible_surrogate=data.snr_quadratic(phi) >= data.gamma_th_prime,
                           objective=data.quadratic_objective(phi))

    vals, vecs = np.linalg.eigh(x)
    factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    xi = rng.standard_normal((config.randomization_count, 2 * n + 1)) @ factor.T
    sign = np.where(xi[:, -1] < 0, -1.0, 1.0)
    cand = (xi[:, :n] + 1j * xi[:, n:2 * n]) * sign[:, None]
    cand = np.exp(1j * np.angle(cand))

    objs = np.real(np.einsum("ki,ij,kj->k", cand, data.l_sum, cand.conj())) + np.real(cand @ data.b_lin)
    snrq = np.real(np.einsum("ki,ij,kj->k", cand.conj(), data.l2, cand.conj())
                   + np.einsum("ki,ij,kj->k", cand, data.l3, cand))
    ok = snrq >= data.gamma_th_prime if constrained else np.ones(len(cand), bool)
    if ok.any():
        best = int(np.flatnonzero(ok)[np.argmax(objs[ok])])
    else:
        best = int(np.argmax(objs))
    phi = cand[best] / np.abs(cand[best])
    return IrsSolution(phi=phi, feasible_true_snr=_feasible(phi, data, channels, state_prev, config),
                       feasible_surrogate=bool(ok[best]), objective=float(objs[best]))


def _feasible(phi, data, channels, state, config) -> bool:
    if channels is not None:
        return bool(_true_feasible(phi, channels, state, config))
    return bool(data.radar_snr_exact(phi) >= data.gamma_th)
