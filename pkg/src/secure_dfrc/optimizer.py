"""Alternating optimization of (w, W_n) and the IRS phases."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import SystemConfig
from .fractional import AuxState, assemble_pieces, eavesdropper_bound, update_aux, user_only
from .irs import assemble_irs_data, qtmm_step, qtsdr_step
from .scenario import ChannelSet, CsiView
from .signal_model import DesignState, effective_channels, evaluate
from .waveform import OPTIMAL, psd_sqrt, solve_waveform_an

log = logging.getLogger(__name__)

METHODS = ("qtmm", "qtsdr")


@dataclass
class IterationRecord:
    index: int
    secrecy_rate: float
    r_u: float
    r_te: float
    gamma_r_true: float
    waveform_status: str
    irs_feasible_true: bool
    irs_feasible_surrogate: bool
    rho_star: float | None
    wall_time_s: float


@dataclass
class RunResult:
    trace: list[IterationRecord]
    final_state: DesignState
    converged: bool
    iterations_used: int
    method: str = ""
    initial: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        st = self.final_state
        return {
            "method": self.method,
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "initial": self.initial,
            "trace": [asdict(r) for r in self.trace],
            "final_state": {
                "phi_phase": np.angle(st.phi).tolist(),
                "w": [[float(z.real), float(z.imag)] for z in st.w],
                "w_n": [[[float(z.real), float(z.imag)] for z in row] for row in st.w_n],
            },
        }


def initialize_state(channels: ChannelSet, config: SystemConfig,
                     rng: np.random.Generator) -> tuple[DesignState, AuxState]:
    """Random (or all-ones) phases, matched-filter w and white AN."""
    n, n_tx = channels.n_irs, channels.n_tx
    phases = rng.uniform(0.0, 2.0 * np.pi, n)
    phi = np.exp(1j * phases) if config.init_phi == "random" else np.ones(n, dtype=complex)
    eff = effective_channels(channels, phi, config)
    norm = np.linalg.norm(eff.c_u)
    p = config.p_radar
    if config.omega > 0 and norm > 0:
        w = np.sqrt(config.omega * p) * eff.c_u.conj() / norm
    else:
        w = np.zeros(n_tx, dtype=complex)
    w_n = np.sqrt((1.0 - config.omega) * p / n_tx) * np.eye(n_tx, dtype=complex)
    state = DesignState(w, w_n, phi)
    return state, update_aux(eff, state, config.noise)


def _merit(channels: ChannelSet, state: DesignState, config: SystemConfig) -> tuple[bool, float]:
    """Ordering used by the monotone rule: radar-feasible first, then secrecy rate."""
    m = evaluate(channels, state, config)
    return m["gamma_r"] >= config.gamma_r_th, m["secrecy"]


def _relative_change(new: float, old: float, tol: float) -> bool:
    if old == 0.0:
        return abs(new - old) <= tol
    return abs(new - old) / abs(old) <= tol


def optimize(scenario: CsiView, config: SystemConfig, method: str = "qtmm",
             rng_init: np.random.Generator | None = None,
             rng_sdr: np.random.Generator | None = None) -> RunResult:
    """Run the alternation on the estimated channels; report metrics on the true ones."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    rng_init = rng_init if rng_init is not None else np.random.default_rng(config.seed)
    rng_sdr = rng_sdr if rng_sdr is not None else np.random.default_rng(config.seed + 1)
    est, truth = scenario.estimate, scenario.truth

    start = time.monotonic()
    state, _ = initialize_state(est, config, rng_init)
    first = evaluate(truth, state, config)
    obj_prev = first["secrecy"]
    trace: list[IterationRecord] = []
    converged = False
    any_waveform_ok = False

    merit = _merit(est, state, config)

    def accept(candidate: DesignState) -> bool:
        nonlocal merit
        if not config.monotone:
            return True
        new = _merit(est, candidate, config)
        if new >= merit:
            merit = new
            return True
        return False

    for t in range(1, config.t_max + 1):
        eff = effective_channels(est, state.phi, config)
        aux = update_aux(eff, state, config.noise)
        if config.te_surrogate == "minorizer":
            pieces = assemble_pieces(user_only(aux), eff, config.noise)
            bound = eavesdropper_bound(eff, state, config.sigma_te2)
        else:
            pieces, bound = assemble_pieces(aux, eff, config.noise, natural_log=False), None
        sol = solve_waveform_an(pieces, eff, config, te_bound=bound)
        if sol.status == OPTIMAL:
            any_waveform_ok = True
            candidate = DesignState(sol.w, psd_sqrt(sol.r_wn), state.phi)
            if accept(candidate):
                state = candidate
        else:
            log.info("iteration %d: waveform %s, keeping previous precoders", t, sol.status)

        data = assemble_irs_data(est, state, aux, config)
        if method == "qtmm":
            irs = qtmm_step(data, state.phi, config, channels=est, state=state)
        else:
            irs = qtsdr_step(data, state, config, rng_sdr, channels=est)
        candidate = DesignState(state.w, state.w_n, irs.phi)
        if accept(candidate):
            state = candidate

        m = evaluate(truth, state, config)
        trace.append(IterationRecord(
            index=t, secrecy_rate=m["secrecy"], r_u=m["r_u"], r_te=m["r_te"],
            gamma_r_true=m["gamma_r"], waveform_status=sol.status,
            irs_feasible_true=irs.feasible_true_snr, irs_feasible_surrogate=irs.feasible_surrogate,
            rho_star=irs.rho_star, wall_time_s=time.monotonic() - start))
        if any_waveform_ok and _relative_change(m["secrecy"], obj_prev, config.epsilon):
            converged = True
            break
        obj_prev = m["secrecy"]

    return RunResult(trace=trace, final_state=state, converged=converged,
                     iterations_used=len(trace), method=method,
                     initial={k: float(v) for k, v in first.items()})
