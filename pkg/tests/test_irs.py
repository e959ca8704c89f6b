import itertools

import numpy as np
import pytest

from conftest import crandn, random_channels, random_instance, random_state, small_config
from secure_dfrc.fractional import update_aux
from secure_dfrc.irs import (_real_conj_symmetric_form, _real_hermitian_form, assemble_irs_data, mm_shifts,
                             phase_update, qtmm_linearize, qtmm_step, qtsdr_step)
from secure_dfrc.signal_model import DesignState, effective_channels, radar_snr


def _unit(rng, n):
    return np.exp(1j * rng.uniform(0, 2 * np.pi, n))


def _irs_instance(rng, max_dim=4, gamma_frac=None, **cfg):
    """Random small instance; gamma_frac sets the threshold relative to gamma_R at phi_t."""
    config, ch, st = random_instance(rng, max_dim=max_dim, **cfg)
    eff = effective_channels(ch, st.phi, config)
    if gamma_frac is not None:
        snr = radar_snr(eff, st, config.sigma_r2)
        config = config.replace(gamma_r_th_db=float(10 * np.log10(gamma_frac * snr)))
    data = assemble_irs_data(ch, st, update_aux(eff, st, config.noise), config)
    return config, ch, st, eff, data


# ---------------------------------------------------------------- assembly


def test_zero_precoders_give_zero_radar_terms(rng):
    cfg = small_config(2, 2, 3)
    ch = random_channels(rng, 2, 2, 3)
    st = DesignState(np.zeros(2, complex), np.zeros((2, 2), complex), _unit(rng, 3))
    eff = effective_channels(ch, st.phi, cfg)
    data = assemble_irs_data(ch, st, update_aux(eff, st, cfg.noise), cfg)
    assert np.all(data.z_mat == 0) and np.all(data.l2 == 0) and np.all(data.l3 == 0)
    assert data.gamma_th_prime == cfg.gamma_r_th


def test_dimension_mismatch_rejected(rng):
    cfg = small_config(2, 2, 3)
    ch = random_channels(rng, 2, 2, 3)
    st = random_state(rng, 2, 4)
    eff_state = DesignState(st.w, st.w_n, st.phi[:3])
    aux = update_aux(effective_channels(ch, eff_state.phi, cfg), eff_state, cfg.noise)
    with pytest.raises(ValueError):
        assemble_irs_data(ch, st, aux, cfg)


def test_hermitian_blocks(rng):
    for _ in range(20):
        *_, data = _irs_instance(rng)
        for m in (data.l1, data.l1_bar, data.a_ul, data.b_t):
            np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
        z = data.z_mat
        np.testing.assert_allclose(z, z.conj().T, atol=1e-9 * max(1.0, np.abs(z).max()))
        assert np.linalg.eigvalsh(z).min() >= -1e-9 * max(1.0, np.abs(z).max())


def test_radar_surrogate_touches_at_anchor(rng):
    """gamma_tilde(phi_t) == gamma_R(phi_t), computed from the signal model directly."""
    for _ in range(200):
        cfg, ch, st, eff, data = _irs_instance(rng)
        snr = radar_snr(eff, st, cfg.sigma_r2)
        assert data.snr_surrogate(st.phi) == pytest.approx(snr, rel=1e-9, abs=1e-300)


def test_radar_surrogate_is_a_lower_bound(rng):
    for _ in range(30):
        cfg, ch, st, _, data = _irs_instance(rng)
        for _ in range(10):
            phi = _unit(rng, data.n)
            exact = radar_snr(effective_channels(ch, phi, cfg), DesignState(st.w, st.w_n, phi), cfg.sigma_r2)
            assert data.snr_surrogate(phi) <= exact * (1 + 1e-9) + 1e-12


def test_l3_is_conj_l2_and_z_products(rng):
    for _ in range(200):
        _, ch, st, _, data = _irs_instance(rng)
        scale = max(1.0, np.abs(data.l2).max())
        np.testing.assert_allclose(data.l3, data.l2.conj(), atol=1e-10 * scale)
        # V and Y against the explicit Kronecker matrix
        z = data.z_mat
        np.testing.assert_allclose(data.v_mat.ravel(order="F"), z @ data.u_t, atol=1e-10 * max(1.0, np.abs(z).max()))
        np.testing.assert_allclose(data.y_mat.ravel(order="F"), z.T @ data.u_t.conj(),
                                   atol=1e-10 * max(1.0, np.abs(z).max()))


@pytest.mark.parametrize("n", [2, 3])
def test_kronecker_identity(rng, n):
    for _ in range(100):
        x, y, u = crandn(rng, n, n), crandn(rng, n, n), crandn(rng, n, n)
        a, b_t = x @ x.conj().T, y @ y.conj().T
        lhs = np.trace(u.conj().T @ a @ u @ b_t)
        vec = u.ravel(order="F")
        rhs = vec.conj() @ np.kron(b_t.T, a) @ vec
        assert lhs == pytest.approx(rhs, rel=1e-10)


# ---------------------------------------------------------------- qtMM linearization


def test_linearization_touch_conditions(rng):
    for _ in range(200):
        cfg, ch, st, eff, data = _irs_instance(rng)
        lin = qtmm_linearize(data, st.phi)
        g0_want = data.quadratic_objective(st.phi)
        assert lin.g0(st.phi) == pytest.approx(g0_want, rel=1e-9, abs=1e-9)
        snr = radar_snr(eff, st, cfg.sigma_r2)
        assert lin.g1(st.phi) == pytest.approx(snr - cfg.gamma_r_th, rel=1e-9, abs=1e-9 * max(1.0, snr))


def test_linearization_without_radar_terms_is_constant(rng):
    cfg, ch, st, eff, data = _irs_instance(rng)
    data.l2 = np.zeros_like(data.l2)
    data.l3 = np.zeros_like(data.l3)
    lin = qtmm_linearize(data, st.phi)
    for _ in range(5):
        assert lin.g1(_unit(rng, data.n)) == pytest.approx(-data.gamma_th_prime)


def test_shifted_linearization_is_a_minorizer(rng):
    for _ in range(30):
        *_, st, _, data = _irs_instance(rng)
        shift = mm_shifts(data)
        lin = qtmm_linearize(data, st.phi, shift)
        assert lin.g0(st.phi) == pytest.approx(data.quadratic_objective(st.phi), rel=1e-9, abs=1e-9)
        for _ in range(20):
            phi = _unit(rng, data.n)
            scale0 = max(1.0, abs(data.quadratic_objective(phi)))
            scale1 = max(1.0, abs(data.snr_quadratic(phi)), data.gamma_th_prime)
            assert lin.g0(phi) <= data.quadratic_objective(phi) + 1e-9 * scale0
            assert lin.g1(phi) <= data.snr_quadratic(phi) - data.gamma_th_prime + 1e-9 * scale1


def test_real_forms_match_complex_forms(rng):
    for n in (1, 2, 4):
        x = crandn(rng, n, n)
        q = x + x.conj().T
        s = crandn(rng, n, n)
        s = s + s.T
        for _ in range(5):
            z = crandn(rng, n)
            r = np.concatenate([z.real, z.imag])
            assert r @ _real_hermitian_form(q) @ r == pytest.approx((z.conj() @ q @ z).real, rel=1e-12, abs=1e-12)
            want = 2 * np.real(z.conj() @ s @ z.conj())
            assert r @ _real_conj_symmetric_form(s) @ r == pytest.approx(want, rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------- phase update


def _lagrangian(lin, phi, rho):
    return lin.g0(phi) + rho * lin.g1(phi)


def test_phase_update_all_ones():
    rng = np.random.default_rng(3)
    *_, st, _, data = _irs_instance(rng)
    n = data.n
    data.l_sum[:] = 0
    data.l1 = np.zeros((n, n), complex)
    data.l1_bar = np.zeros((n, n), complex)
    data.mu = data.mu_bar = np.zeros(n, complex)
    data.eta = np.arange(1, n + 1).astype(complex)      # nu + conj(kappa) = eta, real positive
    np.testing.assert_array_equal(phase_update(data, st.phi, 0.0), np.ones(n, complex))
    with pytest.raises(ValueError):
        phase_update(data, st.phi, -1.0)


def test_phase_update_rho_zero_ignores_radar_terms(rng):
    *_, st, _, data = _irs_instance(rng)
    before = phase_update(data, st.phi, 0.0)
    data.l2 = crandn(rng, data.n, data.n)
    data.l3 = crandn(rng, data.n, data.n)
    np.testing.assert_array_equal(phase_update(data, st.phi, 0.0), before)


def test_phase_update_grid_oracle_n2(rng):
    """The functional is separable in the elements, so the 2-D grid max is the sum of 1-D maxima."""
    grid = np.exp(1j * np.deg2rad(np.arange(0, 360, 0.1)))
    done = 0
    while done < 50:
        cfg, ch, st, eff, data = _irs_instance(rng, max_dim=3)
        if data.n != 2:
            continue
        done += 1
        rho = float(rng.choice([0.0, rng.uniform(0, 10), 10 ** rng.uniform(-6, 6)]))
        lin = qtmm_linearize(data, st.phi)
        phi = phase_update(data, st.phi, rho)
        np.testing.assert_allclose(np.abs(phi), 1.0, rtol=0, atol=1e-15)
        coef = lin.coef0 + rho * lin.coef1
        const = lin.const0 + rho * lin.const1
        best = const + sum(np.max(np.real(np.conj(coef[k]) * grid)) for k in range(2))
        # cross-check the separable max on a coarse full grid
        coarse = grid[::10]
        full = max(_lagrangian(lin, np.array([p, q]), rho) for p, q in itertools.product(coarse[::6], coarse[::6]))
        assert full <= best + 1e-9 * max(1.0, abs(best))
        val = _lagrangian(lin, phi, rho)
        assert val >= best - 1e-6 * max(1.0, abs(best))


def test_phase_update_beats_random_perturbations(rng):
    for _ in range(5):
        *_, st, _, data = _irs_instance(rng)
        lin = qtmm_linearize(data, st.phi)
        for rho in (0.0, 1.0, 1e3):
            phi = phase_update(data, st.phi, rho)
            val = _lagrangian(lin, phi, rho)
            pert = phi[None, :] * np.exp(1j * rng.normal(0, 0.5, (10_000, data.n)))
            vals = (np.real(pert @ lin.coef0.conj()) + lin.const0) + rho * (np.real(pert @ lin.coef1.conj()) + lin.const1)
            assert vals.max() <= val + 1e-9 * max(1.0, abs(val))


# ---------------------------------------------------------------- qtMM step


def test_qtmm_unconstrained_optimum_gives_rho_zero(rng):
    cfg, ch, st, eff, data = _irs_instance(rng, gamma_r_th_db=-300.0)
    sol = qtmm_step(data, st.phi, cfg, channels=ch, state=st)
    assert sol.rho_star == 0.0 and sol.feasible_surrogate and sol.feasible_true_snr
    np.testing.assert_allclose(np.abs(sol.phi), 1.0, rtol=0, atol=1e-15)


def test_qtmm_rejects_nonpositive_tolerance(rng):
    cfg, ch, st, eff, data = _irs_instance(rng)
    cfg.eps_in = 0.0                  # bypasses config validation on purpose
    with pytest.raises(ValueError):
        qtmm_step(data, st.phi, cfg)


@pytest.mark.parametrize("mm_shift", [False, True])
def test_qtmm_step_postconditions(rng, mm_shift):
    for _ in range(40):
        cfg, ch, st, eff, data = _irs_instance(rng, gamma_frac=rng.uniform(0.5, 1.5), mm_shift=mm_shift)
        sol = qtmm_step(data, st.phi, cfg, channels=ch, state=st)
        np.testing.assert_allclose(np.abs(sol.phi), 1.0, rtol=0, atol=1e-15)
        assert sol.rho_star >= 0
        if sol.feasible_surrogate:
            shift = mm_shifts(data) if mm_shift else (0.0, 0.0)
            g1 = qtmm_linearize(data, st.phi, shift).g1(sol.phi)
            assert g1 >= -1e-9 * max(1.0, data.gamma_th_prime)


def test_qtmm_true_feasibility_oracle(rng):
    """With the certified (shifted) bounds, surrogate feasibility implies true radar feasibility."""
    checked = 0
    for _ in range(100):
        cfg, ch, st, eff, data = _irs_instance(rng, gamma_frac=rng.uniform(0.3, 1.0), mm_shift=True)
        sol = qtmm_step(data, st.phi, cfg, channels=ch, state=st)
        if not sol.feasible_surrogate:
            continue
        checked += 1
        probe = DesignState(st.w, st.w_n, sol.phi)
        snr = radar_snr(effective_channels(ch, sol.phi, cfg), probe, cfg.sigma_r2)
        assert snr >= cfg.gamma_r_th * (1 - 1e-9)
        assert sol.feasible_true_snr
    assert checked >= 90


# ---------------------------------------------------------------- qtSDR


def test_qtsdr_degenerate_objective(rng):
    cfg, ch, st, eff, data = _irs_instance(rng)
    n = data.n
    data.l1 = data.l1_bar = np.zeros((n, n), complex)
    data.eta = data.mu = data.mu_bar = np.zeros(n, complex)
    sol = qtsdr_step(data, st, cfg.replace(randomization_count=10), rng, constrained=False)
    assert not sol.failed
    np.testing.assert_allclose(np.abs(sol.phi), 1.0, atol=1e-12)


def test_qtsdr_surrogate_flag_recheck(rng):
    for _ in range(10):
        cfg, ch, st, eff, data = _irs_instance(rng, gamma_frac=rng.uniform(0.5, 1.2), randomization_count=30)
        sol = qtsdr_step(data, st, cfg, rng, channels=ch)
        np.testing.assert_allclose(np.abs(sol.phi), 1.0, atol=1e-12)
        if sol.feasible_surrogate:
            assert data.snr_quadratic(sol.phi) >= data.gamma_th_prime - 1e-6 * max(1.0, data.gamma_th_prime)


def test_qtsdr_rejects_zero_candidates(rng):
    cfg, ch, st, eff, data = _irs_instance(rng)
    cfg.randomization_count = 0
    with pytest.raises(ValueError):
        qtsdr_step(data, st, cfg, rng)


def test_qtsdr_grid_oracle_n2(rng):
    grid = np.exp(1j * np.deg2rad(np.arange(0, 360, 1.0)))
    p1, p2 = np.meshgrid(grid, grid, indexing="ij")
    phis = np.stack([p1.ravel(), p2.ravel()], axis=1)
    close, done = 0, 0
    while done < 50:
        cfg, ch, st, eff, data = _irs_instance(rng, max_dim=3)
        if data.n != 2:
            continue
        done += 1
        vals = (np.real(np.einsum("ki,ij,kj->k", phis, data.l_sum, phis.conj()))
                + np.real(phis @ data.b_lin))
        best = vals.max()
        sol = qtsdr_step(data, st, cfg, rng, constrained=False)
        got = data.quadratic_objective(sol.phi)
        close += got >= best - 0.05 * abs(best)
    assert close >= 45
