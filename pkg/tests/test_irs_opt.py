import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfirs import fp_core, irs_opt, model
from cfirs.irs_opt import CmcQpData

from conftest import build_instance, crandn, synthetic_cmcqp


def _system_cmcqp(seed, **over):
    cfg, ch, theta, w, h = build_instance(seed, **over)
    aux = fp_core.optimal_aux(h, w, cfg.sigma2)
    data = irs_opt.build_cmcqp(model.stack(ch), w, aux)
    return cfg, ch, theta, w, aux, data


# ---- construction ----

def test_hadamard_trace_identity():
    rng = np.random.default_rng(0)
    nn = 6
    for _ in range(10):
        m1 = crandn(rng, (nn, 2 * nn))
        z = m1 @ m1.conj().T
        m2 = crandn(rng, (nn, 2 * nn))
        q = m2 @ m2.conj().T
        theta = np.exp(1j * rng.uniform(0, 2 * np.pi, nn))
        th = np.diag(theta)
        lhs = np.trace(th.conj().T @ z @ th @ q)
        rhs = theta.conj() @ (z * q.T) @ theta
        scale = max(1.0, abs(lhs))
        assert abs(lhs - rhs) < 1e-10 * scale


def test_build_zero_beamformers():
    cfg, ch, theta, w, h = build_instance(0)
    aux = fp_core.optimal_aux(h, w, cfg.sigma2)
    zero_w = model.BeamformerSet(w=np.zeros_like(w.w))
    data = irs_opt.build_cmcqp(model.stack(ch), zero_w, aux)
    np.testing.assert_allclose(data.zcal, 0.0, atol=1e-30)
    np.testing.assert_allclose(data.omega, 0.0, atol=1e-30)
    assert irs_opt.eval_f7(theta, data) == 0.0


def test_build_is_hermitian_psd():
    for seed in range(5):
        cfg, ch, theta, w, aux, data = _system_cmcqp(seed, r=2, n=4, n_h=2, n_v=2)
        assert np.max(np.abs(data.zcal - data.zcal.conj().T)) < 1e-10
        eigs = np.linalg.eigvalsh(data.zcal)
        assert eigs.min() > -1e-8 * max(eigs.max(), 1e-30)


def test_phase_objective_tracks_surrogate_differences():
    for seed in range(5):
        cfg, ch, theta, w, aux, data = _system_cmcqp(seed, r=2, n=4, n_h=2, n_v=2)
        rng = np.random.default_rng(seed)
        t1 = cfg.alpha * np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.n_irs_total))
        t2 = cfg.alpha * np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.n_irs_total))
        d4 = (fp_core.eval_f4(w, t1, aux, ch, cfg.sigma2)
              - fp_core.eval_f4(w, t2, aux, ch, cfg.sigma2))
        d7 = irs_opt.eval_f7(t1, data) - irs_opt.eval_f7(t2, data)
        assert d7 == pytest.approx(d4, rel=1e-8)


def test_f7_trace_form_oracle():
    cfg, ch, theta, w, aux, data = _system_cmcqp(1, r=2, n=4, n_h=2, n_v=2)
    th = np.diag(theta)
    om = data.e - data.a
    expected = (
        np.trace(th.conj().T @ om) + np.trace(om.conj().T @ th)
        - np.trace(th.conj().T @ data.z @ th @ data.q)
    ).real
    assert irs_opt.eval_f7(theta, data) == pytest.approx(expected, rel=1e-9)


def test_f7_nonpositive_without_linear_term(make_cmcqp):
    data = make_cmcqp(3)
    stripped = CmcQpData(zcal=data.zcal, omega=np.zeros_like(data.omega),
                         z=data.z, q=data.q, a=data.a, e=data.e)
    rng = np.random.default_rng(0)
    for _ in range(10):
        theta = np.exp(1j * rng.uniform(0, 2 * np.pi, data.omega.size))
        assert irs_opt.eval_f7(theta, stripped) <= 1e-12


# ---- coordinate updates ----

def test_coordinate_update_real_target():
    data = CmcQpData(
        zcal=np.array([[0.7]], complex), omega=np.array([1.0 + 0j]),
        z=None, q=None, a=None, e=None,
    )
    theta = np.array([np.exp(1j * 2.2)])
    out = irs_opt.aso_coordinate(theta, 0, data)
    assert out[0] == pytest.approx(1.0)


def test_coordinate_update_imaginary_target():
    nn = 3
    zcal = np.diag([0.5, 0.4, 0.3]).astype(complex)
    omega = np.array([0.0 + 2j, 1.0, 1.0])
    data = CmcQpData(zcal=zcal, omega=omega, z=None, q=None, a=None, e=None)
    theta = 0.9 * np.exp(1j * np.array([0.4, 0.8, 1.2]))
    out = irs_opt.aso_coordinate(theta, 0, data)
    assert out[0] == pytest.approx(0.9 * np.exp(1j * np.pi / 2))
    np.testing.assert_array_equal(out[1:], theta[1:])


def test_coordinate_update_zero_target_keeps_phase():
    data = CmcQpData(
        zcal=np.zeros((1, 1), complex), omega=np.zeros(1, complex),
        z=None, q=None, a=None, e=None,
    )
    theta = np.array([np.exp(1j * 0.3)])
    out = irs_opt.aso_coordinate(theta, 0, data)
    assert out[0] == theta[0]


def test_coordinate_update_beats_fine_grid(make_cmcqp):
    grid = np.exp(1j * 2 * np.pi * np.arange(10_000) / 10_000)
    for seed in range(5):
        data = make_cmcqp(seed, nn=4)
        rng = np.random.default_rng(seed)
        theta = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
        for i in range(4):
            updated = irs_opt.aso_coordinate(theta, i, data)
            best_closed = irs_opt.eval_f7(updated, data)
            trial = theta.copy()
            best_grid = -np.inf
            for g in grid:
                trial[i] = g
                best_grid = max(best_grid, irs_opt.eval_f7(trial, data))
            assert best_closed >= best_grid - 1e-8


def test_coordinate_update_never_decreases(make_cmcqp):
    data = make_cmcqp(11, nn=6)
    rng = np.random.default_rng(1)
    theta = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    value = irs_opt.eval_f7(theta, data)
    for sweep in range(3):
        for i in range(6):
            theta = irs_opt.aso_coordinate(theta, i, data)
            new_value = irs_opt.eval_f7(theta, data)
            assert new_value >= value - 1e-12 * max(1.0, abs(value))
            value = new_value


# ---- sweep solver ----

def test_sweep_decoupled_converges_in_one_pass():
    nn = 5
    rng = np.random.default_rng(2)
    zcal = np.diag(rng.uniform(0.5, 1.5, nn)).astype(complex)
    omega = crandn(rng, nn)
    data = CmcQpData(zcal=zcal, omega=omega, z=None, q=None, a=None, e=None)
    theta0 = np.exp(1j * rng.uniform(0, 2 * np.pi, nn))
    theta, trace = irs_opt.aso_solve(theta0, data, eps2=1e-12)
    # diagonal coupling: the first sweep already lands on the optimum
    np.testing.assert_allclose(theta, np.exp(1j * np.angle(omega)), rtol=1e-12)
    assert len(trace) <= 3


def test_sweep_monotone_trace(make_cmcqp):
    for seed in range(5):
        data = make_cmcqp(seed + 20, nn=8)
        rng = np.random.default_rng(seed)
        theta0 = np.exp(1j * rng.uniform(0, 2 * np.pi, 8))
        theta, trace = irs_opt.aso_solve(theta0, data)
        diffs = np.diff(trace)
        assert (diffs >= -1e-12 * np.maximum(1.0, np.abs(trace[1:]))).all()
        np.testing.assert_allclose(np.abs(theta), 1.0, atol=1e-12)


def test_sweep_objective_upper_bound(make_cmcqp):
    for seed in range(5):
        data = make_cmcqp(seed + 40, nn=8)
        rng = np.random.default_rng(seed)
        alpha = 0.8
        theta0 = alpha * np.exp(1j * rng.uniform(0, 2 * np.pi, 8))
        theta, _ = irs_opt.aso_solve(theta0, data)
        bound = 2 * alpha * np.abs(data.omega).sum()
        assert irs_opt.eval_f7(theta, data) <= bound + 1e-12


def test_sweep_is_coordinatewise_optimal(make_cmcqp):
    data = make_cmcqp(60, nn=6)
    rng = np.random.default_rng(3)
    theta0 = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    theta, _ = irs_opt.aso_solve(theta0, data, eps2=1e-14, max_sweeps=500)
    base = irs_opt.eval_f7(theta, data)
    for i in range(6):
        improved = irs_opt.aso_coordinate(theta, i, data)
        assert irs_opt.eval_f7(improved, data) <= base + 1e-10


# ---- disc relaxation ----

def test_qcr_linear_objective():
    nn = 4
    rng = np.random.default_rng(4)
    omega = crandn(rng, nn)
    data = CmcQpData(zcal=np.zeros((nn, nn), complex), omega=omega,
                     z=None, q=None, a=None, e=None)
    theta0 = 0.7 * np.exp(1j * rng.uniform(0, 2 * np.pi, nn))
    theta, relaxed, _ = irs_opt.qcr_solve(theta0, data)
    np.testing.assert_allclose(theta, 0.7 * np.exp(1j * np.angle(omega)), rtol=1e-10)


def test_qcr_boundary_when_linear_term_dominates(make_cmcqp):
    data = make_cmcqp(70, nn=6)
    lam_max = float(np.linalg.eigvalsh(data.zcal).max())
    strong = CmcQpData(zcal=data.zcal, omega=data.omega * (20 * 6 * lam_max / np.abs(data.omega).min()),
                       z=data.z, q=data.q, a=data.a, e=data.e)
    rng = np.random.default_rng(5)
    theta0 = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    theta, relaxed, _ = irs_opt.qcr_solve(theta0, strong, max_iter=20000)
    np.testing.assert_allclose(np.abs(relaxed), 1.0, atol=1e-6)


def test_qcr_relaxed_iterates_ascend(make_cmcqp):
    data = make_cmcqp(80, nn=8)
    rng = np.random.default_rng(6)
    theta0 = np.exp(1j * rng.uniform(0, 2 * np.pi, 8))
    _, trace = irs_opt.qcr_relax(theta0, data, max_iter=400)
    diffs = np.diff(trace)
    assert (diffs >= -1e-11 * np.maximum(1.0, np.abs(trace[1:]))).all()


def test_qcr_projected_point_is_feasible(make_cmcqp):
    data = make_cmcqp(90, nn=8)
    rng = np.random.default_rng(7)
    theta0 = 0.6 * np.exp(1j * rng.uniform(0, 2 * np.pi, 8))
    theta, relaxed, _ = irs_opt.qcr_solve(theta0, data)
    np.testing.assert_allclose(np.abs(theta), 0.6, atol=1e-12)


# ---- semidefinite relaxation ----

def test_sdr_single_element_analytic():
    # 2x2 lifted problem: the optimum phase aligns with the linear coefficient
    rng = np.random.default_rng(8)
    for seed in range(5):
        z = rng.uniform(0.1, 2.0)
        omega = crandn(rng, 1)
        data = CmcQpData(zcal=np.array([[z]], complex), omega=omega,
                         z=None, q=None, a=None, e=None)
        theta, sdp_value, converged = irs_opt.sdr_solve(
            data, alpha=1.0, n_randomizations=50, rng=np.random.default_rng(seed)
        )
        assert converged
        expected = np.exp(1j * np.angle(omega[0]))
        assert theta[0] == pytest.approx(expected, abs=1e-4)


def test_sdr_relaxation_upper_bounds_rounded(make_cmcqp):
    for seed in range(5):
        data = make_cmcqp(seed + 100, nn=6)
        alpha = 1.0
        theta, sdp_value, converged = irs_opt.sdr_solve(
            data, alpha, n_randomizations=100, rng=np.random.default_rng(seed)
        )
        lifted = np.concatenate([theta, [alpha]])
        nn = 6
        zbar = np.zeros((nn + 1, nn + 1), complex)
        zbar[:nn, :nn] = -data.zcal
        zbar[:nn, nn] = data.omega
        zbar[nn, :nn] = data.omega.conj()
        lam_min = float(np.linalg.eigvalsh(zbar).min())
        zhat = zbar - lam_min * np.eye(nn + 1)
        rounded = float(np.real(lifted.conj() @ zhat @ lifted))
        assert sdp_value >= rounded - 1e-6 * max(1.0, abs(sdp_value))


def test_sdr_admm_constraint_contract(make_cmcqp):
    data = make_cmcqp(111, nn=5)
    nn = 5
    zbar = np.zeros((nn + 1, nn + 1), complex)
    zbar[:nn, :nn] = -data.zcal
    zbar[:nn, nn] = data.omega
    zbar[nn, :nn] = data.omega.conj()
    lam_min = float(np.linalg.eigvalsh(zbar).min())
    zhat = zbar - lam_min * np.eye(nn + 1)
    alpha = 0.9
    v, converged = irs_opt._admm_sdp(zhat, alpha**2)
    assert converged
    np.testing.assert_allclose(np.real(np.diag(v)), alpha**2, atol=1e-5)
    assert np.linalg.eigvalsh(0.5 * (v + v.conj().T)).min() >= -1e-6


# ---- discrete phase grid ----

def test_discrete_rejects_tiny_grid(make_cmcqp):
    data = make_cmcqp(120, nn=4)
    theta = np.ones(4, complex)
    with pytest.raises(ValueError):
        irs_opt.discrete_sweep(theta, data, 1)


def test_discrete_high_resolution_approaches_continuous(make_cmcqp):
    for seed in range(5):
        data = make_cmcqp(seed + 130, nn=4)
        rng = np.random.default_rng(seed)
        theta0 = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
        cont, _ = irs_opt.aso_solve(theta0, data, eps2=1e-14, max_sweeps=500)
        disc, _ = irs_opt.discrete_sweep(theta0, data, levels=2**16)
        assert irs_opt.eval_f7(disc, data) >= irs_opt.eval_f7(cont, data) - 1e-4


def test_discrete_fixed_point_of_joint_optimum(make_cmcqp):
    levels = 2
    grid = np.exp(2j * np.pi * np.arange(levels) / levels)
    for seed in range(5):
        data = make_cmcqp(seed + 140, nn=3)
        best_val, best_theta = -np.inf, None
        for combo in itertools.product(range(levels), repeat=3):
            theta = grid[list(combo)]
            val = irs_opt.eval_f7(theta, data)
            if val > best_val:
                best_val, best_theta = val, theta
        out, sweeps = irs_opt.discrete_sweep(best_theta, data, levels)
        np.testing.assert_array_equal(out, best_theta)
        assert irs_opt.eval_f7(out, data) == pytest.approx(best_val)


def test_discrete_midpoint_tie_breaks_low():
    # target phase exactly between grid points 0 and 1 -> keep index 0
    levels = 4
    data = CmcQpData(
        zcal=np.zeros((1, 1), complex),
        omega=np.array([np.exp(1j * np.pi / levels)]),
        z=None, q=None, a=None, e=None,
    )
    theta0 = np.array([np.exp(1j * 2.0)])
    out, _ = irs_opt.discrete_sweep(theta0, data, levels)
    assert out[0] == pytest.approx(1.0)


def test_discrete_output_on_grid(make_cmcqp):
    data = make_cmcqp(150, nn=6)
    rng = np.random.default_rng(9)
    alpha = 0.75
    theta0 = alpha * np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    out, _ = irs_opt.discrete_sweep(theta0, data, levels=4)
    model.PhaseVector(theta=out, alpha=alpha).validate(discrete_levels=4)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_solvers_return_constant_modulus(seed):
    data = synthetic_cmcqp(seed, nn=4)
    rng = np.random.default_rng(seed)
    theta0 = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    t1, _ = irs_opt.aso_solve(theta0, data, max_sweeps=20)
    t2, _, _ = irs_opt.qcr_solve(theta0, data, max_iter=200)
    t3, _ = irs_opt.discrete_sweep(theta0, data, levels=8, max_sweeps=20)
    for t in (t1, t2, t3):
        np.testing.assert_allclose(np.abs(t), 1.0, atol=1e-12)


def test_solver_ordering_against_random(make_cmcqp):
    rng_global = np.random.default_rng(1234)
    f_aso, f_sdr, f_rand = [], [], []
    for seed in range(50):
        data = synthetic_cmcqp(seed + 200, nn=6)
        theta0 = np.exp(1j * rng_global.uniform(0, 2 * np.pi, 6))
        t_aso, _ = irs_opt.aso_solve(theta0, data)
        t_sdr, _, _ = irs_opt.sdr_solve(data, 1.0, n_randomizations=100,
                                        rng=np.random.default_rng(seed))
        f_aso.append(irs_opt.eval_f7(t_aso, data))
        f_sdr.append(irs_opt.eval_f7(t_sdr, data))
        f_rand.append(irs_opt.eval_f7(theta0, data))
    assert np.mean(f_aso) > np.mean(f_rand)
    assert np.mean(f_sdr) > np.mean(f_rand)
