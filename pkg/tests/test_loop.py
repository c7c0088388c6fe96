import numpy as np
import pytest

import delaystab as ds
from delaystab.errors import SimulationBlowup, SimulationError

from oracles import (
    heat_spectrum_discrete,
    scalar_closed_loop_exact,
    scalar_closed_loop_ivp,
)

A_SC, TAU_SC = 1.0, 0.5
G_SC = -2.0 * np.exp(0.5)


@pytest.fixture(scope="module")
def scalar_loop(scalar_model, scalar_split):
    design = ds.design_from_gain(scalar_split, TAU_SC, [[G_SC]], sigma_star=0.9)
    dt = 0.005
    kernel = ds.solve_kernel(design, 8.0, dt, residual_tol=np.inf)
    traj = ds.simulate_linear(
        scalar_model, scalar_split, design, kernel,
        np.array([1.0]), None, 8.0, dt,
    )
    return design, kernel, traj


def test_stable_heat_free_decay():
    # no reaction: every mode stable, the designed feedback is empty and
    # the leading discrete mode decays at its own eigenvalue rate
    n = 200
    model = ds.build_convection_diffusion_1d(np.pi, n, 1.0, 0.0, 0.0,
                                             "distributed", (0.3 * np.pi, 0.6 * np.pi))
    split = ds.compute_split(model, 0.5)
    assert split.unstable_dim == 0
    design = ds.design_gain(split, tau=0.3)
    kernel = ds.solve_kernel(design, 6.0, 0.01)
    vals, vecs = np.linalg.eigh(model.generator)
    z0 = vecs[:, np.argmax(vals)]
    traj = ds.simulate_linear(model, split, design, kernel, z0, None, 6.0, 0.01)
    assert np.all(traj.controls == 0.0)
    cert = ds.fit_decay(traj, (0.6, 6.0))
    lam1 = heat_spectrum_discrete(np.pi, n, 1.0, 0.0, 1)
    assert cert.fitted_rate == pytest.approx(-lam1, abs=1e-3)
    assert cert.fitted_rate == pytest.approx(1.0, abs=2e-3)


def test_scalar_loop_against_exact_and_ivp(scalar_loop):
    design, kernel, traj = scalar_loop
    t = traj.times
    z_exact = scalar_closed_loop_exact(A_SC, G_SC, TAU_SC, 1.0, t)
    err_exact = np.max(np.abs(traj.states[:, 0] - z_exact))
    assert err_exact < 1e-4
    # the two independent oracles agree with each other much more tightly
    z_ivp = scalar_closed_loop_ivp(A_SC, G_SC, TAU_SC, 1.0, t)
    assert np.max(np.abs(z_ivp - z_exact)) < 1e-8
    cert = ds.fit_decay(traj, (2.0, 8.0))
    assert abs(cert.fitted_rate - 1.0) <= 1e-3


def test_scalar_loop_order_two(scalar_model, scalar_split):
    design = ds.design_from_gain(scalar_split, TAU_SC, [[G_SC]], sigma_star=0.9)
    errs, r1s, r2s = [], [], []
    for dt in (0.025, 0.0125, 0.00625):
        kernel = ds.solve_kernel(design, 4.0, dt, residual_tol=np.inf)
        traj = ds.simulate_linear(
            scalar_model, scalar_split, design, kernel,
            np.array([1.0]), None, 4.0, dt,
        )
        z_exact = scalar_closed_loop_exact(A_SC, G_SC, TAU_SC, 1.0, traj.times)
        errs.append(np.max(np.abs(traj.states[:, 0] - z_exact)))
        r1s.append(traj.residual_transformed_ode.max())
        r2s.append(traj.residual_lookahead.max())
    for seq in (errs, r1s, r2s):
        assert 2.5 < seq[0] / seq[1] < 6.5
        assert 2.5 < seq[1] / seq[2] < 6.5


def test_rest_stays_at_rest(scalar_model, scalar_split):
    design = ds.design_from_gain(scalar_split, TAU_SC, [[G_SC]], sigma_star=0.9)
    kernel = ds.solve_kernel(design, 2.0, 0.01, residual_tol=np.inf)
    traj = ds.simulate_linear(
        scalar_model, scalar_split, design, kernel,
        np.zeros(1), None, 2.0, 0.01,
    )
    assert np.all(traj.states == 0.0)
    assert np.all(traj.controls == 0.0)
    assert np.all(traj.transformed == 0.0)


def test_superposition(heat_distributed):
    model, split = heat_distributed
    design = ds.design_gain(split, tau=0.3, sigma_star=0.65)
    dt = 0.01
    kernel = ds.solve_kernel(design, 2.0, dt, residual_tol=np.inf)
    rng = np.random.default_rng(11)
    z1 = rng.normal(size=model.state_dim)
    z2 = rng.normal(size=model.state_dim)
    al, be = 0.7, -1.3

    def run(z0):
        return ds.simulate_linear(model, split, design, kernel, z0, None, 2.0, dt)

    t1, t2, t12 = run(z1), run(z2), run(al * z1 + be * z2)
    combo = al * t1.states + be * t2.states
    scale = np.max(np.abs(t12.states))
    assert np.max(np.abs(t12.states - combo)) < 1e-9 * scale
    vcombo = al * t1.controls + be * t2.controls
    assert np.max(np.abs(t12.controls - vcombo)) < 1e-9 * max(1.0, np.max(np.abs(t12.controls)))


def test_causality_tamper(scalar_loop):
    design, kernel, traj = scalar_loop
    t = 3.0
    ip = int(round((t - TAU_SC) / kernel.step))
    v_ref = ds.eval_feedback(design, kernel, traj.states, t)
    tampered = traj.states.copy()
    rng = np.random.default_rng(5)
    tampered[ip + 1:] += rng.normal(size=tampered[ip + 1:].shape)
    v_tampered = ds.eval_feedback(design, kernel, tampered, t)
    assert np.array_equal(v_ref, v_tampered)


def test_forcing_keeps_certificate(heat_distributed):
    model, split = heat_distributed
    design = ds.design_gain(split, tau=0.3, sigma_star=0.65)
    dt = 0.005
    kernel = ds.solve_kernel(design, 6.0, dt, residual_tol=np.inf)
    profile = np.exp(-((model.grid - 2.0) ** 2) / 0.25)
    forcing = ds.Forcing(evaluator=lambda t: np.exp(-1.5 * t) * profile, decay_rate=1.5)
    z0 = np.sin(model.grid)
    traj = ds.simulate_linear(model, split, design, kernel, z0, forcing, 6.0, dt)
    cert = ds.fit_decay(traj)
    assert cert.passed
    assert np.isfinite(cert.constant_witness) and cert.constant_witness > 0
    assert cert.strong_witness is not None and np.isfinite(cert.strong_witness)


def test_boundary_shift_invariance_end_to_end():
    # the lifted input column is shift-independent, so whole closed-loop
    # trajectories with different admissible shifts coincide
    trajs = []
    for shift in (3.5, 7.0):
        model = ds.build_convection_diffusion_1d(np.pi, 100, 1.0, 0.0, 2.0,
                                                 "boundary", shift=shift)
        split = ds.compute_split(model, 0.5)
        design = ds.design_gain(split, tau=0.3, sigma_star=0.65)
        kernel = ds.solve_kernel(design, 3.0, 0.01, residual_tol=np.inf)
        z0 = np.sin(model.grid)
        trajs.append(
            ds.simulate_linear(model, split, design, kernel, z0, None, 3.0, 0.01)
        )
    scale = np.max(np.abs(trajs[0].states))
    assert np.max(np.abs(trajs[0].states - trajs[1].states)) < 1e-8 * scale


def test_blind_actuator_diverges():
    model = ds.build_custom_lti(np.diag([1.0, -2.0]), [[0.0], [1.0]], shift=5.0)
    split = ds.compute_split(model, 0.5)
    design = ds.design_from_gain(split, 0.5, np.zeros((1, 1)), sigma_star=0.9)
    kernel = ds.solve_kernel(design, 40.0, 0.01)
    with pytest.raises(SimulationBlowup) as exc:
        ds.simulate_linear(model, split, design, kernel,
                           np.array([1.0, 1.0]), None, 40.0, 0.01)
    assert exc.value.norms[-1] > 1e12
    # norms grow monotonically once the stable part has died out
    tail = exc.value.norms[200:]
    assert np.all(np.diff(tail) > 0)


def test_fit_decay_exact_log_linear(scalar_model, scalar_split):
    design = ds.design_from_gain(scalar_split, TAU_SC, [[0.0]], sigma_star=0.9)
    times = 0.01 * np.arange(501)
    states = np.exp(-2.0 * times)[:, None]
    traj = ds.Trajectory(
        times=times, states=states, controls=np.zeros((501, 1)),
        transformed=states.copy(), forcing_samples=np.zeros((501, 1)),
        norms=np.exp(-2.0 * times),
        residual_transformed_ode=np.zeros(501),
        residual_lookahead=np.zeros(501),
        model=scalar_model, design=design,
    )
    cert = ds.fit_decay(traj, (1.5, 5.0))
    assert cert.fitted_rate == pytest.approx(2.0, abs=1e-12)
    assert cert.passed


def test_fit_window_validation(scalar_loop):
    _, _, traj = scalar_loop
    with pytest.raises(SimulationError, match="window"):
        ds.fit_decay(traj, (0.1, 8.0))
    with pytest.raises(SimulationError, match="window"):
        ds.fit_decay(traj, (2.0, 9.5))
    with pytest.raises(SimulationError, match="10 samples"):
        ds.fit_decay(traj, (7.99, 8.0))


def test_step_alignment_errors(scalar_model, scalar_split):
    design = ds.design_from_gain(scalar_split, TAU_SC, [[G_SC]], sigma_star=0.9)
    kernel = ds.solve_kernel(design, 2.0, 0.01, residual_tol=np.inf)
    z0 = np.array([1.0])
    with pytest.raises(SimulationError, match="divide the delay"):
        ds.simulate_linear(scalar_model, scalar_split, design, kernel,
                           z0, None, 2.0, 0.007)
    with pytest.raises(SimulationError, match="kernel step"):
        ds.simulate_linear(scalar_model, scalar_split, design, kernel,
                           z0, None, 2.0, 0.005)
    with pytest.raises(SimulationError, match="horizon"):
        ds.simulate_linear(scalar_model, scalar_split, design, kernel,
                           z0, None, 4.0, 0.01)


def test_strong_witness_only_for_distributed(heat_boundary):
    model, split = heat_boundary
    design = ds.design_gain(split, tau=0.3, sigma_star=0.65)
    kernel = ds.solve_kernel(design, 2.0, 0.01, residual_tol=np.inf)
    z0 = np.sin(model.grid)
    traj = ds.simulate_linear(model, split, design, kernel, z0, None, 2.0, 0.01)
    cert = ds.fit_decay(traj, (0.6, 2.0))
    assert cert.strong_witness is None


def test_witness_stable_under_refinement(scalar_model, scalar_split):
    design = ds.design_from_gain(scalar_split, TAU_SC, [[G_SC]], sigma_star=0.9)
    witnesses = []
    for dt in (0.02, 0.01, 0.005):
        kernel = ds.solve_kernel(design, 6.0, dt, residual_tol=np.inf)
        traj = ds.simulate_linear(scalar_model, scalar_split, design, kernel,
                                  np.array([1.0]), None, 6.0, dt)
        witnesses.append(ds.fit_decay(traj, (1.5, 6.0)).constant_witness)
    assert all(np.isfinite(w) for w in witnesses)
    assert abs(witnesses[1] - witnesses[2]) < 0.01 * witnesses[2]
    assert abs(witnesses[0] - witnesses[2]) < 0.05 * witnesses[2]


def test_feedback_equals_delayed_transformed_state(scalar_loop):
    # the memory law reproduces the predictor form: v(t) = G w(t - tau)
    design, kernel, traj = scalar_loop
    p = kernel.delay_steps
    v_pred = traj.transformed[:-p] @ design.gain_input.T
    gap = np.max(np.abs(traj.controls[p:] - v_pred))
    assert gap < 5e-4 * np.max(np.abs(traj.controls))


def test_complex_pair_pipeline():
    # rotating unstable pair 0.3 +- 2i plus one stable mode
    A = np.array([[0.3, 2.0, 0.0], [-2.0, 0.3, 0.0], [0.0, 0.0, -3.0]])
    model = ds.build_custom_lti(A, np.eye(3), shift=5.0)
    split = ds.compute_split(model, 0.5)
    assert split.unstable_dim == 2
    assert split.n_directions == 1
    vals = sorted(e.value.imag for e in split.unstable_eigenvalues)
    assert vals == pytest.approx([-2.0, 2.0])
    rep = ds.hautus_check(split, model)
    assert rep.overall_pass and rep.verdicts_agree

    design = ds.design_gain(split, tau=0.25)
    assert design.rank == 1
    assert design.achieved_abscissa < -design.sigma_star
    dt = 0.00625
    kernel = ds.solve_kernel(design, 8.0, dt, residual_tol=np.inf)
    traj = ds.simulate_linear(model, split, design, kernel,
                              np.array([1.0, -0.5, 1.0]), None, 8.0, dt)
    cert = ds.fit_decay(traj, (1.0, 8.0))
    assert cert.passed
    gate = 2e-3 * np.max(np.abs(traj.transformed))
    assert traj.residual_lookahead.max() < gate


def test_double_eigenvalue_needs_two_directions():
    # lambda = 1 with a two-dimensional eigenspace: the direction budget
    # is 2 and the gain must use both
    A = np.diag([1.0, 1.0, -3.0])
    model = ds.build_custom_lti(A, np.eye(3), shift=5.0)
    split = ds.compute_split(model, 0.5)
    assert split.unstable_dim == 2
    assert split.n_directions == 2
    info = split.unstable_eigenvalues[0]
    assert (info.algebraic_mult, info.geometric_mult) == (2, 2)

    design = ds.design_gain(split, tau=0.2)
    assert design.rank == 2
    assert design.achieved_abscissa < -design.sigma_star
    dt = 0.01
    kernel = ds.solve_kernel(design, 6.0, dt, residual_tol=np.inf)
    traj = ds.simulate_linear(model, split, design, kernel,
                              np.array([1.0, 1.0, 0.3]), None, 6.0, dt)
    assert ds.fit_decay(traj, (0.5, 6.0)).passed
