import numpy as np
import pytest
import scipy.linalg as la

import delaystab as ds
from delaystab.errors import SpectralSplitError

INV_TOL = 1e-10


def _check_invariants(split):
    for name, val in split.invariant_residuals.items():
        assert val < INV_TOL, f"{name} residual {val}"


def test_diagonal_split():
    m = ds.build_custom_lti(np.diag([1.0, 2.0, -3.0]), np.eye(3), shift=10.0)
    sp = ds.compute_split(m, 0.5)
    assert sp.unstable_dim == 2
    assert sp.n_directions == 1
    assert sorted(e.value.real for e in sp.unstable_eigenvalues) == [1.0, 2.0]
    assert np.allclose(sp.projector, np.diag([1.0, 1.0, 0.0]), atol=1e-12)
    assert sp.stable_abscissa == pytest.approx(3.0)
    _check_invariants(sp)


def test_heat_single_unstable_mode(heat_distributed):
    _, sp = heat_distributed
    assert sp.unstable_dim == 1
    assert sp.n_directions == 1
    lam = sp.unstable_eigenvalues[0].value
    assert abs(lam - 1.0) < 1e-3
    assert abs(sp.stable_abscissa - 2.0) < 1e-2
    _check_invariants(sp)


def test_jordan_whole_space_unstable(jordan_split):
    _, sp = jordan_split
    assert sp.unstable_dim == 2
    info = sp.eigenvalues[0]
    assert info.algebraic_mult == 2
    assert info.geometric_mult == 1
    assert sp.n_directions == 1
    assert np.allclose(sp.projector, np.eye(2), atol=1e-12)
    _check_invariants(sp)


def test_nonnormal_drift_invariants():
    m = ds.build_convection_diffusion_1d(np.pi, 150, 1.0, 1.5, 2.0,
                                         "distributed", (0.5, 2.5))
    sp = ds.compute_split(m, 0.5)
    _check_invariants(sp)
    # oblique projection still reproduces A-invariance
    A = m.generator
    P = sp.projector
    assert np.max(np.abs(P @ A - A @ P)) < 1e-8 * np.linalg.norm(A)


def test_eigenvalue_on_boundary_rejected(heat_distributed):
    model, _ = heat_distributed
    # the second mode sits near -2; a target of 2 puts it on the line
    with pytest.raises(SpectralSplitError, match="ill-posed"):
        ds.compute_split(model, 2.0)


def test_similarity_invariance():
    rng = np.random.default_rng(42)
    cases = [
        (np.diag([1.0, 2.0, -3.0]), np.eye(3)),
        (np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2)),
    ]
    for A, B in cases:
        ref = ds.compute_split(ds.build_custom_lti(A, B, shift=10.0), 0.5)
        ref_vals = sorted((e.value.real, e.value.imag) for e in ref.unstable_eigenvalues)
        n = A.shape[0]
        for _ in range(5):
            Q1 = np.linalg.qr(rng.normal(size=(n, n)))[0]
            Q2 = np.linalg.qr(rng.normal(size=(n, n)))[0]
            S = Q1 @ np.diag(rng.uniform(0.5, 2.0, n)) @ Q2
            Si = np.linalg.inv(S)
            mt = ds.build_custom_lti(S @ A @ Si, S @ B, shift=10.0)
            spt = ds.compute_split(mt, 0.5)
            assert spt.unstable_dim == ref.unstable_dim
            assert spt.n_directions == ref.n_directions
            vals = sorted((e.value.real, e.value.imag) for e in spt.unstable_eigenvalues)
            for (r0, i0), (r1, i1) in zip(ref_vals, vals):
                assert abs(r0 - r1) < 1e-8 and abs(i0 - i1) < 1e-8


def test_grid_refinement_keeps_counts():
    for n in (100, 200):
        m = ds.build_convection_diffusion_1d(np.pi, n, 1.0, 0.0, 2.0,
                                             "distributed", (0.3 * np.pi, 0.6 * np.pi))
        sp = ds.compute_split(m, 0.5)
        assert sp.unstable_dim == 1
        assert sp.n_directions == 1


def test_stable_block_exponential_witness(heat_distributed):
    model, sp = heat_distributed
    coarse = np.linspace(0.05, 3.0, 24)
    c = ds.stable_decay_constant(sp, model, coarse)
    assert np.isfinite(c) and c >= 0.99
    # the constant measured once bounds the decay on a finer grid
    A = model.generator
    Q = np.eye(model.state_dim) - sp.projector
    for t in np.linspace(0.07, 2.9, 37):
        nrm = np.linalg.norm(la.expm(t * A) @ Q, 2)
        assert nrm <= 1.0001 * c * np.exp(-sp.stable_abscissa * t)


def test_hautus_identity_input():
    m = ds.build_custom_lti(np.diag([1.0, 2.0, -3.0]), np.eye(3), shift=10.0)
    sp = ds.compute_split(m, 0.5)
    rep = ds.hautus_check(sp, m)
    assert rep.overall_pass and rep.verdicts_agree
    for _, smin, ok, smin_t, ok_t in rep.entries:
        assert abs(smin - 1.0) < 1e-12
        assert ok and ok_t


def test_hautus_boundary_normal_derivative(heat_boundary):
    model, sp = heat_boundary
    rep = ds.hautus_check(sp, model)
    assert rep.overall_pass and rep.verdicts_agree
    lam, smin, *_ = rep.entries[0]
    # single unstable mode k = 1: coupling approximates sqrt(2/pi)
    assert abs(smin - np.sqrt(2 / np.pi)) < 0.05


def test_hautus_blind_actuator_fails():
    m = ds.build_custom_lti(np.diag([1.0, -2.0]), [[0.0], [1.0]], shift=5.0)
    sp = ds.compute_split(m, 0.5)
    rep = ds.hautus_check(sp, m)
    assert not rep.overall_pass
    assert rep.verdicts_agree
    lam, smin, ok, smin_t, ok_t = rep.entries[0]
    assert lam == pytest.approx(1.0)
    assert smin == 0.0 and not ok and not ok_t


def test_input_subspace_dimensions(heat_distributed):
    _, sp = heat_distributed
    assert sp.input_basis_unstable.shape == (1, 1)
    assert sp.B_block.shape == (1, 1)
    # orthonormal columns
    V = sp.input_basis_unstable
    assert np.allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-12)


def test_empty_unstable_set():
    m = ds.build_custom_lti(np.diag([-1.0, -2.0]), np.eye(2), shift=5.0)
    sp = ds.compute_split(m, 0.5)
    assert sp.unstable_dim == 0
    assert sp.n_directions == 0
    assert np.all(sp.projector == 0.0)
    rep = ds.hautus_check(sp, m)
    assert rep.overall_pass and rep.entries == ()


def test_input_projectors(heat_distributed):
    _, sp = heat_distributed
    P_in = sp.input_projector_unstable()
    assert P_in.shape == (1, 1)
    assert np.allclose(P_in @ P_in, P_in, atol=1e-14)
    # with a single actuator both reachable subspaces fill U
    assert np.allclose(P_in, 1.0)
    assert np.allclose(sp.input_projector_stable(), 1.0)
