import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.optimize import brentq

from goldstone.bcs import (
    INFINITE,
    collective_generator,
    collective_two_point,
    critical_beta,
    finite_size_two_point,
    goldstone_statistics,
    hat_sigma_z_closed_form,
    j_hat_sigma_z_closed_form,
    limit_two_point,
    occupancy_from_variances,
    solve_gap,
    superoperator_spectrum,
    symmetry_decompose,
)
from goldstone.core_ops import ContractError, ResourceError, pauli_matrices

P = pauli_matrices()
Z, X, Y = P["z"].op, P["x"].op, P["y"].op
SWEEP = [(e, f * critical_beta(e)) for e in (0.1, 0.2, 0.3, 0.4) for f in (1.1, 1.5, 3.0)] + [
    (e, INFINITE) for e in (0.1, 0.2, 0.3, 0.4)
]


def vec(a):
    return np.asarray(a).reshape(4)


class TestGap:
    def test_critical_beta(self):
        assert abs(critical_beta(0.4) - math.log(9) / 0.8) < 1e-12
        assert abs(critical_beta(0.4) - 2.7465307) < 1e-6
        assert abs(critical_beta(1e-6) - 2) < 1e-9

    @pytest.mark.parametrize("eps", [0.0, 0.5, 0.7])
    def test_epsilon_range(self, eps):
        with pytest.raises(ContractError):
            critical_beta(eps)
        with pytest.raises(ContractError):
            solve_gap(eps, 3.0)

    def test_zero_temperature(self, sol_ground):
        assert sol_ground.mu == 0.5
        assert abs(abs(sol_ground.lam) - 0.3) < 1e-15
        assert np.allclose(sol_ground.rho, [[0.1, 0.3], [0.3, 0.9]], atol=1e-15)

    def test_beta_5_against_brent(self):
        sol = solve_gap(0.4, 5.0)
        ref = brentq(lambda m: math.tanh(5 * m) - 2 * m, 0.41, 0.5, xtol=1e-15)
        assert 0.49 < sol.mu < 0.5
        assert abs(sol.mu - ref) < 1e-12
        assert abs(sol.mu - 0.492811935817328) < 1e-13
        assert abs(sol.residual()) <= 1e-12

    @pytest.mark.parametrize("beta", [1.0, 0.9 * critical_beta(0.4), critical_beta(0.4)])
    def test_normal_phase(self, beta):
        sol = solve_gap(0.4, beta)
        assert sol.lam == 0 and not sol.broken
        assert sol.self_consistency_residual() == 0

    @pytest.mark.parametrize("eps,beta", SWEEP)
    def test_invariants(self, eps, beta):
        sol = solve_gap(eps, beta)
        assert sol.broken
        assert abs(sol.residual()) <= 1e-12
        assert abs(sol.expect(P["minus"].op) - sol.lam) < 1e-10
        assert np.allclose(sol.h, eps * Z - sol.lam * P["plus"].op - np.conj(sol.lam) * P["minus"].op)
        if math.isinf(beta):
            assert abs(abs(sol.lam) - math.sqrt(0.25 - eps**2)) < 1e-12
            evals, vecs = np.linalg.eigh(sol.h)
            assert np.allclose(sol.rho, np.outer(vecs[:, 0], vecs[:, 0].conj()), atol=1e-12)
        else:
            g = expm(-beta * sol.h)
            assert np.allclose(sol.rho, g / np.trace(g), atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-math.pi, math.pi), st.sampled_from([2.0 * critical_beta(0.3), INFINITE]))
    def test_gauge_covariance(self, phi, beta):
        s0, s = solve_gap(0.3, beta), solve_gap(0.3, beta, phi)
        assert s.lam == s0.lam * np.exp(1j * phi)
        u = expm(0.5j * phi * Z)
        assert np.allclose(u @ s0.rho @ u.conj().T, s.rho, atol=1e-10)


class TestSuperoperators:
    @pytest.mark.parametrize("eps,beta", SWEEP)
    def test_projection_algebra(self, eps, beta):
        sp = superoperator_spectrum(solve_gap(eps, beta))
        es = [sp.E_minus, sp.E_zero, sp.E_plus]
        assert np.abs(sum(es) - np.eye(4)).max() < 1e-12
        for i, a in enumerate(es):
            assert np.abs(a @ a - a).max() < 1e-12
            for j, b in enumerate(es):
                if i != j:
                    assert np.abs(a @ b).max() < 1e-12
        rng_proj = sp.E_plus + sp.E_minus
        assert np.abs(sp.J @ sp.J @ rng_proj + rng_proj).max() < 1e-12

    @pytest.mark.parametrize("eps,beta", SWEEP)
    def test_adjoint_action_and_rotation(self, eps, beta, rng):
        sol = solve_gap(eps, beta)
        sp = superoperator_spectrum(sol)
        mu = sol.mu
        for _ in range(5):
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            lhs = sol.h @ a - a @ sol.h
            assert np.allclose(lhs, -2 * mu * sp.apply("E_minus", a) + 2 * mu * sp.apply("E_plus", a), atol=1e-10)
            herm = a + a.conj().T
            ja = sp.apply("J", herm)
            assert np.allclose(ja.conj().T, ja, atol=1e-12)
        hat, e0, jhat = symmetry_decompose(sol)
        assert np.abs(sol.h @ hat - hat @ sol.h + 2j * mu * jhat).max() < 1e-12
        assert np.abs(sol.h @ jhat - jhat @ sol.h - 2j * mu * hat).max() < 1e-12

    def test_j_squared_on_hat(self, sol_ground):
        sp = superoperator_spectrum(sol_ground)
        hat = symmetry_decompose(sol_ground)[0]
        assert np.abs(sp.apply("J", sp.apply("J", hat)) + hat).max() < 1e-15

    def test_degenerate_flag(self):
        sp = superoperator_spectrum(solve_gap(0.4, 1.0))
        assert sp.degenerate


class TestDecomposition:
    def test_frozen_ground_values(self, sol_ground):
        hat, e0, jhat = symmetry_decompose(sol_ground)
        assert np.allclose(hat, 0.36 * Z + 0.48 * X, atol=1e-15)
        assert np.allclose(jhat, -0.6 * Y, atol=1e-15)
        assert np.allclose(hat @ hat, 0.36 * np.eye(2), atol=1e-15)
        assert np.allclose(jhat @ jhat, 0.36 * np.eye(2), atol=1e-15)
        assert np.allclose(e0 @ e0, 0.64 * np.eye(2), atol=1e-15)

    @pytest.mark.parametrize("eps,beta", SWEEP)
    def test_closed_forms(self, eps, beta):
        sol = solve_gap(eps, beta, phase=0.37)
        hat, e0, jhat = symmetry_decompose(sol)
        assert np.abs(hat + e0 - Z).max() < 1e-15
        assert np.abs(hat - hat_sigma_z_closed_form(sol)).max() < 1e-12
        assert np.abs(jhat - j_hat_sigma_z_closed_form(sol)).max() < 1e-12
        assert abs(sol.expect(hat)) < 1e-12 and abs(sol.expect(jhat)) < 1e-12

    def test_unbroken(self):
        hat, e0, jhat = symmetry_decompose(solve_gap(0.4, 1.0))
        assert np.abs(hat).max() < 1e-15 and np.allclose(e0, Z)


class TestStatistics:
    def test_ground_frozen(self, sol_ground):
        s = goldstone_statistics(sol_ground)
        for got, want in [
            (s.varQ, 0.36),
            (s.commutator_fluct, 0.72),
            (s.c_lambda, 0.72),
            (s.commutatorQP, 0.72),
            (s.frequency, 1.0),
            (s.var_E0, 0.0),
            (s.occupancy, 0.0),
            (s.virial_residual, 0.0),
        ]:
            assert abs(got - want) < 1e-12

    def test_frozen_finite_beta(self):
        s = goldstone_statistics(solve_gap(0.2, 3 * critical_beta(0.2)))
        assert abs(s.c_lambda - 1.677715835562766) < 1e-12
        assert abs(s.occupancy - 0.002988566101077697) < 1e-14

    @pytest.mark.parametrize("eps,beta", SWEEP)
    def test_closed_forms(self, eps, beta):
        sol = solve_gap(eps, beta)
        s = goldstone_statistics(sol)
        l2, mu = abs(sol.lam) ** 2, sol.mu
        assert abs(s.varQ - l2 / mu**2) < 1e-12
        assert abs(s.varP - s.varQ / (2 * mu) ** 2) < 1e-12
        assert abs(s.var_E0 - (eps**2 / mu**2 - 4 * eps**2)) < 1e-10
        assert abs(s.commutator_fluct - 4 * l2 / mu) < 1e-12
        assert abs(s.commutatorQP - s.c_lambda) < 1e-12
        assert abs(s.virial_residual) < 1e-12
        assert abs(occupancy_from_variances(s) - s.occupancy) < 1e-12

    def test_goldstone_disappears(self):
        s = goldstone_statistics(solve_gap(0.4, 1.0))
        assert s.varQ == 0 and s.varP == 0 and s.c_lambda == 0


class TestDynamics:
    def test_limit_two_point(self, sol_ground):
        t = np.linspace(0, 4 * np.pi, 97)
        g = limit_two_point(sol_ground, t)
        assert abs(g[0] - 0.36) < 1e-14
        assert np.abs(g.real - 0.36 * np.cos(t)).max() < 1e-10
        # ground state is an eigenstate of h: the correlator picks up positive frequency
        assert np.abs(g - 0.36 * np.exp(1j * t)).max() < 1e-10

    def test_finite_n_at_zero_time(self, sol_ground):
        tab = finite_size_two_point(sol_ground, 1, [0.0])
        assert abs(tab.g_N[0] - 0.36) < 1e-12

    def test_single_site_is_one_site_dynamics_of_h0(self, sol_ground):
        # N = 0: H_0 = eps sz - s+ s-, an exactly solvable 2x2 problem
        H0 = 0.4 * Z - P["plus"].op @ P["minus"].op
        hat = symmetry_decompose(sol_ground)[0]
        t = np.array([0.3, 1.1])
        tab = finite_size_two_point(sol_ground, 0, t)
        for ti, g in zip(t, tab.g_N):
            u = expm(1j * ti * H0)
            assert abs(g - sol_ground.expect(hat @ u @ hat @ u.conj().T)) < 1e-12

    def test_converges_to_collective_limit(self, sol_ground):
        t = np.linspace(0, 4 * np.pi, 65)
        devs = [finite_size_two_point(sol_ground, n, t).max_deviation_collective() for n in (1, 2, 3)]
        assert devs[0] > devs[1] > devs[2]

    def test_collective_limit_is_static_pair(self, sol_ground):
        # the mean-field feedback makes the generator nilpotent: no oscillation survives
        gen = collective_generator(sol_ground)
        assert np.abs(gen @ gen).max() < 1e-14
        g = collective_two_point(sol_ground, np.linspace(0, 4 * np.pi, 9))
        assert np.abs(g - 0.36).max() < 1e-12

    def test_size_cap(self, sol_ground):
        with pytest.raises(ResourceError):
            finite_size_two_point(sol_ground, 6, [0.0])
