import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from boojum import closedform_inf as cf
from boojum import profile1d as p1
from boojum import qtensor as qt

KAPPA = cf.KAPPA


class TestExactProfile:
    def test_initial_value(self):
        for varphi in (0.3, math.pi / 4, 1.2):
            n = cf.n_exact(0.0, cf.InfProfileParams(varphi))
            assert n[2] == pytest.approx(math.cos(varphi), abs=1e-14)
            assert n[0] == pytest.approx(-math.sin(varphi), abs=1e-12)
            assert n[1] == 0.0

    def test_far_field_limit(self):
        n = cf.n_exact(50.0, cf.InfProfileParams(math.pi / 3))
        assert abs(n[2] - 1.0) < 1e-12

    def test_quarter_turn_closed_form_value(self):
        # at t = 1/kappa the exponential factor is exactly 1/e
        n = cf.n_exact(1.0 / KAPPA, cf.InfProfileParams(math.pi / 2))
        expected = (1.0 - math.exp(-1.0)) / (1.0 + math.exp(-1.0))
        assert n[2] == pytest.approx(expected, abs=1e-14)

    def test_ode_oracle(self):
        # independent check: integrate dn3/dt = kappa (1 - n3^2)/2
        varphi = 1.1
        sol = solve_ivp(
            lambda t, y: 0.5 * KAPPA * (1.0 - y**2),
            (0.0, 6.0),
            [math.cos(varphi)],
            rtol=1e-11,
            atol=1e-13,
            dense_output=True,
        )
        ts = np.linspace(0.0, 6.0, 40)
        closed = cf.n_exact(ts, cf.InfProfileParams(varphi))[:, 2]
        assert np.max(np.abs(sol.sol(ts)[0] - closed)) < 1e-9

    def test_degenerate_angles(self):
        n = cf.n_exact(np.array([0.0, 1.0, 7.0]), cf.InfProfileParams(0.0))
        assert np.allclose(n[:, 2], 1.0)
        with pytest.raises(ValueError):
            cf.n_exact(1.0, cf.InfProfileParams(math.pi))
        with pytest.raises(ValueError):
            cf.InfProfileParams(-0.1)

    def test_unit_norm(self):
        ts = np.linspace(0, 12, 101)
        n = cf.n_exact(ts, cf.InfProfileParams(0.9))
        assert np.max(np.abs(np.linalg.norm(n, axis=1) - 1.0)) < 1e-14


class TestExactDensity:
    def test_aligned_start(self):
        assert cf.D_inf_exact(np.array([0.0, 0.0, 1.0])) == 0.0

    def test_equatorial_start(self):
        assert cf.D_inf_exact(np.array([1.0, 0.0, 0.0])) == pytest.approx(KAPPA, abs=1e-14)
        assert KAPPA == pytest.approx(2.21336, abs=5e-6)

    def test_longitudinal_at_polar_angle(self):
        # v = -e_phi at polar angle p has |v3| = sin(p)
        for p in (0.3, 1.0, 1.4):
            v = -np.array([math.cos(p), 0.0, -math.sin(p)])
            assert cf.D_inf_exact(v) == pytest.approx(KAPPA * (1 - math.sin(p)), abs=1e-13)

    def test_sign_identification(self, rng):
        for _ in range(10):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            assert cf.D_inf_exact(v) == pytest.approx(cf.D_inf_exact(-v), abs=1e-14)


class TestDecayEnvelope:
    def test_at_zero(self):
        assert cf.decay_envelope(0.0) >= 1.0

    def test_dominates_n1(self):
        val = cf.n1_squared(2.0, math.pi / 2)
        assert val <= cf.decay_envelope(2.0)

    def test_dominates_fd_time_derivative(self):
        d = 1e-6
        p = cf.InfProfileParams(math.pi / 2)
        n_up = cf.n_exact(1.0 + d, p)
        n_dn = cf.n_exact(1.0 - d, p)
        fd = np.sum(((n_up - n_dn) / (2 * d)) ** 2)
        assert fd <= cf.decay_envelope(1.0)

    def test_envelope_over_sample_grid(self):
        ts = np.linspace(0.0, 10.0, 101)
        env = cf.decay_envelope(ts)
        for varphi in (0.2, 0.8, math.pi / 3, math.pi / 2):
            assert np.all(cf.dn_dt_squared(ts, varphi) <= env)
            assert np.all(cf.dn_dvarphi_squared(ts, varphi) <= env)
            assert np.all(cf.n1_squared(ts, varphi) <= env)

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError):
            cf.decay_envelope(-1.0)


class TestOracleAgreement:
    def test_energy_of_exact_path(self):
        # the closed-form path's discrete energy matches kappa (1 - cos(varphi))
        grid = p1.Grid1D(12.0, 1537)
        for varphi in (math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2):
            path = cf.n_exact(grid.nodes, cf.InfProfileParams(varphi))
            prof = p1.Profile(grid, p1.DIRECTOR, path)
            e = p1.energy_F_lambda(prof, math.inf)
            assert e == pytest.approx(KAPPA * (1 - math.cos(varphi)), abs=1e-4)

    def test_minimality_under_perturbation(self, rng, grid_medium):
        varphi = math.pi / 3
        v3 = math.cos(varphi)
        base = cf.n_exact(grid_medium.nodes, cf.InfProfileParams(varphi))
        pert = base.copy()
        bump = 0.2 * np.sin(np.pi * grid_medium.nodes / grid_medium.length)
        pert[:, 1] += bump * rng.uniform(0.5, 1.0)
        pert /= np.linalg.norm(pert, axis=1, keepdims=True)
        Q0 = qt.uniaxial(base[0], 1.0)
        prof, rep = p1.minimize_profile(
            Q0, math.inf, grid_medium, p1.SolveOptions(init=pert)
        )
        assert rep.energy >= KAPPA * (1 - v3) - 1e-4
        assert np.max(np.abs(prof.values[:, 2] - base[:, 2])) < 1e-3

    def test_planarity_of_minimizers(self, rng, grid_medium):
        # random non-planar initializations relax back into the (v, e3) plane
        varphi = 1.0
        base = cf.n_exact(grid_medium.nodes, cf.InfProfileParams(varphi))
        for _ in range(3):
            pert = base.copy()
            s = np.sin(np.pi * grid_medium.nodes / grid_medium.length)
            pert[:, 0] += 0.3 * s * rng.normal()
            pert[:, 1] += 0.3 * s * rng.normal()
            pert /= np.linalg.norm(pert, axis=1, keepdims=True)
            prof, rep = p1.minimize_profile(
                qt.uniaxial(base[0], 1.0), math.inf, grid_medium, p1.SolveOptions(init=pert)
            )
            assert np.max(np.abs(prof.values[:, 1])) <= 1e-3
