import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boojum import qtensor as qt
from conftest import random_rotation, random_s0, random_unit, rotation_about_e3

SQRT_2_3 = math.sqrt(2.0 / 3.0)
INV_SQRT6 = 1.0 / math.sqrt(6.0)


class TestUniaxial:
    def test_far_field_entries(self):
        Q = qt.uniaxial(np.array([0.0, 0.0, 1.0]), 1.0)
        assert Q[2, 2] == pytest.approx(2.0 / 3.0, abs=1e-15)
        assert Q[0, 0] == pytest.approx(-1.0 / 3.0, abs=1e-15)
        assert Q[1, 1] == pytest.approx(-1.0 / 3.0, abs=1e-15)

    def test_zero_amplitude(self):
        assert np.all(qt.uniaxial(np.array([1.0, 0.0, 0.0]), 0.0) == 0.0)

    def test_unit_norm_and_cubic_invariant(self, rng):
        # expansion of (v x v - I/3): |Q|^2 = 2/3 and tr(Q^3) = 2/9, any unit v
        for _ in range(25):
            v = random_unit(rng)
            Q = qt.uniaxial(v, 1.0)
            # independent oracle: direct matrix arithmetic
            M = np.outer(v, v) - np.eye(3) / 3.0
            assert np.allclose(Q, M, atol=1e-15)
            assert np.sum(Q * Q) == pytest.approx(2.0 / 3.0, abs=1e-13)
            assert qt.trace_cubed(Q) == pytest.approx(2.0 / 9.0, abs=1e-13)

    def test_renormalizes_nearby_director(self):
        v = np.array([0.0, 0.0, 1.0 + 5e-7])
        Q = qt.uniaxial(v, 1.0)
        assert abs(np.trace(Q)) < 1e-14

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            qt.uniaxial(np.array([0.0, 0.0, 1.5]), 1.0)


class TestFrobInner:
    def test_far_field_norm(self):
        assert qt.frob_inner(qt.Q_INF, qt.Q_INF) == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_zero(self, rng):
        assert qt.frob_inner(random_s0(rng), np.zeros((3, 3))) == 0.0

    def test_equatorial_alignment(self, rng):
        # v perpendicular to e3: <Q_v/|Q_v|, sqrt(3/2) Q_inf> = -1/2
        for _ in range(10):
            a = rng.uniform(0, 2 * math.pi)
            v = np.array([math.cos(a), math.sin(a), 0.0])
            Qv = qt.uniaxial(v, 1.0)
            val = qt.frob_inner(Qv / np.linalg.norm(Qv), math.sqrt(1.5) * qt.Q_INF)
            assert val == pytest.approx(-0.5, abs=1e-12)

    def test_projection_formula(self, rng):
        # <Q_v, Q_inf> = v3^2 - 1/3 by expansion
        for _ in range(10):
            v = random_unit(rng)
            assert qt.frob_inner(qt.uniaxial(v, 1.0), qt.Q_INF) == pytest.approx(
                v[2] ** 2 - 1.0 / 3.0, abs=1e-13
            )


class TestBulkPotential:
    def test_vanishes_at_far_field(self):
        assert abs(qt.bulk_f(qt.Q_INF)) < 1e-12

    def test_isotropic_value_is_energy_offset(self):
        assert qt.bulk_f(np.zeros((3, 3))) == pytest.approx(2.0 / 9.0, abs=1e-15)
        assert qt.DEFAULT_PARAMS.C == pytest.approx(2.0 / 9.0, abs=1e-15)

    def test_scaled_far_field_positive(self):
        # direct evaluation oracle at Q = 2 Q_inf
        Q = 2.0 * qt.Q_INF
        n2 = np.sum(Q * Q)
        expected = 2.0 / 9.0 - 0.5 * n2 - np.einsum("ij,jk,ki->", Q, Q, Q) + 0.75 * n2**2
        assert expected > 0
        assert qt.bulk_f(Q) == pytest.approx(expected, abs=1e-13)

    def test_nonnegative_and_zero_only_uniaxial(self, rng):
        for _ in range(200):
            Q = random_s0(rng)
            assert qt.bulk_f(Q) >= -1e-12
        for _ in range(20):
            v = random_unit(rng)
            assert abs(qt.bulk_f(qt.uniaxial(v, qt.DEFAULT_PARAMS.s_star))) < 1e-12

    def test_rotation_invariance(self, rng):
        for _ in range(30):
            Q = random_s0(rng)
            R = random_rotation(rng)
            assert qt.bulk_f(R.T @ Q @ R) == pytest.approx(qt.bulk_f(Q), abs=1e-12)

    def test_custom_params_minimum(self):
        p = qt.PotentialParams(a=2.0, b=1.0, c=4.0)
        s = p.s_star
        assert s == pytest.approx((1.0 + math.sqrt(1.0 + 24 * 2 * 4)) / 16.0, abs=1e-14)
        v = np.array([0.0, 1.0, 0.0])
        assert abs(qt.bulk_f(qt.uniaxial(v, s), p)) < 1e-13


class TestFieldPotential:
    def test_far_field_zero(self):
        assert abs(qt.field_g(qt.Q_INF)) < 1e-12

    def test_uniaxial_formula(self, rng):
        # g = sqrt(3/2) (1 - n3^2) for unit-amplitude uniaxial states
        for _ in range(25):
            n = random_unit(rng)
            Q = np.outer(n, n) - np.eye(3) / 3.0
            assert qt.field_g(Q) == pytest.approx(math.sqrt(1.5) * (1 - n[2] ** 2), abs=1e-12)

    def test_scale_invariance(self, rng):
        assert abs(qt.field_g(5.0 * qt.Q_INF)) < 1e-12
        for _ in range(20):
            Q = random_s0(rng)
            t = rng.uniform(0.1, 10.0)
            assert qt.field_g(t * Q) == pytest.approx(qt.field_g(Q), abs=1e-12)

    def test_degenerate_flag(self):
        val, flag = qt.field_g_flagged(np.zeros((3, 3)))
        assert flag and val == pytest.approx(SQRT_2_3)
        val, flag = qt.field_g_flagged(qt.Q_INF)
        assert not flag

    def test_nonnegative(self, rng):
        for _ in range(200):
            assert qt.field_g(random_s0(rng)) >= -1e-14

    def test_axial_rotation_invariance(self, rng):
        for _ in range(30):
            Q = random_s0(rng)
            R = rotation_about_e3(rng.uniform(0, 2 * math.pi))
            assert qt.field_g(R.T @ Q @ R) == pytest.approx(qt.field_g(Q), abs=1e-12)


class TestTraceCubed:
    def test_far_field(self):
        assert qt.trace_cubed(qt.Q_INF) == pytest.approx(2.0 / 9.0, abs=1e-14)

    def test_zero(self):
        assert qt.trace_cubed(np.zeros((3, 3))) == 0.0

    def test_unit_uniaxial_extremes(self, rng):
        for _ in range(20):
            v = random_unit(rng)
            s = rng.choice([-1.0, 1.0])
            Q = qt.uniaxial(v, s)
            Qhat = Q / np.linalg.norm(Q)
            # eigen-decomposition oracle
            evals = np.linalg.eigvalsh(Qhat)
            assert qt.trace_cubed(Qhat) == pytest.approx(float(np.sum(evals**3)), abs=1e-13)
            assert abs(qt.trace_cubed(Qhat)) == pytest.approx(INV_SQRT6, abs=1e-12)
            assert math.copysign(1.0, qt.trace_cubed(Qhat)) == s

    def test_cubic_bound_and_equality_condition(self, rng):
        for _ in range(400):
            Q = random_s0(rng)
            Qhat = Q / np.linalg.norm(Q)
            t3 = qt.trace_cubed(Qhat)
            assert abs(t3) <= INV_SQRT6 + 1e-12
            if abs(abs(t3) - INV_SQRT6) < 1e-9:
                evals = np.sort(np.linalg.eigvalsh(Qhat))
                gaps = np.diff(evals)
                assert min(gaps) < 1e-6


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5))
def test_coefficient_roundtrip(coeffs):
    c = np.array(coeffs)
    Q = qt.to_matrix(c)
    assert abs(np.trace(Q)) < 1e-13
    assert np.allclose(Q, Q.T)
    assert np.allclose(qt.to_coeffs(Q), c, atol=1e-13)


def test_coefficient_potential_kernels_match_matrix_forms(rng):
    C = rng.normal(size=(40, 5))
    Qs = qt.to_matrix(C)
    f_vec = qt.bulk_f_coeffs(C)
    g_vec, degen = qt.field_g_coeffs(C)
    for i in range(40):
        assert f_vec[i] == pytest.approx(qt.bulk_f(Qs[i]), abs=1e-12)
        assert g_vec[i] == pytest.approx(qt.field_g(Qs[i]), abs=1e-12)
    assert not degen.any()


def test_coefficient_gradients_match_finite_differences(rng):
    C = rng.normal(size=(6, 5))
    gf = qt.bulk_f_grad_coeffs(C)
    gg = qt.field_g_grad_coeffs(C)
    d = 1e-7
    for i in range(6):
        for k in range(5):
            up, dn = C[i].copy(), C[i].copy()
            up[k] += d
            dn[k] -= d
            fd_f = (qt.bulk_f_coeffs(up) - qt.bulk_f_coeffs(dn)) / (2 * d)
            fd_g = (qt.field_g_coeffs(up)[0] - qt.field_g_coeffs(dn)[0]) / (2 * d)
            assert gf[i, k] == pytest.approx(float(fd_f), rel=1e-6, abs=1e-8)
            assert gg[i, k] == pytest.approx(float(fd_g), rel=1e-6, abs=1e-8)


def test_combined_potential_coercivity(rng):
    # f + h^2 g >= c(h) |Q - Q_inf|^2 with a positive fitted constant, h = 1
    worst = math.inf
    for _ in range(10_000):
        Q = random_s0(rng, scale=0.8)
        dist2 = float(np.sum((Q - qt.Q_INF) ** 2))
        if dist2 < 1e-10:
            continue
        val = qt.bulk_f(Q) + qt.field_g(Q)
        worst = min(worst, val / dist2)
    assert worst > 0.0
