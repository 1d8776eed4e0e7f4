import numpy as np
import pytest
import scipy.linalg as sla

from phred.core import (
    InterpolationData,
    PortHamiltonianSystem,
    StateSpaceSystem,
    StateTransform,
    apply_state_transform,
    build_ph,
    eval_transfer,
    ph_to_state_space,
    power_balance,
    to_coenergy,
)
from phred.analysis import make_signal, simulate
from phred.errors import (
    BadParams,
    DimensionMismatch,
    NotConjugateClosed,
    SingularPencil,
    SingularTransform,
    StructureViolation,
)


def minimal_ph():
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    R = np.diag([0.0, 1.0])
    Q = np.eye(2)
    B = np.array([[1.0], [0.0]])
    return build_ph(J, R, Q, B)


class TestBuildPh:
    def test_minimal_instance(self):
        ph = minimal_ph()
        assert ph.n == 2 and ph.m == 1

    def test_indefinite_q_rejected(self):
        Q = np.diag([1.0, -0.1])
        with pytest.raises(StructureViolation) as info:
            build_ph(np.zeros((2, 2)), np.zeros((2, 2)), Q, np.eye(2))
        assert info.value.kind == "PD"

    def test_ladder_example_matrices_accepted(self):
        C1, C2, L1, L2, R1, R2, R3 = 1.0, 2.0, 0.5, 0.25, 1.0, 2.0, 3.0
        J = np.array([
            [0, -1, 0, 0],
            [1, 0, -1, 0],
            [0, 1, 0, 1],
            [0, 0, -1, 0],
        ], dtype=float)
        R = np.diag([0.0, R1, 0.0, R2 + R3])
        Q = np.diag([1 / C1, 1 / L1, 1 / C2, 1 / L2])
        B = np.array([[1.0, 0], [0, 0], [0, 0], [0, 1.0]])
        ph = build_ph(J, R, Q, B)
        ss = ph_to_state_space(ph)
        assert ss.C[0, 0] == pytest.approx(1 / C1)
        assert ss.C[1, 3] == pytest.approx(1 / L2)

    def test_skewness_violation(self):
        J = np.array([[0.0, 1.0], [-0.9, 0.0]])
        with pytest.raises(StructureViolation) as info:
            build_ph(J, np.zeros((2, 2)), np.eye(2), np.eye(2))
        assert info.value.kind == "skewness"

    def test_psd_violation(self):
        R = np.diag([1.0, -1.0])
        with pytest.raises(StructureViolation) as info:
            build_ph(np.zeros((2, 2)), R, np.eye(2), np.eye(2))
        assert info.value.kind == "PSD"

    def test_tiny_asymmetry_is_projected(self):
        R = np.diag([0.0, 1.0])
        R = R + 1e-15 * np.array([[0, 1], [0, 0]])
        ph = build_ph(np.array([[0, 1], [-1, 0.0]]), R, np.eye(2),
                      np.eye(2))
        assert np.array_equal(ph.R, ph.R.T)

    def test_dimension_violation(self):
        with pytest.raises(StructureViolation):
            build_ph(np.zeros((2, 2)), np.zeros((3, 3)), np.eye(2), np.eye(2))


class TestStateSpace:
    def test_singular_e_rejected(self):
        with pytest.raises(SingularPencil):
            StateSpaceSystem(np.diag([1.0, 0.0]), np.eye(2),
                             np.ones((2, 1)), np.ones((1, 2)))

    def test_nonfinite_rejected(self):
        A = np.array([[np.nan, 0], [0, 1.0]])
        with pytest.raises(StructureViolation):
            StateSpaceSystem(None, A, np.ones((2, 1)), np.ones((1, 2)))

    def test_dimensions(self):
        with pytest.raises(DimensionMismatch):
            StateSpaceSystem(None, np.eye(2), np.ones((3, 1)), np.ones((1, 2)))


class TestPhToStateSpace:
    def test_identity_q_gives_j_minus_r(self):
        ph = minimal_ph()
        ss = ph_to_state_space(ph)
        assert np.allclose(ss.A, ph.J - ph.R)

    def test_msd6_matches_printed_matrix(self, msd6):
        m, k, c = 4.0, 4.0, 1.0
        A_ref = np.array([
            [0, 1 / m, 0, 0, 0, 0],
            [-k, -c / m, k, 0, 0, 0],
            [0, 0, 0, 1 / m, 0, 0],
            [k, 0, -2 * k, -c / m, k, 0],
            [0, 0, 0, 0, 0, 1 / m],
            [0, 0, k, 0, -2 * k, -c / m],
        ])
        assert np.array_equal(ph_to_state_space(msd6).A, A_ref)

    def test_ladder_output_matrix(self):
        from phred.models import LadderParams, build_ladder

        ph = build_ladder(LadderParams(4, [2.0, 4.0], [8.0, 5.0],
                                       [1.0, 1.0, 1.0]))
        C = ph_to_state_space(ph).C
        expected = np.zeros((2, 4))
        expected[0, 0] = 1 / 2.0
        expected[1, 3] = 1 / 5.0
        assert np.allclose(C, expected)


class TestCoenergy:
    def test_identity_q_matches_energy_form(self):
        ph = minimal_ph()
        a = ph_to_state_space(ph)
        b = to_coenergy(ph)
        assert np.allclose(a.A, b.A) and np.allclose(a.B, b.B)
        assert np.allclose(a.C, b.C)

    def test_transfer_function_preserved(self, ladder100):
        ss = ph_to_state_space(ladder100)
        co = to_coenergy(ladder100)
        for s in 1j * np.logspace(-2, 2, 10):
            ga = eval_transfer(ss, s)
            gb = eval_transfer(co, s)
            assert np.linalg.norm(ga - gb) <= 1e-10 * np.linalg.norm(ga)

    def test_state_map_via_simulation(self, msd6):
        rng = np.random.default_rng(3)
        x0 = rng.standard_normal(6)
        sig = make_signal("decaying_sinusoid")
        t_en = simulate(ph_to_state_space(msd6), sig, 10.0, x0=x0)
        e0 = np.asarray(msd6.Q) @ x0
        t_co = simulate(to_coenergy(msd6), sig, 10.0, x0=e0)
        scale = np.max(np.abs(t_en.outputs))
        assert np.max(np.abs(t_en.outputs - t_co.outputs)) <= 1e-5 * scale


class TestApplyStateTransform:
    def test_identity(self, msd6):
        out = apply_state_transform(msd6, StateTransform(np.eye(6)))
        assert np.allclose(out.J, msd6.J)
        assert np.allclose(out.Q, msd6.Q)

    def test_scaled_energy_coordinates(self, msd6):
        L = np.linalg.cholesky(np.asarray(msd6.Q))
        out = apply_state_transform(msd6, StateTransform(L.T))
        assert np.max(np.abs(out.Q - np.eye(6))) <= 1e-12

    def test_random_orthogonal_preserves_transfer(self, msd6):
        rng = np.random.default_rng(7)
        T, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        out = apply_state_transform(msd6, StateTransform(T))
        a = ph_to_state_space(msd6)
        b = ph_to_state_space(out)
        for s in 1j * np.logspace(-2, 2, 10):
            ga, gb = eval_transfer(a, s), eval_transfer(b, s)
            assert np.linalg.norm(ga - gb) <= 1e-9 * np.linalg.norm(ga)

    def test_singular_transform_rejected(self):
        with pytest.raises(SingularTransform):
            StateTransform(np.zeros((3, 3)))


class TestEvalTransfer:
    def test_scalar_system(self):
        sys = StateSpaceSystem(np.array([[1.0]]), np.array([[-1.0]]),
                               np.array([[1.0]]), np.array([[1.0]]))
        assert eval_transfer(sys, 0.0)[0, 0] == pytest.approx(1.0)

    def test_against_dense_inverse(self, msd6):
        ss = ph_to_state_space(msd6)
        s = 1j
        G = eval_transfer(ss, s)
        G_ref = np.asarray(ss.C) @ np.linalg.inv(
            s * np.eye(6) - np.asarray(ss.A)) @ np.asarray(ss.B)
        assert np.linalg.norm(G - G_ref) <= 1e-12 * np.linalg.norm(G_ref)

    def test_eigenvalue_point_is_singular(self, msd6):
        ss = ph_to_state_space(msd6)
        lam = np.linalg.eigvals(np.asarray(ss.A))[0]
        with pytest.raises(SingularPencil):
            eval_transfer(ss, lam)


class TestPowerBalance:
    def test_zero_state(self, msd6):
        H, supplied, dissipated = power_balance(msd6, np.zeros(6), np.zeros(2))
        assert H == 0 and supplied == 0 and dissipated == 0

    def test_positive_energy(self, msd6):
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.standard_normal(6)
            H, _, _ = power_balance(msd6, x, np.zeros(2))
            assert H > 0

    def test_lossless_case(self):
        J = np.array([[0, 1], [-1, 0.0]])
        ph = build_ph(J, np.zeros((2, 2)), np.eye(2), np.array([[1.0], [0]]))
        rng = np.random.default_rng(1)
        for _ in range(5):
            _, _, dissipated = power_balance(ph, rng.standard_normal(2),
                                             rng.standard_normal(1))
            assert dissipated == 0.0

    def test_matches_analytic_derivative(self, msd6):
        rng = np.random.default_rng(2)
        J, R, Q, B = (np.asarray(m) for m in (msd6.J, msd6.R, msd6.Q, msd6.B))
        for _ in range(5):
            x = rng.standard_normal(6)
            u = rng.standard_normal(2)
            H, supplied, dissipated = power_balance(msd6, x, u)
            xdot = (J - R) @ Q @ x + B @ u
            dH = x @ Q @ xdot
            assert supplied - dissipated == pytest.approx(dH, rel=1e-10)


class TestInterpolationData:
    def test_directions_normalized(self):
        data = InterpolationData([1.0 + 0j], [[3.0, 4.0]])
        assert np.linalg.norm(data.directions[0]) == pytest.approx(1.0)

    def test_missing_conjugate_rejected(self):
        with pytest.raises(NotConjugateClosed):
            InterpolationData([1j], [[1.0, 0.0]])

    def test_conjugate_pair_canonicalized(self):
        pts = [1 + 2j, 1 - 2j]
        dirs = [[1 / np.sqrt(2), 1j / np.sqrt(2)],
                [1 / np.sqrt(2), -1j / np.sqrt(2)]]
        data = InterpolationData(pts, dirs)
        i = int(np.argmax(data.points.imag))
        j = data.partner[i]
        assert data.points[j] == np.conj(data.points[i])
        assert np.array_equal(data.directions[j], np.conj(data.directions[i]))

    def test_coincident_points_rejected(self):
        with pytest.raises(BadParams):
            InterpolationData([1.0, 1.0 + 1e-15], [[1.0], [1.0]])

    def test_complex_direction_at_real_point_rejected(self):
        with pytest.raises(NotConjugateClosed):
            InterpolationData([1.0 + 0j],
                              [[1 / np.sqrt(2), 1j / np.sqrt(2)]])
