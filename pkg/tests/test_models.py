import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phred.core import ph_to_state_space
from phred.errors import BadParams
from phred.models import LadderParams, MsdParams, build_ladder, build_msd
import phred._linalg as la


def controllability_rank(A, B, tol=1e-10):
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    K = np.hstack(blocks)
    s = np.linalg.svd(K, compute_uv=False)
    return int(np.sum(s > tol * s[0]))


class TestMsd:
    def test_n6_matches_printed_matrices(self, msd6):
        m, k, c = 4.0, 4.0, 1.0
        J_ref = np.kron(np.eye(3), np.array([[0, 1], [-1, 0.0]]))
        R_ref = np.diag([0, c, 0, c, 0, c])
        Q_ref = np.array([
            [k, 0, -k, 0, 0, 0],
            [0, 1 / m, 0, 0, 0, 0],
            [-k, 0, 2 * k, 0, -k, 0],
            [0, 0, 0, 1 / m, 0, 0],
            [0, 0, -k, 0, 2 * k, 0],
            [0, 0, 0, 0, 0, 1 / m],
        ])
        B_ref = np.zeros((6, 2))
        B_ref[1, 0] = B_ref[3, 1] = 1.0
        assert np.array_equal(np.asarray(msd6.J), J_ref)
        assert np.array_equal(np.asarray(msd6.R), R_ref)
        assert np.array_equal(np.asarray(msd6.Q), Q_ref)
        assert np.array_equal(np.asarray(msd6.B), B_ref)

    def test_n8_extension_entries(self):
        ph = build_msd(MsdParams(8, 4.0, 4.0, 1.0))
        A = np.asarray(ph_to_state_space(ph).A)
        m, k, c = 4.0, 4.0, 1.0
        assert A[6, 6] == 0.0
        assert A[7, 7] == pytest.approx(-c / m)
        assert A[5, 6] == pytest.approx(k)        # (n-2, n-1)
        assert A[6, 7] == pytest.approx(1 / m)    # (n-1, n)
        assert A[6, 5] == 0.0                     # (n-1, n-2)
        assert A[7, 6] == pytest.approx(-2 * k)   # (n, n-1)
        assert A[7, 4] == pytest.approx(k)        # (n, n-3)

    def test_n8_against_hand_derived_equations_of_motion(self):
        # Four masses, chained springs, last spring anchored, dampers to
        # ground: x = (q1, p1, ..., q4, p4).
        rng = np.random.default_rng(5)
        m = rng.uniform(1, 5, 4)
        k = rng.uniform(1, 5, 4)
        c = rng.uniform(0.1, 2, 4)
        ph = build_msd(MsdParams(8, m, k, c))
        A = np.asarray(ph_to_state_space(ph).A)
        A_ref = np.zeros((8, 8))
        for i in range(4):
            A_ref[2 * i, 2 * i + 1] = 1 / m[i]          # dq_i = p_i / m_i
            A_ref[2 * i + 1, 2 * i + 1] = -c[i] / m[i]  # damper force
            # spring force on mass i: -k_{i-1}(q_i - q_{i-1}) - k_i(q_i - q_{i+1})
            A_ref[2 * i + 1, 2 * i] -= k[i]
            if i > 0:
                A_ref[2 * i + 1, 2 * i] -= k[i - 1]
                A_ref[2 * i + 1, 2 * (i - 1)] += k[i - 1]
            if i < 3:
                A_ref[2 * i + 1, 2 * (i + 1)] += k[i]
        assert np.allclose(A, A_ref, rtol=0, atol=1e-14)

    def test_minimality_at_n6(self, msd6):
        ss = ph_to_state_space(msd6)
        A, B, C = (np.asarray(x) for x in (ss.A, ss.B, ss.C))
        assert controllability_rank(A, B) == 6
        assert controllability_rank(A.T, C.T) == 6

    def test_stable_for_positive_damping(self, msd100):
        A = la.as_dense(ph_to_state_space(msd100).A)
        assert la.spectral_abscissa(A) < 0

    def test_deterministic(self):
        a = build_msd(MsdParams(12, 2.0, 3.0, 0.5))
        b = build_msd(MsdParams(12, 2.0, 3.0, 0.5))
        for x, y in ((a.J, b.J), (a.R, b.R), (a.Q, b.Q), (a.B, b.B)):
            assert np.array_equal(np.asarray(x), np.asarray(y))

    def test_bad_params(self):
        with pytest.raises(BadParams):
            MsdParams(5)
        with pytest.raises(BadParams):
            MsdParams(6, masses=0.0)
        with pytest.raises(BadParams):
            MsdParams(6, dampings=-1.0)
        with pytest.raises(BadParams):
            MsdParams(6, stiffnesses=[1.0, 2.0])


class TestLadder:
    def test_n4_matches_example(self):
        C1, C2, L1, L2, R1, R2, R3 = 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5
        ph = build_ladder(LadderParams(4, [C1, C2], [L1, L2], [R1, R2, R3]))
        J_ref = np.array([
            [0, -1, 0, 0],
            [1, 0, -1, 0],
            [0, 1, 0, 1],
            [0, 0, -1, 0.0],
        ])
        assert np.array_equal(np.asarray(ph.J), J_ref)
        assert np.array_equal(np.asarray(ph.R),
                              np.diag([0.0, R1, 0.0, R2 + R3]))
        assert np.array_equal(np.asarray(ph.Q),
                              np.diag([1 / C1, 1 / L1, 1 / C2, 1 / L2]))
        B_ref = np.zeros((4, 2))
        B_ref[0, 0] = B_ref[3, 1] = 1.0
        assert np.array_equal(np.asarray(ph.B), B_ref)

    def test_benchmark_parameters_stable(self, ladder100):
        R = np.asarray(ladder100.R)
        assert R[1, 1] == 3.0
        assert R[99, 99] == pytest.approx(4.0)  # R_50 + R_51 = 3 + 1
        A = la.as_dense(ph_to_state_space(ladder100).A)
        assert la.spectral_abscissa(A) < 0

    def test_n6_extension_entries(self):
        C = np.array([1.0, 2.0, 3.0])
        L = np.array([4.0, 5.0, 6.0])
        R = np.array([1.5, 2.5, 3.5, 4.5])
        ph = build_ladder(LadderParams(6, C, L, R))
        A = np.asarray(ph_to_state_space(ph).A)
        assert A[3, 2] == pytest.approx(1 / C[1])      # plus sign at (n/2+1, n/2)
        assert A[4, 3] == pytest.approx(1 / L[1])      # subdiagonal L_{n/2-1}^{-1}
        assert A[5, 4] == pytest.approx(-1 / C[2])     # subdiagonal -C_{n/2}^{-1}
        assert A[2, 3] == pytest.approx(-1 / L[1])     # minus sign at (n/2, n/2+1)
        assert A[3, 4] == pytest.approx(-1 / C[2])
        assert A[4, 5] == pytest.approx(1 / L[2])
        assert A[3, 3] == pytest.approx(-R[1] / L[1])  # (n-2, n-2)
        assert A[4, 4] == 0.0
        assert A[5, 5] == pytest.approx(-(R[2] + R[3]) / L[2])

    def test_bad_params(self):
        with pytest.raises(BadParams):
            LadderParams(3)
        with pytest.raises(BadParams):
            LadderParams(4, capacitances=-1.0)
        with pytest.raises(BadParams):
            LadderParams(4, resistances=[1.0, 2.0])


@settings(max_examples=25, deadline=None)
@given(
    n_half=st.integers(min_value=2, max_value=20),
    m=st.floats(min_value=0.1, max_value=10),
    k=st.floats(min_value=0.1, max_value=10),
    c=st.floats(min_value=0.0, max_value=5),
)
def test_msd_invariants_property(n_half, m, k, c):
    ph = build_msd(MsdParams(2 * n_half, m, k, c))
    J = np.asarray(ph.J)
    assert np.array_equal(J, -J.T)
    assert np.min(np.diag(np.asarray(ph.R))) >= 0


@settings(max_examples=25, deadline=None)
@given(
    n_half=st.integers(min_value=2, max_value=20),
    cap=st.floats(min_value=0.05, max_value=10),
    ind=st.floats(min_value=0.05, max_value=10),
    res=st.floats(min_value=0.0, max_value=10),
)
def test_ladder_invariants_property(n_half, cap, ind, res):
    ph = build_ladder(LadderParams(2 * n_half, cap, ind, res))
    J = np.asarray(ph.J)
    assert np.array_equal(J, -J.T)
    assert np.min(np.diag(np.asarray(ph.Q))) > 0
