"""System representations, structural validation and coordinate changes.

Two realizations live here: the general descriptor form (E, A, B, C) and
the structured port-Hamiltonian form (J, R, Q, B) with

    dx/dt = (J - R) Q x + B u,      y = B^T Q x,

J skew-symmetric, R symmetric positive semidefinite and Q symmetric
positive definite. All objects are immutable after construction and all
operations are pure functions.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import _linalg as la
from .errors import (
    BadParams,
    DimensionMismatch,
    NotConjugateClosed,
    SingularTransform,
    StructureViolation,
)

SKEW_TOL = 1e-12
PSD_TOL = 1e-10
PD_PIVOT_TOL = 1e-12


def _check_finite(mat, name):
    data = mat.data if sp.issparse(mat) else mat
    if data.size and not np.all(np.isfinite(data)):
        raise StructureViolation("dimension", f"{name} has non-finite entries")


def _freeze(mat):
    if not sp.issparse(mat):
        mat.setflags(write=False)
    return mat


class StateSpaceSystem:
    """Descriptor realization E x' = A x + B u, y = C x with nonsingular E.

    Matrices may be dense or scipy-sparse; sparse inputs below the dense
    crossover are densified. ``E=None`` stands for the identity.
    """

    def __init__(self, E, A, B, C):
        A = la.coerce_matrix(A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch("A must be square")
        B = la.coerce_matrix(B)
        C = la.coerce_matrix(C, column=False)
        if B.shape[0] != n:
            raise DimensionMismatch("B row count must match A")
        if C.shape[1] != n:
            raise DimensionMismatch("C column count must match A")
        self._e_is_identity = E is None
        if E is None:
            E = sp.identity(n, format="csc") if sp.issparse(A) else np.eye(n)
        else:
            E = la.coerce_matrix(E)
            if E.shape != (n, n):
                raise DimensionMismatch("E must be n-by-n")
            self._e_is_identity = la.is_identity(E)
        for name, mat in (("E", E), ("A", A), ("B", B), ("C", C)):
            _check_finite(mat, name)
        if not self._e_is_identity:
            # Nonsingularity certified by a factorization attempt.
            la.ShiftedFactor(0.0, None, -E)
        self.E = _freeze(E)
        self.A = _freeze(A)
        self.B = _freeze(B)
        self.C = _freeze(C)
        self.n = n
        self.m = B.shape[1]
        self.p = C.shape[0]

    @property
    def e_is_identity(self):
        return self._e_is_identity

    def __repr__(self):
        return (f"StateSpaceSystem(n={self.n}, m={self.m}, p={self.p}, "
                f"sparse={sp.issparse(self.A)})")


class PortHamiltonianSystem:
    """Validated port-Hamiltonian realization (J, R, Q, B).

    Construction projects J onto its exact skew part and R, Q onto their
    exact symmetric parts when the asymmetry is below the structural
    tolerance, and rejects the input otherwise. Q must be positive
    definite (certified through an attempted symmetric factorization),
    R positive semidefinite.
    """

    def __init__(self, J, R, Q, B):
        J = la.coerce_matrix(J)
        R = la.coerce_matrix(R)
        Q = la.coerce_matrix(Q)
        B = la.coerce_matrix(B)
        n = J.shape[0]
        if J.shape != (n, n) or R.shape != (n, n) or Q.shape != (n, n):
            raise StructureViolation("dimension", "J, R, Q must be square of equal size")
        if B.shape[0] != n:
            raise StructureViolation("dimension", "B row count must match J")
        for name, mat in (("J", J), ("R", R), ("Q", Q), ("B", B)):
            _check_finite(mat, name)

        if la.fro_norm(J + J.T) > SKEW_TOL * max(1.0, la.fro_norm(J)):
            raise StructureViolation("skewness", "J is not skew-symmetric")
        J = la.skew_part(J)

        if la.fro_norm(R - R.T) > SKEW_TOL * max(1.0, la.fro_norm(R)):
            raise StructureViolation("symmetry", "R is not symmetric")
        R = la.sym_part(R)
        lam_min = la.smallest_eigenvalue(R)
        if lam_min < -PSD_TOL * max(1.0, la.two_norm_est(R)):
            raise StructureViolation("PSD", f"lambda_min(R) = {lam_min:.3e}")

        if la.fro_norm(Q - Q.T) > SKEW_TOL * max(1.0, la.fro_norm(Q)):
            raise StructureViolation("symmetry", "Q is not symmetric")
        Q = la.sym_part(Q)
        la.cholesky_pd(Q, PD_PIVOT_TOL)

        self.J = _freeze(J)
        self.R = _freeze(R)
        self.Q = _freeze(Q)
        self.B = _freeze(B)
        self.n = n
        self.m = B.shape[1]

    def hamiltonian(self, x):
        """Stored energy H(x) = x^T Q x / 2."""
        return 0.5 * float(x @ (self.Q @ x))

    def __repr__(self):
        return (f"PortHamiltonianSystem(n={self.n}, m={self.m}, "
                f"sparse={sp.issparse(self.J)})")


class StateTransform:
    """Invertible state-space transformation x_new = T x."""

    def __init__(self, T):
        T = la.coerce_matrix(T)
        if T.shape[0] != T.shape[1]:
            raise SingularTransform("T must be square")
        _check_finite(T, "T")
        try:
            self._factor = la.ShiftedFactor(0.0, None, -T)
            self._factor_t = la.ShiftedFactor(0.0, None, -T.T)
        except Exception as exc:
            raise SingularTransform(f"T is numerically singular: {exc}") from exc
        self.T = _freeze(T)
        self.n = T.shape[0]

    def apply(self, mat):
        """T @ mat."""
        return self.T @ mat

    def solve(self, rhs):
        """T^{-1} @ rhs."""
        return self._factor.solve(rhs)

    def solve_transposed(self, rhs):
        """T^{-T} @ rhs."""
        return self._factor_t.solve(rhs)


class InterpolationData:
    """Interpolation points with right tangent directions.

    The set of (point, direction) pairs must be closed under complex
    conjugation; directions are normalized to unit 2-norm; points must be
    pairwise distinct. Conjugate partners are canonicalized to exact
    conjugates so downstream solves can share factorizations.
    """

    def __init__(self, points, directions):
        points = np.atleast_1d(np.asarray(points, dtype=complex))
        directions = np.asarray(directions, dtype=complex)
        if directions.ndim == 1:
            directions = directions.reshape(len(points), -1)
        if directions.shape[0] != len(points):
            raise BadParams("one direction per interpolation point required")
        norms = np.linalg.norm(directions, axis=1)
        if np.any(norms == 0):
            raise BadParams("zero tangent direction")
        directions = directions / norms[:, None]

        scale = max(1e-300, float(np.max(np.abs(points))))
        r = len(points)
        for i in range(r):
            for j in range(i + 1, r):
                if abs(points[i] - points[j]) <= 1e-12 * scale:
                    raise BadParams(
                        f"interpolation points {i} and {j} coincide within tolerance"
                    )

        partner = np.full(r, -1, dtype=int)
        order = np.lexsort((np.abs(points.imag), points.real))
        for i in order:
            if partner[i] >= 0:
                continue
            if abs(points[i].imag) <= 1e-12 * scale:
                if np.linalg.norm(directions[i].imag) > 1e-8:
                    raise NotConjugateClosed(
                        f"real point {points[i]} carries a complex direction"
                    )
                partner[i] = i
                continue
            mate = -1
            for j in order:
                if j == i or partner[j] >= 0:
                    continue
                if abs(points[j] - np.conj(points[i])) <= 1e-12 * scale:
                    mate = j
                    break
            if mate < 0:
                raise NotConjugateClosed(f"point {points[i]} has no conjugate partner")
            if np.linalg.norm(directions[mate] - np.conj(directions[i])) > 1e-8:
                raise NotConjugateClosed(
                    f"directions of the pair at {points[i]} are not conjugate"
                )
            partner[i], partner[mate] = mate, i

        # Canonicalize: real points exactly real, partners exact conjugates.
        pts = points.copy()
        dirs = directions.copy()
        done = np.zeros(r, dtype=bool)
        for i in range(r):
            if done[i]:
                continue
            j = partner[i]
            if j == i:
                pts[i] = pts[i].real
                dirs[i] = dirs[i].real
                nrm = np.linalg.norm(dirs[i])
                if nrm == 0:
                    raise NotConjugateClosed(
                        f"direction at real point {points[i]} has no real part"
                    )
                dirs[i] = dirs[i] / nrm
                done[i] = True
            else:
                lead = i if (pts[i].imag > 0) else j
                other = j if lead == i else i
                pts[other] = np.conj(pts[lead])
                dirs[other] = np.conj(dirs[lead])
                done[i] = done[j] = True

        self.points = _freeze(pts)
        self.directions = _freeze(dirs)
        self.partner = _freeze(partner)
        self.r = r
        self.m = dirs.shape[1]

    def representatives(self):
        """Indices covering the set once: real points and Im > 0 members."""
        reps = []
        for i in range(self.r):
            if self.partner[i] == i or self.points[i].imag > 0:
                reps.append(i)
        return reps

    def __len__(self):
        return self.r


def build_ph(J, R, Q, B):
    """Validate and assemble a port-Hamiltonian system from its matrices."""
    return PortHamiltonianSystem(J, R, Q, B)


def ph_to_state_space(ph):
    """Energy-coordinate realization: E = I, A = (J - R) Q, C = B^T Q."""
    A = (ph.J - ph.R) @ ph.Q
    C = (ph.Q @ ph.B).T
    C = C.toarray() if sp.issparse(C) else np.asarray(C)
    return StateSpaceSystem(None, A, ph.B, C)


def to_coenergy(ph):
    """Co-energy realization in e = Q x: E = I, A = Q (J - R), B = Q B, C = B^T."""
    A = ph.Q @ (ph.J - ph.R)
    Bc = ph.Q @ ph.B
    C = la.as_dense(ph.B).T
    return StateSpaceSystem(None, A, Bc, C)


def apply_state_transform(ph, transform):
    """Transformed realization for x_new = T x.

    J -> T J T^T, R -> T R T^T, Q -> T^{-T} Q T^{-1}, B -> T B.
    """
    if not isinstance(transform, StateTransform):
        transform = StateTransform(transform)
    if transform.n != ph.n:
        raise DimensionMismatch("transform size does not match system order")
    T = transform.T
    J = T @ ph.J @ T.T
    R = T @ ph.R @ T.T
    B = T @ ph.B
    # Q_new = T^{-T} Q T^{-1}, formed by two triangular-free solves.
    Y = transform.solve_transposed(la.as_dense(ph.Q))
    Q = transform.solve_transposed(Y.T).T
    Q = la.sym_part(Q)
    return PortHamiltonianSystem(J, R, Q, B)


def eval_transfer(sys, s):
    """Transfer function value G(s) = C (sE - A)^{-1} B as a p-by-m array.

    One factorization and m solves; never forms an explicit inverse.
    Raises SingularPencil when s is (numerically) an eigenvalue of (A, E).
    """
    factor = la.ShiftedFactor(s, None if sys.e_is_identity else sys.E, sys.A)
    X = factor.solve(sys.B)
    return np.asarray(la.as_dense(sys.C) @ X, dtype=complex)


def transfer_derivative(sys, s):
    """G'(s) = -C (sE - A)^{-1} E (sE - A)^{-1} B."""
    E = None if sys.e_is_identity else sys.E
    factor = la.ShiftedFactor(s, E, sys.A)
    X = factor.solve(sys.B)
    EX = X if sys.e_is_identity else la.as_dense(sys.E @ X)
    return -np.asarray(la.as_dense(sys.C) @ factor.solve(EX), dtype=complex)


def power_balance(ph, x, u):
    """Instantaneous energy bookkeeping at state x under input u.

    Returns (H, supplied, dissipated) with H = x^T Q x / 2,
    supplied = u^T y for y = B^T Q x, dissipated = x^T Q R Q x, so that
    dH/dt = supplied - dissipated along trajectories.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    z = ph.Q @ x
    H = 0.5 * float(x @ z)
    y = la.as_dense(ph.B).T @ z
    supplied = float(u @ y)
    dissipated = float(z @ (ph.R @ z))
    return H, supplied, dissipated
