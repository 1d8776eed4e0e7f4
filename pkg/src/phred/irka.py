"""H2-inspired fixed-point iterations and their optimality certificates.

The structured iteration reduces with the port-Hamiltonian projection,
reflects the reduced poles across the imaginary axis into new
interpolation points and takes new tangent directions from the reduced
residues, until the shift set settles. Every intermediate model is a
valid port-Hamiltonian system. The unstructured variant is the classical
two-sided iteration and is kept as a baseline; it may pass through
unstable intermediates.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _linalg as la
from .core import InterpolationData, PortHamiltonianSystem, StateSpaceSystem, \
    eval_transfer, ph_to_state_space, transfer_derivative
from .errors import (
    BadParams,
    DefectiveEigenproblem,
    MaxIterationsExceeded,
    NotConverged,
    RepeatedPoles,
    SingularPencil,
    UnstableIterate,
)
from .reduction import ph_project, petrov_galerkin_reduce, realify, \
    tangential_basis

_DEFECT_COND = 1e12


@dataclass(frozen=True)
class IrkaOptions:
    """Iteration controls. stagnation_window = 0 disables the plateau guard."""

    max_iterations: int = 100
    shift_tolerance: float = 1e-6
    stagnation_window: int = 5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise BadParams("max_iterations must be >= 1")
        if self.shift_tolerance <= 0:
            raise BadParams("shift_tolerance must be positive")


class IrkaTrace:
    """Per-iteration record of a fixed-point run.

    Shift sets are closed under conjugation at every iteration. Final
    modal data (eigenvalues, right eigenvector matrix and the residue
    direction rows) describe the returned model.
    """

    def __init__(self):
        self.shift_history = []       # shift set after each update
        self.shift_changes = []       # matched relative change per iteration
        self.eigenvalue_history = []  # reduced eigenvalues per iteration
        self.unstable_iterations = []
        self.perturbation_events = []
        self.converged = False
        self.iterations = 0
        self.final_eigenvalues = None
        self.final_eigenvectors = None
        self.final_directions = None  # rows b_i^T of the modal input map
        self.basis = None             # real basis of the returned model

    def record(self, shifts, change, eigenvalues):
        self.shift_history.append(np.array(shifts))
        self.shift_changes.append(float(change))
        self.eigenvalue_history.append(np.array(eigenvalues))
        self.iterations += 1

    def set_final(self, eigenvalues, eigenvectors, directions, converged):
        self.final_eigenvalues = eigenvalues
        self.final_eigenvectors = eigenvectors
        self.final_directions = directions
        self.converged = converged

    def to_dict(self):
        def clist(arr):
            return [[float(z.real), float(z.imag)] for z in arr]

        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "shift_changes": self.shift_changes,
            "shifts": [clist(s) for s in self.shift_history],
            "reduced_eigenvalues": [clist(s) for s in self.eigenvalue_history],
            "unstable_iterations": self.unstable_iterations,
            "perturbation_events": self.perturbation_events,
        }


@dataclass(frozen=True)
class StabilityCertificate:
    """Numerical witnesses of the fixed point's stability mechanism."""

    sylvester_residual: float
    lyapunov_residual: float
    spectral_abscissa: float
    k_r_condition: float


def _sorted_order(values):
    return np.lexsort((np.sign(values.imag), np.abs(values.imag), values.real))


def _canonical_eigensystem(lam, X):
    """Sort by (Re, |Im|, sign Im) and force exact conjugate pairing."""
    order = _sorted_order(lam)
    lam = lam[order].copy()
    X = X[:, order].copy()
    scale = max(1.0, np.max(np.abs(lam)))
    r = len(lam)
    i = 0
    while i < r:
        if abs(lam[i].imag) <= 1e-10 * scale:
            lam[i] = lam[i].real
            col = X[:, i]
            k = np.argmax(np.abs(col))
            phase = col[k] / abs(col[k])
            col = (col / phase).real
            X[:, i] = col / np.linalg.norm(col)
            i += 1
        else:
            if i + 1 >= r or abs(lam[i + 1] - np.conj(lam[i])) > 1e-8 * scale:
                raise DefectiveEigenproblem(
                    "complex eigenvalue without a conjugate partner")
            lead = i if lam[i].imag > 0 else i + 1
            other = i + 1 if lead == i else i
            X[:, lead] = X[:, lead] / np.linalg.norm(X[:, lead])
            lam[other] = np.conj(lam[lead])
            X[:, other] = np.conj(X[:, lead])
            i += 2
    return lam, X


def _modal_data(Ar, Br, Er=None):
    """Eigentriplets with y_i^* (E) x_j = delta_ij; rows of F are y_i^* B_r."""
    if Er is None or la.is_identity(Er):
        lam, X = np.linalg.eig(Ar)
        lam, X = _canonical_eigensystem(lam, X)
        cond = la.condition_estimate(X)
        F = np.linalg.solve(X, Br.astype(complex))
        return lam, X, F, cond
    lam, X = sla.eig(Ar, Er, check_finite=False)
    lam, X = _canonical_eigensystem(lam, X)
    cond = la.condition_estimate(X)
    F = np.linalg.solve(Er @ X, Br.astype(complex))
    return lam, X, F, cond


def _shift_distance(new, old):
    """Greedy-matched max relative shift change.

    Pairs across the two sorted sets by increasing absolute distance so a
    mere reordering of the set never reads as a large change.
    """
    ns = np.asarray(new)[_sorted_order(np.asarray(new))]
    os = np.asarray(old)[_sorted_order(np.asarray(old))]
    r = len(ns)
    gaps = sorted(((abs(a - b), i, j) for i, a in enumerate(ns)
                   for j, b in enumerate(os)), key=lambda t: t[0])
    new_left = np.ones(r, dtype=bool)
    old_left = np.ones(r, dtype=bool)
    worst = 0.0
    matched = 0
    for gap, i, j in gaps:
        if new_left[i] and old_left[j]:
            new_left[i] = old_left[j] = False
            worst = max(worst, gap / max(abs(os[j]), np.finfo(float).tiny))
            matched += 1
            if matched == r:
                break
    return float(worst)


def _canonical_phase(v):
    """Rotate a unit vector so its first sizeable component is real positive.

    Makes singular vectors of conjugate matrices exact conjugates, which
    keeps the interpolation data conjugate-closed.
    """
    k = int(np.argmax(np.abs(v) > 1e-14))
    pivot = v[k]
    if pivot != 0:
        v = v * (np.conj(pivot) / abs(pivot))
    return v


def _singular_vector_directions(sys, points):
    """Dominant right singular vector of G(s) at each point, phase-fixed."""
    dirs = np.empty((len(points), sys.m), dtype=complex)
    for i, s in enumerate(points):
        G = eval_transfer(sys, s)
        _, _, Vh = np.linalg.svd(G)
        dirs[i] = _canonical_phase(np.conj(Vh[0]))
    return dirs


def default_init(sys, r, lo, hi):
    """Logarithmically spaced real positive points with SVD directions."""
    if r < 1:
        raise BadParams("r must be >= 1")
    if not (0 < lo < hi):
        raise BadParams("need 0 < lo < hi")
    if isinstance(sys, PortHamiltonianSystem):
        sys = ph_to_state_space(sys)
    points = np.logspace(np.log10(lo), np.log10(hi), r).astype(complex)
    return InterpolationData(points, _singular_vector_directions(sys, points))


def init_logspace_negative(sys, r, lo, hi):
    """Left-half-plane variant: points on the negative real axis."""
    if isinstance(sys, PortHamiltonianSystem):
        sys = ph_to_state_space(sys)
    points = -np.logspace(np.log10(lo), np.log10(hi), r).astype(complex)
    return InterpolationData(points, _singular_vector_directions(sys, points))


def init_complex_grid(sys, r, re_lo, re_hi, im_lo, im_hi):
    """Conjugate-closed complex points with log-spaced real/imaginary parts."""
    if r % 2:
        raise BadParams("the complex grid needs an even number of points")
    if isinstance(sys, PortHamiltonianSystem):
        sys = ph_to_state_space(sys)
    half = r // 2
    re = np.logspace(np.log10(re_lo), np.log10(re_hi), half)
    im = np.logspace(np.log10(im_lo), np.log10(im_hi), half)
    upper = re + 1j * im
    points = np.concatenate([upper, np.conj(upper)])
    return InterpolationData(points, _singular_vector_directions(sys, points))


def _select_poles(sys, r):
    """r dominant poles (largest real part), kept conjugate-closed."""
    la.require_dense_ok(sys.n, "pole-based initialization")
    A = la.as_dense(sys.A)
    if sys.e_is_identity:
        lam = np.linalg.eigvals(A)
    else:
        lam = sla.eigvals(A, la.as_dense(sys.E), check_finite=False)
    order = np.lexsort((np.abs(lam.imag), -lam.real))
    lam = lam[order]
    chosen = []
    used = np.zeros(len(lam), dtype=bool)
    scale = max(1.0, np.max(np.abs(lam)))
    for i in range(len(lam)):
        if used[i] or len(chosen) >= r:
            continue
        if abs(lam[i].imag) <= 1e-10 * scale:
            chosen.append(lam[i].real + 0j)
            used[i] = True
            continue
        if len(chosen) + 2 > r:
            continue
        mates = [j for j in range(len(lam))
                 if not used[j] and j != i
                 and abs(lam[j] - np.conj(lam[i])) <= 1e-8 * scale]
        if not mates:
            continue
        j = mates[0]
        top = lam[i] if lam[i].imag > 0 else lam[j]
        chosen += [top, np.conj(top)]
        used[i] = used[j] = True
    if len(chosen) != r:
        raise BadParams(f"could not select {r} conjugate-closed poles")
    return np.array(chosen)


def init_perturbed_poles(sys, r, eps=1e-3):
    """Dominant poles perturbed multiplicatively by eps (left half-plane)."""
    if isinstance(sys, PortHamiltonianSystem):
        sys = ph_to_state_space(sys)
    points = _select_poles(sys, r) * (1.0 + eps)
    return InterpolationData(points, _singular_vector_directions(sys, points))


def init_reflected_poles(sys, r):
    """Dominant poles mirrored across the imaginary axis."""
    if isinstance(sys, PortHamiltonianSystem):
        sys = ph_to_state_space(sys)
    points = -np.conj(_select_poles(sys, r))
    return InterpolationData(points, _singular_vector_directions(sys, points))


def _basis_with_retry(ss, data, trace):
    """Realified tangential basis; a shift colliding with the spectrum is
    perturbed by 1e-8 relative once and the event recorded."""
    try:
        return realify(tangential_basis(ss, data)), data
    except SingularPencil as exc:
        bad = exc.point
        points = data.points.copy()
        scale = max(1.0, np.max(np.abs(points)))
        moved = []
        for i, s in enumerate(points):
            hit = bad is not None and (abs(s - bad) <= 1e-8 * scale
                                       or abs(s - np.conj(bad)) <= 1e-8 * scale)
            if hit:
                points[i] = s * (1.0 + 1e-8) if s != 0 else 1e-8
                moved.append(i)
        if not moved:
            raise
        if trace is not None:
            trace.perturbation_events.append(
                {"points": moved, "reason": "shift collided with spectrum"})
        data = InterpolationData(points, data.directions)
        return realify(tangential_basis(ss, data)), data


def _h2_error_estimate(full_ss, reduced):
    """Cheap sampled estimate used only to rank stagnating iterates."""
    from .analysis import error_system, h2_norm_quadrature

    err = error_system(full_ss, reduced)
    return h2_norm_quadrature(err, rel_tol=0.05, initial=65, max_rounds=3)


def irka_ph(ph, init, opts=None):
    """Structure-preserving H2 fixed-point iteration (port-Hamiltonian).

    Iterates the structured interpolatory projection, reflecting reduced
    eigenvalues into new shifts and taking directions from the reduced
    modal input map, until the matched relative shift change falls below
    the tolerance. Returns the final reduced system and the full trace;
    every intermediate model is port-Hamiltonian.
    """
    opts = opts or IrkaOptions()
    ss = ph_to_state_space(ph)
    trace = IrkaTrace()
    data = init
    V, data = _basis_with_retry(ss, data, trace)
    model = ph_project(ph, V.columns)
    recent = []

    converged = False
    for _ in range(opts.max_iterations):
        Ar = la.as_dense((model.J - model.R) @ model.Q)
        Br = la.as_dense(model.B)
        lam, X, F, cond = _modal_data(Ar, Br)
        if cond > _DEFECT_COND:
            bumped = InterpolationData(data.points * (1.0 + 1e-8),
                                       data.directions)
            trace.perturbation_events.append(
                {"points": list(range(data.r)),
                 "reason": "defective reduced eigenproblem"})
            V, data = _basis_with_retry(ss, bumped, trace)
            model = ph_project(ph, V.columns)
            Ar = la.as_dense((model.J - model.R) @ model.Q)
            Br = la.as_dense(model.B)
            lam, X, F, cond = _modal_data(Ar, Br)
            if cond > _DEFECT_COND:
                raise DefectiveEigenproblem(
                    f"eigenvector condition {cond:.2e} after retry")

        new_points = -lam
        change = _shift_distance(new_points, data.points)
        trace.record(new_points, change, lam)

        data = InterpolationData(new_points, F)
        V, data = _basis_with_retry(ss, data, trace)
        model = ph_project(ph, V.columns)
        recent.append(model)
        if len(recent) > opts.stagnation_window:
            recent.pop(0)

        if change <= opts.shift_tolerance:
            converged = True
            break

        w = opts.stagnation_window
        tail = trace.shift_changes[-w:]
        if (w > 0 and len(trace.shift_changes) >= w
                and min(tail) > opts.shift_tolerance
                and (max(tail) - min(tail)) < 0.1 * max(tail)):
            best = min(recent, key=lambda mdl: _h2_error_estimate(ss, mdl))
            lam_f, X_f, F_f, _ = _final_modal(model)
            trace.set_final(lam_f, X_f, F_f, converged=False)
            raise MaxIterationsExceeded(
                "shift change stagnated above tolerance", trace=trace, best=best)

    lam, X, F, _ = _final_modal(model)
    trace.set_final(lam, X, F, converged=converged)
    trace.basis = V.columns
    if not converged:
        raise MaxIterationsExceeded(
            f"no convergence in {opts.max_iterations} iterations",
            trace=trace, best=model)
    return model, trace


def _final_modal(model):
    Ar = la.as_dense((model.J - model.R) @ model.Q)
    Br = la.as_dense(model.B)
    lam, X, F, cond = _modal_data(Ar, Br)
    return lam, X, F, cond


def irka_general(sys, init, opts=None):
    """Unstructured two-sided H2 fixed-point iteration (baseline).

    Both projection bases are driven by the reduced residue directions;
    on convergence the reduced model is a bitangential Hermite
    interpolant at its reflected poles. Unstable intermediate models are
    recorded in the trace as warnings, not failures.
    """
    opts = opts or IrkaOptions()
    if isinstance(sys, PortHamiltonianSystem):
        sys = ph_to_state_space(sys)
    sys_t = StateSpaceSystem(
        None if sys.e_is_identity else sys.E.T, sys.A.T,
        la.as_dense(sys.C).T, la.as_dense(sys.B).T)
    trace = IrkaTrace()
    data_b = init
    data_c = InterpolationData(init.points,
                               _left_singular_directions(sys, init.points))

    model = None
    converged = False
    for _ in range(opts.max_iterations):
        Vb, data_b = _basis_with_retry(sys, data_b, trace)
        Wb, data_c = _basis_with_retry(sys_t, data_c, trace)
        model = petrov_galerkin_reduce(sys, Vb.columns, Wb.columns)
        lam, X, F, cond = _modal_data(la.as_dense(model.A),
                                      la.as_dense(model.B),
                                      la.as_dense(model.E))
        if cond > _DEFECT_COND:
            raise DefectiveEigenproblem(
                f"eigenvector condition {cond:.2e} in reduced eigenproblem")
        if np.max(lam.real) >= 0:
            trace.unstable_iterations.append(trace.iterations)
            warnings.warn("unstructured iterate is not asymptotically stable",
                          UnstableIterate, stacklevel=2)

        new_points = -lam
        change = _shift_distance(new_points, data_b.points)
        trace.record(new_points, change, lam)
        Cx = la.as_dense(model.C).astype(complex) @ X
        data_b = InterpolationData(new_points, F)
        data_c = InterpolationData(new_points, Cx.T)
        if change <= opts.shift_tolerance:
            converged = True
            break

    if model is None:
        raise MaxIterationsExceeded("no iterations executed", trace=trace)
    Vb, data_b = _basis_with_retry(sys, data_b, trace)
    Wb, data_c = _basis_with_retry(sys_t, data_c, trace)
    model = petrov_galerkin_reduce(sys, Vb.columns, Wb.columns)
    lam, X, F, _ = _modal_data(la.as_dense(model.A), la.as_dense(model.B),
                               la.as_dense(model.E))
    trace.set_final(lam, X, F, converged=converged)
    trace.basis = Vb.columns
    if not converged:
        raise MaxIterationsExceeded(
            f"no convergence in {opts.max_iterations} iterations",
            trace=trace, best=model)
    return model, trace


def _left_singular_directions(sys, points):
    dirs = np.empty((len(points), sys.p), dtype=complex)
    for i, s in enumerate(points):
        G = eval_transfer(sys, s)
        U, _, _ = np.linalg.svd(G)
        dirs[i] = _canonical_phase(U[:, 0])
    return dirs


def reduced_modal_data(reduced):
    """Poles and residue direction pairs (lambda_k, b_k, c_k) of a small model.

    The reduced transfer function is sum_k c_k b_k^T / (s - lambda_k).
    Raises RepeatedPoles when the poles are not pairwise distinct.
    """
    if isinstance(reduced, PortHamiltonianSystem):
        reduced = ph_to_state_space(reduced)
    Er = None if reduced.e_is_identity else la.as_dense(reduced.E)
    lam, X, F, _ = _modal_data(la.as_dense(reduced.A),
                               la.as_dense(reduced.B), Er)
    scale = max(1.0, np.max(np.abs(lam)))
    for i in range(len(lam)):
        for j in range(i + 1, len(lam)):
            if abs(lam[i] - lam[j]) <= 1e-10 * scale:
                raise RepeatedPoles(
                    f"poles {i} and {j} coincide within tolerance")
    Cx = la.as_dense(reduced.C).astype(complex) @ X
    return lam, F, Cx


def h2_optimality_residuals(full, reduced):
    """Relative residuals of the three first-order H2 optimality conditions.

    Uses the reduced model's partial-fraction data: for every reduced
    pole, condition (a) matches G along the right residue direction at
    the mirrored pole, (b) along the left direction, and (c) the
    bitangential derivative; the derivative is analytic, never a finite
    difference.
    """
    if isinstance(full, PortHamiltonianSystem):
        full = ph_to_state_space(full)
    lam, F, Cx = reduced_modal_data(reduced)
    if isinstance(reduced, PortHamiltonianSystem):
        reduced = ph_to_state_space(reduced)
    res_b, res_c, res_h = [], [], []
    for k in range(len(lam)):
        s = -lam[k]
        b = F[k]
        c = Cx[:, k]
        G = eval_transfer(full, s)
        Gr = eval_transfer(reduced, s)
        gb = G @ b
        res_b.append(float(np.linalg.norm(gb - Gr @ b)
                           / max(np.linalg.norm(gb), np.finfo(float).tiny)))
        cg = c @ G
        res_c.append(float(np.linalg.norm(cg - c @ Gr)
                           / max(np.linalg.norm(cg), np.finfo(float).tiny)))
        dG = transfer_derivative(full, s)
        dGr = transfer_derivative(reduced, s)
        ref = c @ dG @ b
        res_h.append(float(abs(ref - c @ dGr @ b)
                           / max(abs(ref), np.finfo(float).tiny)))
    return res_b, res_c, res_h


def stability_certificate(ph_full, trace, basis=None):
    """Sylvester/Lyapunov witnesses of a converged structured run.

    Rebuilds the primitive interpolatory basis from the final modal data,
    reports the full-order Sylvester residual, the reduced Lyapunov
    residual through K_r = M^{-1} X_r^T, and the reduced spectral
    abscissa.
    """
    if not trace.converged:
        raise NotConverged("certificate requires a converged trace")
    if basis is None:
        basis = trace.basis
    lam = trace.final_eigenvalues
    X = trace.final_eigenvectors
    F = trace.final_directions
    ss = ph_to_state_space(ph_full)
    A, B = ss.A, la.as_dense(ss.B)

    r = len(lam)
    Vr = np.empty((ss.n, r), dtype=complex)
    done = np.zeros(r, dtype=bool)
    for i in range(r):
        if done[i]:
            continue
        rhs = B @ F[i]
        factor = la.ShiftedFactor(-lam[i], None, A)
        Vr[:, i] = factor.solve(rhs)
        done[i] = True
        for j in range(i + 1, r):
            if not done[j] and lam[j] == np.conj(lam[i]) and lam[i].imag != 0:
                Vr[:, j] = np.conj(Vr[:, i])
                done[j] = True
                break

    BF = B @ F.T  # column i is B b_i
    sylv = la.as_dense(A @ Vr) + Vr * lam[None, :] + BF
    sylvester_residual = float(
        np.linalg.norm(sylv, "fro") / np.linalg.norm(BF, "fro"))

    M, *_ = np.linalg.lstsq(Vr, basis.astype(complex), rcond=None)
    Kr = np.linalg.solve(M, X.T)
    Ar = X @ np.diag(lam) @ np.linalg.inv(X)
    Br = X @ F
    lhs = Ar @ Kr + Kr @ Ar.T + Br @ Br.T
    lyapunov_residual = float(
        np.linalg.norm(lhs, "fro") / np.linalg.norm(Br @ Br.T, "fro"))

    return StabilityCertificate(
        sylvester_residual=sylvester_residual,
        lyapunov_residual=lyapunov_residual,
        spectral_abscissa=float(np.max(lam.real)),
        k_r_condition=la.condition_estimate(Kr),
    )


def range_condition_check(ph, reduced):
    """Largest principal angle between the two residue-driven subspaces.

    A small angle certifies that the structured fixed point also meets
    the remaining bitangential optimality conditions (exact in the
    special case J = 0, where both subspaces coincide).
    """
    lam, F, Cx = reduced_modal_data(reduced)
    A1 = (ph.J - ph.R) @ ph.Q
    A2 = (ph.J - ph.R).T @ ph.Q
    B = la.as_dense(ph.B)
    r = len(lam)
    U1 = np.empty((ph.n, r), dtype=complex)
    U2 = np.empty((ph.n, r), dtype=complex)
    for k in range(r):
        U1[:, k] = la.ShiftedFactor(lam[k], None, -A1).solve(B @ F[k])
        U2[:, k] = la.ShiftedFactor(lam[k], None, -A2).solve(B @ Cx[:, k])
    Q1, _ = np.linalg.qr(U1)
    Q2, _ = np.linalg.qr(U2)
    svals = np.linalg.svd(Q1.conj().T @ Q2, compute_uv=False)
    smallest = float(np.clip(svals[-1], -1.0, 1.0))
    return float(np.arccos(smallest))
