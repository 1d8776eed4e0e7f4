"""Gramian-based baselines: balanced truncation and the effort-constraint method.

These are the dense comparison methods: Lyapunov solves are direct
(Bartels-Stewart class) and refuse orders above the configurable dense
ceiling. The balancing transformation T_b is returned in the convention
x_b = T_b x, i.e. the transformed realization (J_b = T_b J T_b^T, ...,
Q_b = T_b^{-T} Q T_b^{-1}) has equal diagonal Gramians.
"""

import warnings

import numpy as np
import scipy.linalg as sla

from . import _linalg as la
from .core import StateTransform, apply_state_transform, ph_to_state_space
from .errors import (
    BadParams,
    NearNonMinimal,
    PhredError,
    SingularSchurBlock,
    UnstableMatrix,
)

_SIGMA_FLOOR = 1e-250


class BalancingData:
    """Balancing transformation and Hankel singular values (descending)."""

    def __init__(self, transform, hankel_values):
        self.transform = transform
        self.hankel_values = hankel_values

    @property
    def T_b(self):
        return self.transform.T


def solve_lyapunov(A, M):
    """Solve A P + P A^T + M = 0 for symmetric PSD M and stable A.

    Dense direct solve; raises UnstableMatrix for non-asymptotically
    stable A and SizeLimitExceeded above the dense ceiling. The relative
    residual is verified to be at most 1e-10.
    """
    A = la.as_dense(A)
    M = la.as_dense(M)
    n = A.shape[0]
    la.require_dense_ok(n, "Lyapunov solve")
    if la.spectral_abscissa(A) >= 0:
        raise UnstableMatrix("A must be asymptotically stable")
    P = sla.solve_continuous_lyapunov(A, -M)
    P = la.sym_part(P)
    residual = np.linalg.norm(A @ P + P @ A.T + M, "fro")
    scale = max(np.linalg.norm(M, "fro"), np.finfo(float).tiny)
    if residual > 1e-10 * scale:
        raise PhredError(f"Lyapunov residual {residual / scale:.2e} above contract")
    return P


def _psd_factor(G):
    """Square factor L with G ~ L L^T from an eigendecomposition (PSD clip)."""
    lam, U = sla.eigh(la.sym_part(G), check_finite=False)
    lam = np.clip(lam, 0.0, None)
    return U * np.sqrt(lam)


def _gramian_factors(sys):
    if not sys.e_is_identity:
        raise BadParams("balancing expects an E = I realization")
    A = la.as_dense(sys.A)
    la.require_dense_ok(sys.n, "balancing")
    B = la.as_dense(sys.B)
    C = la.as_dense(sys.C)
    Gc = solve_lyapunov(A, B @ B.T)
    Go = solve_lyapunov(A.T, C.T @ C)
    return A, _psd_factor(Gc), _psd_factor(Go)


def balancing_transformation(sys):
    """Square-root balancing of an asymptotically stable E = I system.

    Returns the transformation T_b (convention x_b = T_b x) and the
    Hankel singular values. For numerically non-minimal systems a
    NearNonMinimal warning reports the truncated rank; T_b's rows beyond
    that rank are completed orthogonally so the transformation stays
    invertible (the unreachable/unobservable directions carry no
    input-output information either way).
    """
    _, Lc, Lo = _gramian_factors(sys)
    U, sigma, Vt = sla.svd(Lo.T @ Lc, check_finite=False)
    if sigma[0] == 0:
        raise PhredError("system has no reachable/observable part")
    rank = int(np.count_nonzero(sigma >= 1e-14 * sigma[0]))
    if rank < sys.n:
        warnings.warn(
            f"Hankel values span {sigma[-1] / max(sigma[0], 1e-300):.2e}; "
            f"numerical rank {rank}", NearNonMinimal, stacklevel=2)
    lead = (U[:, :rank] / np.sqrt(sigma[:rank])).T @ Lo.T
    if rank < sys.n:
        # Orthogonal completion of the row space, scaled to the leading rows.
        Qfull, _ = sla.qr(lead.T, check_finite=False)
        comp = Qfull[:, rank:].T * np.median(np.linalg.norm(lead, axis=1))
        T_b = np.vstack([lead, comp])
    else:
        T_b = lead
    return BalancingData(StateTransform(T_b), sigma)


def balanced_truncation(sys, r):
    """Regular balanced truncation to order r (not structure preserving).

    Projects directly with the leading square-root factors, so only the
    dominant Hankel directions enter the reduced realization.
    """
    if r >= sys.n:
        raise BadParams("reduction order must be < n")
    _, Lc, Lo = _gramian_factors(sys)
    U, sigma, Vt = sla.svd(Lo.T @ Lc, check_finite=False)
    if sigma[0] == 0 or sigma[min(r - 1, len(sigma) - 1)] <= 0:
        raise NearNonMinimal("requested order exceeds numerical rank")
    if sigma[r - 1] < 1e-12 * sigma[0]:
        warnings.warn(
            f"sigma_r/sigma_1 = {sigma[r - 1] / sigma[0]:.2e}; truncation is "
            "past the numerical rank", NearNonMinimal, stacklevel=2)
    scale = 1.0 / np.sqrt(sigma[:r])
    V = Lc @ (Vt[:r].T * scale)
    W = Lo @ (U[:, :r] * scale)
    from .reduction import petrov_galerkin_reduce

    return petrov_galerkin_reduce(sys, V, W)


def effort_constraint_reduce(ph, r):
    """Structure-preserving balancing reduction via the energy Schur complement.

    Partitions the balanced realization, keeps the dominant r-block of
    J_b, R_b, B_b and replaces the energy matrix by the Schur complement
    S_b = Q_b11 - Q_b12 Q_b22^{-1} Q_b21. Computed through the leading
    balancing rows W = T_b[:r, :]^T and the identity
    S_b = ((Q_b^{-1})_11)^{-1} = (W^T Q^{-1} W)^{-1}, which touches only
    the dominant Hankel directions and therefore stays well conditioned
    even when the full balanced realization is not representable.
    """
    if r >= ph.n:
        raise BadParams("reduction order must be < n")
    ss = ph_to_state_space(ph)
    _, Lc, Lo = _gramian_factors(ss)
    U, sigma, Vt = sla.svd(Lo.T @ Lc, check_finite=False)
    if sigma[0] == 0 or sigma[min(r - 1, len(sigma) - 1)] <= 0:
        raise SingularSchurBlock("requested order exceeds the numerical rank")
    if sigma[r - 1] < 1e-12 * sigma[0]:
        warnings.warn(
            f"sigma_r/sigma_1 = {sigma[r - 1] / sigma[0]:.2e}; truncation is "
            "past the numerical rank", NearNonMinimal, stacklevel=2)
    W = Lo @ (U[:, :r] / np.sqrt(sigma[:r]))
    J = la.as_dense(ph.J)
    R = la.as_dense(ph.R)
    Q = la.as_dense(ph.Q)
    B = la.as_dense(ph.B)
    Jr = la.skew_part(W.T @ J @ W)
    Rr = la.sym_part(W.T @ R @ W)
    Br = W.T @ B
    Z = la.solve_spd(Q, W)          # Q^{-1} W
    Mr = la.sym_part(W.T @ Z)       # (Q_b^{-1})_11
    try:
        Sb = la.sym_part(la.solve_spd(Mr, np.eye(r)))
    except sla.LinAlgError as exc:
        raise SingularSchurBlock(str(exc)) from exc
    from .core import build_ph

    return build_ph(Jr, Rr, Sb, Br)
