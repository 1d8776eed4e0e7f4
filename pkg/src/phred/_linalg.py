"""Shared dense/sparse linear-algebra helpers.

Matrices throughout the toolkit are either ``numpy.ndarray`` or scipy
sparse. Systems below ``DENSE_CROSSOVER`` states are stored dense; above
it, whatever the caller supplied is kept. All heavy operations dispatch
on the storage type here so the domain modules stay storage-agnostic.
"""

import os

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularPencil, SizeLimitExceeded, StructureViolation

# Below this dimension sparse inputs are densified on construction.
DENSE_CROSSOVER = 500

_DEFAULT_DENSE_CEILING = 2000


def dense_ceiling():
    """Size limit for dense O(n^3) solves (Lyapunov, balancing).

    Overridable through the PHRED_DENSE_CEILING environment variable.
    """
    value = os.environ.get("PHRED_DENSE_CEILING")
    return int(value) if value else _DEFAULT_DENSE_CEILING


def require_dense_ok(n, what):
    if n > dense_ceiling():
        raise SizeLimitExceeded(
            f"{what} needs dense O(n^3) work; n = {n} exceeds the ceiling "
            f"{dense_ceiling()} (override with PHRED_DENSE_CEILING)"
        )


def is_sparse(mat):
    return sp.issparse(mat)


def as_dense(mat):
    return mat.toarray() if sp.issparse(mat) else np.asarray(mat)


def coerce_matrix(mat, column=True):
    """Canonicalize a matrix: dense below the crossover, CSC above.

    1-D dense input becomes a column (default) or row vector.
    """
    if sp.issparse(mat):
        if max(mat.shape) < DENSE_CROSSOVER:
            return mat.toarray()
        return mat.tocsc()
    arr = np.asarray(mat, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if column else arr.reshape(1, -1)
    return arr


def fro_norm(mat):
    if sp.issparse(mat):
        return np.sqrt((mat.data * mat.data).sum()) if mat.nnz else 0.0
    return float(np.linalg.norm(mat, "fro"))


def two_norm_est(mat):
    """2-norm (exact for dense, sqrt(‖·‖₁‖·‖∞) upper bound for sparse)."""
    if sp.issparse(mat):
        if mat.nnz == 0:
            return 0.0
        n1 = spla.norm(mat, 1)
        ninf = spla.norm(mat, np.inf)
        return float(np.sqrt(n1 * ninf))
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


def sym_part(mat):
    return (mat + mat.T) * 0.5


def skew_part(mat):
    return (mat - mat.T) * 0.5


def transpose(mat):
    return mat.T


def matmul(a, b):
    return a @ b


def is_identity(mat, tol=0.0):
    """Exact identity test (cheap; used to shortcut E = I handling)."""
    n, m = mat.shape
    if n != m:
        return False
    if sp.issparse(mat):
        return (mat - sp.identity(n, format=mat.format)).nnz == 0
    return np.array_equal(mat, np.eye(n))


def bandwidth(mat):
    """Half-bandwidth of a square matrix (max |i - j| over nonzeros)."""
    if sp.issparse(mat):
        coo = mat.tocoo()
        if coo.nnz == 0:
            return 0
        return int(np.max(np.abs(coo.row - coo.col)))
    idx = np.nonzero(mat)
    if idx[0].size == 0:
        return 0
    return int(np.max(np.abs(idx[0] - idx[1])))


def to_banded_lower(mat, bw):
    """Pack the lower triangle of a symmetric matrix into LAPACK banded form."""
    n = mat.shape[0]
    dense_rows = np.zeros((bw + 1, n))
    m = mat.tocsr() if sp.issparse(mat) else mat
    for d in range(bw + 1):
        diag = m.diagonal(-d) if sp.issparse(mat) else np.diagonal(m, -d)
        dense_rows[d, : n - d] = diag
    return dense_rows


_MAX_CHOL_BAND = 64


def cholesky_pd(mat, pivot_rel_tol):
    """Attempted symmetric factorization certifying positive definiteness.

    Returns a lower-triangular dense factor L with ``mat = L L^T`` for
    dense inputs, or None for sparse inputs certified through a banded
    factorization. Raises StructureViolation("PD") when the factorization
    fails or any pivot falls below ``pivot_rel_tol * ||mat||_2``.
    """
    scale = two_norm_est(mat)
    threshold = pivot_rel_tol * max(scale, np.finfo(float).tiny)
    if not sp.issparse(mat):
        try:
            L = sla.cholesky(mat, lower=True, check_finite=False)
        except sla.LinAlgError as exc:
            raise StructureViolation("PD", str(exc)) from exc
        if np.min(np.diagonal(L)) ** 2 < threshold:
            raise StructureViolation("PD", "pivot below threshold")
        return L
    bw = bandwidth(mat)
    if bw <= _MAX_CHOL_BAND:
        banded = to_banded_lower(mat, bw)
        try:
            cb = sla.cholesky_banded(banded, lower=True, check_finite=False)
        except sla.LinAlgError as exc:
            raise StructureViolation("PD", str(exc)) from exc
        if np.min(cb[0]) ** 2 < threshold:
            raise StructureViolation("PD", "pivot below threshold")
        return None
    # Wide-band large sparse: fall back to the extreme eigenvalue.
    lam = smallest_eigenvalue(mat)
    if lam <= threshold:
        raise StructureViolation("PD", f"lambda_min = {lam:.3e}")
    return None


def smallest_eigenvalue(mat):
    """Smallest eigenvalue of a symmetric matrix (dense, banded or Lanczos)."""
    if not sp.issparse(mat):
        if mat.shape[0] == 0:
            return np.inf
        return float(sla.eigvalsh(mat, check_finite=False)[0])
    bw = bandwidth(mat)
    if bw == 0:
        diag = mat.diagonal()
        return float(diag.min()) if diag.size else np.inf
    if bw <= _MAX_CHOL_BAND:
        banded = to_banded_lower(mat, bw)
        vals = sla.eigvals_banded(banded, lower=True, select="i",
                                  select_range=(0, 0), check_finite=False)
        return float(vals[0])
    vals = spla.eigsh(mat.tocsc().astype(float), k=1, which="SA",
                      return_eigenvectors=False, maxiter=5000)
    return float(vals[0])


class ShiftedFactor:
    """One factorization of (s E - A), reused for several right-hand sides.

    Dense inputs use LAPACK LU; sparse inputs use SuperLU. Numerical
    singularity surfaces as SingularPencil.
    """

    def __init__(self, s, E, A, singular_rel_tol=1e-13):
        self.s = complex(s) if np.imag(s) != 0 else float(np.real(s))
        s = self.s
        n = A.shape[0]
        if sp.issparse(A) or (E is not None and sp.issparse(E)):
            Es = E if E is not None else sp.identity(n, format="csc")
            if not sp.issparse(Es):
                Es = sp.csc_matrix(Es)
            As = A if sp.issparse(A) else sp.csc_matrix(A)
            pencil = (s * Es - As).tocsc()
            try:
                self._lu = spla.splu(pencil)
            except RuntimeError as exc:
                raise SingularPencil(s, str(exc)) from exc
            udiag = np.abs(self._lu.U.diagonal())
            if udiag.max() == 0 or udiag.min() < singular_rel_tol * udiag.max():
                raise SingularPencil(s, "factorization has negligible pivot")
            self._dense = False
        else:
            Ed = E if E is not None else np.eye(n)
            pencil = s * Ed - A
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                self._lu = sla.lu_factor(pencil, check_finite=False)
            diag = np.abs(np.diagonal(self._lu[0]))
            if diag.size and (diag.max() == 0
                              or diag.min() < singular_rel_tol * diag.max()):
                raise SingularPencil(s, "factorization has negligible pivot")
            self._dense = True
        self._complex = np.iscomplexobj(pencil)

    def _solve_cast(self, rhs):
        if np.iscomplexobj(rhs) and not self._complex:
            return self._solve_cast(rhs.real) + 1j * self._solve_cast(rhs.imag)
        if self._dense:
            return sla.lu_solve(self._lu, rhs, check_finite=False)
        if rhs.ndim == 1:
            return self._lu.solve(np.ascontiguousarray(rhs, dtype=self._lu.U.dtype))
        return np.column_stack(
            [self._lu.solve(np.ascontiguousarray(rhs[:, j], dtype=self._lu.U.dtype))
             for j in range(rhs.shape[1])]
        )

    def solve(self, rhs):
        return self._solve_cast(as_dense(rhs))


def solve_spd(mat, rhs):
    """Solve with a symmetric positive definite matrix (dense)."""
    c = sla.cho_factor(mat, lower=True, check_finite=False)
    return sla.cho_solve(c, rhs, check_finite=False)


def condition_estimate(mat):
    """2-norm condition estimate of a small dense matrix."""
    svals = np.linalg.svd(mat, compute_uv=False)
    if svals[-1] == 0:
        return np.inf
    return float(svals[0] / svals[-1])


def spectral_abscissa(A, E=None):
    """max Re lambda of the (dense) pencil (A, E)."""
    Ad = as_dense(A)
    if E is None or (not sp.issparse(E) and is_identity(as_dense(E))):
        lam = np.linalg.eigvals(Ad)
    else:
        lam = sla.eigvals(Ad, as_dense(E), check_finite=False)
    return float(np.max(lam.real))
