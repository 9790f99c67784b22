"""Dense linear algebra kernels for the projected small problems.

Everything here operates on small dense matrices (projected Hessenberg /
coupling matrices, shifted blocks) or on structured factorizations of the
large operators.  Eigen/SVD/LU work is delegated to LAPACK and SuperLU;
``dense_matfun`` implements the matrix-function evaluation strategy itself:
scaling-and-squaring for the exponential, an eigenvector route when the
eigenbasis is well conditioned, and a Schur-Parlett fallback otherwise.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.linalg import get_lapack_funcs
from scipy.sparse.linalg import splu

from .functions import DomainError, ScalarFunction, eval_scalar

__all__ = [
    "EigenSolveError",
    "FactorizationError",
    "EigDecomp",
    "hessenberg_reduce",
    "eig_dense",
    "svd_small",
    "sigma_min_shifted",
    "dense_matfun",
    "Factorization",
    "lu_factor",
    "lu_solve",
]

_EPS = float(np.finfo(np.float64).eps)


class EigenSolveError(RuntimeError):
    """The QR eigenvalue iteration failed to converge."""


class FactorizationError(RuntimeError):
    """LU factorization hit an exactly singular pivot."""


def _as_square(H, name="H"):
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"{name} must be a square 2-d array, got shape {H.shape}")
    if H.dtype.kind not in "fc":
        H = H.astype(np.float64)
    if not np.all(np.isfinite(H)):
        raise ValueError(f"{name} contains non-finite entries")
    return H


def hessenberg_reduce(H):
    """Unitary reduction to upper Hessenberg form: Q^H H Q = H_hess."""
    H = _as_square(H)
    hess, q = scipy.linalg.hessenberg(H, calc_q=True, check_finite=False)
    return q, hess


@dataclass
class EigDecomp:
    values: np.ndarray          # (d,) complex
    vectors: np.ndarray         # (d, d) complex, unit columns
    condition_estimate: float   # 2-norm condition number of the eigenbasis


def eig_dense(H):
    """All eigenpairs of a small dense matrix.

    Backed by LAPACK's nonsymmetric solver (Hessenberg reduction, shifted QR
    to Schur form, back-substitution for the eigenvectors).
    """
    H = _as_square(H)
    try:
        w, vr = scipy.linalg.eig(H, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - QR stagnation
        raise EigenSolveError(f"QR eigenvalue iteration did not converge: {exc}") from exc
    vr = np.asarray(vr, dtype=complex)
    norms = np.linalg.norm(vr, axis=0)
    norms[norms == 0.0] = 1.0
    vr = vr / norms
    try:
        cond = float(np.linalg.cond(vr))
    except np.linalg.LinAlgError:  # pragma: no cover
        cond = np.inf
    return EigDecomp(np.asarray(w, dtype=complex), vr, cond)


def svd_small(B):
    """Full SVD of a small dense (possibly rectangular) matrix.

    Returns ``(U, s, Vh)`` with singular values descending.
    """
    B = np.asarray(B)
    if B.ndim != 2:
        raise ValueError("svd_small expects a 2-d array")
    if not np.all(np.isfinite(B)):
        raise ValueError("svd_small input contains non-finite entries")
    return scipy.linalg.svd(B, full_matrices=False, check_finite=False)


def sigma_min_shifted(M, theta):
    """Smallest singular value of M - theta*I."""
    M = _as_square(M, "M")
    shifted = M.astype(np.result_type(M.dtype, np.asarray(theta).dtype), copy=True)
    shifted[np.diag_indices_from(shifted)] -= theta
    vals = scipy.linalg.svdvals(shifted, check_finite=False)
    return float(vals[-1])


# ---------------------------------------------------------------------------
# dense matrix functions

# diagonal Pade coefficients of degree 13 for the exponential and the 1-norm
# threshold below which no scaling is needed
_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 5.371920351148152


def _expm_pade13(A):
    """Scaling-and-squaring exponential with the degree-13 diagonal Pade."""
    A = np.asarray(A)
    d = A.shape[0]
    if d == 0:
        return A.copy()
    norm1 = float(np.linalg.norm(A, 1))
    s = 0
    if norm1 > _PADE13_THETA:
        s = int(np.ceil(np.log2(norm1 / _PADE13_THETA)))
        A = A / (2.0 ** s)
    b = _PADE13_B
    eye = np.eye(d, dtype=A.dtype)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * eye)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * eye)
    F = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        F = F @ F
    return F


def _cut_distance(lam):
    """Distance from each point to the closed ray (-inf, 0]."""
    lam = np.asarray(lam, dtype=complex)
    return np.where(lam.real <= 0.0, np.abs(lam.imag), np.abs(lam))


def _check_spectrum(f, values, scale):
    if not f.has_branch_cut:
        return
    dist = _cut_distance(values)
    on_ray = (np.asarray(values).imag == 0.0) & (np.asarray(values).real <= 0.0)
    bad = on_ray | (dist < 1e-12 * scale)
    if np.any(bad):
        lam = np.asarray(values)[bad][0]
        raise DomainError(
            f"{f.id}: eigenvalue {lam} lies on (or within 1e-12*||H|| of) "
            "the excluded ray (-inf, 0]"
        )


def _sqrt_triu(T):
    """Principal square root of an upper triangular matrix (recurrence)."""
    d = T.shape[0]
    U = np.zeros_like(T, dtype=complex)
    diag = np.sqrt(np.diag(T).astype(complex))
    U[np.diag_indices(d)] = diag
    for sep in range(1, d):
        for i in range(d - sep):
            j = i + sep
            s = T[i, j]
            if sep > 1:
                s = s - U[i, i + 1: j] @ U[i + 1: j, j]
            denom = U[i, i] + U[j, j]
            if denom == 0.0:
                raise DomainError(
                    "sqrt recurrence breakdown: eigenvalues straddle the branch cut"
                )
            U[i, j] = s / denom
    return U


def _atomic_triangular(T, f):
    """Evaluate f on a (clustered) upper triangular block."""
    d = T.shape[0]
    if f.id == "identity":
        return T.copy()
    if f.id == "exp":
        return _expm_pade13(T)
    if f.id == "expneg":
        return _expm_pade13(-T)
    if f.id == "sqrt":
        return _sqrt_triu(T)
    if f.id == "invsqrt":
        S = _sqrt_triu(T)
        return scipy.linalg.solve_triangular(S, np.eye(d, dtype=S.dtype),
                                             check_finite=False)
    if f.id == "phi":
        S = _sqrt_triu(T)
        E = _expm_pade13(-S)
        E[np.diag_indices(d)] -= 1.0
        # right solve X T = E - I through the transposed system
        return scipy.linalg.solve_triangular(T.T, E.T, lower=True,
                                             check_finite=False).T
    # generic fallback: the block is triangular, use its eigen route
    dec = eig_dense(T)
    fw = f(dec.values)
    return np.linalg.solve(dec.vectors.T, (dec.vectors * fw).T).T


def _contiguous_clusters(lam, threshold):
    """Partition diagonal indices into contiguous segments separated by
    at least ``threshold`` in eigenvalue distance (merging is transitive)."""
    d = len(lam)
    bounds = [(i, i + 1) for i in range(d)]
    merged = True
    while merged and len(bounds) > 1:
        merged = False
        out = [bounds[0]]
        for seg in bounds[1:]:
            a = lam[out[-1][0]: out[-1][1]]
            b = lam[seg[0]: seg[1]]
            gap = np.min(np.abs(a[:, None] - b[None, :]))
            if gap < threshold:
                out[-1] = (out[-1][0], seg[1])
                merged = True
            else:
                out.append(seg)
        bounds = out
    return bounds


class _SylvesterBreakdown(Exception):
    def __init__(self, lo, hi):
        self.lo = lo
        self.hi = hi


def _parlett_blocks(T, f, bounds):
    d = T.shape[0]
    F = np.zeros_like(T, dtype=complex)
    for (a, b) in bounds:
        F[a:b, a:b] = _atomic_triangular(T[a:b, a:b], f)
    nb = len(bounds)
    tnorm = max(float(np.linalg.norm(T, 2)), _EPS)
    for sep in range(1, nb):
        for bi in range(nb - sep):
            bj = bi + sep
            ia, ib = bounds[bi]
            ja, jb = bounds[bj]
            Tii = T[ia:ib, ia:ib]
            Tjj = T[ja:jb, ja:jb]
            Tij = T[ia:ib, ja:jb]
            rhs = F[ia:ib, ia:ib] @ Tij - Tij @ F[ja:jb, ja:jb]
            for bk in range(bi + 1, bj):
                ka, kb = bounds[bk]
                rhs = rhs + F[ia:ib, ka:kb] @ T[ka:kb, ja:jb]
                rhs = rhs - T[ia:ib, ka:kb] @ F[ka:kb, ja:jb]
            try:
                X = scipy.linalg.solve_sylvester(Tii, -Tjj, rhs)
            except (np.linalg.LinAlgError, ValueError):
                raise _SylvesterBreakdown(bi, bj) from None
            resid = np.linalg.norm(Tii @ X - X @ Tjj - rhs)
            bound = 1e-8 * (tnorm * np.linalg.norm(X) + np.linalg.norm(rhs) + _EPS)
            if not np.all(np.isfinite(X)) or resid > bound:
                raise _SylvesterBreakdown(bi, bj)
            F[ia:ib, ja:jb] = X
    return F


def _schur_parlett(H, f, threshold):
    T, Z = scipy.linalg.schur(H.astype(complex), output="complex",
                              check_finite=False)
    lam = np.diag(T)
    bounds = _contiguous_clusters(lam, threshold)
    while True:
        try:
            F = _parlett_blocks(T, f, bounds)
            break
        except _SylvesterBreakdown as bd:
            if len(bounds) == 1:  # pragma: no cover - atomic path cannot break
                raise EigenSolveError("Parlett recurrence failed on a single block")
            # merge every block in the offending range and retry
            lo, hi = bd.lo, bd.hi
            bounds = bounds[:lo] + [(bounds[lo][0], bounds[hi][1])] + bounds[hi + 1:]
    return Z @ F @ Z.conj().T


def dense_matfun(H, f: ScalarFunction, cond_limit=1e6, cluster_gap=0.1):
    """Evaluate the matrix function f(H) of a small dense matrix.

    exp/expneg go through scaling-and-squaring with the degree-13 diagonal
    Pade (scaled so the 1-norm is at most ~5.37).  Other functions use the
    eigendecomposition X f(L) X^{-1} when cond(X) <= cond_limit and fall back
    to a complex Schur form with a blocked Parlett recurrence, clustered by
    eigenvalue gaps below ``cluster_gap * ||H||``.
    """
    H = _as_square(H)
    real_in = not np.iscomplexobj(H)
    if f.id == "identity":
        return H.copy()
    if f.id == "exp":
        return _expm_pade13(H)
    if f.id == "expneg":
        return _expm_pade13(-H)

    scale = float(np.linalg.norm(H, 2)) if H.size else 0.0
    dec = eig_dense(H)
    _check_spectrum(f, dec.values, scale)

    if dec.condition_estimate <= cond_limit:
        fw = eval_scalar(f, dec.values)
        F = np.linalg.solve(dec.vectors.T, (dec.vectors * fw).T).T
    else:
        F = _schur_parlett(H, f, cluster_gap * scale)
    if real_in:
        # real input and a real-coefficient function off the cut give a real
        # result; the imaginary residue is rounding noise
        F = F.real.copy()
    return F


# ---------------------------------------------------------------------------
# structured LU factorizations of the large operators


class Factorization:
    """Base class: solve A x = b (or A^H x = b) from a stored factorization."""

    dtype = np.float64

    def solve(self, b, adjoint=False):
        b = np.asarray(b)
        if np.iscomplexobj(b) and self.dtype == np.float64:
            return (self._solve(np.ascontiguousarray(b.real), adjoint)
                    + 1j * self._solve(np.ascontiguousarray(b.imag), adjoint))
        return self._solve(b.astype(self.dtype, copy=False), adjoint)

    def _solve(self, b, adjoint):  # pragma: no cover - abstract
        raise NotImplementedError


def _band_dtype(arrays):
    return np.complex128 if any(np.iscomplexobj(a) for a in arrays) else np.float64


class _TridiagFactorization(Factorization):
    """Thomas-style tridiagonal LU with partial pivoting (LAPACK gttrf)."""

    def __init__(self, dl, d, du):
        self.dtype = _band_dtype((dl, d, du))
        dl = np.asarray(dl, dtype=self.dtype)
        d = np.asarray(d, dtype=self.dtype)
        du = np.asarray(du, dtype=self.dtype)
        gttrf, gttrs = get_lapack_funcs(("gttrf", "gttrs"), (d,))
        self._gttrs = gttrs
        dl_f, d_f, du_f, du2, ipiv, info = gttrf(dl, d, du)
        if info > 0:
            raise FactorizationError(f"tridiagonal LU has a zero pivot at index {info - 1}")
        if info < 0:  # pragma: no cover
            raise FactorizationError(f"gttrf illegal argument {-info}")
        self._fact = (dl_f, d_f, du_f, du2, ipiv)

    def _solve(self, b, adjoint):
        trans = "C" if adjoint else "N"
        x, info = self._gttrs(*self._fact, b, trans=trans)
        if info != 0:  # pragma: no cover
            raise FactorizationError(f"gttrs failed with info={info}")
        return x


class _BandedFactorization(Factorization):
    """Banded LU with partial pivoting (LAPACK gbtrf/gbtrs)."""

    def __init__(self, matrix, kl, ku):
        csr = sparse.csr_matrix(matrix)
        self.dtype = np.complex128 if np.iscomplexobj(csr.data) else np.float64
        n = csr.shape[0]
        self._kl, self._ku = kl, ku
        ab = np.zeros((2 * kl + ku + 1, n), dtype=self.dtype)
        coo = csr.tocoo()
        # LAPACK band storage: ab[kl + ku + i - j, j] = A[i, j]
        ab[kl + ku + coo.row - coo.col, coo.col] = coo.data
        gbtrf, gbtrs = get_lapack_funcs(("gbtrf", "gbtrs"), (ab,))
        self._gbtrs = gbtrs
        lu, ipiv, info = gbtrf(ab, kl, ku)
        if info > 0:
            raise FactorizationError(f"banded LU has a zero pivot at index {info - 1}")
        if info < 0:  # pragma: no cover
            raise FactorizationError(f"gbtrf illegal argument {-info}")
        self._lu = lu
        self._ipiv = ipiv

    def _solve(self, b, adjoint):
        # f2py gbtrs wants b before ipiv and integer trans codes (0 = N, 2 = C)
        x, info = self._gbtrs(self._lu, self._kl, self._ku, b, self._ipiv,
                              trans=2 if adjoint else 0)
        if info != 0:  # pragma: no cover
            raise FactorizationError(f"gbtrs failed with info={info}")
        return x


class _SparseFactorization(Factorization):
    """General sparse LU with partial pivoting (SuperLU)."""

    def __init__(self, matrix):
        csc = sparse.csc_matrix(matrix)
        self.dtype = np.complex128 if np.iscomplexobj(csc.data) else np.float64
        csc = csc.astype(self.dtype)
        try:
            self._lu = splu(csc)
        except RuntimeError as exc:
            raise FactorizationError(f"sparse LU failed: {exc}") from exc

    def _solve(self, b, adjoint):
        return self._lu.solve(b, trans="H" if adjoint else "N")


class _DenseFactorization(Factorization):
    def __init__(self, matrix):
        A = np.asarray(matrix)
        self.dtype = np.complex128 if np.iscomplexobj(A) else np.float64
        A = A.astype(self.dtype)
        try:
            self._fact = scipy.linalg.lu_factor(A, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise FactorizationError(f"dense LU failed: {exc}") from exc
        diag = np.abs(np.diag(self._fact[0]))
        if np.any(diag == 0.0):
            raise FactorizationError("dense LU has a zero pivot")

    def _solve(self, b, adjoint):
        return scipy.linalg.lu_solve(self._fact, b, trans=2 if adjoint else 0,
                                     check_finite=False)


def lu_factor(data, structure_tag, bandwidths=None):
    """Factor a matrix once, dispatching on its structure tag.

    tridiagonal -> Thomas-style gttrf; banded -> gbtrf (needs ``bandwidths``
    = (kl, ku) or a sparse matrix to infer them from); general-sparse ->
    SuperLU; dense -> getrf.  The returned object solves both A x = b and
    A^H x = b from the same factorization.
    """
    if structure_tag == "tridiagonal":
        if sparse.issparse(data) or (isinstance(data, np.ndarray) and data.ndim == 2):
            mat = sparse.csr_matrix(data) if not sparse.issparse(data) else data
            dl = mat.diagonal(-1)
            d = mat.diagonal(0)
            du = mat.diagonal(1)
        else:
            dl, d, du = data
        return _TridiagFactorization(dl, d, du)
    if structure_tag == "banded":
        if bandwidths is None:
            coo = sparse.coo_matrix(data)
            offsets = coo.col - coo.row
            bandwidths = (int(max(0, -offsets.min(initial=0))),
                          int(max(0, offsets.max(initial=0))))
        return _BandedFactorization(data, *bandwidths)
    if structure_tag == "general-sparse":
        return _SparseFactorization(data)
    if structure_tag == "dense":
        return _DenseFactorization(data)
    raise ValueError(f"unknown structure tag {structure_tag!r}")


def lu_solve(factorization, b, adjoint=False):
    """Solve A x = b (or A^H x = b with adjoint=True) from a Factorization."""
    return factorization.solve(b, adjoint=adjoint)
