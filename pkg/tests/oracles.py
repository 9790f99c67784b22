"""Independent reference computations shared by the test suite.

Everything here is built on scipy/mpmath primitives that do not share code
with the package under test, so agreement is meaningful evidence.
"""

import numpy as np
import scipy.linalg

FUNCTION_IDS = ("exp", "expneg", "sqrt", "invsqrt", "phi")


def scalar_reference(fid, z, dps=50):
    """High-precision scalar value of the named function via mpmath."""
    import mpmath

    with mpmath.workdps(dps):
        w = mpmath.mpc(complex(z))
        if fid == "exp":
            r = mpmath.exp(w)
        elif fid == "expneg":
            r = mpmath.exp(-w)
        elif fid == "sqrt":
            r = mpmath.sqrt(w)
        elif fid == "invsqrt":
            r = 1 / mpmath.sqrt(w)
        elif fid == "phi":
            r = (mpmath.exp(-mpmath.sqrt(w)) - 1) / w
        else:
            raise ValueError(fid)
        return complex(r)


def dense_fA(A, fid):
    """Dense f(A) via scipy building blocks (expm / sqrtm / solve)."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if fid == "exp":
        return scipy.linalg.expm(A)
    if fid == "expneg":
        return scipy.linalg.expm(-A)
    if fid == "sqrt":
        return scipy.linalg.sqrtm(A)
    if fid == "invsqrt":
        return np.linalg.solve(scipy.linalg.sqrtm(A), np.eye(n))
    if fid == "phi":
        # phi(z) = (exp(-sqrt(z)) - 1)/z, so phi(A) = A^{-1}(e^{-sqrt(A)} - I)
        return np.linalg.solve(A, scipy.linalg.expm(-scipy.linalg.sqrtm(A)) - np.eye(n))
    raise ValueError(fid)


def dense_triplets(F, k=3):
    """Leading k singular triplets of a dense matrix, by full SVD."""
    U, s, Vh = np.linalg.svd(np.asarray(F))
    return s[:k], U[:, :k], Vh[:k].conj().T


def write_mtx(path, A):
    """Write a dense array as a coordinate-format general Matrix Market file."""
    A = np.asarray(A)
    rows, cols = np.nonzero(A)
    lines = ["%%MatrixMarket matrix coordinate real general",
             f"{A.shape[0]} {A.shape[1]} {rows.size}"]
    for i, j in zip(rows, cols):
        lines.append(f"{i + 1} {j + 1} {float(A[i, j])!r}")
    path = str(path)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def make_operator_from_dense(A):
    """Wrap a dense array in the package operator protocol for direct runs."""
    import matfunsvd as M

    return M.build_operator(M.MatrixSpec(kind="dense", dense_values=np.asarray(A)))
