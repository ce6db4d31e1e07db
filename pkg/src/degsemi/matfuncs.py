"""Dense matrix functions: exponential and principal square root."""

import numpy as np
from scipy import linalg

from .errors import ExpOverflow

# Higham (2005) backward-error thresholds for Pade degrees 3, 5, 7, 9, 13.
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_PADE = {
    3: [120, 60, 12, 1],
    5: [30240, 15120, 3360, 420, 30, 1],
    7: [17297280, 8648640, 1995840, 277200, 25200, 1512, 56, 1],
    9: [17643225600, 8821612800, 2075673600, 302702400, 30270240,
        2162160, 110880, 3960, 90, 1],
    13: [64764752532480000, 32382376266240000, 7771770303897600,
         1187353796428800, 129060195264000, 10559470521600,
         670442572800, 33522128640, 1323241920, 40840800, 960960,
         16380, 182, 1],
}

MAX_SQUARINGS = 64


def _pade_uv(A, m):
    n = A.shape[0]
    c = [float(x) for x in _PADE[m]]
    ident = np.eye(n, dtype=A.dtype)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A2 @ A4
        U = A @ (A6 @ (c[13] * A6 + c[11] * A4 + c[9] * A2)
                 + c[7] * A6 + c[5] * A4 + c[3] * A2 + c[1] * ident)
        V = (A6 @ (c[12] * A6 + c[10] * A4 + c[8] * A2)
             + c[6] * A6 + c[4] * A4 + c[2] * A2 + c[0] * ident)
        return U, V
    powers = [ident, A2]
    for _ in range(2, (m + 1) // 2 + 1):
        powers.append(powers[-1] @ A2)
    U = sum(c[k] * powers[k // 2] for k in range(m, 0, -2))
    U = A @ U
    V = sum(c[k] * powers[k // 2] for k in range(m - 1, -1, -2))
    return U, V


def expm(A):
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant.

    The degree is the smallest of 3, 5, 7, 9, 13 whose threshold bounds the
    1-norm; otherwise the matrix is scaled by ``2**-s`` and the degree-13
    approximant is squared ``s`` times.

    Raises
    ------
    ExpOverflow
        If more than ``MAX_SQUARINGS`` squarings are needed or the result is
        not finite.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expm expects a square matrix")
    A = A.astype(np.result_type(A.dtype, np.float64))
    if A.shape[0] == 0:
        return A.copy()
    norm1 = np.linalg.norm(A, 1)
    if not np.isfinite(norm1):
        raise ExpOverflow("matrix has non-finite entries")
    s = 0
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            U, V = _pade_uv(A, m)
            break
    else:
        m = 13
        if norm1 > _THETA[13]:
            s = int(np.ceil(np.log2(norm1 / _THETA[13])))
        if s > MAX_SQUARINGS:
            raise ExpOverflow(f"{s} squarings required (norm {norm1:.3e})")
        U, V = _pade_uv(A / 2.0 ** s, 13)
    F = linalg.solve(V - U, V + U)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            F = F @ F
    if not np.all(np.isfinite(F)):
        raise ExpOverflow("exponential overflowed during squaring")
    return F


def sqrtm_schur(A):
    """Principal square root through the complex Schur form.

    The upper-triangular root is built column by column from
    ``R_ii = sqrt(T_ii)`` and ``R_ij = (T_ij - sum_k R_ik R_kj) / (R_ii + R_jj)``.
    Valid when no eigenvalue lies on the closed negative real axis, which
    holds for invertible m-accretive matrices.
    """
    A = np.asarray(A, dtype=np.complex128)
    T, Z = linalg.schur(A, output="complex")
    n = T.shape[0]
    R = np.zeros_like(T)
    for j in range(n):
        R[j, j] = np.sqrt(T[j, j])
        for i in range(j - 1, -1, -1):
            s = R[i, i + 1:j] @ R[i + 1:j, j]
            R[i, j] = (T[i, j] - s) / (R[i, i] + R[j, j])
    return Z @ R @ Z.conj().T


def sqrtm_hermitian(A):
    """Square root of a Hermitian positive semidefinite matrix by eigendecomposition."""
    w, V = np.linalg.eigh(A)
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T
