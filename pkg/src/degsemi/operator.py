"""Sesquilinear forms on subspaces of a finite-dimensional Hilbert space.

A form is given on an explicit basis ``B`` (columns in the ambient space
``C^N``) through its stiffness matrix ``K_ij = a(b_j, b_i)``. The associated
graph acts on the ambient space via

    (lambda I + A)^{-1} f = B (lambda G + K)^{-1} B^* f,    G = B^* B,

so vectors orthogonal to ``span(B)`` are annihilated by every resolvent.
"""

import threading
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as spla

from .errors import (
    DimensionMismatch,
    NotSectorial,
    SingularGram,
    SingularSystem,
)

GRAM_PIVOT_TOL = 1e-10
SYMMETRY_TOL = 1e-12
SEMIANGLE_FLOOR = 1e-12


@dataclass(frozen=True)
class AmbientSpace:
    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("ambient dimension must be >= 1")


@dataclass(frozen=True)
class SectorEstimate:
    """Vertex ``gamma``, semiangle ``theta`` and closedness shift ``omega``."""

    vertex: float
    semiangle: float
    shift: float

    @property
    def tan_semiangle(self):
        return float(np.tan(self.semiangle))


def _as_matrix(x):
    if sparse.issparse(x):
        return x.tocsr()
    return np.atleast_2d(np.asarray(x))


def _hermitian_part(K):
    return 0.5 * (K + K.conj().T)


class FormOperator:
    """Form on ``span(basis)`` with stiffness ``K`` and its associated graph.

    Instances are immutable after construction. Factorizations are
    computed lazily, once, under a lock, so an instance may be shared
    between threads.
    """

    def __init__(self, basis, stiffness, *, label=None):
        B = _as_matrix(basis)
        K = _as_matrix(stiffness)
        if B.ndim != 2:
            raise DimensionMismatch("basis must be a matrix")
        N, m = B.shape
        if m > N:
            raise DimensionMismatch(f"basis has {m} columns in dimension {N}")
        if K.shape != (m, m):
            raise DimensionMismatch(f"stiffness shape {K.shape} does not match basis width {m}")
        self.basis = B
        self.stiffness = K
        self.label = label
        self.ambient = AmbientSpace(N)
        self.sparse = sparse.issparse(K) or sparse.issparse(B)
        G = B.conj().T @ B
        if sparse.issparse(G) and not self.sparse:
            G = G.toarray()
        self.gram = G
        self._lock = threading.Lock()
        self._cache = {}
        self._check_gram()
        Kd = self.dense_stiffness() if not sparse.issparse(K) else None
        if Kd is not None:
            skew = np.linalg.norm(Kd - Kd.conj().T)
            self.symmetric = bool(skew <= SYMMETRY_TOL * max(np.linalg.norm(Kd), 1e-300))
        else:
            D = (K - K.conj().T)
            skew = spla.norm(D) if D.nnz else 0.0
            self.symmetric = bool(skew <= SYMMETRY_TOL * max(spla.norm(K), 1e-300))

    # -- shape -----------------------------------------------------------
    @property
    def dim(self):
        return self.ambient.dim

    @property
    def rank(self):
        return self.basis.shape[1]

    def dense_basis(self):
        B = self.basis
        return B.toarray() if sparse.issparse(B) else B

    def dense_stiffness(self):
        K = self.stiffness
        return K.toarray() if sparse.issparse(K) else K

    def dense_gram(self):
        G = self.gram
        return G.toarray() if sparse.issparse(G) else G

    # -- lazy factorizations --------------------------------------------
    def _cached(self, key, build):
        try:
            return self._cache[key]
        except KeyError:
            pass
        with self._lock:
            if key not in self._cache:
                self._cache[key] = build()
            return self._cache[key]

    def _check_gram(self):
        G = self.gram
        if sparse.issparse(G):
            off = G - sparse.diags(G.diagonal())
            if off.count_nonzero() == 0:
                d = np.real(G.diagonal())
                if d.min() <= GRAM_PIVOT_TOL * d.max():
                    raise SingularGram("diagonal Gram matrix has a vanishing entry")
                return
            G = G.toarray()
        self._cache["cholesky"] = self._dense_cholesky(np.asarray(G))

    @staticmethod
    def _dense_cholesky(G):
        try:
            L = linalg.cholesky(G, lower=True)
        except linalg.LinAlgError as exc:
            raise SingularGram("Gram matrix is not positive definite") from exc
        piv = np.abs(np.diag(L)) ** 2
        if piv.min() < GRAM_PIVOT_TOL * piv.max():
            raise SingularGram(
                f"smallest Cholesky pivot {piv.min():.3e} below "
                f"{GRAM_PIVOT_TOL:g} x largest {piv.max():.3e}"
            )
        return L

    def cholesky(self):
        """Lower factor ``L`` with ``G = L L^*`` (dense)."""
        return self._cached("cholesky", lambda: self._dense_cholesky(self.dense_gram()))

    def reduced_matrix(self):
        """``M = L^{-1} K L^{-*}``: the graph in orthonormal coordinates of ``span(B)``."""

        def build():
            L = self.cholesky()
            X = linalg.solve_triangular(L, self.dense_stiffness(), lower=True)
            M = linalg.solve_triangular(L, X.conj().T, lower=True).conj().T
            if self.symmetric:
                M = _hermitian_part(M)
            return M

        return self._cached("reduced", build)

    def isometry(self):
        """``Q = B L^{-*}``: orthonormal basis of ``span(B)`` in the ambient space."""

        def build():
            L = self.cholesky()
            B = self.dense_basis()
            return linalg.solve_triangular(L, B.conj().T, lower=True).conj().T

        return self._cached("isometry", build)

    # -- form evaluation -------------------------------------------------
    def form(self, c, d=None):
        """``a(u, v)`` for ``u = B c``, ``v = B d`` (``d`` defaults to ``c``)."""
        c = np.asarray(c)
        d = c if d is None else np.asarray(d)
        return np.vdot(d, self.stiffness @ c)

    def coefficients(self, f):
        """Coordinates ``G^{-1} B^* f`` of the orthogonal projection of ``f``."""
        rhs = self.basis.conj().T @ f
        if sparse.issparse(self.gram) and "cholesky" not in self._cache:
            return np.asarray(rhs) / self.gram.diagonal().reshape((-1,) + (1,) * (np.ndim(rhs) - 1))
        return linalg.cho_solve((self.cholesky(), True), rhs)

    def solve_shifted(self, lam, rhs):
        """Solve ``(lam G + K) c = rhs``; raises :class:`SingularSystem` on failure."""
        if self.sparse:
            A = (lam * sparse.csc_matrix(self.gram) + sparse.csc_matrix(self.stiffness)).tocsc()
            A = A.astype(np.complex128)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", spla.MatrixRankWarning)
                    lu = spla.splu(A)
            except (RuntimeError, spla.MatrixRankWarning) as exc:
                raise SingularSystem(f"lam={lam!r}: {exc}") from exc
            out = lu.solve(np.asarray(rhs, dtype=np.complex128))
            if not np.all(np.isfinite(out)):
                raise SingularSystem(f"lam={lam!r}: non-finite solution")
            return out
        A = lam * self.gram + self.stiffness
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", linalg.LinAlgWarning)
                warnings.simplefilter("error", RuntimeWarning)
                out = linalg.solve(A, rhs)
        except (linalg.LinAlgError, linalg.LinAlgWarning, RuntimeWarning, ValueError) as exc:
            raise SingularSystem(f"lam={lam!r}: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise SingularSystem(f"lam={lam!r}: non-finite solution")
        return out

    def __repr__(self):
        tag = f" {self.label!r}" if self.label else ""
        return f"<FormOperator{tag} N={self.dim} m={self.rank} symmetric={self.symmetric}>"


def assemble_form_operator(basis, stiffness, label=None):
    """Build the associated graph of the form with the given basis and stiffness."""
    return FormOperator(basis, stiffness, label=label)


def resolvent_apply(op, lam, f):
    """``(lam I + A)^{-1} f``; ``f`` may be a vector or a matrix of column vectors."""
    f = np.asarray(f)
    c = op.solve_shifted(complex(lam), op.basis.conj().T @ f.astype(np.complex128))
    return op.basis @ c


def orthogonal_projection(op, f):
    """Orthogonal projection ``B G^{-1} B^* f`` onto the closure of the form domain."""
    return op.basis @ op.coefficients(np.asarray(f, dtype=np.complex128))


def real_part_operator(op):
    """Operator associated with the real part ``(a(u, v) + conj(a(v, u))) / 2``."""
    K = op.stiffness
    H = 0.5 * (K + K.conj().T)
    label = f"Re({op.label})" if op.label else None
    return FormOperator(op.basis, H, label=label)


def estimate_sector(op, vertex=None, samples=10_000, seed=0, tol=1e-10):
    """Vertex and semiangle of the form's numerical range.

    The smallest eigenvalue ``l_min`` of the pencil ``(Re K, G)`` bounds
    the real part. With the skew part ``S = (K - K^*) / 2i`` and a vertex
    ``gamma < l_min``, the tightest semiangle satisfies
    ``tan(theta) = max |eig(S, Re K - gamma G)|``.

    If ``vertex`` is not given it is chosen as ``l_min`` for Hermitian
    forms, ``0`` when ``l_min > 0``, and ``l_min - max(1, |l_min|)``
    otherwise. The result is checked on ``samples`` random unit vectors.

    Raises
    ------
    NotSectorial
        If no semiangle below ``pi/2`` fits, or a sample violates the
        estimated sector.
    """
    K = np.asarray(op.dense_stiffness(), dtype=np.complex128)
    G = np.asarray(op.dense_gram(), dtype=np.complex128)
    H = _hermitian_part(K)
    S = (K - K.conj().T) / 2j
    S = _hermitian_part(S)
    scale = max(np.linalg.norm(K, 2), 1.0)
    lmin = float(linalg.eigh(H, G, eigvals_only=True)[0])
    skew = np.linalg.norm(S, 2)
    hermitian = skew <= SYMMETRY_TOL * scale

    if vertex is None:
        if hermitian:
            vertex = lmin
        elif lmin > tol * scale:
            vertex = 0.0
        else:
            vertex = lmin - max(1.0, abs(lmin))
    vertex = float(vertex)
    if vertex > lmin + tol * scale:
        raise NotSectorial(f"vertex {vertex} exceeds the lower bound {lmin} of Re a")

    if hermitian:
        tan_theta = 0.0
    else:
        P = H - vertex * G
        try:
            mu = linalg.eigh(S, P, eigvals_only=True)
        except linalg.LinAlgError as exc:
            raise NotSectorial("shifted real part is singular on a direction with nonzero skew part") from exc
        tan_theta = float(np.max(np.abs(mu)))
    theta = max(float(np.arctan(tan_theta)), SEMIANGLE_FLOOR)
    if theta >= np.pi / 2 - tol:
        raise NotSectorial(f"semiangle {theta} is not below pi/2")

    rng = np.random.default_rng(seed)
    m = K.shape[0]
    L = op.cholesky()
    worst = 0.0
    remaining = samples
    while remaining > 0:
        chunk = min(remaining, 2048)
        remaining -= chunk
        Y = rng.standard_normal((m, chunk)) + 1j * rng.standard_normal((m, chunk))
        Y /= np.linalg.norm(Y, axis=0)
        C = linalg.solve_triangular(L.conj().T, Y, lower=False)  # unit vectors u = B C
        q = np.einsum("ij,ij->j", C.conj(), K @ C)
        excess = np.abs(q.imag) - tan_theta * (q.real - vertex)
        excess = np.maximum(excess, vertex - q.real)
        worst = max(worst, float(excess.max()))
    if worst > tol * scale * (1 + tan_theta):
        raise NotSectorial(f"sampled numerical range leaves the sector by {worst:.3e}")
    shift = 0.0 if lmin > 0 else 1.0 - lmin
    return SectorEstimate(vertex=vertex, semiangle=theta, shift=shift)


@dataclass(frozen=True)
class HilleYosidaReport:
    max_value: float
    bound: float
    passed: bool
    worst_k: int
    worst_lambda: float


def operator_norm(apply, apply_adjoint, dim, rtol=1e-8, maxiter=500, seed=0):
    """Largest singular value by power iteration on ``T^* T``."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(maxiter):
        y = apply_adjoint(apply(x))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        new = np.sqrt(ny)
        x = y / ny
        if abs(new - est) <= rtol * new:
            return float(new)
        est = new
    return float(est)


def hille_yosida_check(op, omega, bound, k_max, lambda_samples, rtol=1e-8, maxiter=500):
    """Largest sampled ``||(lam - omega)^k (lam I + A)^{-k}||`` on the range of the projection."""
    M = op.reduced_matrix()
    m = M.shape[0]
    best = (-np.inf, 0, float("nan"))
    for lam in lambda_samples:
        lam = float(lam)
        if lam <= omega:
            raise ValueError(f"lambda sample {lam} is not above omega={omega}")
        shifted = lam * np.eye(m) + M
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", linalg.LinAlgWarning)
                lu = linalg.lu_factor(shifted)
        except (linalg.LinAlgError, linalg.LinAlgWarning) as exc:
            raise SingularSystem(f"lam={lam}: {exc}") from exc
        if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0.0:
            raise SingularSystem(f"lam={lam}: singular shifted generator")
        for k in range(1, int(k_max) + 1):
            c = (lam - omega) ** k

            def apply(x, k=k, c=c):
                for _ in range(k):
                    x = linalg.lu_solve(lu, x)
                return c * x

            def apply_adj(x, k=k, c=c):
                for _ in range(k):
                    x = linalg.lu_solve(lu, x, trans=2)
                return np.conj(c) * x

            val = operator_norm(apply, apply_adj, m, rtol=rtol, maxiter=maxiter)
            if val > best[0]:
                best = (val, k, lam)
    return HilleYosidaReport(
        max_value=float(best[0]),
        bound=float(bound),
        passed=bool(best[0] <= bound * (1 + 1e-10)),
        worst_k=int(best[1]),
        worst_lambda=float(best[2]),
    )
