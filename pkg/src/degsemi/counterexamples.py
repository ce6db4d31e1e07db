"""Block-swap Cayley family and square-root resolvent identities.

The block-swap family lives on a truncation ``C^N`` of ``l_2``. ``U_n``
swaps the coordinate blocks ``[0, n)`` and ``[n, 2n)`` and fixes the rest,
``V_n = (1 - 1/n) U_n`` and ``A_n = (I + V_n)(I - V_n)^{-1}``. Since
``U_n^2 = I`` we have ``(I - q U)^{-1} = (I + q U) / (1 - q^2)``, hence

    A_n = ((1 + q^2) I + 2 q U_n) / (1 - q^2),    (I + A_n)^{-1} = (I - V_n) / 2.

Resolvents at ``lambda = 1`` converge weakly to ``I/2`` on probes supported
in the first ``m < n`` coordinates but not strongly.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ProbeSupportTooLarge, QuadratureUnstable, TruncationTooSmall
from .matfuncs import sqrtm_hermitian, sqrtm_schur
from .metrics import ConvergenceTrace, MetricKind, ProbeSet, format_number, resolvent_metric
from .operator import FormOperator, resolvent_apply
from .parallel import parallel_map
from .quadrature import gauss_interval

SLACK = 6


@dataclass(frozen=True)
class BlockSwapFamily:
    n: int
    ambient_dim: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("block size must be >= 1")
        if self.ambient_dim < 2 * self.n:
            raise TruncationTooSmall(f"ambient dim {self.ambient_dim} < 2n = {2 * self.n}")

    @property
    def q(self):
        return 1.0 - 1.0 / self.n

    @property
    def permutation(self):
        n = self.n
        perm = np.arange(self.ambient_dim)
        perm[:n] = np.arange(n, 2 * n)
        perm[n:2 * n] = np.arange(n)
        return perm

    def apply_swap(self, f):
        """``U_n f``: ``(U f)_i = f_{perm(i)}``."""
        return np.asarray(f)[self.permutation]

    def swap_matrix(self):
        return np.eye(self.ambient_dim)[self.permutation]

    def contraction_matrix(self):
        return self.q * self.swap_matrix()

    def generator_matrix(self):
        q = self.q
        return ((1 + q * q) * np.eye(self.ambient_dim) + 2 * q * self.swap_matrix()) / (1 - q * q)

    def eigenvalues(self):
        """Distinct eigenvalues ``(1 - q)/(1 + q)`` and ``(1 + q)/(1 - q)`` of ``A_n``."""
        q = self.q
        return (1 - q) / (1 + q), (1 + q) / (1 - q)

    def operator(self):
        return FormOperator(np.eye(self.ambient_dim), self.generator_matrix(), label=f"block-swap n={self.n}")

    def verify(self):
        perm = self.permutation
        if not np.array_equal(perm[perm], np.arange(self.ambient_dim)):
            raise AssertionError("U_n is not an involution")
        if not np.array_equal(self.swap_matrix(), self.swap_matrix().T):
            raise AssertionError("U_n is not symmetric")
        if min(self.eigenvalues()) <= 0:
            raise AssertionError("A_n is not positive")
        return True


def block_swap_operator(n, ambient_dim):
    fam = BlockSwapFamily(int(n), int(ambient_dim))
    fam.verify()
    return fam


def cayley_resolvent(family, f):
    """``(I + A_n)^{-1} f = (f - (1 - 1/n) U_n f) / 2`` by permutation arithmetic."""
    f = np.asarray(f)
    return 0.5 * (f - family.q * family.apply_swap(f))


@dataclass
class WeakNotStrongReport:
    n: list
    wot_residual: list
    sot_residual: list
    formula_value: list
    cross_check: list
    probe_support: int
    ambient_dim: int
    notes: list = field(default_factory=list)

    def rows(self):
        return zip(self.n, self.wot_residual, self.sot_residual, self.formula_value)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "wot_residual", "sot_residual", "formula_value"])
            for n, a, b, c in self.rows():
                w.writerow([n, format_number(a), format_number(b), format_number(c)])


def weak_not_strong_experiment(n_list, probe_support=4, lam=1.0, ambient_dim=None, probes=None, seed=0):
    """WOT and SOT residuals of ``(I + A_n)^{-1} - I/2`` on support-restricted probes.

    The WOT residual is ``max |(((I + A_n)^{-1} - I/2) f, g)|`` and vanishes
    exactly because ``U_n`` moves the support past ``m``. The SOT residual
    ``max ||((I + A_n)^{-1} - I/2) f||`` equals ``(1 - 1/n) / 2`` for unit
    ``f``. ``cross_check`` compares the permutation formula with a generic
    resolvent solve of the assembled ``A_n``.
    """
    n_list = [int(n) for n in n_list]
    m = int(probe_support)
    if lam != 1.0:
        raise ValueError("the exact weak limit I/2 holds at lambda = 1 only")
    N = int(ambient_dim) if ambient_dim is not None else 2 * max(n_list) + SLACK
    if any(n <= m for n in n_list):
        raise ProbeSupportTooLarge(f"probe support {m} must be below every block size {n_list}")
    if probes is None:
        probes = ProbeSet.standard(N, support=m, seed=seed)
    F = probes.vectors
    if F.shape[0] != N:
        raise ValueError("probe dimension differs from the ambient dimension")
    if np.any(F[m:]):
        raise ProbeSupportTooLarge(f"probes are not supported in the first {m} coordinates")

    def one(n):
        fam = block_swap_operator(n, N)
        D = cayley_resolvent(fam, F) - 0.5 * F
        wot = float(np.max(np.abs(F.conj().T @ D)))
        sot = float(np.max(np.linalg.norm(D, axis=0)))
        generic = resolvent_apply(fam.operator(), 1.0, F)
        cross = float(np.max(np.abs(generic - cayley_resolvent(fam, F))))
        return wot, sot, 0.5 * fam.q, cross

    rows = parallel_map(one, n_list)
    report = WeakNotStrongReport(
        n=n_list,
        wot_residual=[r[0] for r in rows],
        sot_residual=[r[1] for r in rows],
        formula_value=[r[2] for r in rows],
        cross_check=[r[3] for r in rows],
        probe_support=m,
        ambient_dim=N,
    )
    report.notes.append(
        f"probes vanish outside the first {m} coordinates; for probes with larger "
        "support the WOT residual need not vanish on the truncation"
    )
    return report


def block_swap_chain_trace(n_list, probe_support=4, ambient_dim=None, lam_nonreal=1 + 1j, seed=0):
    """Resolvent metrics of the block-swap chain against ``A = I``.

    The real-``lambda`` WOT metric vanishes while the SOT metric stays near
    1/2 and the WOT metric at a nonreal point stays away from zero.
    """
    n_list = [int(n) for n in n_list]
    N = int(ambient_dim) if ambient_dim is not None else 2 * max(n_list) + SLACK
    probes = ProbeSet.standard(N, support=probe_support, seed=seed)
    ref = FormOperator(np.eye(N), np.eye(N), label="identity")
    trace = ConvergenceTrace(params={"lambda": 1.0, "lambda_nonreal": [lam_nonreal.real, lam_nonreal.imag],
                                     "probe_support": probe_support, "ambient_dim": N, "probe_seed": seed})

    def row(n):
        op = block_swap_operator(n, N).operator()
        return {
            MetricKind.RESOLVENT_WOT: resolvent_metric(op, ref, 1.0, probes, "WOT"),
            MetricKind.RESOLVENT_SOT_SINGLE: resolvent_metric(op, ref, 1.0, probes, "SOT"),
            MetricKind.RESOLVENT_WOT_NONREAL: resolvent_metric(op, ref, lam_nonreal, probes, "WOT"),
        }

    for n, r in zip(n_list, parallel_map(row, n_list)):
        trace.append(n, r)
    return trace


# ---------------------------------------------------------------------------
# square roots
# ---------------------------------------------------------------------------

def _reduce(C):
    """Matrix of ``C`` in orthonormal coordinates plus the lifting isometry."""
    if isinstance(C, FormOperator):
        return np.asarray(C.reduced_matrix(), dtype=np.complex128), C.isometry(), C.symmetric
    M = np.atleast_2d(np.asarray(C, dtype=np.complex128))
    herm = np.allclose(M, M.conj().T, rtol=0, atol=1e-14 * max(np.abs(M).max(), 1.0))
    return M, None, herm


def matrix_sqrt(C):
    M, _, herm = _reduce(C)
    return sqrtm_hermitian(M) if herm else sqrtm_schur(M)


def accretive_sqrt_operator(C):
    """Form operator of ``C^{1/2}`` (numerical range within the quarter-sector for accretive ``C``)."""
    M, Q, _ = _reduce(C)
    basis = np.eye(M.shape[0]) if Q is None else Q
    return FormOperator(basis, matrix_sqrt(C), label="sqrt")


def kato_integral(C, lam, f, quad_nodes=256):
    """Quadrature of ``pi^{-1} int_0^inf sqrt(mu) / (lam^2 + mu) (mu I + C)^{-1} f dmu``.

    With ``mu = lam^2 tan^2 s`` the integrand becomes
    ``(2 lam / pi) sin^2 s (lam^2 sin^2 s I + cos^2 s C)^{-1} f`` on ``(0, pi/2)``.
    """
    M = np.atleast_2d(np.asarray(C, dtype=np.complex128))
    f = np.asarray(f, dtype=np.complex128)
    I = np.eye(M.shape[0])
    s, w = gauss_interval(0.0, np.pi / 2, quad_nodes)
    acc = np.zeros_like(f)
    for sk, wk in zip(s, w):
        sn, cs = np.sin(sk) ** 2, np.cos(sk) ** 2
        acc += wk * sn * linalg.solve(lam * lam * sn * I + cs * M, f)
    return (2.0 * lam / np.pi) * acc


def kato_sqrt_resolvent_check(C, lam, f=None, quad_nodes=256):
    """``||(lam I + C^{1/2})^{-1} f - Kato integral||`` for ``lam > 0``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    M, Q, _ = _reduce(C)
    m = M.shape[0]
    if f is None:
        F = np.eye(m, dtype=np.complex128)
    else:
        f = np.asarray(f, dtype=np.complex128)
        F = Q.conj().T @ f if Q is not None else f
    A = matrix_sqrt(C)
    direct = linalg.solve(lam * np.eye(m) + A, F)
    full = kato_integral(M, lam, F, quad_nodes)
    half = kato_integral(M, lam, F, max(quad_nodes // 2, 8))
    scale = max(np.linalg.norm(full), 1e-300)
    if np.linalg.norm(full - half) > 1e-2 * scale:
        raise QuadratureUnstable("Kato integral not resolved; increase quad_nodes")
    return float(np.linalg.norm(direct - full))


def sqrt_factorization_check(C, probes=None):
    """``||(I + C)^{-1} - (iI + A)^{-1}(-iI + A)^{-1}||`` on probes, ``A = C^{1/2}``."""
    M, _, _ = _reduce(C)
    m = M.shape[0]
    F = np.eye(m, dtype=np.complex128) if probes is None else np.asarray(
        probes.vectors if isinstance(probes, ProbeSet) else probes, dtype=np.complex128)
    A = matrix_sqrt(C)
    I = np.eye(m)
    lhs = linalg.solve(I + M, F)
    rhs = linalg.solve(1j * I + A, linalg.solve(-1j * I + A, F))
    return float(np.max(np.linalg.norm(lhs - rhs, axis=0)))
