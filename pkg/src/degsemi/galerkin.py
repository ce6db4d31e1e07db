"""Nested Galerkin chains for elliptic forms in one and two dimensions.

Every chain sits inside one reference discretization with basis
``B_ref`` (columns in the ambient space) and reference stiffness
``K_ref``. Level ``k`` is described by an embedding ``E_k`` of its
coefficients into reference coefficients, so

    basis_k = B_ref E_k,    K_k = E_k^* K_ref E_k,

which is literally the restriction of the form to ``span(basis_k)``.

For finite elements the ambient coordinates are ``y = L^* c`` with ``M =
L L^*`` the reference mass matrix; the ambient dot product then equals the
``L_2`` inner product of the finite element functions.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse

from ._kernels import assemble_p1_1d, assemble_q1_2d
from .errors import ExperimentFailed, ModesExceedGrid, QuadratureOrderTooLow
from .metrics import (
    ConvergenceTrace,
    MetricKind,
    ProbeSet,
    projection_decomposition_check,
    projection_sot_metric,
    resolvent_metric,
    sup_halfopen_strong_metric,
)
from .operator import FormOperator, resolvent_apply
from .parallel import parallel_map
from .quadrature import gauss_interval
from .semigroup import SemigroupEvaluator

NEST_TOL = 1e-10
QUAD_CONSISTENCY_TOL = 1e-8


class FormKind(str, enum.Enum):
    DIRICHLET_LAPLACE_1D = "DIRICHLET_LAPLACE_1D"
    ADVECTION_DIFFUSION_1D = "ADVECTION_DIFFUSION_1D"
    DIRICHLET_DIVFORM_2D = "DIRICHLET_DIVFORM_2D"


@dataclass(frozen=True)
class ContinuousFormSpec:
    """``a(u, v) = int diffusion grad u . grad v + drift u' v`` with Dirichlet data.

    ``diffusion`` is a number or a callable (``c(x)`` in 1D, ``c(x, y)``
    returning a scalar or a 2x2 tensor in 2D). ``shift`` is the coercivity
    shift ``mu`` used by :func:`coercivity_shift`.
    """

    kind: FormKind = FormKind.DIRICHLET_LAPLACE_1D
    length: float = 1.0
    height: float = 1.0
    diffusion: object = 1.0
    drift: float = 0.0
    shift: float = 1.0
    eta: float = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FormKind(self.kind))
        if self.kind is FormKind.DIRICHLET_LAPLACE_1D and self.drift != 0:
            raise ValueError("use ADVECTION_DIFFUSION_1D for a nonzero drift")

    @property
    def dim(self):
        return 2 if self.kind is FormKind.DIRICHLET_DIVFORM_2D else 1

    @property
    def constant_diffusion(self):
        return not callable(self.diffusion)

    def diffusion_1d(self, x):
        if callable(self.diffusion):
            return np.asarray(self.diffusion(x), dtype=float) * np.ones_like(x)
        return np.full_like(x, float(self.diffusion), dtype=float)

    def diffusion_2d(self, x, y):
        """Tensor samples of shape ``x.shape + (2, 2)``."""
        c = self.diffusion(x, y) if callable(self.diffusion) else float(self.diffusion)
        c = np.asarray(c, dtype=np.complex128)
        if c.shape[-2:] == (2, 2):
            return np.broadcast_to(c, x.shape + (2, 2)).copy()
        out = np.zeros(x.shape + (2, 2), dtype=np.complex128)
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        return out

    def check_ellipticity(self, samples):
        eta = float(np.min(np.real(samples)))
        floor = self.eta if self.eta is not None else 0.0
        if not eta > floor:
            raise ValueError(f"diffusion is not uniformly positive (min {eta:.3e})")
        return eta


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------

@dataclass
class ReferenceDiscretization:
    """Ambient basis and form assembly shared by all levels of a chain."""

    kind: str  # "fe1d", "fe2d" or "fourier"
    ambient_basis: np.ndarray
    grid: dict
    _stiffness_cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self):
        return self.ambient_basis.shape[1]

    def stiffness(self, spec):
        key = id(spec)
        if key not in self._stiffness_cache:
            self._stiffness_cache[key] = (spec, _assemble_reference(self, spec))
        return self._stiffness_cache[key][1]


@dataclass(frozen=True)
class ChainLevel:
    basis: np.ndarray
    embed: np.ndarray
    label: object
    reference: ReferenceDiscretization = field(repr=False)

    @property
    def rank(self):
        return self.basis.shape[1]


@dataclass(frozen=True)
class SubspaceChain:
    ambient: int
    levels: tuple
    labels: tuple
    reference: ReferenceDiscretization = field(repr=False)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k):
        return self.levels[k]

    def check_nesting(self, tol=NEST_TOL):
        for lo, hi in zip(self.levels, self.levels[1:]):
            coef, *_ = np.linalg.lstsq(hi.embed, lo.embed, rcond=None)
            err = np.linalg.norm(hi.embed @ coef - lo.embed) / max(np.linalg.norm(lo.embed), 1e-300)
            if err > tol:
                raise ValueError(f"level {lo.label} is not contained in level {hi.label} (residual {err:.2e})")
        return True


def _make_chain(reference, embeds, labels):
    levels = tuple(
        ChainLevel(basis=reference.ambient_basis @ E, embed=E, label=lab, reference=reference)
        for E, lab in zip(embeds, labels)
    )
    chain = SubspaceChain(reference.ambient_basis.shape[0], levels, tuple(labels), reference)
    chain.check_nesting()
    return chain


def _hat_interpolation(n_coarse, n_fine):
    """Fine interior nodal values of the coarse interior hats (Dirichlet)."""
    r = n_fine // n_coarse
    if r * n_coarse != n_fine:
        raise ValueError(f"mesh with {n_fine} cells does not refine {n_coarse} cells")
    i = np.arange(1, n_fine)[:, None]
    j = np.arange(1, n_coarse)[None, :]
    return np.maximum(0.0, 1.0 - np.abs(i - j * r) / r)


def _mass_1d(n, h):
    """Interior linear-element mass matrix on ``n`` cells."""
    main = np.full(n - 1, 4 * h / 6)
    off = np.full(n - 2, h / 6)
    return np.diag(main) + np.diag(off, 1) + np.diag(off, -1)


def _cells(h, length):
    n = int(round(length / h))
    if n < 2 or abs(n * h - length) > 1e-12 * length:
        raise ValueError(f"mesh size {h} does not divide length {length}")
    return n


def build_fe_chain(spec, refinements, h0=0.25, reference_h=None):
    """Linear (1D) or bilinear (2D) hat functions on uniformly refined meshes.

    Levels use ``h_k = h0 2^{-k}``, ``k = 0..refinements``. With
    ``reference_h`` a finer mesh is appended as the last level; it also
    defines the ambient space.
    """
    if refinements < 1:
        raise ValueError("refinements must be >= 1")
    hs = [h0 * 2.0 ** -k for k in range(refinements + 1)]
    if reference_h is not None and reference_h < hs[-1]:
        hs.append(float(reference_h))
    n_ref = _cells(hs[-1], spec.length)
    if spec.dim == 1:
        M = _mass_1d(n_ref, hs[-1])
        L = linalg.cholesky(M, lower=True)
        ref = ReferenceDiscretization("fe1d", L.conj().T, {"n": n_ref, "h": hs[-1], "length": spec.length})
        embeds = [_hat_interpolation(_cells(h, spec.length), n_ref) for h in hs]
    else:
        m_ref = _cells(hs[-1], spec.height)
        Mx, My = _mass_1d(n_ref, hs[-1]), _mass_1d(m_ref, hs[-1])
        Lx, Ly = linalg.cholesky(Mx, lower=True), linalg.cholesky(My, lower=True)
        # node index i + j * nx, so x is the fast axis
        ref = ReferenceDiscretization(
            "fe2d", np.kron(Ly, Lx).conj().T,
            {"nx": n_ref, "ny": m_ref, "h": hs[-1], "length": spec.length, "height": spec.height},
        )
        embeds = [
            np.kron(_hat_interpolation(_cells(h, spec.height), m_ref), _hat_interpolation(_cells(h, spec.length), n_ref))
            for h in hs
        ]
    return _make_chain(ref, embeds, hs)


def build_fourier_chain(spec, mode_counts, grid=64):
    """Sine modes ``sqrt(2/L) sin(k pi x / L)``, ``k = 1..K``, sampled on a grid.

    The ambient space holds ``sqrt(h)``-scaled samples at the ``grid - 1``
    interior points. The discrete modes are then exactly orthonormal.
    """
    if spec.dim != 1:
        raise ValueError("Fourier chains are one-dimensional")
    counts = [int(k) for k in mode_counts]
    if any(b <= a for a, b in zip(counts, counts[1:])) or counts[0] < 1:
        raise ValueError("mode counts must be positive and increasing")
    n = int(grid)
    if counts[-1] > n - 1:
        raise ModesExceedGrid(f"{counts[-1]} modes need a grid with more than {counts[-1] + 1} cells")
    Lx = spec.length
    h = Lx / n
    x = h * np.arange(1, n)
    k = np.arange(1, counts[-1] + 1)
    B = np.sqrt(h) * np.sqrt(2.0 / Lx) * np.sin(np.outer(x, k) * np.pi / Lx)
    ref = ReferenceDiscretization("fourier", B, {"n": n, "h": h, "length": Lx, "modes": counts[-1]})
    K = counts[-1]
    embeds = [np.eye(K)[:, :c] for c in counts]
    return _make_chain(ref, embeds, counts)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _element_average_1d(spec, n, h, q):
    x, w = gauss_interval(0.0, h, q)
    pts = h * np.arange(n)[:, None] + x[None, :]
    vals = spec.diffusion_1d(pts)
    spec.check_ellipticity(vals)
    return vals @ w / h


def _fe1d_stiffness(spec, n, h, q):
    c = _element_average_1d(spec, n, h, q)
    drift = np.full(n, float(spec.drift))
    r, cidx, v = assemble_p1_1d(h, c, drift)
    K = sparse.coo_matrix((v, (r, cidx)), shape=(n + 1, n + 1)).toarray()
    return K[1:-1, 1:-1]


def _fe2d_stiffness(spec, nx, ny, h, q):
    x, w = gauss_interval(0.0, h, q)
    ex, ey = np.meshgrid(h * np.arange(nx), h * np.arange(ny))  # (ny, nx)
    X = ex.ravel()[:, None, None] + x[None, :, None]
    Y = ey.ravel()[:, None, None] + x[None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    C = spec.diffusion_2d(X, Y)  # (ne, q, q, 2, 2)
    herm = 0.5 * (C + np.conj(np.swapaxes(C, -1, -2)))
    spec.check_ellipticity(np.linalg.eigvalsh(herm))
    ww = np.outer(w, w) / (h * h)
    coef = np.einsum("eabkl,ab->ekl", C, ww)
    r, cidx, v = assemble_q1_2d(nx, ny, h, h, coef)
    nn = (nx + 1) * (ny + 1)
    K = sparse.coo_matrix((v, (r, cidx)), shape=(nn, nn)).tocsr()
    ii, jj = np.meshgrid(np.arange(1, nx), np.arange(1, ny))
    interior = (ii + jj * (nx + 1)).ravel()
    return K[interior][:, interior].toarray()


def _fourier_stiffness(spec, n, h, K, q):
    Lx = spec.length
    k = np.arange(1, K + 1)
    if spec.constant_diffusion:
        c = float(spec.diffusion)
        spec.check_ellipticity(np.array([c]))
        S = np.diag(c * (k * np.pi / Lx) ** 2).astype(np.complex128)
        if spec.drift:
            a = k[None, :] * np.pi / Lx  # trial
            b = k[:, None] * np.pi / Lx  # test
            odd = (1 - (-1.0) ** (k[:, None] + k[None, :]))
            with np.errstate(divide="ignore", invalid="ignore"):
                D = np.where(odd != 0, (2.0 / Lx) * a * odd * b / (b * b - a * a), 0.0)
            S = S + spec.drift * D
        return S
    x, w = gauss_interval(0.0, h, q)
    pts = (h * np.arange(n)[:, None] + x[None, :]).ravel()
    wts = np.tile(w, n)
    cval = spec.diffusion_1d(pts)
    spec.check_ellipticity(cval)
    arg = np.outer(pts, k) * np.pi / Lx
    phi = np.sqrt(2.0 / Lx) * np.sin(arg)
    dphi = np.sqrt(2.0 / Lx) * (k * np.pi / Lx) * np.cos(arg)
    S = (dphi * (wts * cval)[:, None]).T @ dphi
    if spec.drift:
        S = S + spec.drift * ((phi * wts[:, None]).T @ dphi)
    return S.astype(np.complex128)


def _assemble_reference(ref, spec, check=True):
    g = ref.grid
    if ref.kind == "fe1d":
        build = lambda q: _fe1d_stiffness(spec, g["n"], g["h"], q)
        q, q_check = 3, 5
    elif ref.kind == "fe2d":
        build = lambda q: _fe2d_stiffness(spec, g["nx"], g["ny"], g["h"], q)
        q, q_check = 3, 5
    else:
        build = lambda q: _fourier_stiffness(spec, g["n"], g["h"], g["modes"], q)
        q, q_check = 16, 20
    K = build(q)
    if check and not spec.constant_diffusion:
        K2 = build(q_check)
        gap = np.linalg.norm(K - K2) / max(np.linalg.norm(K2), 1e-300)
        if gap > QUAD_CONSISTENCY_TOL:
            raise QuadratureOrderTooLow(f"{q}-point rule differs from {q_check}-point rule by {gap:.2e}")
    return K


def restrict_form(spec, level):
    """Form operator of ``a`` restricted to ``span(level.basis)``."""
    K_ref = level.reference.stiffness(spec)
    E = level.embed
    K = E.conj().T @ K_ref @ E
    return FormOperator(level.basis, K, label=f"level {level.label}")


def restrict_chain(spec, chain):
    return parallel_map(lambda lvl: restrict_form(spec, lvl), chain.levels)


def coercivity_shift(op, mu=1.0):
    """Shift ``K -> K + s G`` so the real part becomes coercive.

    ``s = 0`` if the smallest eigenvalue of the pencil ``(Re K, G)`` is
    positive, else ``s = mu - lambda_min``. The shifted semigroup equals
    ``exp(-s t)`` times the original.
    """
    K = op.dense_stiffness()
    G = op.dense_gram()
    lmin = float(linalg.eigh(0.5 * (K + K.conj().T), G, eigvals_only=True)[0])
    shift = 0.0 if lmin > 0 else float(mu) - lmin
    if shift == 0.0:
        return op, 0.0
    label = f"{op.label}+{shift:g}" if op.label else None
    return FormOperator(op.basis, K + shift * G, label=label), shift


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def galerkin_experiment(chain, spec, f, T, probes=None, lam=1.0, check=True, grid=128):
    """Per-level sup-(0, T], projection and resolvent metrics against the finest level.

    Probes default to ``f`` alone. With ``check`` the sup and projection
    metrics must decrease along the chain, otherwise
    :class:`ExperimentFailed` is raised.
    """
    f = np.asarray(f, dtype=np.complex128)
    if probes is None:
        probes = ProbeSet.from_vectors(f)
    ops = restrict_chain(spec, chain)
    ref_op = ops[-1]
    ref = SemigroupEvaluator(ref_op)
    trace = ConvergenceTrace(params={"T": T, "lambda": [complex(lam).real, complex(lam).imag],
                                     "levels": [str(x) for x in chain.labels], "probe_seed": probes.seed,
                                     "kind": spec.kind.value})

    def row(op):
        ev = SemigroupEvaluator(op)
        return {
            MetricKind.SUP_HALFOPEN_STRONG: sup_halfopen_strong_metric(ev, ref, T, probes, grid),
            MetricKind.PROJECTION_SOT: projection_sot_metric(op, ref_op, probes),
            MetricKind.RESOLVENT_SOT: resolvent_metric(op, ref_op, lam, probes, "SOT"),
        }

    for label, r in zip(chain.labels[:-1], parallel_map(row, ops[:-1])):
        trace.append(label, r)
    if check:
        for tag in (MetricKind.SUP_HALFOPEN_STRONG, MetricKind.PROJECTION_SOT):
            s = trace.series(tag)
            # a level that already reproduces the reference may stay at zero
            if np.any((np.diff(s) >= 0) & (s[1:] > 0)):
                raise ExperimentFailed(f"{tag} does not decrease along the chain: {s}")
    return trace


def energy_errors(chain, spec, lam, f):
    """``Re a(w) + lam ||w||^2`` for ``w = u_k - u`` with ``u_k`` the level resolvent solutions.

    For symmetric forms and real ``lam > 0`` nested Galerkin makes this
    nonincreasing in ``k``.
    """
    ops = restrict_chain(spec, chain)
    K_ref = chain.reference.stiffness(spec)
    f = np.asarray(f, dtype=np.complex128)
    ref_op = ops[-1]
    c_ref = chain.levels[-1].embed @ ref_op.solve_shifted(lam, ref_op.basis.conj().T @ f)
    out = []
    for op, lvl in zip(ops, chain.levels):
        w = lvl.embed @ op.solve_shifted(lam, op.basis.conj().T @ f) - c_ref
        Bw = chain.reference.ambient_basis @ w
        out.append(float(np.real(np.vdot(w, K_ref @ w)) + lam * np.vdot(Bw, Bw).real))
    return out


def decomposition_violations(chain, spec, T, f, grid=128):
    """Per level, the largest violation of the projection-splitting bound (non-positive is good)."""
    ops = restrict_chain(spec, chain)
    ref = SemigroupEvaluator(ops[-1])
    return [projection_decomposition_check(SemigroupEvaluator(op), ref, T, f, grid) for op in ops[:-1]]


def first_eigenvalue(op):
    M = op.reduced_matrix()
    if op.symmetric:
        return float(np.linalg.eigvalsh(M)[0])
    ev = np.linalg.eigvals(M)
    return complex(ev[np.argmin(ev.real)])


def advection_sector_bound(spec):
    """``tan(theta) <= |b| / (eta pi)`` from Poincare ``||u|| <= (L/pi) ||u'||``."""
    if spec.constant_diffusion:
        eta = float(spec.diffusion)
    else:
        xs = np.linspace(0, spec.length, 4097)
        eta = float(np.min(spec.diffusion_1d(xs)))
    return abs(spec.drift) * spec.length / (eta * np.pi)
