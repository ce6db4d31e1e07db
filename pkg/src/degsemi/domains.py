"""Dirichlet problems on an increasing chain of subdomains of a master grid.

All levels share one master grid over ``Omega``. The ambient space holds
lumped-mass scaled nodal values ``y = sqrt(|cell|) u`` so its dot product
is the discrete ``L_2(Omega)`` product. A level's basis consists of the
canonical vectors at the nodes of ``Omega_n``, i.e. zero extension, and its
stiffness is the principal submatrix of the master stiffness on those
nodes. Nesting of the ``H^1_0`` analogues is therefore node-set inclusion.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ._kernels import assemble_p1_1d, assemble_q1_2d
from .errors import EmptyDomain, ExperimentFailed, InitialDataNotConverging
from .metrics import ConvergenceTrace, MetricKind
from .operator import FormOperator, resolvent_apply
from .parallel import parallel_map
from .semigroup import SemigroupEvaluator

SUP_GRID = 128


@dataclass(frozen=True)
class EllipticCoefficients:
    """Scalar or matrix diffusion field ``a``; a number means ``a I``."""

    field: object = 1.0
    eta: float = None

    def sample(self, *xs):
        a = self.field(*xs) if callable(self.field) else self.field
        a = np.asarray(a, dtype=np.complex128)
        if len(xs) == 1:
            return np.broadcast_to(a, xs[0].shape).copy()
        if a.shape[-2:] == (2, 2) and a.ndim >= 2:
            return np.broadcast_to(a, xs[0].shape + (2, 2)).copy()
        out = np.zeros(xs[0].shape + (2, 2), dtype=np.complex128)
        out[..., 0, 0] = a
        out[..., 1, 1] = a
        return out

    def check(self, samples):
        """Smallest ``Re xi^* a xi / |xi|^2`` over samples and 8 probe directions."""
        if samples.ndim >= 3 and samples.shape[-2:] == (2, 2):
            ang = np.pi * np.arange(8) / 8
            xi = np.stack([np.cos(ang), np.sin(ang)], axis=1)
            q = np.real(np.einsum("di,...ij,dj->...d", xi, samples, xi))
        else:
            q = np.real(samples)
        eta = float(q.min())
        need = self.eta if self.eta is not None else 0.0
        if eta < need - 1e-12 or eta <= 0:
            raise ValueError(f"coefficients are not uniformly elliptic (min {eta:.3e})")
        return eta


@dataclass(frozen=True)
class DomainChain:
    """Master grid plus increasing boolean masks over its interior nodes.

    ``shape`` is ``(n_cells,)`` in 1D and ``(nx_cells, ny_cells)`` in 2D;
    masks are flat over interior nodes (x fastest). The last mask is the
    whole of ``Omega``.
    """

    dimension: int
    extent: tuple
    h: float
    masks: tuple
    labels: tuple
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        masks = tuple(np.asarray(m, dtype=bool) for m in self.masks)
        object.__setattr__(self, "masks", masks)
        if len(masks) != len(self.labels):
            raise ValueError("one label per mask is required")
        for lo, hi in zip(masks, masks[1:]):
            if np.any(lo & ~hi):
                raise ValueError("masks must be increasing")
        if not masks[-1].all():
            raise ValueError("the last mask must cover Omega")

    @property
    def shape(self):
        return tuple(int(round(e / self.h)) for e in self.extent)

    @property
    def interior_shape(self):
        return tuple(n - 1 for n in self.shape)

    @property
    def ambient(self):
        return int(np.prod(self.interior_shape))

    @property
    def cell_measure(self):
        return self.h ** self.dimension

    def coordinates(self):
        """Interior node coordinates, one array per axis (flat, x fastest)."""
        axes = [self.h * np.arange(1, n + 1) for n in self.interior_shape]
        if self.dimension == 1:
            return (axes[0],)
        X, Y = np.meshgrid(axes[0], axes[1])
        return X.ravel(), Y.ravel()

    def to_ambient(self, nodal):
        return np.sqrt(self.cell_measure) * np.asarray(nodal)

    def to_nodal(self, y):
        return np.asarray(y) / np.sqrt(self.cell_measure)

    def __len__(self):
        return len(self.masks)


def interval_shrink_chain(ns=(2, 4, 8, 16), h=1 / 256, length=1.0):
    """``Omega_n = (0, L (1 - 1/n))`` followed by ``Omega = (0, L)``."""
    n_cells = int(round(length / h))
    x = h * np.arange(1, n_cells)
    masks = [x < length * (1 - 1 / n) - 1e-12 for n in ns] + [np.ones_like(x, dtype=bool)]
    return DomainChain(1, (float(length),), float(h), tuple(masks), tuple(list(ns) + ["Omega"]))


def rectangle_shrink_chain(ns=(2, 4, 8), h=1 / 32, extent=(1.0, 1.0)):
    """Staircase rectangles ``(0, a (1 - 1/n)) x (0, b (1 - 1/n))`` then ``Omega``."""
    nx, ny = (int(round(e / h)) for e in extent)
    X, Y = np.meshgrid(h * np.arange(1, nx), h * np.arange(1, ny))
    X, Y = X.ravel(), Y.ravel()
    masks = [(X < extent[0] * (1 - 1 / n) - 1e-12) & (Y < extent[1] * (1 - 1 / n) - 1e-12) for n in ns]
    masks.append(np.ones_like(X, dtype=bool))
    return DomainChain(2, tuple(extent), float(h), tuple(masks), tuple(list(ns) + ["Omega"]))


def constant_chain(levels, h=1 / 64, length=1.0):
    n_cells = int(round(length / h))
    masks = tuple(np.ones(n_cells - 1, dtype=bool) for _ in range(levels))
    return DomainChain(1, (float(length),), float(h), masks, tuple(range(1, levels + 1)))


def master_stiffness(chain, coeffs):
    """Stiffness of ``-div(a grad)`` on all interior nodes in ambient coordinates."""
    key = ("K", id(coeffs))
    if key in chain._cache:
        return chain._cache[key][1]
    h = chain.h
    if chain.dimension == 1:
        n = chain.shape[0]
        mid = h * (np.arange(n) + 0.5)
        a = coeffs.sample(mid)
        coeffs.check(a)
        if np.any(np.abs(a.imag) > 0):
            raise ValueError("1D coefficients must be real")
        r, c, v = assemble_p1_1d(h, a.real)
        K = sparse.coo_matrix((v, (r, c)), shape=(n + 1, n + 1)).tocsr()[1:-1, 1:-1]
    else:
        nx, ny = chain.shape
        ex, ey = np.meshgrid(h * (np.arange(nx) + 0.5), h * (np.arange(ny) + 0.5))
        a = coeffs.sample(ex.ravel(), ey.ravel())
        coeffs.check(a)
        r, c, v = assemble_q1_2d(nx, ny, h, h, a)
        nn = (nx + 1) * (ny + 1)
        Kfull = sparse.coo_matrix((v, (r, c)), shape=(nn, nn)).tocsr()
        ii, jj = np.meshgrid(np.arange(1, nx), np.arange(1, ny))
        interior = (ii + jj * (nx + 1)).ravel()
        K = Kfull[interior][:, interior]
    # nodal -> ambient: u = y / sqrt(|cell|) on both sides
    K = (K / chain.cell_measure).toarray()
    chain._cache[key] = (coeffs, K)
    return K


def assemble_dirichlet_operator(chain, n, coeffs):
    """Form operator on ``Omega_n`` (level index ``n``), zero-extended into ``Omega``."""
    mask = chain.masks[n]
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise EmptyDomain(f"level {chain.labels[n]} has no interior node")
    K = master_stiffness(chain, coeffs)[np.ix_(idx, idx)]
    B = np.zeros((chain.ambient, idx.size))
    B[idx, np.arange(idx.size)] = 1.0
    return FormOperator(B, K, label=f"Omega_{chain.labels[n]}")


def level_operators(chain, coeffs):
    return parallel_map(lambda n: assemble_dirichlet_operator(chain, n, coeffs), range(len(chain)))


def mask_initial_data(chain, u0):
    """``u0`` restricted to each ``Omega_n`` (zero outside)."""
    u0 = np.asarray(u0)
    return [np.where(m, u0, 0) for m in chain.masks[:-1]]


def varying_domain_parabolic_experiment(chain, coeffs, u0_sequence, u0, T, grid=SUP_GRID, tol=1e-12):
    """Per level, ``sup_{t in [0, T]} ||u_n(t) - u(t)||`` with ``u`` on ``Omega``.

    ``t = 0`` contributes ``||u_{0,n} - u_0||``; the remaining times form a
    uniform grid. ``u0`` and ``u0_sequence`` are ambient vectors.
    """
    u0 = np.asarray(u0, dtype=np.complex128)
    u0s = [np.asarray(v, dtype=np.complex128) for v in u0_sequence]
    if len(u0s) != len(chain) - 1:
        raise ValueError("one initial vector per subdomain level is required")
    init = np.array([np.linalg.norm(v - u0) for v in u0s])
    if np.any(np.diff(init) > tol):
        raise InitialDataNotConverging(f"initial errors do not decrease: {init}")
    ops = level_operators(chain, coeffs)
    ref = SemigroupEvaluator(ops[-1])
    ts = np.linspace(0.0, T, grid)[1:]
    u = ref.apply_many(ts, u0)
    trace = ConvergenceTrace(params={"T": T, "grid": grid, "h": chain.h, "levels": [str(x) for x in chain.labels]})

    def row(k):
        un = SemigroupEvaluator(ops[k]).apply_many(ts, u0s[k])
        sup = max(init[k], float(np.linalg.norm(un - u, axis=1).max()))
        return {"SUP_CLOSED_STRONG": sup, "INITIAL_ERROR": init[k]}

    for k, r in zip(range(len(u0s)), parallel_map(row, range(len(u0s)))):
        trace.append(chain.labels[k], r)
    return trace


def varying_domain_elliptic_experiment(chain, coeffs, lam, f):
    """Per level ``||(lam I + A_n)^{-1} f - (lam I + A)^{-1} f||``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    ops = level_operators(chain, coeffs)
    f = np.asarray(f, dtype=np.complex128)
    u = resolvent_apply(ops[-1], lam, f)
    trace = ConvergenceTrace(params={"lambda": float(lam), "h": chain.h, "levels": [str(x) for x in chain.labels]})
    sols = parallel_map(lambda op: resolvent_apply(op, lam, f), ops[:-1])
    for k, un in enumerate(sols):
        trace.append(chain.labels[k], {MetricKind.RESOLVENT_SOT_SINGLE: float(np.linalg.norm(un - u))})
    return trace


def elliptic_solutions(chain, coeffs, lam, f):
    """Nodal values of every level's solution (last entry: ``Omega``)."""
    ops = level_operators(chain, coeffs)
    return [chain.to_nodal(resolvent_apply(op, lam, f)) for op in ops]


def monotonicity_violation(chain, coeffs, lam, f):
    """Largest ``u_n - u_{n+1}`` and largest ``-u_n`` over all levels (both should be <= 0)."""
    sols = [np.real(s) for s in elliptic_solutions(chain, coeffs, lam, f)]
    order = max(float(np.max(a - b)) for a, b in zip(sols, sols[1:]))
    sign = max(float(np.max(-s)) for s in sols)
    return order, sign


def require_decreasing(trace, tag, strict=True):
    s = trace.series(tag)
    bad = np.diff(s) >= 0 if strict else np.diff(s) > 0
    if np.any(bad):
        raise ExperimentFailed(f"{tag} is not decreasing: {s}")
    return True
