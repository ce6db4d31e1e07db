"""Periodic homogenization: cell problems, effective tensors, eps-scaled operators.

Coefficient samples live at the element centres ``(i + 1/2)/m`` of a
uniform cell grid and are treated as piecewise constant. Cell problems use
periodic linear (1D) or bilinear (2D) elements with a mean-zero constraint
imposed through a bordered sparse system.

The effective tensor is

    c_hat[k, l] = int_cell c_kl + sum_i c_ki d_i chi_l,

which for ``d = 1`` reduces to the harmonic mean ``(int 1/c)^{-1}``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from ._kernels import assemble_p1_1d, assemble_q1_2d, oscillatory_sum, q1_gradient_integrals
from .errors import (
    CellUnderResolved,
    ExperimentFailed,
    NotPositiveDefinite,
    SolverStagnation,
    SupportViolation,
)
from .metrics import ConvergenceTrace, MetricKind
from .operator import FormOperator, resolvent_apply
from .parallel import parallel_map
from .semigroup import SemigroupEvaluator

POINTS_PER_PERIOD = 16
RESIDUAL_TOL = 1e-10
SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class PeriodicCoefficientField:
    """Samples of a periodic coefficient on the unit cell.

    ``samples`` has shape ``(m,)`` in 1D and ``(m, m, 2, 2)`` in 2D, the
    latter indexed ``[j, i]`` with ``i`` along ``x_1``.
    """

    samples: np.ndarray
    name: str = "field"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            if s.min() <= 0:
                raise ValueError("coefficient must be positive")
        elif s.ndim == 4 and s.shape[2:] == (2, 2) and s.shape[0] == s.shape[1]:
            if np.max(np.abs(s - np.swapaxes(s, -1, -2))) > 1e-14 * np.abs(s).max():
                raise ValueError("coefficient tensor must be symmetric")
            if np.linalg.eigvalsh(s).min() <= 0:
                raise ValueError("coefficient tensor must be uniformly positive definite")
        else:
            raise ValueError(f"unsupported sample shape {s.shape}")
        object.__setattr__(self, "samples", s)

    @property
    def dimension(self):
        return 1 if self.samples.ndim == 1 else 2

    @property
    def m(self):
        return self.samples.shape[0]

    @property
    def symmetric(self):
        return True

    @property
    def ellipticity(self):
        if self.dimension == 1:
            return float(self.samples.min())
        return float(np.linalg.eigvalsh(self.samples).min())

    @property
    def is_constant(self):
        s = self.samples
        return bool(np.all(s == s.reshape((-1,) + s.shape[self.dimension:])[0]))

    def tensor_samples(self):
        """Flat ``(m^d, d, d)`` view, element order ``i + j m``."""
        if self.dimension == 1:
            return self.samples[:, None, None]
        return self.samples.reshape(-1, 2, 2)

    def lookup(self, *ys):
        """Piecewise-constant values at cell coordinates ``ys`` (taken mod 1)."""
        m = self.m
        idx = [np.minimum((np.mod(y, 1.0) * m).astype(np.int64), m - 1) for y in ys]
        if self.dimension == 1:
            return self.samples[idx[0]]
        return self.samples[idx[1], idx[0]]

    # -- presets ---------------------------------------------------------
    @classmethod
    def piecewise(cls, values=(1.0, 4.0), m=4096):
        """1D field equal to ``values[k]`` on the ``k``-th equal subinterval."""
        x = (np.arange(m) + 0.5) / m
        k = np.minimum((x * len(values)).astype(int), len(values) - 1)
        return cls(np.asarray(values, dtype=float)[k], name="piecewise")

    @classmethod
    def sinusoidal(cls, mean=2.0, amplitude=1.0, m=4096):
        x = (np.arange(m) + 0.5) / m
        return cls(mean + amplitude * np.sin(2 * np.pi * x), name="sinusoidal")

    @classmethod
    def constant(cls, value=1.0, dimension=1, m=16):
        if dimension == 1:
            return cls(np.full(m, float(value)), name="constant")
        v = np.asarray(value, dtype=float)
        t = v if v.shape == (2, 2) else float(value) * np.eye(2)
        return cls(np.broadcast_to(t, (m, m, 2, 2)).copy(), name="constant")

    @classmethod
    def laminate(cls, c1=(1.0, 4.0), c2=(1.0, 4.0), m=256):
        """2D ``diag(c1(x_1), c2(x_1))`` with piecewise-constant layers."""
        x = (np.arange(m) + 0.5) / m
        k1 = np.minimum((x * len(c1)).astype(int), len(c1) - 1)
        k2 = np.minimum((x * len(c2)).astype(int), len(c2) - 1)
        s = np.zeros((m, m, 2, 2))
        s[:, :, 0, 0] = np.asarray(c1, dtype=float)[k1][None, :]
        s[:, :, 1, 1] = np.asarray(c2, dtype=float)[k2][None, :]
        return cls(s, name="laminate")

    @classmethod
    def from_function(cls, func, dimension=1, m=256):
        x = (np.arange(m) + 0.5) / m
        if dimension == 1:
            return cls(np.asarray(func(x), dtype=float), name="function")
        X, Y = np.meshgrid(x, x)
        v = np.asarray(func(X, Y), dtype=float)
        if v.shape == X.shape:
            v = v[..., None, None] * np.eye(2)
        return cls(v, name="function")

    @classmethod
    def from_csv(cls, path, dimension=1):
        """Row-major node grid; 2D files hold ``c11, c12, c22`` triplets per row."""
        rows = np.loadtxt(path, delimiter=",", ndmin=2)
        if dimension == 1:
            return cls(rows.ravel(), name=str(path))
        m = int(round(np.sqrt(rows.shape[0])))
        if m * m != rows.shape[0] or rows.shape[1] != 3:
            raise ValueError("2D coefficient CSV needs m*m rows of c11,c12,c22")
        s = np.zeros((m, m, 2, 2))
        s[..., 0, 0] = rows[:, 0].reshape(m, m)
        s[..., 0, 1] = s[..., 1, 0] = rows[:, 1].reshape(m, m)
        s[..., 1, 1] = rows[:, 2].reshape(m, m)
        return cls(s, name=str(path))


@dataclass(frozen=True)
class CellProblemSolution:
    direction: int
    corrector: np.ndarray
    residual: float
    mean: float


@dataclass(frozen=True)
class HomogenizedTensor:
    entries: np.ndarray
    mu_prime: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            d = self.entries.shape[0]
            w.writerow(["k", "l", "value"])
            for k in range(d):
                for l in range(d):
                    w.writerow([k + 1, l + 1, format(float(self.entries[k, l]), ".17g")])


# ---------------------------------------------------------------------------
# cell problems
# ---------------------------------------------------------------------------

def _cell_system(field):
    """Periodic stiffness, per-element gradient integrals and node weights."""
    m = field.m
    h = 1.0 / m
    if field.dimension == 1:
        r, c, v = assemble_p1_1d(h, field.samples, periodic=True)
        K = sparse.coo_matrix((v.real, (r, c)), shape=(m, m)).tocsc()
        return K, h
    r, c, v = assemble_q1_2d(m, m, h, h, field.tensor_samples(), periodic=True)
    K = sparse.coo_matrix((v.real, (r, c)), shape=(m * m, m * m)).tocsc()
    return K, h * h


def _element_nodes(field):
    m = field.m
    if field.dimension == 1:
        e = np.arange(m)
        return np.stack([e, (e + 1) % m], axis=1)
    i, j = np.meshgrid(np.arange(m), np.arange(m))
    i, j = i.ravel(), j.ravel()
    ip, jp = (i + 1) % m, (j + 1) % m
    return np.stack([i + j * m, ip + j * m, ip + jp * m, i + jp * m], axis=1)


def _gradient_integrals(field):
    """``J[l, a] = int_e d_l phi_a`` for the local nodes of one element."""
    h = 1.0 / field.m
    if field.dimension == 1:
        return np.array([[-1.0, 1.0]])
    return q1_gradient_integrals(h, h).real


def _cell_rhs(field, j):
    """Load ``-int sum_l c_jl d_l v`` for every nodal hat ``v``."""
    C = field.tensor_samples()
    J = _gradient_integrals(field)
    nodes = _element_nodes(field)
    local = -np.einsum("el,la->ea", C[:, j, :], J)
    n = field.m ** field.dimension
    return np.bincount(nodes.ravel(), weights=local.ravel(), minlength=n)


def solve_cell_problem(field, j=0):
    """Mean-zero periodic corrector ``chi_j`` (direction index ``j`` from 0)."""
    if not 0 <= j < field.dimension:
        raise ValueError(f"direction {j} out of range")
    K, w = _cell_system(field)
    b = _cell_rhs(field, j)
    n = K.shape[0]
    if not np.any(b):
        return CellProblemSolution(j, np.zeros(n), 0.0, 0.0)
    ones = sparse.csc_matrix(np.full((n, 1), w))
    bordered = sparse.bmat([[K, ones], [ones.T, None]], format="csc")
    try:
        sol = spla.spsolve(bordered, np.concatenate([b, [0.0]]))
    except RuntimeError as exc:
        raise SolverStagnation(str(exc)) from exc
    chi = sol[:n]
    resid = float(np.linalg.norm(K @ chi - b))
    scale = spla.norm(K, np.inf) * np.abs(chi).max() + np.abs(b).max()
    if not np.all(np.isfinite(chi)) or resid > RESIDUAL_TOL * scale * np.sqrt(n):
        raise SolverStagnation(f"cell residual {resid:.3e} (scale {scale:.3e})")
    return CellProblemSolution(j, chi, resid, float(w * chi.sum()))


def solve_all_cell_problems(field):
    return parallel_map(lambda j: solve_cell_problem(field, j), range(field.dimension))


def corrector_gradient_1d(field, sol):
    """Element-wise ``chi'`` of a 1D corrector."""
    chi = sol.corrector
    return (np.roll(chi, -1) - chi) * field.m


def homogenized_tensor(field, correctors=None):
    """Effective tensor from the correctors (computed if not given)."""
    if correctors is None:
        correctors = solve_all_cell_problems(field)
    d = field.dimension
    C = field.tensor_samples()
    J = _gradient_integrals(field)
    nodes = _element_nodes(field)
    vol = 1.0 / field.m ** d
    chat = np.zeros((d, d))
    for sol in correctors:
        l = sol.direction
        # sum_i int_e d_i chi_l = sum_a chi_l[node a] J[i, a]
        grad = np.einsum("ia,ea->ei", J, sol.corrector[nodes])
        for k in range(d):
            chat[k, l] = vol * C[:, k, l].sum() + np.einsum("ei,ei->", C[:, k, :], grad)
    if np.max(np.abs(chat - chat.T)) > SYMMETRY_TOL * np.abs(chat).max():
        raise NotPositiveDefinite(f"effective tensor is not symmetric: {chat}")
    chat = 0.5 * (chat + chat.T)
    mu = float(np.linalg.eigvalsh(chat).min())
    if mu <= 0:
        raise NotPositiveDefinite(f"effective tensor has eigenvalue {mu}")
    return HomogenizedTensor(chat, mu)


def harmonic_mean(values):
    return 1.0 / np.mean(1.0 / np.asarray(values, dtype=float))


# ---------------------------------------------------------------------------
# eps-scaled operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """``(0, L_1) x ... `` with uniform spacing ``h``."""

    extent: tuple
    h: float

    @property
    def dimension(self):
        return len(self.extent)

    @property
    def cells(self):
        out = []
        for L in self.extent:
            n = int(round(L / self.h))
            if abs(n * self.h - L) > 1e-9 * L:
                raise ValueError(f"h={self.h} does not divide {L}")
            out.append(n)
        return tuple(out)


def element_coefficients(field, epsilon, box):
    """Coefficient tensor per element of ``box`` sampled as ``c(x / eps mod 1)``."""
    h = box.h
    if box.dimension == 1:
        (n,) = box.cells
        xc = h * (np.arange(n) + 0.5)
        return field.lookup(xc / epsilon).astype(float)
    nx, ny = box.cells
    X, Y = np.meshgrid(h * (np.arange(nx) + 0.5), h * (np.arange(ny) + 0.5))
    return field.lookup(X.ravel() / epsilon, Y.ravel() / epsilon)


def _node_weights(box, boundary):
    cells = box.cells
    ws = []
    for n in cells:
        if boundary == "DIRICHLET":
            ws.append(np.full(n - 1, box.h))
        else:
            w = np.full(n + 1, box.h)
            w[0] = w[-1] = box.h / 2
            ws.append(w)
    if len(ws) == 1:
        return ws[0]
    return np.kron(ws[1], ws[0])


def _operator_from_elements(box, coef, boundary, label):
    boundary = boundary.upper()
    if boundary not in ("DIRICHLET", "NEUMANN"):
        raise ValueError(f"unknown boundary {boundary!r}")
    h = box.h
    if box.dimension == 1:
        (n,) = box.cells
        r, c, v = assemble_p1_1d(h, np.asarray(coef, dtype=float))
        K = sparse.coo_matrix((v.real, (r, c)), shape=(n + 1, n + 1)).tocsr()
        if boundary == "DIRICHLET":
            K = K[1:-1, 1:-1]
    else:
        nx, ny = box.cells
        r, c, v = assemble_q1_2d(nx, ny, h, h, np.asarray(coef))
        nn = (nx + 1) * (ny + 1)
        K = sparse.coo_matrix((v.real, (r, c)), shape=(nn, nn)).tocsr()
        if boundary == "DIRICHLET":
            ii, jj = np.meshgrid(np.arange(1, nx), np.arange(1, ny))
            keep = (ii + jj * (nx + 1)).ravel()
            K = K[keep][:, keep]
    w = _node_weights(box, boundary)
    s = sparse.diags(1.0 / np.sqrt(w))
    K = (s @ K @ s).tocsc()
    B = sparse.identity(K.shape[0], format="csc")
    op = FormOperator(B, K, label=label)
    op.node_weights = w
    return op


def scaled_operator(field, epsilon, box, boundary="DIRICHLET"):
    """Divergence-form operator with coefficients ``c(x / eps)`` on ``box``.

    Ambient coordinates are lumped-mass scaled nodal values. Dirichlet keeps
    interior nodes, Neumann all nodes.
    """
    if box.h > epsilon / POINTS_PER_PERIOD * (1 + 1e-12):
        raise CellUnderResolved(f"h={box.h} exceeds eps/{POINTS_PER_PERIOD}={epsilon / POINTS_PER_PERIOD}")
    coef = element_coefficients(field, epsilon, box)
    return _operator_from_elements(box, coef, boundary, f"eps={epsilon:g}")


def homogenized_operator(tensor, box, boundary="DIRICHLET"):
    d = box.dimension
    ne = int(np.prod(box.cells))
    if d == 1:
        coef = np.full(ne, float(tensor.entries[0, 0]))
    else:
        coef = np.broadcast_to(tensor.entries, (ne, 2, 2)).copy()
    return _operator_from_elements(box, coef, boundary, "homogenized")


def ambient_vector(op, nodal):
    return np.sqrt(op.node_weights) * np.asarray(nodal)


def node_coordinates(box, boundary="DIRICHLET"):
    h = box.h
    axes = []
    for n in box.cells:
        axes.append(h * (np.arange(1, n) if boundary.upper() == "DIRICHLET" else np.arange(n + 1)))
    if len(axes) == 1:
        return (axes[0],)
    X, Y = np.meshgrid(axes[0], axes[1])
    return X.ravel(), Y.ravel()


def _load(op, box, f, boundary):
    if callable(f):
        return ambient_vector(op, f(*node_coordinates(box, boundary)))
    f = np.asarray(f, dtype=np.complex128)
    if f.ndim == 0:
        return ambient_vector(op, np.full(op.dim, complex(f)))
    return f


def gradient_energy(op, u):
    """``int |grad u|^2`` via the unit-coefficient stiffness of the same grid."""
    return max(0.0, float(np.real(np.vdot(u, op.stiffness @ u))))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def homogenization_experiment(field, box, lam, f, epsilons, boundary="DIRICHLET", tensor=None, check=True):
    """``||(lam I + A_eps)^{-1} f - (lam I + A_hat)^{-1} f||`` per ``eps``.

    ``f`` is a callable of node coordinates, a constant, or an ambient
    vector. Also records the a-priori bounds ``Re(lam) ||u|| / ||f|| <= 1``
    and ``mu Re(lam) ||grad u||^2 / ||f||^2 <= 1``.
    """
    lam = complex(lam)
    if lam.real <= 0:
        raise ValueError("Re lambda must be positive")
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must decrease")
    tensor = tensor or homogenized_tensor(field)
    hat = homogenized_operator(tensor, box, boundary)
    rhs = _load(hat, box, f, boundary)
    u_hat = resolvent_apply(hat, lam, rhs)
    norm_hat = float(np.linalg.norm(u_hat))
    fnorm = float(np.linalg.norm(rhs))
    unit = homogenized_operator(HomogenizedTensor(np.eye(box.dimension), 1.0), box, boundary)
    mu = field.ellipticity
    trace = ConvergenceTrace(params={"lambda": [lam.real, lam.imag], "h": box.h, "extent": list(box.extent),
                                     "boundary": boundary, "field": field.name,
                                     "c_hat": tensor.entries.tolist()})

    def row(e):
        op = scaled_operator(field, e, box, boundary)
        u = resolvent_apply(op, lam, rhs)
        err = float(np.linalg.norm(u - u_hat))
        return {
            MetricKind.RESOLVENT_SOT_SINGLE: err,
            "RELATIVE_ERROR": err / norm_hat if norm_hat else 0.0,
            "L2_BOUND_RATIO": lam.real * np.linalg.norm(u) / fnorm if fnorm else 0.0,
            "GRADIENT_BOUND_RATIO": mu * lam.real * gradient_energy(unit, u) / fnorm ** 2 if fnorm else 0.0,
        }

    for e, r in zip(eps, parallel_map(row, eps)):
        trace.append(e, r)
    if check:
        s = trace.series(MetricKind.RESOLVENT_SOT_SINGLE)
        # increases at roundoff level (f in the kernel of both operators) are ignored
        if np.any((np.diff(s) > 0) & (s[1:] > 1e-10 * max(norm_hat, 1e-300))):
            raise ExperimentFailed(f"homogenization errors do not decrease: {s}")
    return trace


def parabolic_homogenization_experiment(field, box, u0_sequence, u0, delta, T, epsilons,
                                        boundary="DIRICHLET", grid=64, tensor=None):
    """Per ``eps``, ``sup_{t in [delta, T]} ||S^eps_t u0_eps - S^hat_t u0||``."""
    if not 0 < delta <= T:
        raise ValueError("need 0 < delta <= T")
    eps = [float(e) for e in epsilons]
    tensor = tensor or homogenized_tensor(field)
    hat = homogenized_operator(tensor, box, boundary)
    u0 = _load(hat, box, u0, boundary)
    u0s = [u0] * len(eps) if u0_sequence is None else [_load(hat, box, v, boundary) for v in u0_sequence]
    ts = np.linspace(delta, T, max(int(grid), 64))
    ref = SemigroupEvaluator(_densify(hat)).apply_many(ts, u0)
    trace = ConvergenceTrace(params={"delta": delta, "T": T, "h": box.h, "boundary": boundary,
                                     "field": field.name, "c_hat": tensor.entries.tolist()})

    def row(k):
        op = _densify(scaled_operator(field, eps[k], box, boundary))
        traj = SemigroupEvaluator(op).apply_many(ts, u0s[k])
        return {MetricKind.SUP_INTERVAL_STRONG: float(np.linalg.norm(traj - ref, axis=1).max()),
                "INITIAL_ERROR": float(np.linalg.norm(u0s[k] - u0))}

    for e, r in zip(eps, parallel_map(row, range(len(eps)))):
        trace.append(e, r)
    return trace


def _densify(op):
    if not op.sparse:
        return op
    dense = FormOperator(np.eye(op.dim), op.dense_stiffness(), label=op.label)
    dense.node_weights = getattr(op, "node_weights", None)
    return dense


def oscillatory_average_check(tau, v_sequence, v_limit, epsilons, x, w, support):
    """``|int tau(x/eps) v_eps - (int_cell tau)(int v)|`` per ``eps``.

    ``tau`` holds periodic samples at ``k / len(tau)`` (linear interpolation
    in between); ``x``, ``w`` is a quadrature rule on the domain and
    ``support`` a boolean mask that every ``v`` must respect.
    """
    support = np.asarray(support, dtype=bool)
    tau = np.asarray(tau, dtype=float)
    vs = [np.asarray(v) for v in v_sequence]
    if len(vs) != len(epsilons):
        raise ValueError("one v per epsilon is required")
    for v in vs + [np.asarray(v_limit)]:
        if np.any(v[~support]):
            raise SupportViolation("a test function is nonzero outside the common support")
    mean_tau = tau.mean()
    target = mean_tau * np.dot(w, v_limit)
    return [abs(oscillatory_sum(x, w, v, e, tau) - target) for v, e in zip(vs, epsilons)]


def observed_rate(epsilons, residuals):
    """Least-squares slope of ``log residual`` against ``log eps``."""
    e = np.log(np.asarray(epsilons, dtype=float))
    r = np.log(np.asarray(residuals, dtype=float))
    return float(np.polyfit(e, r, 1)[0])


def check_bounds(field, tensor, tol=1e-10):
    """Reuss-Voigt bounds for the diagonal of the effective tensor."""
    C = field.tensor_samples()
    d = field.dimension
    arith = np.mean(C, axis=0)
    harm = np.linalg.inv(np.mean(np.linalg.inv(C), axis=0))
    ev = np.linalg.eigvalsh(tensor.entries)
    ok_upper = np.all(np.linalg.eigvalsh(arith - tensor.entries) >= -tol * np.abs(arith).max())
    ok_lower = np.all(np.linalg.eigvalsh(tensor.entries - harm) >= -tol * np.abs(arith).max())
    return bool(ok_upper and ok_lower and ev.min() > 0 and d in (1, 2))
