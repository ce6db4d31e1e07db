"""Empirical convergence measures for sequences of resolvents and semigroups.

Weak (WOT) and strong (SOT) operator convergence are approximated by maxima
over a finite :class:`ProbeSet`. Every value is therefore a lower bound for
the corresponding operator-topology quantity.
"""

import csv
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg

from .errors import NotSymmetric, QuadratureUnstable, RealLambda
from .operator import FormOperator, orthogonal_projection, resolvent_apply
from .parallel import parallel_map
from .quadrature import geometric_grid, geometric_rule, uniform_grid
from .semigroup import SemigroupEvaluator


class MetricKind(str, Enum):
    WOT_SEMIGROUP_POINTWISE = "WOT_SEMIGROUP_POINTWISE"
    WEAK_TIME_INTEGRAL = "WEAK_TIME_INTEGRAL"
    WEAK_TIME_INTEGRAL_VECTORVALUED = "WEAK_TIME_INTEGRAL_VECTORVALUED"
    L1_STRONG = "L1_STRONG"
    RESOLVENT_SOT = "RESOLVENT_SOT"
    RESOLVENT_SOT_SINGLE = "RESOLVENT_SOT_SINGLE"
    RESOLVENT_WOT = "RESOLVENT_WOT"
    RESOLVENT_WOT_SET = "RESOLVENT_WOT_SET"
    RESOLVENT_WOT_NONREAL = "RESOLVENT_WOT_NONREAL"
    SUP_INTERVAL_STRONG = "SUP_INTERVAL_STRONG"
    SUP_HALFOPEN_STRONG = "SUP_HALFOPEN_STRONG"
    PROJECTION_SOT = "PROJECTION_SOT"

    def __str__(self):
        return self.value


# one-line meaning of each tag
DESCRIPTION = {
    MetricKind.WOT_SEMIGROUP_POINTWISE: "weak convergence of S_t at fixed times",
    MetricKind.WEAK_TIME_INTEGRAL: "weak convergence of time integrals against L1 weights",
    MetricKind.WEAK_TIME_INTEGRAL_VECTORVALUED: "vector-valued weak convergence of t -> S_t f",
    MetricKind.L1_STRONG: "L1(0, T) strong convergence of t -> S_t f",
    MetricKind.RESOLVENT_SOT: "strong resolvent convergence on a set of lambdas",
    MetricKind.RESOLVENT_SOT_SINGLE: "strong resolvent convergence at one lambda",
    MetricKind.RESOLVENT_WOT: "weak resolvent convergence at one real lambda",
    MetricKind.RESOLVENT_WOT_SET: "weak resolvent convergence on a set with an accumulation point",
    MetricKind.RESOLVENT_WOT_NONREAL: "weak resolvent convergence at one nonreal lambda",
    MetricKind.SUP_INTERVAL_STRONG: "uniform strong convergence on [delta, T]",
    MetricKind.SUP_HALFOPEN_STRONG: "uniform strong convergence on (0, T]",
    MetricKind.PROJECTION_SOT: "strong convergence of the limit projections",
}


@dataclass(frozen=True)
class ProbeSet:
    """Unit vectors standing in for "all f, g" (columns of ``vectors``)."""

    vectors: np.ndarray
    seed: int = 0

    def __post_init__(self):
        V = np.asarray(self.vectors, dtype=np.complex128)
        if V.ndim == 1:
            V = V[:, None]
        norms = np.linalg.norm(V, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("probe vectors must have unit norm")
        object.__setattr__(self, "vectors", V)

    @property
    def count(self):
        return self.vectors.shape[1]

    @property
    def dim(self):
        return self.vectors.shape[0]

    @classmethod
    def standard(cls, dim, n_random=16, n_canonical=4, seed=0, support=None):
        """Canonical prefix ``e_1..e_c`` plus seeded random unit vectors.

        With ``support`` every probe vanishes outside the first ``support``
        coordinates.
        """
        width = dim if support is None else int(support)
        n_canonical = min(n_canonical, width)
        rng = np.random.default_rng(seed)
        cols = [np.eye(dim, dtype=np.complex128)[:, k] for k in range(n_canonical)]
        for _ in range(n_random):
            v = np.zeros(dim, dtype=np.complex128)
            v[:width] = rng.standard_normal(width) + 1j * rng.standard_normal(width)
            cols.append(v / np.linalg.norm(v))
        return cls(np.stack(cols, axis=1), seed=seed)

    @classmethod
    def from_vectors(cls, vectors, seed=0):
        V = np.atleast_2d(np.asarray(vectors, dtype=np.complex128))
        if np.asarray(vectors).ndim == 1:
            V = V.T
        return cls(V / np.linalg.norm(V, axis=0), seed=seed)

    def extend(self, other):
        return ProbeSet(np.hstack([self.vectors, other.vectors]), seed=self.seed)


@dataclass
class ConvergenceTrace:
    """Per-index metric values (index = chain position, ``n`` or ``eps``)."""

    index: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def append(self, idx, row):
        row = {str(k): float(v) for k, v in row.items()}
        if self.index and set(row) != set(self.values):
            raise ValueError(f"row tags {sorted(row)} differ from trace tags {sorted(self.values)}")
        for k, v in row.items():
            if not v >= 0:
                raise ValueError(f"metric {k} is negative or NaN: {v}")
            self.values.setdefault(k, []).append(v)
        self.index.append(idx)

    def __len__(self):
        return len(self.index)

    def series(self, tag):
        return np.asarray(self.values[str(tag)])

    def params_hash(self):
        blob = json.dumps(self.params, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def rows(self):
        h = self.params_hash()
        for k, idx in enumerate(self.index):
            for tag in self.values:
                yield idx, tag, self.values[tag][k], h

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "metric_tag", "value", "params_hash"])
            for idx, tag, val, h in self.rows():
                w.writerow([format_number(idx), tag, format_number(val), h])


def format_number(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _ev(x):
    return x if isinstance(x, SemigroupEvaluator) else SemigroupEvaluator(x)


def _op(x):
    return x.source if isinstance(x, SemigroupEvaluator) else x


def _vectors(probes):
    return probes.vectors if isinstance(probes, ProbeSet) else np.asarray(probes, dtype=np.complex128)


def _diff_chunks(seq, ref, ts, F, chunk=128):
    for start in range(0, len(ts), chunk):
        sl = slice(start, start + chunk)
        yield sl, seq.apply_many(ts[sl], F) - ref.apply_many(ts[sl], F)


def _refined(compute, nodes, max_doublings=3, rtol=1e-3, unstable=0.1, floor=1e-13):
    prev = compute(nodes)
    change = 0.0
    for _ in range(max_doublings):
        nodes *= 2
        cur = compute(nodes)
        change = abs(cur - prev)
        prev = cur
        if change <= rtol * abs(cur) + floor:
            return cur
    if change > unstable * abs(prev) + floor:
        raise QuadratureUnstable(f"last refinement changed the value by {change:.3e} (value {prev:.3e})")
    return prev


# ---------------------------------------------------------------------------
# semigroup metrics
# ---------------------------------------------------------------------------

def wot_semigroup_metric(seq_n, ref, t, probes):
    """``max_{f,g} |((S^n_t - S_t) f, g)|``."""
    if not t > 0:
        raise ValueError("t must be positive")
    F = _vectors(probes)
    D = _ev(seq_n).apply(t, F) - _ev(ref).apply(t, F)
    return float(np.max(np.abs(F.conj().T @ D)))


def weak_time_integral_metric(seq_n, ref, T, probes, vector_valued=False, quad=256):
    """Weak convergence of time integrals of the semigroups on ``[0, T]``.

    Plain mode: ``max_{f,g} |int_0^T ((S^n_t - S_t) f, g) dt|``. Vector
    mode: ``g`` becomes a step function over the dyadic time panels taking
    probe values in cyclic order, one step function per cyclic shift.
    """
    seq, rf = _ev(seq_n), _ev(ref)
    F = _vectors(probes)
    p = F.shape[1]

    def compute(nodes):
        ts, ws, idx = geometric_rule(T, nodes)
        npan = int(idx.max()) + 1
        panel = np.zeros((npan,) + F.shape, dtype=np.complex128)
        for sl, D in _diff_chunks(seq, rf, ts, F):
            np.add.at(panel, idx[sl], ws[sl, None, None] * D)
        if not vector_valued:
            return float(np.max(np.abs(F.conj().T @ panel.sum(axis=0))))
        best = 0.0
        for s in range(p):
            g = F[:, (np.arange(npan) + s) % p]  # (N, npan)
            val = np.einsum("nk,knp->p", g.conj(), panel)
            best = max(best, float(np.max(np.abs(val))))
        return best

    return _refined(compute, quad)


def l1_strong_metric(seq_n, ref, T, probes, quad=256):
    """``max_f int_0^T ||(S^n_t - S_t) f|| dt``."""
    seq, rf = _ev(seq_n), _ev(ref)
    F = _vectors(probes)

    def compute(nodes):
        ts, ws, _ = geometric_rule(T, nodes)
        acc = np.zeros(F.shape[1])
        for sl, D in _diff_chunks(seq, rf, ts, F):
            acc += ws[sl] @ np.linalg.norm(D, axis=1)
        return float(acc.max())

    return _refined(compute, quad)


def l2_identity_check(seq_n, ref, T, f, quad=512):
    """Residual of the polarization identity for ``int_0^T ||(S^n_t - S_t) f||^2 dt``.

    For self-adjoint generators the integral equals
    ``1/2 int_0^{2T} ((S^n_t - S_t) f, f) dt - 2 Re int_0^T ((S^n_t - S_t) f, S_t f) dt``.
    Both sides are evaluated by independent quadratures.
    """
    seq, rf = _ev(seq_n), _ev(ref)
    if not (seq.source.symmetric and rf.source.symmetric):
        raise NotSymmetric("the identity requires self-adjoint generators")
    f = np.asarray(f, dtype=np.complex128)
    ts, ws, _ = geometric_rule(T, quad)
    Sn, S = seq.apply_many(ts, f), rf.apply_many(ts, f)
    D = Sn - S
    lhs = float(ws @ np.sum(np.abs(D) ** 2, axis=1))
    cross = ws @ np.einsum("tn,tn->t", D, S.conj())
    ts2, ws2, _ = geometric_rule(2 * T, quad)
    D2 = seq.apply_many(ts2, f) - rf.apply_many(ts2, f)
    first = ws2 @ (D2 @ f.conj())
    rhs = float(np.real(0.5 * first - 2.0 * np.real(cross)))
    return abs(lhs - rhs)


def sup_interval_strong_metric(seq_n, ref, delta, T, probes, grid=64):
    """``max_f max_{t in [delta, T]} ||(S^n_t - S_t) f||`` on a uniform grid."""
    if not 0 < delta < T:
        raise ValueError("need 0 < delta < T")
    F = _vectors(probes)
    ts = uniform_grid(delta, T, max(int(grid), 64))
    best = 0.0
    for _, D in _diff_chunks(_ev(seq_n), _ev(ref), ts, F):
        best = max(best, float(np.linalg.norm(D, axis=1).max()))
    return best


def sup_halfopen_strong_metric(seq_n, ref, T, probes, grid=128):
    """``max_f sup_{t in (0, T]} ||(S^n_t - S_t) f||``.

    The grid runs geometrically from ``1e-8 T`` to ``T``; the ``t -> 0``
    end is represented by ``||(P_n - P) f||``.
    """
    F = _vectors(probes)
    ts = geometric_grid(T, grid)
    best = projection_sot_metric(seq_n, ref, probes)
    for _, D in _diff_chunks(_ev(seq_n), _ev(ref), ts, F):
        best = max(best, float(np.linalg.norm(D, axis=1).max()))
    return best


def projection_sot_metric(seq_n, ref, probes):
    """``max_f ||(P_n - P) f||`` for the limit projections."""
    F = _vectors(probes)
    D = orthogonal_projection(_op(seq_n), F) - orthogonal_projection(_op(ref), F)
    return float(np.linalg.norm(D, axis=0).max())


def projection_decomposition_check(seq_n, ref, T, f, grid=128):
    """Largest violation over ``(0, T]`` of

    ``||(S^n_t - S_t) f|| <= M ||(P_n - P) f|| + ||(S^n_t - S_t) P f||``

    with ``M`` the exponential bound of ``S^n`` on ``[0, T]``. Non-positive
    values mean the inequality holds on the grid.
    """
    seq, rf = _ev(seq_n), _ev(ref)
    f = np.asarray(f, dtype=np.complex128)
    Pf = rf.projection(f)
    M = seq.bound.constant * np.exp(max(seq.bound.rate, 0.0) * T)
    proj = np.linalg.norm(seq.projection(f) - Pf)
    ts = geometric_grid(T, grid)
    lhs = np.linalg.norm(seq.apply_many(ts, f) - rf.apply_many(ts, f), axis=1)
    tail = np.linalg.norm(seq.apply_many(ts, Pf) - rf.apply_many(ts, Pf), axis=1)
    return float(np.max(lhs - (M * proj + tail)))


# ---------------------------------------------------------------------------
# resolvent metrics
# ---------------------------------------------------------------------------

def resolvent_difference(seq_n, ref, lam, probes):
    F = _vectors(probes)
    return resolvent_apply(_op(seq_n), lam, F) - resolvent_apply(_op(ref), lam, F), F


def resolvent_metric(seq_n, ref, lam, probes, mode="SOT"):
    """SOT: ``max_f ||(R_n - R) f||``; WOT: ``max_{f,g} |((R_n - R) f, g)|``."""
    if not np.real(lam) > 0:
        raise ValueError("Re lambda must be positive")
    D, F = resolvent_difference(seq_n, ref, lam, probes)
    mode = mode.upper()
    if mode == "SOT":
        return float(np.linalg.norm(D, axis=0).max())
    if mode == "WOT":
        return float(np.max(np.abs(F.conj().T @ D)))
    raise ValueError(f"unknown mode {mode!r}")


def wot_norm_limit_bridge(op, lam, f):
    """Both sides of ``||R(lam) f||^2 = ((R(conj lam) f, f) - (R(lam) f, f)) / (lam - conj lam)``.

    Valid for self-adjoint generators and nonreal ``lam``; this is how weak
    resolvent convergence at one nonreal point controls norms.
    """
    op = _op(op)
    lam = complex(lam)
    if lam.imag == 0:
        raise RealLambda("lambda must be nonreal")
    if not op.symmetric:
        raise NotSymmetric("the identity requires a self-adjoint generator")
    f = np.asarray(f, dtype=np.complex128)
    if not np.any(f):
        return 0.0, 0.0
    u = resolvent_apply(op, lam, f)
    ub = resolvent_apply(op, lam.conjugate(), f)
    lhs = float(np.vdot(u, u).real)
    rhs = (np.vdot(f, ub) - np.vdot(f, u)) / (lam - lam.conjugate())
    return lhs, float(rhs.real)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _check_vertex_nonnegative(op, tol=1e-10):
    K = op.dense_stiffness()
    H = 0.5 * (K + K.conj().T)
    lmin = linalg.eigh(H, op.dense_gram(), eigvals_only=True)[0]
    if lmin < -tol * max(1.0, np.linalg.norm(H, 2)):
        raise ValueError(f"form has negative vertex (min Re a = {lmin:.3e})")


def real_part_condition_experiment(seq_n, ref, lam, lam_prime, probes, index=None):
    """Weak resolvent convergence of ``A_n`` and of the real parts versus strong convergence.

    Records, per chain element, ``RESOLVENT_WOT`` of ``A_n`` at ``lam``,
    ``REAL_PART_RESOLVENT_WOT`` of the real-part operators at ``lam_prime``
    and ``RESOLVENT_SOT`` of ``A_n`` at ``lam``.
    """
    from .operator import real_part_operator

    lam, lam_prime = complex(lam), complex(lam_prime)
    if lam.real <= 0 or lam_prime.real <= 0:
        raise ValueError("Re lambda and Re lambda' must be positive")
    if lam_prime.imag == 0:
        raise RealLambda("lambda' must be nonreal")
    for op in list(seq_n) + [ref]:
        _check_vertex_nonnegative(op)
    ref_re = real_part_operator(ref)
    index = list(range(1, len(seq_n) + 1)) if index is None else list(index)
    trace = ConvergenceTrace(params={"lambda": [lam.real, lam.imag],
                                     "lambda_prime": [lam_prime.real, lam_prime.imag],
                                     "probe_seed": getattr(probes, "seed", None)})

    def row(op):
        return {
            "RESOLVENT_WOT": resolvent_metric(op, ref, lam, probes, "WOT"),
            "REAL_PART_RESOLVENT_WOT": resolvent_metric(real_part_operator(op), ref_re, lam_prime, probes, "WOT"),
            "RESOLVENT_SOT": resolvent_metric(op, ref, lam, probes, "SOT"),
        }

    for idx, r in zip(index, parallel_map(row, seq_n)):
        trace.append(idx, r)
    return trace


@dataclass
class EquivalenceParams:
    T: float = 1.0
    delta: float = 0.1
    times: tuple = (0.1, 0.5, 1.0)
    lambdas: tuple = (1.0, 2 + 1j, 1 - 2j)
    lambda_single: complex = 1.0
    lambda_set: tuple = (2.0, 1.5, 4 / 3, 1.25, 1.2)
    lambda_nonreal: complex = 1 + 1j
    quad: int = 256
    grid: int = 64
    low: float = 1e-6
    high: float = 1e-4

    def as_dict(self):
        def enc(x):
            if isinstance(x, complex):
                return [x.real, x.imag]
            if isinstance(x, tuple):
                return [enc(y) for y in x]
            return x

        return {k: enc(v) for k, v in self.__dict__.items()}


def all_metrics(seq_n, ref, probes, params):
    """Every :class:`MetricKind` for one chain element."""
    seq, rf = _ev(seq_n), _ev(ref)
    p = params
    out = {}
    out[MetricKind.WOT_SEMIGROUP_POINTWISE] = max(wot_semigroup_metric(seq, rf, t, probes) for t in p.times)
    out[MetricKind.WEAK_TIME_INTEGRAL] = weak_time_integral_metric(seq, rf, p.T, probes, quad=p.quad)
    out[MetricKind.WEAK_TIME_INTEGRAL_VECTORVALUED] = weak_time_integral_metric(
        seq, rf, p.T, probes, vector_valued=True, quad=p.quad)
    out[MetricKind.L1_STRONG] = l1_strong_metric(seq, rf, p.T, probes, quad=p.quad)
    out[MetricKind.RESOLVENT_SOT] = max(resolvent_metric(seq, rf, lam, probes, "SOT") for lam in p.lambdas)
    out[MetricKind.RESOLVENT_SOT_SINGLE] = resolvent_metric(seq, rf, p.lambda_single, probes, "SOT")
    out[MetricKind.RESOLVENT_WOT] = max(resolvent_metric(seq, rf, lam, probes, "WOT") for lam in p.lambdas)
    out[MetricKind.RESOLVENT_WOT_SET] = max(resolvent_metric(seq, rf, lam, probes, "WOT") for lam in p.lambda_set)
    out[MetricKind.RESOLVENT_WOT_NONREAL] = resolvent_metric(seq, rf, p.lambda_nonreal, probes, "WOT")
    out[MetricKind.SUP_INTERVAL_STRONG] = sup_interval_strong_metric(seq, rf, p.delta, p.T, probes, p.grid)
    out[MetricKind.SUP_HALFOPEN_STRONG] = sup_halfopen_strong_metric(seq, rf, p.T, probes, 2 * p.grid)
    out[MetricKind.PROJECTION_SOT] = projection_sot_metric(seq, rf, probes)
    return out


@dataclass
class ComovementReport:
    first_below: dict
    comoving: bool
    all_converged: bool
    violations: list
    structural_zero: list = field(default_factory=list)


def comovement_report(trace, low=1e-6, high=1e-4):
    """Finite-sample proxy for the equivalence of all metrics.

    At every index, one metric below ``low`` must imply every metric below
    ``high``. Metrics that vanish along the whole chain (for example the
    projection metric when ``P_n = P``) carry no information and are listed
    in ``structural_zero`` instead. ``all_converged`` records whether every
    metric ends below ``high``.
    """
    zero = [t for t in trace.values if not np.any(trace.series(t))]
    tags = [t for t in trace.values if t not in zero]
    first = {}
    for tag in trace.values:
        hits = np.nonzero(trace.series(tag) < high)[0]
        first[tag] = trace.index[hits[0]] if hits.size else None
    violations = []
    for k, idx in enumerate(trace.index):
        vals = {t: trace.values[t][k] for t in tags}
        if any(v < low for v in vals.values()):
            bad = [t for t, v in vals.items() if v >= high]
            if bad:
                violations.append((idx, bad))
    final = all(trace.values[t][-1] < high for t in trace.values)
    none_low = all(trace.values[t][-1] >= low for t in tags)
    return ComovementReport(first, not violations and (final or none_low), final, violations, zero)


def equivalence_comovement_experiment(family, ref, params=None, probes=None, index=None):
    """All twelve metrics along a chain of self-adjoint operators, plus co-movement."""
    params = params or EquivalenceParams()
    ops = [_op(x) for x in family]
    ref_op = _op(ref)
    for op in ops + [ref_op]:
        if not op.symmetric:
            raise NotSymmetric(f"{op!r} is not self-adjoint")
        _check_vertex_nonnegative(op)
    if probes is None:
        probes = ProbeSet.standard(ref_op.dim)
    rf = SemigroupEvaluator(ref_op)
    index = list(range(1, len(ops) + 1)) if index is None else list(index)
    trace = ConvergenceTrace(params={**params.as_dict(), "probe_seed": probes.seed, "probe_count": probes.count})
    rows = parallel_map(lambda op: all_metrics(SemigroupEvaluator(op), rf, probes, params), ops)
    for idx, r in zip(index, rows):
        trace.append(idx, r)
    return trace, comovement_report(trace, params.low, params.high)


def build_trace(index, rows, params=None):
    trace = ConvergenceTrace(params=dict(params or {}))
    for idx, r in zip(index, rows):
        trace.append(idx, r)
    return trace


