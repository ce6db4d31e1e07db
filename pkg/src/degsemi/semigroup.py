"""Degenerate semigroups generated by minus a form operator.

With ``G = L L^*`` and ``M = L^{-1} K L^{-*}`` the semigroup is

    S_t f = Q exp(-t M) Q^* f,    Q = B L^{-*},

which vanishes on the orthogonal complement of the form domain and tends
to the orthogonal projection as ``t -> 0``. Hermitian ``M`` is handled by
its eigendecomposition; otherwise by a Pade matrix exponential. A second,
independent route evaluates the Cauchy integral of the resolvent along a
sectorial contour.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContourOutsideSector, ProjectionMismatch
from .matfuncs import expm
from .operator import estimate_sector, orthogonal_projection
from .quadrature import gauss_interval, geometric_rule


@dataclass(frozen=True)
class ExponentialBound:
    """``||S_t|| <= constant * exp(rate * t)``."""

    constant: float
    rate: float


class SemigroupEvaluator:
    def __init__(self, source):
        self.source = source
        self.cholesky = source.cholesky()
        self.reduced_generator = source.reduced_matrix()
        self.isometry = source.isometry()
        M = self.reduced_generator
        if source.symmetric:
            mu, V = np.linalg.eigh(M)
            self.spectral = (mu, V)
            self._modes = self.isometry @ V
            rate = -float(mu[0]) if mu.size else 0.0
        else:
            self.spectral = None
            self._modes = None
            herm = 0.5 * (M + M.conj().T)
            rate = -float(np.linalg.eigvalsh(herm)[0]) if M.size else 0.0
        # numerical-range bound: ||exp(-tM)|| <= exp(-t * min Re W(M))
        self.bound = ExponentialBound(1.0, rate)

    @property
    def dim(self):
        return self.source.dim

    def coords(self, f):
        return self.isometry.conj().T @ f

    def propagator(self, t):
        """Reduced propagator ``exp(-t M)``."""
        if self.spectral is not None:
            mu, V = self.spectral
            return (V * np.exp(-t * mu)) @ V.conj().T
        return expm(-t * self.reduced_generator)

    def apply(self, t, f):
        f = np.asarray(f, dtype=np.complex128)
        if self.spectral is not None:
            mu, V = self.spectral
            w = V.conj().T @ self.coords(f)
            decay = np.exp(-t * mu)
            return self._modes @ (decay.reshape((-1,) + (1,) * (w.ndim - 1)) * w)
        return self.isometry @ (expm(-t * self.reduced_generator) @ self.coords(f))

    def apply_many(self, ts, f):
        """``S_t f`` for every ``t`` in ``ts``; result has a leading time axis."""
        f = np.asarray(f, dtype=np.complex128)
        ts = np.asarray(ts, dtype=float)
        y = self.coords(f)
        if self.spectral is not None:
            mu, V = self.spectral
            w = V.conj().T @ y
            decay = np.exp(-np.outer(ts, mu))
            if w.ndim == 1:
                return (decay * w) @ self._modes.T
            return np.einsum("nm,tm,mp->tnp", self._modes, decay, w, optimize=True)
        out = [self.isometry @ (expm(-t * self.reduced_generator) @ y) for t in ts]
        return np.stack(out)

    def projection(self, f):
        return orthogonal_projection(self.source, f)


def semigroup_apply(ev, t, f):
    """``S_t f`` for ``t > 0``."""
    if not t > 0:
        raise ValueError("t must be positive")
    return ev.apply(float(t), f)


@dataclass(frozen=True)
class ContourParams:
    """Two rays at angles ``+-angle`` joined by an arc of radius ``radius``.

    Rays are truncated at distance ``truncation`` from the contour centre and
    each of the three legs uses ``nodes`` Gauss-Legendre points.
    """

    angle: float
    radius: float
    truncation: float
    nodes: int = 64

    def __post_init__(self):
        if self.nodes < 8:
            raise ValueError("at least 8 nodes per leg are required")
        if not (np.pi / 2 < self.angle < np.pi):
            raise ContourOutsideSector(f"ray angle {self.angle} not in (pi/2, pi)")

    @classmethod
    def for_sector(cls, semiangle, t, nodes=64):
        angle = np.pi / 2 + 0.5 * (np.pi / 2 - semiangle)
        radius = 1.0 / t
        truncation = max(2.0 * radius, 40.0 / (t * abs(np.cos(angle))))
        return cls(angle=float(angle), radius=float(radius), truncation=float(truncation), nodes=int(nodes))


@dataclass(frozen=True)
class ContourResult:
    value: np.ndarray
    error_estimate: float


def _contour_sum(op, t, f, centre, params, n):
    theta = params.angle
    r = params.radius
    rhs = op.basis.conj().T @ f
    acc = np.zeros(op.rank if rhs.ndim == 1 else rhs.shape, dtype=np.complex128)
    # arc, counter-clockwise from -theta to theta
    phi, wphi = gauss_interval(-theta, theta, n)
    for p, w in zip(phi, wphi):
        z = r * np.exp(1j * p)
        lam = centre + z
        acc += w * np.exp(t * lam) * (1j * z) * op.solve_shifted(lam, rhs)
    # rays, logarithmic radial variable rho = r * exp(u)
    u, wu = gauss_interval(0.0, np.log(params.truncation / r), n)
    for sign in (1.0, -1.0):
        e = np.exp(1j * sign * theta)
        for uu, w in zip(u, wu):
            rho = r * np.exp(uu)
            lam = centre + rho * e
            acc += sign * w * np.exp(t * lam) * e * rho * op.solve_shifted(lam, rhs)
    return op.basis @ (acc / (2j * np.pi))


def semigroup_via_contour(ev, t, f, params=None, sector=None):
    """Cauchy-integral evaluation ``S_t f = (2 pi i)^{-1} int e^{t lam} (lam I + A)^{-1} f dlam``.

    The contour is centred at minus the form's vertex. The rays must stay
    outside the spectral sector of ``-A``, i.e. ``angle < pi - semiangle``.
    The returned error estimate is the difference to the rule with half
    the nodes.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    op = ev.source
    if sector is None:
        sector = estimate_sector(op)
    if params is None:
        params = ContourParams.for_sector(sector.semiangle, t)
    if params.angle >= np.pi - sector.semiangle:
        raise ContourOutsideSector(
            f"ray angle {params.angle:.4f} meets the spectral sector (limit {np.pi - sector.semiangle:.4f})"
        )
    f = np.asarray(f, dtype=np.complex128)
    centre = -sector.vertex
    full = _contour_sum(op, t, f, centre, params, params.nodes)
    half = _contour_sum(op, t, f, centre, params, max(params.nodes // 2, 4))
    return ContourResult(full, float(np.linalg.norm(full - half)))


def laplace_transform_check(ev, lam, f, t_max, quad_nodes=2048):
    """``|| int_0^t_max e^{-lam t} S_t f dt - (lam I + A)^{-1} f ||``."""
    from .operator import resolvent_apply

    f = np.asarray(f, dtype=np.complex128)
    ts, ws, _ = geometric_rule(float(t_max), quad_nodes, panels=32)
    traj = ev.apply_many(ts, f)
    weights = ws * np.exp(-lam * ts)
    integral = np.tensordot(weights, traj, axes=(0, 0))
    return float(np.linalg.norm(integral - resolvent_apply(ev.source, lam, f)))


def strong_limit_projection(ev, f, t_sequence):
    """Small-time value ``S_t f`` at the last ``t`` of a decreasing sequence.

    Checks it against the orthogonal projection within the bound
    ``||exp(-t M) - I|| ||f||``.
    """
    t = float(np.min(t_sequence))
    f = np.asarray(f, dtype=np.complex128)
    value = ev.apply(t, f)
    m = ev.reduced_generator.shape[0]
    bound = np.linalg.norm(ev.propagator(t) - np.eye(m), 2) * np.linalg.norm(f)
    gap = np.linalg.norm(value - ev.projection(f))
    if gap > bound * (1 + 1e-8) + 1e-14 * max(np.linalg.norm(f), 1.0):
        raise ProjectionMismatch(f"||S_t f - P f|| = {gap:.3e} exceeds bound {bound:.3e}")
    return value
