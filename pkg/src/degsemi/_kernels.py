"""Hot numeric kernels: element assembly and oscillatory sums.

Each kernel has a vectorized numpy implementation and an explicit-loop
implementation that is compiled with numba when available. The compiled
path is used unless the environment variable ``DEGSEMI_DISABLE_NUMBA`` is
set to a non-empty value other than ``0``.

Both paths are always importable through :data:`NUMPY_KERNELS` and
:data:`LOOP_KERNELS` so that tests and benchmarks can compare them.
"""

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return decorator


def _numba_disabled():
    flag = os.environ.get("DEGSEMI_DISABLE_NUMBA", "")
    return flag not in ("", "0")


USE_NUMBA = NUMBA_AVAILABLE and not _numba_disabled()


# ---------------------------------------------------------------------------
# 1D linear elements
# ---------------------------------------------------------------------------

def _p1_1d_numpy(h, diffusion, drift, periodic):
    ne = diffusion.shape[0]
    nn = ne if periodic else ne + 1
    left = np.arange(ne)
    right = left + 1
    if periodic:
        right = right % nn
    kd = diffusion / h
    # local trial/test ordering: [[aa, ab], [ba, bb]], row = test, col = trial
    rows = np.concatenate([left, left, right, right])
    cols = np.concatenate([left, right, left, right])
    vals = np.concatenate([
        kd - 0.5 * drift,
        -kd + 0.5 * drift,
        -kd - 0.5 * drift,
        kd + 0.5 * drift,
    ]).astype(np.complex128)
    return rows.astype(np.int64), cols.astype(np.int64), vals


def _p1_1d_loop(h, diffusion, drift, periodic):
    ne = diffusion.shape[0]
    nn = ne if periodic else ne + 1
    rows = np.empty(4 * ne, dtype=np.int64)
    cols = np.empty(4 * ne, dtype=np.int64)
    vals = np.empty(4 * ne, dtype=np.complex128)
    for e in range(ne):
        a = e
        b = e + 1
        if periodic:
            b = b % nn
        kd = diffusion[e] / h
        bd = 0.5 * drift[e]
        rows[e] = a
        cols[e] = a
        vals[e] = kd - bd
        rows[ne + e] = a
        cols[ne + e] = b
        vals[ne + e] = -kd + bd
        rows[2 * ne + e] = b
        cols[2 * ne + e] = a
        vals[2 * ne + e] = -kd - bd
        rows[3 * ne + e] = b
        cols[3 * ne + e] = b
        vals[3 * ne + e] = kd + bd
    return rows, cols, vals


# ---------------------------------------------------------------------------
# 2D bilinear elements
# ---------------------------------------------------------------------------

def q1_reference_integrals(hx, hy):
    """Integrals ``I[k, l, a, b] = int_e d_k phi_b * d_l phi_a`` on one rectangle.

    Local nodes are ordered (0,0), (1,0), (1,1), (0,1). Two-point Gauss
    quadrature per axis is exact for these bilinear products.
    """
    g = 0.5 * np.array([1 - 1 / np.sqrt(3), 1 + 1 / np.sqrt(3)])
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    out = np.zeros((2, 2, 4, 4))
    for sx in g:
        for sy in g:
            grad = np.empty((4, 2))
            for a, (cx, cy) in enumerate(corners):
                fx = sx if cx else 1 - sx
                fy = sy if cy else 1 - sy
                dfx = 1.0 if cx else -1.0
                dfy = 1.0 if cy else -1.0
                grad[a, 0] = dfx * fy / hx
                grad[a, 1] = fx * dfy / hy
            w = 0.25 * hx * hy
            out += w * np.einsum("bk,al->klab", grad, grad)
    return out


def q1_gradient_integrals(hx, hy):
    """``J[l, a] = int_e d_l phi_a`` on one rectangle (same node ordering)."""
    sgn = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
    out = np.empty((2, 4))
    out[0] = sgn[:, 0] * hy / 2
    out[1] = sgn[:, 1] * hx / 2
    return out


def _q1_connectivity(nx, ny, periodic):
    nxn = nx if periodic else nx + 1
    nyn = ny if periodic else ny + 1
    i = np.tile(np.arange(nx), ny)
    j = np.repeat(np.arange(ny), nx)
    ip = (i + 1) % nxn if periodic else i + 1
    jp = (j + 1) % nyn if periodic else j + 1
    conn = np.stack([i + j * nxn, ip + j * nxn, ip + jp * nxn, i + jp * nxn], axis=1)
    return conn.astype(np.int64)


def _q1_2d_numpy(nx, ny, ref, coef, periodic):
    conn = _q1_connectivity(nx, ny, periodic)
    local = np.einsum("ekl,klab->eab", coef, ref)
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    return rows, cols, local.reshape(-1).astype(np.complex128)


def _q1_2d_loop(nx, ny, ref, coef, periodic):
    nxn = nx if periodic else nx + 1
    nyn = ny if periodic else ny + 1
    ne = nx * ny
    rows = np.empty(16 * ne, dtype=np.int64)
    cols = np.empty(16 * ne, dtype=np.int64)
    vals = np.empty(16 * ne, dtype=np.complex128)
    nodes = np.empty(4, dtype=np.int64)
    for e in range(ne):
        i = e % nx
        j = e // nx
        ip = i + 1
        jp = j + 1
        if periodic:
            ip = ip % nxn
            jp = jp % nyn
        nodes[0] = i + j * nxn
        nodes[1] = ip + j * nxn
        nodes[2] = ip + jp * nxn
        nodes[3] = i + jp * nxn
        base = 16 * e
        for a in range(4):
            for b in range(4):
                v = 0.0 + 0.0j
                for k in range(2):
                    for l in range(2):
                        v += coef[e, k, l] * ref[k, l, a, b]
                rows[base + 4 * a + b] = nodes[a]
                cols[base + 4 * a + b] = nodes[b]
                vals[base + 4 * a + b] = v
    return rows, cols, vals


# ---------------------------------------------------------------------------
# Oscillatory weighted sums  sum_i w_i tau(x_i / eps) v_i
# ---------------------------------------------------------------------------

def _osc_numpy(x, w, v, inv_eps, tau):
    m = tau.shape[0]
    s = x * inv_eps * m
    s = s - m * np.floor(s / m)
    i0 = np.floor(s).astype(np.int64)
    frac = s - i0
    i0 = i0 % m
    i1 = (i0 + 1) % m
    vals = (1 - frac) * tau[i0] + frac * tau[i1]
    return np.sum(w * vals * v)


def _osc_loop(x, w, v, inv_eps, tau):
    m = tau.shape[0]
    acc = 0.0 + 0.0j
    for i in range(x.shape[0]):
        s = x[i] * inv_eps * m
        s = s - m * np.floor(s / m)
        i0 = int(np.floor(s))
        frac = s - i0
        i0 = i0 % m
        i1 = (i0 + 1) % m
        acc += w[i] * ((1 - frac) * tau[i0] + frac * tau[i1]) * v[i]
    return acc


NUMPY_KERNELS = {
    "p1_1d": _p1_1d_numpy,
    "q1_2d": _q1_2d_numpy,
    "oscillatory_sum": _osc_numpy,
}

if NUMBA_AVAILABLE:
    LOOP_KERNELS = {
        "p1_1d": njit(cache=True)(_p1_1d_loop),
        "q1_2d": njit(cache=True)(_q1_2d_loop),
        "oscillatory_sum": njit(cache=True)(_osc_loop),
    }
else:  # pragma: no cover
    LOOP_KERNELS = {
        "p1_1d": _p1_1d_loop,
        "q1_2d": _q1_2d_loop,
        "oscillatory_sum": _osc_loop,
    }

_ACTIVE = LOOP_KERNELS if USE_NUMBA else NUMPY_KERNELS


def assemble_p1_1d(h, diffusion, drift=None, periodic=False):
    """COO triplets of the linear-element form ``int c u' v' + b u' v``.

    ``diffusion`` and ``drift`` hold one (element-averaged) value per
    element. Node ``e`` and ``e + 1`` bound element ``e``; with ``periodic``
    the last node is identified with node 0.
    """
    diffusion = np.ascontiguousarray(diffusion, dtype=np.float64)
    if drift is None:
        drift = np.zeros_like(diffusion)
    drift = np.ascontiguousarray(drift, dtype=np.float64)
    return _ACTIVE["p1_1d"](float(h), diffusion, drift, bool(periodic))


def assemble_q1_2d(nx, ny, hx, hy, coef, periodic=False):
    """COO triplets for ``int sum_kl c_kl d_k u d_l v`` on a uniform rectangle grid.

    ``coef`` has shape ``(nx * ny, 2, 2)``, element ``e = i + j * nx``.
    """
    ref = q1_reference_integrals(hx, hy)
    coef = np.ascontiguousarray(coef, dtype=np.complex128)
    return _ACTIVE["q1_2d"](int(nx), int(ny), ref.astype(np.complex128), coef, bool(periodic))


def oscillatory_sum(x, w, v, eps, tau):
    """``sum_i w_i tau(x_i / eps) v_i`` with ``tau`` sampled on a periodic unit grid.

    ``tau[k]`` is the value at ``k / len(tau)``; intermediate points use
    periodic linear interpolation.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.complex128)
    tau = np.ascontiguousarray(tau, dtype=np.float64)
    return complex(_ACTIVE["oscillatory_sum"](x, w, v, 1.0 / float(eps), tau))
