import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from degsemi import _kernels as k


def dense(triplets, n):
    r, c, v = triplets
    return sparse.coo_matrix((v, (r, c)), shape=(n, n)).toarray()


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.booleans(), st.integers(0, 1000))
def test_p1_paths_agree(n, periodic, seed):
    rng = np.random.default_rng(seed)
    args = (1.0 / n, 1 + rng.random(n), rng.standard_normal(n), periodic)
    size = n if periodic else n + 1
    a = dense(k.NUMPY_KERNELS["p1_1d"](*args), size)
    b = dense(k.LOOP_KERNELS["p1_1d"](*args), size)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_p1_stiffness_textbook():
    K = dense(k.assemble_p1_1d(0.25, np.ones(4)), 5)
    assert np.allclose(K[1:-1, 1:-1], 4 * np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]]))
    D = dense(k.assemble_p1_1d(0.25, np.zeros(4), drift=np.ones(4)), 5)
    # int u' v with hats: +-1/2 off the diagonal, zero row sums
    assert np.allclose(D.sum(axis=1)[1:-1], 0) and np.isclose(D[1, 2], 0.5)


@pytest.mark.parametrize("periodic", [False, True])
def test_q1_paths_agree(periodic):
    rng = np.random.default_rng(0)
    nx, ny = 5, 4
    coef = rng.standard_normal((nx * ny, 2, 2)) + 3 * np.eye(2)
    ref = k.q1_reference_integrals(0.2, 0.25).astype(np.complex128)
    n = nx * ny if periodic else (nx + 1) * (ny + 1)
    a = dense(k.NUMPY_KERNELS["q1_2d"](nx, ny, ref, coef.astype(np.complex128), periodic), n)
    b = dense(k.LOOP_KERNELS["q1_2d"](nx, ny, ref, coef.astype(np.complex128), periodic), n)
    assert np.allclose(a, b, atol=1e-12)
    # constants are in the kernel of the periodic operator
    if periodic:
        assert np.allclose(a @ np.ones(n), 0, atol=1e-12)


def test_q1_gradient_integrals():
    J = k.q1_gradient_integrals(0.5, 0.25)
    # sum over local nodes of int d_l phi_a vanishes; int d_x (sum of right nodes) = height
    assert np.allclose(J.sum(axis=1), 0)
    assert np.isclose(J[0, 1] + J[0, 2], 0.25)


def test_oscillatory_paths_agree():
    rng = np.random.default_rng(2)
    x = rng.random(1000)
    w = rng.random(1000)
    v = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    tau = rng.random(37)
    a = k.NUMPY_KERNELS["oscillatory_sum"](x, w, v, 7.3, tau)
    b = k.LOOP_KERNELS["oscillatory_sum"](x, w, v, 7.3, tau)
    assert np.isclose(a, b, rtol=1e-12)


def test_disable_flag_selects_numpy():
    env = dict(os.environ, DEGSEMI_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from degsemi import _kernels as k; print(k.USE_NUMBA)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
