import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from degsemi.errors import ExpOverflow
from degsemi.matfuncs import expm, sqrtm_hermitian, sqrtm_schur


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10_000), st.floats(1e-3, 30.0))
def test_expm_matches_scipy(d, seed, scale):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    A *= scale / np.linalg.norm(A, 1)
    ref = linalg.expm(A)
    assert np.linalg.norm(expm(A) - ref) <= 1e-10 * max(1.0, np.linalg.norm(ref))


def test_expm_jordan_block():
    J = np.array([[2.0, 1.0], [0.0, 2.0]])
    assert np.allclose(expm(J), np.exp(2) * np.array([[1, 1], [0, 1]]), rtol=1e-13)


def test_expm_overflow():
    with pytest.raises(ExpOverflow):
        expm(np.array([[1e6]]))


def test_sqrtm_schur_accretive():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    C = X @ X.conj().T + np.eye(6) + 0.5j * (X - X.conj().T)
    R = sqrtm_schur(C)
    assert np.linalg.norm(R @ R - C) <= 1e-12 * np.linalg.norm(C)
    assert np.allclose(R, linalg.sqrtm(C), atol=1e-10)


def test_sqrtm_hermitian():
    w = np.array([0.0, 1.0, 4.0])
    assert np.allclose(sqrtm_hermitian(np.diag(w)), np.diag(np.sqrt(w)))
