import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from conftest import random_hermitian_psd, random_sectorial
from degsemi import FormOperator, estimate_sector, orthogonal_projection, real_part_operator, resolvent_apply
from degsemi.counterexamples import block_swap_operator
from degsemi.errors import DimensionMismatch, NotSectorial, SingularGram, SingularSystem
from degsemi.operator import hille_yosida_check


def test_scalar_operator():
    op = FormOperator(np.array([[1.0]]), np.array([[2.0]]))
    assert op.symmetric
    assert np.allclose(op.dense_gram(), [[1.0]])
    assert np.isclose(resolvent_apply(op, 1.0, np.array([1.0]))[0], 1 / 3)


def test_gram_matches_dense_product(rng):
    B = rng.standard_normal((4, 2))
    op = FormOperator(B, np.array([[1, 1j], [-1j, 1]]))
    assert np.allclose(op.dense_gram(), B.T @ B, atol=1e-14)
    assert op.symmetric


def test_identity_basis_random_hermitian(rng):
    K = random_hermitian_psd(rng, 4)
    op = FormOperator(np.eye(4), K)
    assert op.symmetric and np.allclose(op.dense_gram(), np.eye(4))


def test_rejects_bad_inputs():
    with pytest.raises(SingularGram):
        FormOperator(np.array([[1.0, 1.0], [0.0, 0.0]]), np.eye(2)).cholesky()
    with pytest.raises(DimensionMismatch):
        FormOperator(np.eye(3), np.eye(2))


def test_block_swap_resolvent_closed_form():
    # (I + A_2)^{-1} e_1 = e_1 / 2 - e_3 / 4 in ambient dimension 6
    op = block_swap_operator(2, 6).operator()
    f = np.zeros(6)
    f[0] = 1
    expected = np.zeros(6)
    expected[0], expected[2] = 0.5, -0.25
    assert np.allclose(resolvent_apply(op, 1.0, f), expected, atol=1e-14)


def test_resolvent_matches_dense_lu(rng):
    K = random_hermitian_psd(rng, 5)
    f = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    lam = 2 + 1j
    x = linalg.lu_solve(linalg.lu_factor(lam * np.eye(5) + K), f)
    assert np.allclose(resolvent_apply(FormOperator(np.eye(5), K), lam, f), x, atol=1e-12)


def test_resolvent_identity(rng):
    op = FormOperator(np.eye(6), random_sectorial(rng, 6))
    F = np.eye(6, dtype=complex)
    lam, mu = 1.5 + 0.5j, 3.0 - 1j
    Rl = resolvent_apply(op, lam, F)
    Rm = resolvent_apply(op, mu, F)
    resid = Rl - Rm + (lam - mu) * Rl @ Rm
    assert np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(Rl))


def test_singular_shift_raises():
    op = FormOperator(np.eye(1), np.array([[-1.0]]))
    with pytest.raises(SingularSystem):
        resolvent_apply(op, 1.0, np.ones(1))


def test_real_part_examples(rng):
    K = np.array([[1, 1j], [-1j, 1]])
    assert np.allclose(real_part_operator(FormOperator(np.eye(2), K)).dense_stiffness(), K)
    R = real_part_operator(FormOperator(np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]])))
    assert np.allclose(R.dense_stiffness(), [[1, 0.5], [0.5, 1]])
    K = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    op = FormOperator(np.eye(6), K)
    H = real_part_operator(op).dense_stiffness()
    assert np.allclose(H, H.conj().T)
    U = rng.standard_normal((6, 100)) + 1j * rng.standard_normal((6, 100))
    q = np.einsum("ij,ij->j", U.conj(), K @ U)
    qh = np.einsum("ij,ij->j", U.conj(), H @ U)
    assert np.allclose(qh.real, q.real, atol=1e-12 * np.abs(q).max())


def test_projection_examples(rng):
    B = np.linalg.qr(rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)))[0]
    op = FormOperator(B, np.eye(2))
    f = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert np.allclose(orthogonal_projection(op, B @ [1, 2j]), B @ [1, 2j], atol=1e-13)
    perp = f - B @ (B.conj().T @ f)
    assert np.linalg.norm(orthogonal_projection(op, perp)) < 1e-13
    Q, _ = np.linalg.qr(B)
    assert np.allclose(orthogonal_projection(op, f), Q @ Q.conj().T @ f, atol=1e-12)


def test_projection_algebra_nonorthonormal_basis(rng):
    B = rng.standard_normal((7, 3)) + 1j * rng.standard_normal((7, 3))
    op = FormOperator(B, np.eye(3))
    P = orthogonal_projection(op, np.eye(7, dtype=complex))
    assert np.allclose(P @ P, P, atol=1e-12)
    assert np.allclose(P, P.conj().T, atol=1e-12)


def test_sector_hermitian():
    K = np.diag([0.5, 1.0, 3.0])
    s = estimate_sector(FormOperator(np.eye(3), K))
    assert s.semiangle <= 1e-6
    assert np.isclose(s.vertex, 0.5)


def test_sector_pi_over_4():
    s = estimate_sector(FormOperator(np.eye(2), np.array([[1.0, 1.0], [-1.0, 1.0]])))
    assert abs(s.vertex) < 1e-12
    assert np.isclose(s.semiangle, np.pi / 4, atol=1e-8)
    # brute force over the unit sphere
    rng = np.random.default_rng(0)
    U = rng.standard_normal((2, 20000)) + 1j * rng.standard_normal((2, 20000))
    q = np.einsum("ij,ij->j", U.conj(), np.array([[1.0, 1.0], [-1.0, 1.0]]) @ U)
    assert np.max(np.abs(q.imag) / q.real) <= np.tan(s.semiangle) + 1e-9


def test_sector_rejects_skew_only():
    with pytest.raises(NotSectorial):
        estimate_sector(FormOperator(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]])), vertex=0.0)


def test_hille_yosida():
    op = FormOperator(np.eye(1), np.array([[2.0]]))
    rep = hille_yosida_check(op, 0.0, 1.0, 5, [0.5, 1, 4, 20])
    assert rep.passed and rep.max_value <= 1
    bad = hille_yosida_check(FormOperator(np.eye(1), np.array([[-1.0]])), 0.0, 1.0, 3, [1.5, 2.0])
    assert not bad.passed


def test_hille_yosida_self_adjoint_exact(rng):
    K = random_hermitian_psd(rng, 5) + 0.1 * np.eye(5)
    rep = hille_yosida_check(FormOperator(np.eye(5), K), 0.0, 1.0, 4, [0.5, 2.0])
    mu = np.linalg.eigvalsh(K).min()
    exact = max((lam / (lam + mu)) ** k for lam in (0.5, 2.0) for k in range(1, 5))
    assert rep.passed
    assert np.isclose(rep.max_value, exact, rtol=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000), st.floats(0.1, 10))
def test_self_adjoint_contraction(d, seed, lam):
    rng = np.random.default_rng(seed)
    op = FormOperator(np.eye(d), random_hermitian_psd(rng, d))
    f = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    assert np.linalg.norm(lam * resolvent_apply(op, lam, f)) <= np.linalg.norm(f) * (1 + 1e-12)
