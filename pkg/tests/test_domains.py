import numpy as np
import pytest

from degsemi.domains import (
    DomainChain,
    EllipticCoefficients,
    assemble_dirichlet_operator,
    constant_chain,
    elliptic_solutions,
    interval_shrink_chain,
    level_operators,
    mask_initial_data,
    monotonicity_violation,
    rectangle_shrink_chain,
    varying_domain_elliptic_experiment,
    varying_domain_parabolic_experiment,
)
from degsemi.errors import EmptyDomain, InitialDataNotConverging

UNIT = EllipticCoefficients(1.0)


def bump(chain):
    (x,) = chain.coordinates()
    return chain.to_ambient(np.where(x < 0.5, np.sin(2 * np.pi * x) ** 2, 0.0))


def test_textbook_stencil():
    h = 1 / 128
    ch = interval_shrink_chain((2, 4), h=h)
    op = assemble_dirichlet_operator(ch, 0, UNIT)
    K = op.dense_stiffness()
    m = K.shape[0]
    T = (2 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)) / h ** 2
    assert np.allclose(K, T, rtol=1e-12)
    assert m == np.count_nonzero(ch.masks[0])


def test_chain_validation():
    with pytest.raises(ValueError):
        DomainChain(1, (1.0,), 0.25, (np.array([1, 1, 0], bool), np.array([1, 0, 0], bool)), (1, 2))
    with pytest.raises(ValueError):
        DomainChain(1, (1.0,), 0.25, (np.array([1, 0, 0], bool),), (1,))
    ch = DomainChain(1, (1.0,), 0.25, (np.zeros(3, bool), np.ones(3, bool)), ("empty", "Omega"))
    with pytest.raises(EmptyDomain):
        assemble_dirichlet_operator(ch, 0, UNIT)


def test_constant_chain_identical_operators():
    ops = level_operators(constant_chain(3, h=1 / 32), UNIT)
    assert all(np.array_equal(o.dense_stiffness(), ops[0].dense_stiffness()) for o in ops)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_eigenvalues_of_levels(n):
    h = 1 / 256
    ch = interval_shrink_chain((n,), h=h)
    op = assemble_dirichlet_operator(ch, 0, UNIT)
    Ln = h * (np.count_nonzero(ch.masks[0]) + 1)
    ev = np.linalg.eigvalsh(op.reduced_matrix())[:3]
    exact = (np.arange(1, 4) * np.pi / Ln) ** 2
    assert np.allclose(ev, exact, rtol=10 * h ** 2 * 9 * np.pi ** 2 / Ln ** 2)


def test_zero_extension_is_isometric():
    ch = interval_shrink_chain((4,), h=1 / 64)
    op = assemble_dirichlet_operator(ch, 0, UNIT)
    c = np.random.default_rng(0).standard_normal(op.rank)
    assert np.isclose(np.linalg.norm(op.basis @ c), np.linalg.norm(c), rtol=0, atol=1e-15)


def test_form_restriction_consistency():
    ch = interval_shrink_chain((2, 4), h=1 / 64)
    full = assemble_dirichlet_operator(ch, 2, UNIT).dense_stiffness()
    idx = np.flatnonzero(ch.masks[1])
    assert np.array_equal(assemble_dirichlet_operator(ch, 1, UNIT).dense_stiffness(), full[np.ix_(idx, idx)])


def test_parabolic_constant_chain_zero():
    ch = constant_chain(3, h=1 / 32)
    u0 = bump(ch)
    tr = varying_domain_parabolic_experiment(ch, UNIT, mask_initial_data(ch, u0), u0, 1.0)
    assert np.all(tr.series("SUP_CLOSED_STRONG") == 0)


def test_parabolic_shrinking_chain():
    ch = interval_shrink_chain((2, 4, 8, 16), h=1 / 256)
    u0 = bump(ch)
    tr = varying_domain_parabolic_experiment(ch, UNIT, mask_initial_data(ch, u0), u0, 1.0)
    assert np.all(np.diff(tr.series("SUP_CLOSED_STRONG")) < 0)


def test_initial_error_is_tail_mass():
    ch = interval_shrink_chain((2, 4, 8, 16), h=1 / 256)
    (x,) = ch.coordinates()
    u0 = ch.to_ambient(np.sin(np.pi * x))
    u0s = mask_initial_data(ch, u0)
    tr = varying_domain_parabolic_experiment(ch, UNIT, u0s, u0, 1.0)
    tail = [np.linalg.norm(np.where(m, 0, u0)) for m in ch.masks[:-1]]
    assert np.allclose(tr.series("INITIAL_ERROR"), tail, rtol=1e-15, atol=0)
    assert np.all(np.diff(tail) < 0)
    assert np.all(np.diff(tr.series("SUP_CLOSED_STRONG")) < 0)
    with pytest.raises(InitialDataNotConverging):
        varying_domain_parabolic_experiment(ch, UNIT, u0s[::-1], u0, 1.0)


def test_elliptic_closed_form_and_decrease():
    ch = interval_shrink_chain((2, 4, 8, 16), h=1 / 256)
    (x,) = ch.coordinates()
    f = ch.to_ambient(np.ones_like(x))
    tr = varying_domain_elliptic_experiment(ch, UNIT, 1.0, f)
    assert np.all(np.diff(tr.series("RESOLVENT_SOT_SINGLE")) < 0)
    u = np.real(elliptic_solutions(ch, UNIT, 1.0, f)[-1])
    assert np.max(np.abs(u - (1 - np.cosh(x - 0.5) / np.cosh(0.5)))) <= 1e-4
    cc = constant_chain(3, h=1 / 32)
    (xc,) = cc.coordinates()
    z = varying_domain_elliptic_experiment(cc, UNIT, 1.0, cc.to_ambient(np.ones_like(xc)))
    assert np.all(z.series("RESOLVENT_SOT_SINGLE") == 0)


def test_data_outside_small_domains():
    ch = interval_shrink_chain((2, 4, 8, 16), h=1 / 128)
    (x,) = ch.coordinates()
    f = ch.to_ambient((x > 0.8).astype(float))
    tr = varying_domain_elliptic_experiment(ch, UNIT, 1.0, f)
    s = tr.series("RESOLVENT_SOT_SINGLE")
    sols = elliptic_solutions(ch, UNIT, 1.0, f)
    # f vanishes on (0, 1/2) and (0, 3/4), so P_n f = 0 and u_n = 0 there
    assert np.max(np.abs(sols[0])) == 0.0 and np.max(np.abs(sols[1])) == 0.0
    assert s[0] == s[1] == np.linalg.norm(sols[-1]) * np.sqrt(ch.cell_measure)
    # once Omega_n meets the support the solution is nonzero and the error drops
    assert np.max(np.abs(sols[2])) > 0 and s[3] < s[2] < s[1]


def test_domain_monotonicity():
    ch = interval_shrink_chain((2, 4, 8, 16), h=1 / 128)
    (x,) = ch.coordinates()
    order, sign = monotonicity_violation(ch, UNIT, 1.0, ch.to_ambient(1 + x))
    assert order <= 1e-10 and sign <= 1e-10


def test_rectangle_chain():
    ch = rectangle_shrink_chain((2, 4), h=1 / 16)
    X, Y = ch.coordinates()
    f = ch.to_ambient(np.ones_like(X))
    tr = varying_domain_elliptic_experiment(ch, EllipticCoefficients(np.eye(2)), 1.0, f)
    assert np.all(np.diff(tr.series("RESOLVENT_SOT_SINGLE")) < 0)


def test_ellipticity_check():
    with pytest.raises(ValueError):
        assemble_dirichlet_operator(interval_shrink_chain((2,), h=1 / 16), 0, EllipticCoefficients(lambda x: x - 0.5))
