"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line (also when pytest captures
output). Run standalone with ``python3 tests/test_acceptance.py`` for just
the summary.
"""

import filecmp
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from degsemi import FormOperator, SemigroupEvaluator, estimate_sector, laplace_transform_check
from degsemi.cli import main as cli_main
from degsemi.counterexamples import (
    block_swap_chain_trace,
    kato_sqrt_resolvent_check,
    sqrt_factorization_check,
    weak_not_strong_experiment,
)
from degsemi.domains import (
    EllipticCoefficients,
    elliptic_solutions,
    interval_shrink_chain,
    mask_initial_data,
    varying_domain_elliptic_experiment,
    varying_domain_parabolic_experiment,
)
from degsemi.galerkin import ContinuousFormSpec, build_fe_chain, first_eigenvalue, galerkin_experiment, restrict_chain
from degsemi.homogenization import (
    Box,
    PeriodicCoefficientField,
    homogenization_experiment,
    homogenized_tensor,
    observed_rate,
    oscillatory_average_check,
)
from degsemi.metrics import MetricKind, equivalence_comovement_experiment, l2_identity_check, wot_norm_limit_bridge
from degsemi.semigroup import semigroup_via_contour

ROOT = Path(__file__).resolve().parents[1]


def random_psd(rng, d):
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return X @ X.conj().T / d


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    return ok


# ---------------------------------------------------------------------------

def criterion_1():
    rep = weak_not_strong_experiment([8, 16, 32], probe_support=4, ambient_dim=70)
    wot = max(rep.wot_residual)
    # probes are unit vectors, so ||f|| = 1
    gap = max(abs(s - 0.5 * (1 - 1 / n)) for n, s in zip(rep.n, rep.sot_residual))
    ok = wot <= 1e-14 and gap <= 1e-12
    return report(1, "block swap: weak but not strong", ok, f"max WOT {wot:.1e}, max |SOT - (1-1/n)/2| {gap:.1e}")


def criterion_2():
    rng = np.random.default_rng(2024)
    d = 12
    A, B = random_psd(rng, d), random_psd(rng, d)
    B /= np.linalg.norm(B, 2)
    ns = [4 ** k for k in range(7)] + [10_000]
    fam = [FormOperator(np.eye(d), A + B / n) for n in ns]
    trace, rep = equivalence_comovement_experiment(fam, FormOperator(np.eye(d), A), index=ns)
    finals = {t: trace.values[t][-1] for t in trace.values}
    ok_chain = len(finals) == 12 and max(finals.values()) < 1e-4 and rep.comoving
    bs = block_swap_chain_trace([8, 16, 32, 64])
    wot = bs.series(MetricKind.RESOLVENT_WOT)
    sot = bs.series(MetricKind.RESOLVENT_SOT_SINGLE)
    nonreal = bs.series(MetricKind.RESOLVENT_WOT_NONREAL)
    ok_swap = wot.max() <= 1e-14 and sot.min() > 0.4 and nonreal.min() > 1e-2
    return report(2, "equivalence co-movement", ok_chain and ok_swap,
                  f"max metric at n=1e4 {max(finals.values()):.2e}, co-moving {rep.comoving}; "
                  f"block swap WOT(1) {wot.max():.1e}, SOT(1) >= {sot.min():.3f}, WOT(1+i) >= {nonreal.min():.3f}")


def criterion_3():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 17))
        X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        K = (X + X.conj().T) / 2
        K += (abs(np.linalg.eigvalsh(K).min()) + 0.1) * np.eye(d)
        f = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        lhs, rhs = wot_norm_limit_bridge(FormOperator(np.eye(d), K), 1 + 1j, f / np.linalg.norm(f))
        worst = max(worst, abs(lhs - rhs))
    return report(3, "polarization bridge", worst <= 1e-10, f"max |lhs - rhs| {worst:.1e}")


def criterion_4():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 9))
        A = random_psd(rng, d)
        An = A + 0.5 * random_psd(rng, d)
        f = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        worst = max(worst, l2_identity_check(FormOperator(np.eye(d), An), FormOperator(np.eye(d), A), 1.0,
                                             f / np.linalg.norm(f), quad=512))
    return report(4, "L2 identity", worst <= 1e-6, f"max residual {worst:.1e}")


def _test_operators(rng):
    ops = [FormOperator(np.eye(1), np.array([[2.0]]))]
    for d in (4, 8, 16):
        ops.append(FormOperator(np.eye(d), random_psd(rng, d)))
        H = random_psd(rng, d) + 0.1 * np.eye(d)
        S = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        ops.append(FormOperator(np.eye(d), H + 0.3 * (S - S.conj().T) / 2))
        B = rng.standard_normal((d, d // 2)) + 1j * rng.standard_normal((d, d // 2))
        ops.append(FormOperator(B, random_psd(rng, d // 2)))
    return ops


def criterion_5():
    rng = np.random.default_rng(5)
    worst = 0.0
    for op in _test_operators(rng):
        ev = SemigroupEvaluator(op)
        f = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
        f /= np.linalg.norm(f)
        for lam in (1.0, 2 + 3j):
            # e^{(omega - Re lam) t_max} < 1e-10
            t_max = max(40.0, 24.0 / (lam.real - max(ev.bound.rate, 0.0)))
            worst = max(worst, laplace_transform_check(ev, lam, f, t_max))
    return report(5, "Laplace-transform consistency", worst <= 1e-6, f"max residual {worst:.1e}")


def criterion_6():
    rng = np.random.default_rng(6)
    worst, count, max_angle = 0.0, 0, 0.0
    while count < 12:
        d = int(rng.integers(2, 9))
        H = random_psd(rng, d) + 0.2 * np.eye(d)
        S = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        K = H + rng.uniform(0, 1.5) * (S - S.conj().T) / 2
        op = FormOperator(np.eye(d), K)
        sector = estimate_sector(op)
        if sector.semiangle > np.pi / 3:
            continue
        count += 1
        max_angle = max(max_angle, sector.semiangle)
        ev = SemigroupEvaluator(op)
        f = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        f /= np.linalg.norm(f)
        for t in (0.1, 0.5, 1.0, 2.0):
            v = semigroup_via_contour(ev, t, f, sector=sector).value
            worst = max(worst, float(np.linalg.norm(v - ev.apply(t, f))))
    return report(6, "contour vs exponential", worst <= 1e-6,
                  f"max difference {worst:.1e} over {count} operators, semiangle <= {max_angle:.3f}")


def criterion_7():
    spec = ContinuousFormSpec()
    chain = build_fe_chain(spec, 3, h0=1 / 8, reference_h=1 / 256)
    n = chain.reference.grid["n"]
    f = chain.reference.ambient_basis @ np.sin(np.pi * np.arange(1, n) / n)
    tr = galerkin_experiment(chain, spec, f, 1.0, check=False)
    s = tr.series(MetricKind.SUP_HALFOPEN_STRONG)
    p = tr.series(MetricKind.PROJECTION_SOT)
    lam1 = first_eigenvalue(restrict_chain(spec, chain)[3])
    rel = abs(lam1 / np.pi ** 2 - 1)
    ok = np.all(np.diff(s) < 0) and s[-1] < 1e-3 and np.all(np.diff(p) < 0) and p[-1] < 1e-3 and rel < 1e-2
    return report(7, "Galerkin chain", ok,
                  f"sup-(0,T] {s[0]:.2e} -> {s[-1]:.2e}, projection -> {p[-1]:.2e}, lambda_1 rel. error {rel:.1e}")


def criterion_8():
    chain = interval_shrink_chain((2, 4, 8, 16), h=1 / 256)
    coeffs = EllipticCoefficients(1.0)
    (x,) = chain.coordinates()
    u0 = chain.to_ambient(np.where(x < 0.5, np.sin(2 * np.pi * x) ** 2, 0.0))
    par = varying_domain_parabolic_experiment(chain, coeffs, mask_initial_data(chain, u0), u0, 1.0)
    f = chain.to_ambient(np.ones_like(x))
    ell = varying_domain_elliptic_experiment(chain, coeffs, 1.0, f)
    u = np.real(elliptic_solutions(chain, coeffs, 1.0, f)[-1])
    closed = float(np.max(np.abs(u - (1 - np.cosh(x - 0.5) / np.cosh(0.5)))))
    sp, se = par.series("SUP_CLOSED_STRONG"), ell.series("RESOLVENT_SOT_SINGLE")
    ok = np.all(np.diff(sp) < 0) and np.all(np.diff(se) < 0) and closed <= 1e-4
    return report(8, "varying domains", ok,
                  f"parabolic {sp[0]:.2e} -> {sp[-1]:.2e}, elliptic {se[0]:.2e} -> {se[-1]:.2e}, "
                  f"closed form {closed:.1e}")


def criterion_9():
    pw = PeriodicCoefficientField.piecewise((1.0, 4.0), m=4096)
    c1 = homogenized_tensor(pw).entries[0, 0]
    c2 = homogenized_tensor(PeriodicCoefficientField.sinusoidal(m=4096)).entries[0, 0]
    c3 = homogenized_tensor(PeriodicCoefficientField.laminate((1.0, 4.0), (1.0, 4.0), m=256)).entries
    eps = [1 / 4, 1 / 8, 1 / 16, 1 / 32]
    tr = homogenization_experiment(pw, Box((1.0,), 1 / 512), 1.0, 1.0, eps, check=False)
    s = tr.series(MetricKind.RESOLVENT_SOT_SINGLE)
    rel = tr.series("RELATIVE_ERROR")[-1]
    lam_err = float(np.abs(c3 - np.diag([1.6, 2.5])).max())
    ok = (abs(c1 - 1.6) <= 1e-6 and abs(c2 - np.sqrt(3)) <= 1e-6 and lam_err <= 1e-3
          and np.all(np.diff(s) < 0) and rel < 0.02)
    return report(9, "homogenization", ok,
                  f"c_hat {c1:.10f}, {c2:.10f} (sqrt 3), laminate err {lam_err:.1e}, final rel. error {rel:.4f}")


def criterion_10():
    M = 2 ** 16
    x = (np.arange(M) + 0.5) / M
    w = np.full(M, 1.0 / M)
    tau = np.sin(2 * np.pi * np.arange(4096) / 4096)
    v = ((x >= 1 / 3) & (x <= 0.5)).astype(float)
    eps = [1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64]
    r = oscillatory_average_check(tau, [v] * len(eps), v, eps, x, w, x < 0.75)
    rate = observed_rate(eps, r)
    ok = bool(np.all(np.diff(r) < 0)) and rate >= 0.8
    return report(10, "oscillatory averaging", ok, f"residual {r[0]:.2e} -> {r[-1]:.2e}, rate {rate:.3f}")


def criterion_11():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    cases = {"scalar": np.array([[1.0]]), "diagonal": np.diag([0.25, 1.0, 4.0, 9.0]),
             "random Hermitian": X @ X.conj().T / 6 + 0.05 * np.eye(6)}
    worst = max(kato_sqrt_resolvent_check(C, lam, quad_nodes=256) for C in cases.values() for lam in (0.5, 1.0, 2.0))
    fac = max(sqrt_factorization_check(C) for C in cases.values())
    fac = max(fac, sqrt_factorization_check(random_psd(rng, 5)))
    return report(11, "square-root resolvent integral", worst <= 1e-6 and fac <= 1e-10,
                  f"max integral residual {worst:.1e}, factorization {fac:.1e}")


def criterion_12(tmp):
    tmp = Path(tmp)
    configs = ["counterexample", "equivalence", "galerkin", "domains", "homogenize"]
    same = True
    for name in configs:
        for run in ("a", "b"):
            code = cli_main(["run", str(ROOT / "configs" / f"{name}.yaml"), "--out", str(tmp / run / name)])
            same &= code == 0
        for csv in sorted((tmp / "a" / name).glob("*.csv")):
            same &= filecmp.cmp(csv, tmp / "b" / name / csv.name, shallow=False)
    return report(12, "determinism", same, f"{len(configs)} configs run twice, CSVs byte-identical: {same}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("fn", CRITERIA, ids=lambda f: f.__name__)
def test_criterion(fn):
    assert fn()


def test_criterion_12(tmp_path, capsys):
    with capsys.disabled():
        ok = criterion_12(tmp_path)
    assert ok


if __name__ == "__main__":
    import tempfile

    t0 = time.perf_counter()
    results = [fn() for fn in CRITERIA]
    with tempfile.TemporaryDirectory() as d:
        results.append(criterion_12(d))
    print(f"{sum(results)}/{len(results)} criteria passed in {time.perf_counter() - t0:.1f} s")
    sys.exit(0 if all(results) else 1)
