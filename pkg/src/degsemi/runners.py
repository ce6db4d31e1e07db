"""Config-driven experiment runners used by the command line.

Each runner takes the validated ``parameters`` map and returns a
:class:`RunResult` holding traces, extra tables and named checks.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid
from .metrics import ConvergenceTrace, EquivalenceParams, ProbeSet, equivalence_comovement_experiment
from .operator import FormOperator


@dataclass(frozen=True)
class Key:
    name: str
    required: bool
    default: object
    doc: str


SCHEMA = {
    "counterexample": [
        Key("n_list", True, None, "block sizes n (integers > probe_support)"),
        Key("lambda", True, None, "resolvent parameter {re, im}; must be 1 + 0i"),
        Key("probe_support", False, 4, "probes vanish outside the first m coordinates"),
        Key("ambient_dim", False, None, "truncation dimension N (default 2 max(n) + 6)"),
        Key("seed", False, 0, "probe seed"),
    ],
    "domains": [
        Key("n_list", True, None, "subdomains (0, L(1 - 1/n)); Omega is appended as reference"),
        Key("lambda", True, None, "elliptic parameter {re, im}, real and positive"),
        Key("h", False, 1 / 256, "master grid spacing (length units)"),
        Key("length", False, 1.0, "length L of Omega (length units)"),
        Key("T", False, 1.0, "final time of the parabolic sup (time units)"),
        Key("diffusion", False, 1.0, "constant diffusion coefficient a (dimensionless)"),
        Key("closed_form_tol", False, 1e-4, "max nodal error vs 1 - cosh(x - 1/2)/cosh(1/2) when a = L = lambda = 1"),
    ],
    "equivalence": [
        Key("n_list", True, None, "chain indices n"),
        Key("lambda", True, None, "resolvent point of the single-point SOT metric {re, im}, Re > 0"),
        Key("family", False, "perturbation", "perturbation (A + B/n) | constant (A_n = A)"),
        Key("dim", False, 12, "ambient dimension"),
        Key("T", False, 1.0, "time horizon (time units)"),
        Key("delta", False, 0.1, "left end of the sup interval [delta, T] (time units)"),
        Key("lambda_nonreal", False, {"re": 1.0, "im": 1.0}, "nonreal resolvent point {re, im}"),
        Key("probe_count", False, 16, "number of random probes (plus 4 canonical)"),
        Key("seed", False, 0, "seed for matrices and probes"),
        Key("low", False, 1e-6, "converged threshold"),
        Key("high", False, 1e-4, "co-movement threshold"),
    ],
    "galerkin": [
        Key("lambda", True, None, "resolvent parameter {re, im}, Re > 0"),
        Key("chain", False, "fe", "fe | fourier"),
        Key("h0", False, 1 / 8, "coarsest mesh size (fe; length units)"),
        Key("refinements", False, 3, "number of uniform refinements (fe)"),
        Key("reference_h", False, 1 / 256, "reference mesh size appended as last level (fe)"),
        Key("modes", False, [1, 2, 4, 8, 16], "mode counts (fourier); last one is the reference"),
        Key("grid", False, 64, "sampling grid cells (fourier)"),
        Key("drift", False, 0.0, "constant drift b (nonzero selects advection-diffusion)"),
        Key("T", False, 1.0, "time horizon (time units)"),
        Key("f", False, "sine", "sine (sin(pi x)) | random"),
        Key("seed", False, 0, "seed for random data"),
        Key("final_tol", False, 1e-3, "bound for the last sup and projection metrics"),
    ],
    "homogenize": [
        Key("epsilons", True, None, "decreasing periods eps (length units)"),
        Key("lambda", True, None, "resolvent parameter {re, im}, Re > 0"),
        Key("field", False, "piecewise", "piecewise | sinusoidal | laminate | constant | path to CSV"),
        Key("values", False, [1.0, 4.0], "piecewise / laminate layer values (dimensionless)"),
        Key("cell_m", False, None, "cell grid resolution per axis (default 4096 in 1D, 256 in 2D)"),
        Key("dimension", False, 1, "dimension of a CSV field"),
        Key("extent", False, None, "domain side lengths (default 1 per axis; length units)"),
        Key("h", False, None, "domain grid spacing (default min(eps)/16; length units)"),
        Key("boundary", False, "DIRICHLET", "DIRICHLET | NEUMANN"),
        Key("rel_tol", False, 0.02, "bound for the last relative resolvent error"),
        Key("c_hat_expected", False, None, "optional expected effective tensor (list of rows)"),
        Key("c_hat_tol", False, 1e-6, "tolerance for c_hat_expected"),
    ],
}


@dataclass
class RunResult:
    traces: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def check(self, name, passed, detail=""):
        self.checks.append({"name": name, "passed": bool(passed), "detail": str(detail)})


def parse_complex(value, key="lambda"):
    if not isinstance(value, dict) or set(value) - {"re", "im"} or "re" not in value:
        raise ConfigInvalid(f"{key} must be a map {{re: <real>, im: <real>}}")
    try:
        return complex(float(value["re"]), float(value.get("im", 0.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{key} components must be real numbers") from exc


def validate(kind, params):
    if kind not in SCHEMA:
        raise ConfigInvalid(f"unknown experiment {kind!r}; expected one of {sorted(SCHEMA)}")
    if not isinstance(params, dict):
        raise ConfigInvalid("parameters must be a map")
    known = {k.name for k in SCHEMA[kind]}
    extra = set(params) - known
    if extra:
        raise ConfigInvalid(f"unknown parameters for {kind}: {sorted(extra)}")
    out = {}
    for k in SCHEMA[kind]:
        if k.name in params:
            v = params[k.name]
        elif k.required:
            raise ConfigInvalid(f"missing required parameter {k.name!r} for {kind}")
        else:
            v = k.default
        if isinstance(v, list) and not v:
            raise ConfigInvalid(f"{k.name} must be nonempty")
        out[k.name] = v
    for key in ("lambda", "lambda_nonreal"):
        if key in out:
            out[key] = parse_complex(out[key], key)
    return out


def _decreasing(s):
    s = np.asarray(s)
    return bool(np.all((s[1:] < s[:-1]) | ((s[1:] == 0) & (s[:-1] == 0))))


# ---------------------------------------------------------------------------

def run_counterexample(p):
    from .counterexamples import weak_not_strong_experiment

    if p["lambda"] != 1:
        raise ConfigInvalid("the block-swap experiment is defined at lambda = 1")
    rep = weak_not_strong_experiment(p["n_list"], int(p["probe_support"]), 1.0, p["ambient_dim"], seed=int(p["seed"]))
    res = RunResult()
    res.tables["counterexample"] = rep
    trace = ConvergenceTrace(params={"probe_support": rep.probe_support, "ambient_dim": rep.ambient_dim})
    for n, w, s, _ in rep.rows():
        trace.append(n, {"wot_residual": w, "sot_residual": s})
    res.traces["counterexample_trace"] = trace
    res.check("wot_residual <= 1e-14", max(rep.wot_residual) <= 1e-14, max(rep.wot_residual))
    gap = max(abs(a - b) for a, b in zip(rep.sot_residual, rep.formula_value))
    res.check("sot_residual = (1 - 1/n)/2 within 1e-12", gap <= 1e-12, gap)
    return res


def run_equivalence(p):
    rng = np.random.default_rng(int(p["seed"]))
    d = int(p["dim"])

    def psd():
        X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        return X @ X.conj().T / d

    A = psd()
    B = psd()
    B /= np.linalg.norm(B, 2)
    ns = [int(n) for n in p["n_list"]]
    if p["family"] == "perturbation":
        fam = [FormOperator(np.eye(d), A + B / n) for n in ns]
    elif p["family"] == "constant":
        fam = [FormOperator(np.eye(d), A) for _ in ns]
    else:
        raise ConfigInvalid(f"unknown family {p['family']!r}")
    ref = FormOperator(np.eye(d), A)
    lam = p["lambda"]
    if lam.real <= 0 or p["lambda_nonreal"].imag == 0:
        raise ConfigInvalid("need Re lambda > 0 and a nonreal lambda_nonreal")
    params = EquivalenceParams(T=float(p["T"]), delta=float(p["delta"]), lambda_single=lam,
                               lambda_nonreal=p["lambda_nonreal"], low=float(p["low"]), high=float(p["high"]))
    probes = ProbeSet.standard(d, n_random=int(p["probe_count"]), seed=int(p["seed"]))
    trace, rep = equivalence_comovement_experiment(fam, ref, params, probes, index=ns)
    res = RunResult()
    res.traces["equivalence"] = trace
    for tag in trace.values:
        last = trace.values[tag][-1]
        res.check(f"{tag} final < {params.high:g}", last < params.high, last)
    res.check("co-movement", rep.comoving, rep.violations)
    return res


def run_galerkin(p):
    from .galerkin import ContinuousFormSpec, build_fe_chain, build_fourier_chain, galerkin_experiment

    kind = "ADVECTION_DIFFUSION_1D" if p["drift"] else "DIRICHLET_LAPLACE_1D"
    spec = ContinuousFormSpec(kind=kind, drift=float(p["drift"]))
    if p["chain"] == "fe":
        chain = build_fe_chain(spec, int(p["refinements"]), h0=float(p["h0"]), reference_h=float(p["reference_h"]))
        n = chain.reference.grid["n"]
        x = np.arange(1, n) / n
        nodal = np.sin(np.pi * x) if p["f"] == "sine" else np.random.default_rng(int(p["seed"])).standard_normal(n - 1)
        f = chain.reference.ambient_basis @ nodal
    elif p["chain"] == "fourier":
        chain = build_fourier_chain(spec, p["modes"], grid=int(p["grid"]))
        n = chain.reference.grid["n"]
        x = np.arange(1, n) / n
        nodal = np.sin(np.pi * x) if p["f"] == "sine" else np.random.default_rng(int(p["seed"])).standard_normal(n - 1)
        f = np.sqrt(1.0 / n) * nodal
    else:
        raise ConfigInvalid(f"unknown chain {p['chain']!r}")
    trace = galerkin_experiment(chain, spec, f, float(p["T"]), lam=p["lambda"], check=False)
    res = RunResult()
    res.traces["galerkin"] = trace
    for tag in trace.values:
        s = trace.series(tag)
        res.check(f"{tag} decreasing", _decreasing(s), list(s))
    for tag in ("SUP_HALFOPEN_STRONG", "PROJECTION_SOT"):
        last = trace.values[tag][-1]
        res.check(f"{tag} final < {p['final_tol']:g}", last < float(p["final_tol"]), last)
    return res


def run_domains(p):
    from .domains import (
        EllipticCoefficients,
        elliptic_solutions,
        interval_shrink_chain,
        mask_initial_data,
        varying_domain_elliptic_experiment,
        varying_domain_parabolic_experiment,
    )

    lam = p["lambda"]
    if lam.imag != 0 or lam.real <= 0:
        raise ConfigInvalid("domains: lambda must be real and positive")
    L = float(p["length"])
    chain = interval_shrink_chain(tuple(int(n) for n in p["n_list"]), h=float(p["h"]), length=L)
    coeffs = EllipticCoefficients(float(p["diffusion"]))
    (x,) = chain.coordinates()
    u0 = chain.to_ambient(np.where(x < L / 2, np.sin(2 * np.pi * x / L) ** 2, 0.0))
    f = chain.to_ambient(np.ones_like(x))
    par = varying_domain_parabolic_experiment(chain, coeffs, mask_initial_data(chain, u0), u0, float(p["T"]))
    ell = varying_domain_elliptic_experiment(chain, coeffs, lam.real, f)
    res = RunResult()
    res.traces["domains_parabolic"] = par
    res.traces["domains_elliptic"] = ell
    s = par.series("SUP_CLOSED_STRONG")
    res.check("parabolic sup-[0,T] errors strictly decreasing", _decreasing(s), list(s))
    s = ell.series("RESOLVENT_SOT_SINGLE")
    res.check("elliptic errors strictly decreasing", _decreasing(s), list(s))
    if L == 1.0 and lam == 1 and float(p["diffusion"]) == 1.0:
        u = np.real(elliptic_solutions(chain, coeffs, 1.0, f)[-1])
        err = float(np.abs(u - (1 - np.cosh(x - 0.5) / np.cosh(0.5))).max())
        res.check(f"closed-form elliptic solution within {p['closed_form_tol']:g}", err <= float(p["closed_form_tol"]), err)
    return res


def _field(p):
    from .homogenization import PeriodicCoefficientField as F

    name = p["field"]
    vals = [float(v) for v in p["values"]]
    m = p["cell_m"]
    if name == "piecewise":
        return F.piecewise(vals, m=int(m or 4096))
    if name == "sinusoidal":
        return F.sinusoidal(m=int(m or 4096))
    if name == "laminate":
        return F.laminate(vals, vals, m=int(m or 256))
    if name == "constant":
        return F.constant(vals[0], m=int(m or 16))
    try:
        return F.from_csv(name, dimension=int(p["dimension"]))
    except OSError as exc:
        raise ConfigInvalid(f"cannot read coefficient field {name!r}: {exc}") from exc


def run_homogenize(p):
    from .homogenization import Box, homogenization_experiment, homogenized_tensor

    field_ = _field(p)
    eps = [float(e) for e in p["epsilons"]]
    d = field_.dimension
    extent = tuple(float(v) for v in (p["extent"] or [1.0] * d))
    if len(extent) != d:
        raise ConfigInvalid(f"extent needs {d} entries")
    h = float(p["h"]) if p["h"] is not None else min(eps) / 16
    box = Box(extent, h)
    tensor = homogenized_tensor(field_)
    trace = homogenization_experiment(field_, box, p["lambda"], 1.0, eps, boundary=p["boundary"].upper(),
                                      tensor=tensor, check=False)
    res = RunResult()
    res.traces["homogenize"] = trace
    res.tables["tensor"] = tensor
    s = trace.series("RESOLVENT_SOT_SINGLE")
    res.check("resolvent errors decreasing", _decreasing(s) or not np.any(s > 1e-12), list(s))
    rel = trace.values["RELATIVE_ERROR"][-1]
    res.check(f"final relative error < {p['rel_tol']:g}", rel < float(p["rel_tol"]), rel)
    for tag in ("L2_BOUND_RATIO", "GRADIENT_BOUND_RATIO"):
        worst = max(trace.values[tag])
        res.check(f"{tag} <= 1", worst <= 1 + 1e-8, worst)
    if p["c_hat_expected"] is not None:
        exp = np.atleast_2d(np.asarray(p["c_hat_expected"], dtype=float))
        gap = float(np.abs(exp - tensor.entries).max())
        res.check(f"c_hat within {p['c_hat_tol']:g}", gap <= float(p["c_hat_tol"]), gap)
    return res


RUNNERS = {
    "counterexample": run_counterexample,
    "domains": run_domains,
    "equivalence": run_equivalence,
    "galerkin": run_galerkin,
    "homogenize": run_homogenize,
}
