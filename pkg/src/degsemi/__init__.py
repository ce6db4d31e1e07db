"""Degenerate semigroups from sectorial forms and their convergence.

Operators are represented by a basis of a (possibly non-dense) subspace of
a finite ambient space together with the stiffness of a form on it.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .operator import (
    FormOperator,
    SectorEstimate,
    assemble_form_operator,
    estimate_sector,
    hille_yosida_check,
    operator_norm,
    orthogonal_projection,
    real_part_operator,
    resolvent_apply,
)
from .semigroup import (
    ContourParams,
    SemigroupEvaluator,
    laplace_transform_check,
    semigroup_apply,
    semigroup_via_contour,
    strong_limit_projection,
)
from .metrics import (
    ConvergenceTrace,
    EquivalenceParams,
    MetricKind,
    ProbeSet,
    comovement_report,
    equivalence_comovement_experiment,
    l2_identity_check,
    real_part_condition_experiment,
    wot_norm_limit_bridge,
)
from .counterexamples import (
    BlockSwapFamily,
    block_swap_operator,
    kato_sqrt_resolvent_check,
    sqrt_factorization_check,
    weak_not_strong_experiment,
)
from .galerkin import ContinuousFormSpec, build_fe_chain, build_fourier_chain, galerkin_experiment
from .domains import (
    DomainChain,
    EllipticCoefficients,
    assemble_dirichlet_operator,
    interval_shrink_chain,
    varying_domain_elliptic_experiment,
    varying_domain_parabolic_experiment,
)
from .homogenization import (
    Box,
    PeriodicCoefficientField,
    homogenization_experiment,
    homogenized_tensor,
    oscillatory_average_check,
    scaled_operator,
    solve_cell_problem,
)
from .io import emit_svg_plot
