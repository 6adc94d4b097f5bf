"""Stochastic convex optimization generalization laboratory.

Construct finite-support SCO instances, run worst-case empirical risk
minimization, compute first-order certificates and divergence measures, and
empirically verify sample-complexity behavior at desk scale.
"""

__version__ = "0.1.0"

from .divergence import (
    DivergenceReport,
    OptimalityCertificate,
    bregman,
    build_certificate,
    check_conditional_claims,
    concentration_reports_to_csv,
    divergence_report,
    empirical_bregman,
    representativeness,
    truncated_divergence,
    verify_concentration,
)
from .errors import (
    CertificateError,
    InputError,
    IntegrityError,
    SizingError,
    UnsupportedOperationError,
)
from .geometry import (
    Net,
    NormBall,
    build_net,
    dual_norm_eval,
    linear_minimize,
    measure_cover_radius,
    net_from_json,
    net_to_json,
    norm_eval,
    packing_bound,
    project,
    uniform_ball_sample,
)
from .instances import (
    Sample,
    SCOInstance,
    draw_sample,
    empirical_loss,
    empirical_loss_many,
    instance_from_descriptor,
    make_appendix_instance,
    make_appendix_pair,
    make_coin_instance,
    make_hard_instance,
    make_quadratic_instance,
    population_loss,
    population_loss_many,
    run_invariant_battery,
)
from .rademacher import (
    RadEstimate,
    adversarial_sample,
    check_monotonicity,
    rad_exact,
    rad_inverse,
    rad_mc,
    rad_upper_bound,
)
from .seeding import derived_rng, derived_seed
from .solver import (
    SolveReport,
    minimize_empirical,
    near_erm_candidates,
    population_minimizer,
    worst_near_erm,
)
from .sweep import (
    CellResult,
    SweepConfig,
    SweepResult,
    ThresholdResult,
    TrialRecord,
    emit_report,
    failure_probability,
    fit_scaling,
    load_sweep_result,
    run_sweep,
    sample_size_bound,
    sample_size_bound_general,
    sample_threshold,
    uniform_convergence_threshold,
)

__all__ = [name for name in dir() if not name.startswith("_")]
