"""Weighted composition operators ``f -> w * (f o phi)`` on finite atomic measure spaces."""

__version__ = "0.1.0"

from .calculus import (
    DensityFunction,
    change_of_variables,
    compute_h,
    cond_expectation,
    cond_expectation_inv,
    density_mu_sup_w,
    is_dirac_at_zero,
    moment,
)
from .errors import (
    ExtensionError,
    PostconditionError,
    PreconditionError,
    SpaceMismatchError,
    WcoError,
)
from .operator import (
    L2Vector,
    WcOperator,
    adjoint_apply,
    apply,
    h_n,
    kernel_basis,
    operator_norm,
    power_weight,
    to_matrix,
)
from .space import (
    DerivedMeasure,
    MeasureSpace,
    SystemInstance,
    is_absolutely_continuous,
    make_mu_sup_w,
    make_mu_w,
    pushforward,
)
from .structure import (
    Classification,
    adjoint_modulus_apply,
    classify,
    injectivity_report,
    is_hyponormal,
    is_normal,
    is_quasinormal,
    polar_decompose,
)
from .subnormality import (
    CcReport,
    Certificate,
    ProbabilityFamily,
    build_extension,
    certify_subnormal,
    lemma_cc_equivalences,
    main1_battery,
    moments_check,
    solve_cc,
    verify_cc,
    verify_cc1,
)
from .scenario import Scenario, ScenarioError, load_scenario, save_scenario
from .generators import generate_instance
from .tolerance import DEFAULT, Tolerances
