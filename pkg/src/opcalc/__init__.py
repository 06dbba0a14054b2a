"""Functional calculus of operator logarithms on finite-dimensional surrogates.

Logarithms ``Log(U(t, s) + kappa I)`` of evolution families are computed by
contour quadrature and used to check exp/Log round trips, generator recovery,
and the sum-closure identities behind the vector-space and module structure of
operator logarithms.
"""

from .algebra import (
    CommutantBasis,
    LogElement,
    branch_wrap_detect,
    commutant_basis,
    log_element,
    module_action,
    shifted_log_element,
    shifted_sum_identity,
    space_axioms_check,
    sum_chain_identity,
    sum_commuting_identity,
)
from .calculus import (
    Contour,
    SpectralCertificate,
    auto_contour,
    choose_kappa,
    dunford_apply,
    principal_log,
    validate_contour,
)
from .evolution import (
    Coefficient,
    EvolutionFamily,
    GeneratorSpec,
    closed_form,
    product_family,
    propagate,
    verify_semigroup,
)
from .linalg import eig_oracle, matrix_exp, opnorm, solve_linear
from .logrep import (
    LogRepresentation,
    compute_a,
    generator_from_logrep,
    integral_representation_check,
    reconstruct_U,
)

__version__ = "0.1.0"
