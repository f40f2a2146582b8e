"""Finite CAR algebras, conditional expectations and strong subadditivity of entropy."""

from car_entropy.car_core import (
    CarOperator,
    FactorKind,
    InvalidStateError,
    ModeSet,
    Monomial,
    Parity,
    StateDensity,
    annihilator,
    creator,
    graded_sign,
    identity,
    matrix_unit,
    monomial_matrix,
    parity,
    parse_monomial,
    support_of,
    tau,
    v_string,
)
from car_entropy.entropy import (
    SsaReport,
    equality_check,
    klein_gap,
    lieb_inequality_gap,
    relative_entropy,
    ssa_report,
    t_map,
    von_neumann_entropy,
)
from car_entropy.states import (
    MixtureSpec,
    MonomialTermSpec,
    build_mixture_state,
    build_monomial_state,
    odd_cross_witness,
    product_extension,
    random_faithful_state,
    validate_state,
)
from car_entropy.subalgebra import (
    RegionPair,
    conditional_expectation,
    even_part,
    restrict_state,
    theta,
)

__version__ = "0.1.0"

__all__ = [
    "CarOperator",
    "FactorKind",
    "InvalidStateError",
    "ModeSet",
    "Monomial",
    "Parity",
    "StateDensity",
    "annihilator",
    "creator",
    "graded_sign",
    "identity",
    "matrix_unit",
    "monomial_matrix",
    "parity",
    "parse_monomial",
    "support_of",
    "tau",
    "v_string",
    "SsaReport",
    "equality_check",
    "klein_gap",
    "lieb_inequality_gap",
    "relative_entropy",
    "ssa_report",
    "t_map",
    "von_neumann_entropy",
    "MixtureSpec",
    "MonomialTermSpec",
    "build_mixture_state",
    "build_monomial_state",
    "odd_cross_witness",
    "product_extension",
    "random_faithful_state",
    "validate_state",
    "RegionPair",
    "conditional_expectation",
    "even_part",
    "restrict_state",
    "theta",
]
