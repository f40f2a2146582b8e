"""Parity automorphisms and trace-preserving conditional expectations."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable

import numpy as np

from car_entropy import _basis
from car_entropy.car_core import (
    CarOperator,
    FactorKind,
    ModeSet,
    Monomial,
    StateDensity,
    _parity_diagonal,
    hs_norm,
    identity,
    monomial_matrix,
    tau,
)

__all__ = [
    "MEMBERSHIP_TOL",
    "RegionPair",
    "theta",
    "even_part",
    "f1",
    "f2",
    "project",
    "membership_residual",
    "in_subalgebra",
    "conditional_expectation",
    "restrict_state",
    "compress",
    "embed",
]

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class RegionPair:
    """The two regions ``I`` and ``J`` of a strong subadditivity question."""

    I: ModeSet
    J: ModeSet

    def __post_init__(self):
        if self.I.ambient != self.J.ambient:
            raise ValueError("I and J must share the same ambient")

    @classmethod
    def from_lists(cls, I: Iterable[int], J: Iterable[int], n: int) -> RegionPair:
        return cls(ModeSet(I, n), ModeSet(J, n))

    @property
    def ambient(self) -> int:
        return self.I.ambient

    @property
    def union(self) -> ModeSet:
        return self.I | self.J

    @property
    def intersection(self) -> ModeSet:
        return self.I & self.J

    @property
    def I_minus_J(self) -> ModeSet:
        return self.I - self.J

    @property
    def J_minus_I(self) -> ModeSet:
        return self.J - self.I


def _modes(region: ModeSet | Iterable[int]) -> tuple[int, ...]:
    return region.indices if isinstance(region, ModeSet) else tuple(sorted(region))


def theta(Jset: ModeSet, X: CarOperator) -> CarOperator:
    """Automorphism flipping the sign of ``a_i`` for ``i`` in ``Jset``.

    Implemented as conjugation by ``prod_{j in Jset} (1 - 2 a_j* a_j)``, which
    is diagonal, so the conjugation reduces to an elementwise sign pattern.
    """
    if Jset.ambient != X.n:
        raise ValueError(f"region ambient {Jset.ambient} does not match operator n={X.n}")
    s = _parity_diagonal(Jset.indices, X.n)
    return CarOperator(X.matrix * np.outer(s, s), X.n)


def even_part(X: CarOperator) -> CarOperator:
    return (X + theta(ModeSet.full(X.n), X)) * 0.5


def f1(I: ModeSet, J: ModeSet, X: CarOperator) -> CarOperator:
    """``(X + Theta_{I\\J}(X)) / 2``: kills the part odd in ``I \\ J``."""
    if not J <= I:
        raise ValueError(f"J={{{J}}} is not contained in I={{{I}}}")
    return (X + theta(I - J, X)) * 0.5


@lru_cache(maxsize=32)
def _monomial_basis(modes: tuple[int, ...], n: int) -> tuple[tuple[Monomial, ...], np.ndarray]:
    """Full-support normal-form monomials over ``modes`` (factors from the four
    matrix-unit kinds) and their matrices stacked as ``(4**k, 2**n, 2**n)``."""
    kinds = (FactorKind.A_ADAG, FactorKind.ADAG_A, FactorKind.A, FactorKind.ADAG)
    monos = tuple(
        Monomial(tuple(zip(modes, combo))) for combo in product(kinds, repeat=len(modes))
    )
    mats = np.stack([monomial_matrix(m, n).matrix for m in monos])
    mats.setflags(write=False)
    return monos, mats


def f2(I: ModeSet, J: ModeSet, Y: CarOperator, tol: float = 1e-10) -> CarOperator:
    """``A B -> tau(B) A`` on the algebra generated by ``A(J)`` and ``A(I\\J)^+``.

    ``Y`` is expanded over the orthogonal normal-form monomials of ``A(I)``
    (each with squared norm ``2**-|I|``), each monomial is split into its
    ``J`` and ``I \\ J`` factors, and the trace rule is applied per term.
    Terms that are odd in ``I \\ J`` must be absent.
    """
    if not J <= I:
        raise ValueError(f"J={{{J}}} is not contained in I={{{I}}}")
    n = Y.n
    monos, mats = _monomial_basis(I.indices, n)
    coef = np.einsum("kij,ij->k", mats.conj(), Y.matrix) / Y.dim * 2 ** len(I)
    rest = set((I - J).indices)
    out = np.zeros_like(Y.matrix)
    for c, m in zip(coef, monos):
        if abs(c) <= tol:
            continue
        outside = [k for i, k in m.factors if i in rest]
        odd = sum(k.is_odd for k in outside)
        if odd % 2:
            raise ValueError(f"input has a term odd in I\\J: {m}")
        if odd:
            continue  # tau of an even product with odd factors vanishes
        a_part = m.restrict(J.indices)
        out = out + c * 0.5 ** len(outside) * monomial_matrix(a_part, n).matrix
    return CarOperator(out, n)


def project(X: CarOperator, region: ModeSet) -> CarOperator:
    """Trace-orthogonal projection of ``X`` onto ``A(region)``."""
    if region.ambient != X.n:
        raise ValueError("region ambient does not match operator")
    return CarOperator(_basis.project(X.matrix, X.n, region.indices), X.n)


def membership_residual(X: CarOperator, region: ModeSet) -> float:
    if region.ambient != X.n:
        raise ValueError("region ambient does not match operator")
    coef = _basis.to_coefficients(X.matrix, X.n)
    return _basis.outside_norm(coef, X.n, region.indices)


def in_subalgebra(X: CarOperator, region: ModeSet, tol: float = MEMBERSHIP_TOL) -> bool:
    return membership_residual(X, region) <= tol * max(1.0, hs_norm(X))


def conditional_expectation(M: ModeSet, N: ModeSet, X: CarOperator) -> CarOperator:
    """Trace-preserving conditional expectation ``E^M_N : A(M) -> A(N)``.

    Computed as the orthogonal projection onto the span of the normal-form
    monomial basis of ``A(N)``. ``E^M_M`` returns ``X`` unchanged.
    """
    if M.ambient != X.n or N.ambient != X.n:
        raise ValueError("region ambient does not match operator")
    if not N <= M:
        raise ValueError(f"N={{{N}}} is not contained in M={{{M}}}")
    coef = _basis.to_coefficients(X.matrix, X.n)
    norm = float(np.linalg.norm(coef))
    if _basis.outside_norm(coef, X.n, M.indices) > MEMBERSHIP_TOL * max(1.0, norm):
        raise ValueError(f"operator is not in A({{{M}}})")
    if N == M:
        return X
    if not N.indices:
        return identity(X.n) * tau(X)
    return CarOperator(_basis.project_coefficients(coef, X.n, N.indices), X.n)


def restrict_state(D: StateDensity, N: ModeSet) -> StateDensity:
    """Restriction of the state with density ``D`` to ``A(N)``."""
    if not N <= D.region:
        raise ValueError(f"N={{{N}}} is not contained in the state region {{{D.region}}}")
    if N == D.region:
        return D
    op = conditional_expectation(D.region, N, D.op)
    # Hermitian part removes rounding asymmetry; E preserves positivity.
    op = CarOperator((op.matrix + op.matrix.conj().T) / 2, op.n)
    return StateDensity(op, N, check=False)


def compress(X: CarOperator, region: ModeSet) -> np.ndarray:
    """``2**|region|`` matrix of ``X`` under ``A(region) ~ M_{2**k}``."""
    return _basis.compress(X.matrix, X.n, region.indices)


def embed(small: np.ndarray, region: ModeSet) -> CarOperator:
    """Inverse of :func:`compress`."""
    small = np.asarray(small, dtype=complex)
    if small.shape != (1 << len(region),) * 2:
        raise ValueError(f"expected a {1 << len(region)}-dimensional matrix for region {{{region}}}")
    return CarOperator(_basis.embed(small, region.ambient, region.indices), region.ambient)
