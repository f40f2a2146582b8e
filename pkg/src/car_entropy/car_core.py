"""Finite CAR algebra on ``n`` modes realised as dense ``2**n`` matrices.

Mode ``i`` corresponds to the ``i``-th tensor factor (1-based, leftmost first).
In each factor the first basis vector is the empty mode and the second the
occupied one, so ``a_i`` acts as ``Z x ... x Z x e12 x 1 x ... x 1`` with
``Z = diag(1, -1)``.
"""

from __future__ import annotations

import enum
import os
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

__all__ = [
    "DEFAULT_MAX_N",
    "max_modes",
    "ModeSet",
    "FactorKind",
    "Monomial",
    "Parity",
    "CarOperator",
    "StateDensity",
    "annihilator",
    "creator",
    "number_op",
    "v_string",
    "matrix_unit",
    "monomial_matrix",
    "parity",
    "graded_sign",
    "tau",
    "hs_norm",
    "support_of",
    "identity",
    "parse_monomial",
]

DEFAULT_MAX_N = 10


def max_modes() -> int:
    """Ambient size cap, overridable through ``CAR_ENTROPY_MAX_N``."""
    raw = os.environ.get("CAR_ENTROPY_MAX_N")
    if raw is None:
        return DEFAULT_MAX_N
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"CAR_ENTROPY_MAX_N must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError("CAR_ENTROPY_MAX_N must be positive")
    return cap


def _check_ambient(n: int) -> int:
    n = int(n)
    if n < 0:
        raise ValueError(f"ambient mode count must be non-negative, got {n}")
    cap = max_modes()
    if n > cap:
        raise ValueError(f"ambient size n={n} exceeds the cap of {cap} modes")
    return n


# ---------------------------------------------------------------------------
# Mode sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeSet:
    """Sorted set of 1-based mode indices inside an ambient ``[1, n]``."""

    indices: tuple[int, ...]
    ambient: int

    def __init__(self, indices: Iterable[int], ambient: int):
        idx = [int(i) for i in indices]
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate mode indices in {idx}")
        for i in idx:
            if not 1 <= i <= ambient:
                raise ValueError(f"mode index {i} outside [1, {ambient}]")
        object.__setattr__(self, "indices", tuple(sorted(idx)))
        object.__setattr__(self, "ambient", int(ambient))

    @classmethod
    def full(cls, n: int) -> ModeSet:
        return cls(range(1, n + 1), n)

    @classmethod
    def empty(cls, n: int) -> ModeSet:
        return cls((), n)

    def _same_ambient(self, other: ModeSet) -> None:
        if self.ambient != other.ambient:
            raise ValueError(
                f"mode sets live in different ambients ({self.ambient} vs {other.ambient})"
            )

    def __or__(self, other: ModeSet) -> ModeSet:
        self._same_ambient(other)
        return ModeSet(set(self.indices) | set(other.indices), self.ambient)

    def __and__(self, other: ModeSet) -> ModeSet:
        self._same_ambient(other)
        return ModeSet(set(self.indices) & set(other.indices), self.ambient)

    def __sub__(self, other: ModeSet) -> ModeSet:
        self._same_ambient(other)
        return ModeSet(set(self.indices) - set(other.indices), self.ambient)

    def __le__(self, other: ModeSet) -> bool:
        self._same_ambient(other)
        return set(self.indices) <= set(other.indices)

    def __lt__(self, other: ModeSet) -> bool:
        return self <= other and self != other

    def __contains__(self, i: object) -> bool:
        return i in self.indices

    def __iter__(self):
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def isdisjoint(self, other: ModeSet) -> bool:
        return not (set(self.indices) & set(other.indices))

    def __str__(self) -> str:
        return ",".join(str(i) for i in self.indices)


# ---------------------------------------------------------------------------
# Monomials
# ---------------------------------------------------------------------------


class FactorKind(enum.Enum):
    A = "a"
    ADAG = "a*"
    A_ADAG = "h"  # a a*, the hole projection
    ADAG_A = "n"  # a* a, the number operator

    @property
    def is_odd(self) -> bool:
        return self in (FactorKind.A, FactorKind.ADAG)


class Parity(enum.Enum):
    EVEN = 0
    ODD = 1


_TOKEN = re.compile(r"^([ahn])(\d+)(\*?)$")


@dataclass(frozen=True)
class Monomial:
    """Normal-form product ``A_{i(1)} ... A_{i(k)}`` with strictly increasing modes."""

    factors: tuple[tuple[int, FactorKind], ...] = field(default=())

    def __post_init__(self):
        factors = tuple((int(i), FactorKind(k)) for i, k in self.factors)
        modes = [i for i, _ in factors]
        if any(i < 1 for i in modes):
            raise ValueError("mode indices must be positive")
        if any(b <= a for a, b in zip(modes, modes[1:])):
            raise ValueError(f"monomial modes must be strictly increasing, got {modes}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def parse(cls, text: str) -> Monomial:
        return parse_monomial(text)

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.factors)

    @property
    def odd_count(self) -> int:
        return sum(1 for _, k in self.factors if k.is_odd)

    def restrict(self, modes: Iterable[int]) -> Monomial:
        keep = set(modes)
        return Monomial(tuple(f for f in self.factors if f[0] in keep))

    def __mul__(self, other: Monomial) -> Monomial:
        # Concatenation only; no normal ordering of interleaved supports.
        if self.factors and other.factors and self.modes[-1] >= other.modes[0]:
            raise ValueError("product of monomials would leave normal form")
        return Monomial(self.factors + other.factors)

    def __bool__(self) -> bool:
        return bool(self.factors)

    def __str__(self) -> str:
        out = []
        for i, k in self.factors:
            if k is FactorKind.A:
                out.append(f"a{i}")
            elif k is FactorKind.ADAG:
                out.append(f"a{i}*")
            else:
                out.append(f"{k.value}{i}")
        return " ".join(out)


def parse_monomial(text: str) -> Monomial:
    """Parse tokens ``a<k>``, ``a<k>*``, ``n<k>`` and ``h<k>``; empty text is the identity."""
    factors = []
    for tok in text.split():
        m = _TOKEN.match(tok)
        if m is None or (m.group(3) and m.group(1) != "a"):
            raise ValueError(f"bad monomial token {tok!r}")
        letter, k, star = m.groups()
        if letter == "a":
            kind = FactorKind.ADAG if star else FactorKind.A
        elif letter == "n":
            kind = FactorKind.ADAG_A
        else:
            kind = FactorKind.A_ADAG
        factors.append((int(k), kind))
    return Monomial(tuple(factors))


def support_of(m: Monomial, n: int | None = None) -> ModeSet:
    """Set of modes carrying a factor of ``m``."""
    if n is None:
        n = max(m.modes, default=0)
    return ModeSet(m.modes, n)


def parity(m: Monomial) -> Parity:
    return Parity(m.odd_count % 2)


def graded_sign(p: Parity, q: Parity) -> int:
    """Sign in ``AB = sign * BA`` for elements of disjoint support."""
    return -1 if (p is Parity.ODD and q is Parity.ODD) else 1


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CarOperator:
    """Element of the CAR algebra on ``n`` modes as a ``2**n`` square matrix."""

    matrix: np.ndarray
    n: int

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        dim = 1 << self.n
        if mat.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix for n={self.n}, got {mat.shape}")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def H(self) -> CarOperator:
        return CarOperator(self.matrix.conj().T, self.n)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, CarOperator):
            if other.n != self.n:
                raise ValueError(f"ambient mismatch: n={self.n} vs n={other.n}")
            return other.matrix
        return NotImplemented

    def __matmul__(self, other):
        m = self._coerce(other)
        if m is NotImplemented:
            return NotImplemented
        return CarOperator(self.matrix @ m, self.n)

    def __add__(self, other):
        m = self._coerce(other)
        if m is NotImplemented:
            return NotImplemented
        return CarOperator(self.matrix + m, self.n)

    def __sub__(self, other):
        m = self._coerce(other)
        if m is NotImplemented:
            return NotImplemented
        return CarOperator(self.matrix - m, self.n)

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float, complex, np.number)):
            return CarOperator(self.matrix * scalar, self.n)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return CarOperator(self.matrix / scalar, self.n)

    def __neg__(self):
        return CarOperator(-self.matrix, self.n)

    def allclose(self, other: CarOperator, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self._coerce(other), rtol=0, atol=atol))

    def __repr__(self) -> str:
        return f"CarOperator(n={self.n})"


def identity(n: int) -> CarOperator:
    return CarOperator(np.eye(1 << _check_ambient(n)), n)


def _check_mode(i: int, n: int, lo: int = 1) -> None:
    if not lo <= i <= n:
        raise ValueError(f"mode index {i} outside [{lo}, {n}]")


def _occupations(n: int) -> np.ndarray:
    """Occupation bits, shape ``(2**n, n)``; column ``i-1`` is mode ``i``."""
    x = np.arange(1 << n)
    shifts = np.arange(n - 1, -1, -1)
    return (x[:, None] >> shifts[None, :]) & 1


@lru_cache(maxsize=None)
def _annihilator_matrix(i: int, n: int) -> np.ndarray:
    occ = _occupations(n)
    dim = 1 << n
    mat = np.zeros((dim, dim))
    src = np.nonzero(occ[:, i - 1] == 1)[0]
    dst = src ^ (1 << (n - i))
    sign = (-1.0) ** occ[src, : i - 1].sum(axis=1)
    mat[dst, src] = sign
    mat.setflags(write=False)
    return mat


def annihilator(i: int, n: int) -> CarOperator:
    """Matrix of ``a_i``: empties mode ``i`` with sign ``(-1)**(occupied modes before i)``."""
    _check_ambient(n)
    _check_mode(i, n)
    return CarOperator(_annihilator_matrix(i, n), n)


def creator(i: int, n: int) -> CarOperator:
    return annihilator(i, n).H


def number_op(i: int, n: int) -> CarOperator:
    a = annihilator(i, n)
    return a.H @ a


def _parity_diagonal(modes: Iterable[int], n: int) -> np.ndarray:
    """Diagonal of ``prod_{j in modes} (1 - 2 a_j* a_j)``."""
    modes = list(modes)
    occ = _occupations(n)
    if not modes:
        return np.ones(1 << n)
    cols = np.asarray(modes) - 1
    return (-1.0) ** occ[:, cols].sum(axis=1)


def v_string(i: int, n: int) -> CarOperator:
    """``V_i = prod_{j<=i} (1 - 2 a_j* a_j)``; ``V_0`` is the identity."""
    _check_ambient(n)
    _check_mode(i, n, lo=0)
    return CarOperator(np.diag(_parity_diagonal(range(1, i + 1), n)), n)


def matrix_unit(site: int, row: int, col: int, n: int) -> CarOperator:
    """The per-site matrix unit ``e^{(site)}_{row,col}`` built from the generators."""
    _check_ambient(n)
    _check_mode(site, n)
    if row not in (1, 2) or col not in (1, 2):
        raise ValueError(f"matrix unit indices must be 1 or 2, got ({row}, {col})")
    a = annihilator(site, n)
    if (row, col) == (1, 1):
        return a @ a.H
    if (row, col) == (2, 2):
        return a.H @ a
    v = v_string(site - 1, n)
    return v @ a if (row, col) == (1, 2) else v @ a.H


def _factor_matrix(i: int, kind: FactorKind, n: int) -> np.ndarray:
    a = _annihilator_matrix(i, n)
    if kind is FactorKind.A:
        return a
    if kind is FactorKind.ADAG:
        return a.T
    if kind is FactorKind.A_ADAG:
        return a @ a.T
    return a.T @ a


def monomial_matrix(m: Monomial, n: int) -> CarOperator:
    """Left-to-right product of the factor matrices; the empty monomial is the identity."""
    _check_ambient(n)
    if m.factors and m.modes[-1] > n:
        raise ValueError(f"monomial {m} does not fit in n={n} modes")
    out = np.eye(1 << n)
    for i, kind in m.factors:
        out = out @ _factor_matrix(i, kind, n)
    return CarOperator(out, n)


def tau(X: CarOperator) -> complex:
    """Unique tracial state: matrix trace divided by ``2**n``."""
    return complex(np.trace(X.matrix)) / X.dim


def hs_norm(X: CarOperator) -> float:
    """Hilbert-Schmidt norm under ``tau``, ``sqrt(tau(X* X))``."""
    return float(np.linalg.norm(X.matrix) / np.sqrt(X.dim))


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


class InvalidStateError(ValueError):
    """Raised when an operator fails the density-operator checks."""


@dataclass(frozen=True, eq=False)
class StateDensity:
    """A tau-normalised positive element ``D`` of ``A(region)``.

    Construction validates Hermiticity, positivity, normalisation and
    membership in the subalgebra; pass ``check=False`` to skip that when the
    caller already guarantees it.
    """

    op: CarOperator
    region: ModeSet
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.region.ambient != self.op.n:
            raise ValueError("state region and operator ambient differ")
        if self.check:
            from car_entropy.states import validate_state

            report = validate_state(self.op, self.region)
            if not report.valid:
                raise InvalidStateError(report.reason)

    @property
    def n(self) -> int:
        return self.op.n

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix
