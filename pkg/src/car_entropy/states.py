"""State families: product extensions, separable mixtures and monomial states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from car_entropy import _basis
from car_entropy.car_core import (
    CarOperator,
    FactorKind,
    ModeSet,
    Monomial,
    Parity,
    StateDensity,
    hs_norm,
    identity,
    monomial_matrix,
    parity,
    tau,
)
from car_entropy.subalgebra import (
    MEMBERSHIP_TOL,
    RegionPair,
    compress,
    embed,
    membership_residual,
    restrict_state,
    theta,
)

__all__ = [
    "StateReport",
    "validate_state",
    "is_even",
    "tracial_state",
    "pure_state",
    "random_faithful_state",
    "random_even_state",
    "product_extension",
    "MarginalTriple",
    "MixtureSpec",
    "build_mixture_state",
    "shannon_entropy",
    "OddSplit",
    "MonomialTermSpec",
    "MonomialSpecError",
    "MonomialStateResult",
    "find_odd_split",
    "check_monomial_terms",
    "build_monomial_state",
    "WitnessResult",
    "odd_cross_witness",
    "random_mixture_spec",
    "random_monomial_terms",
]

STATE_TOL = 1e-10
EVEN_TOL = 1e-10
ORTHOGONALITY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateReport:
    hermitian_delta: float
    min_eig: float
    tau: complex
    membership_residual: float
    faithful: bool
    valid: bool
    reason: str = ""

    def to_text(self) -> str:
        return (
            f"valid={'true' if self.valid else 'false'}\n"
            f"faithful={'true' if self.faithful else 'false'}\n"
            f"hermitian_delta={self.hermitian_delta:.6e}\n"
            f"min_eig={self.min_eig:.6e}\n"
            f"tau={self.tau.real:.12f}\n"
            f"membership_residual={self.membership_residual:.6e}\n"
            + (f"reason={self.reason}\n" if self.reason else "")
        )


def validate_state(
    X: CarOperator, region: ModeSet, tol: float = STATE_TOL, floor: float = 1e-10
) -> StateReport:
    """Check that ``X`` is a tau-normalised density in ``A(region)``.

    ``min_eig`` refers to the trace-one density in the compressed
    ``2**|region|`` representation; the state is faithful when it exceeds
    ``floor``. Never raises on bad input; the verdict is in the report.
    """
    scale = max(1.0, hs_norm(X))
    herm = hs_norm(X - X.H)
    resid = membership_residual(X, region)
    t = tau(X)
    h = (X.matrix + X.matrix.conj().T) / 2
    k = len(region)
    if resid <= MEMBERSHIP_TOL * scale:
        small = _basis.compress(h, X.n, region.indices)
        w = np.linalg.eigvalsh((small + small.conj().T) / 2)
    else:
        w = np.linalg.eigvalsh(h)
    min_eig = float(w[0]) / (1 << k)

    reason = ""
    if herm > tol * scale:
        reason = f"not Hermitian (||X - X*|| = {herm:.3e})"
    elif resid > MEMBERSHIP_TOL * scale:
        reason = f"not in A({{{region}}}) (residual {resid:.3e})"
    elif min_eig < -tol:
        reason = f"not positive (min eigenvalue {min_eig:.3e})"
    elif abs(t - 1) > tol:
        reason = f"not normalised (tau = {t.real:.6g})"
    valid = not reason
    return StateReport(herm, min_eig, t, resid, valid and min_eig > floor, valid, reason)


def is_even(D: StateDensity | CarOperator, tol: float = EVEN_TOL) -> bool:
    op = D.op if isinstance(D, StateDensity) else D
    return hs_norm(theta(ModeSet.full(op.n), op) - op) <= tol * max(1.0, hs_norm(op))


# ---------------------------------------------------------------------------
# Simple constructors
# ---------------------------------------------------------------------------


def tracial_state(region: ModeSet) -> StateDensity:
    return StateDensity(identity(region.ambient), region, check=False)


def pure_state(m: Monomial, region: ModeSet) -> StateDensity:
    """State with density proportional to a projection monomial (``h``/``n`` factors)."""
    if any(k.is_odd for _, k in m.factors):
        raise ValueError(f"monomial {m} is not a projection")
    if not set(m.modes) <= set(region.indices):
        raise ValueError(f"monomial {m} is not supported in {{{region}}}")
    op = monomial_matrix(m, region.ambient)
    return StateDensity(op / tau(op).real, region)


def _density_from_small(rho: np.ndarray, region: ModeSet) -> StateDensity:
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    return StateDensity(embed(rho * rho.shape[0], region), region)


def _ginibre_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_faithful_state(region: ModeSet, seed: int, floor: float | None = None) -> StateDensity:
    """Seeded faithful state on ``A(region)``.

    A Ginibre density in the compressed representation is mixed with the
    tracial one so every eigenvalue of the trace-one density is at least
    ``floor`` (default: a tenth of ``2**-|region|``).
    """
    dim = 1 << len(region)
    if floor is None:
        floor = 0.1 / dim
    if not 0 < floor < 1 / dim:
        raise ValueError(f"floor must lie in (0, {1 / dim:g})")
    rng = np.random.default_rng(seed)
    rho = (1 - floor * dim) * _ginibre_density(rng, dim) + floor * np.eye(dim)
    return _density_from_small(rho, region)


def _parity_mask(k: int) -> np.ndarray:
    x = np.arange(1 << k)
    return np.array([bin(v).count("1") % 2 for v in x])


def random_even_state(
    region: ModeSet, rng: np.random.Generator, support: np.ndarray | None = None, even: bool = True
) -> StateDensity:
    """Random density supported on the given compressed basis states.

    With ``even=True`` coherences between the two parity sectors are removed,
    which makes the state invariant under the parity automorphism.
    """
    dim = 1 << len(region)
    idx = np.arange(dim) if support is None else np.asarray(support)
    sub = _ginibre_density(rng, len(idx))
    rho = np.zeros((dim, dim), dtype=complex)
    rho[np.ix_(idx, idx)] = sub
    if even:
        par = _parity_mask(len(region))
        rho = rho * (par[:, None] == par[None, :])
    return _density_from_small(rho, region)


# ---------------------------------------------------------------------------
# Product extensions
# ---------------------------------------------------------------------------


def product_extension(marginals: Sequence[StateDensity]) -> StateDensity:
    """Product state extension of states on pairwise disjoint regions.

    Raises:
        ValueError: regions overlap, or more than one marginal is not even
            (no product extension exists then).
    """
    if not marginals:
        raise ValueError("need at least one marginal")
    n = marginals[0].n
    union = ModeSet.empty(n)
    for D in marginals:
        if D.n != n:
            raise ValueError("marginals live in different ambients")
        if not union.isdisjoint(D.region):
            raise ValueError("marginal regions must be pairwise disjoint")
        union = union | D.region
    odd = [str(D.region) for D in marginals if not is_even(D)]
    if len(odd) > 1:
        raise ValueError(
            f"{len(odd)} marginals are not even (regions {odd}); "
            "a product extension exists only if all but at most one are even"
        )
    op = marginals[0].op
    for D in marginals[1:]:
        op = op @ D.op
    op = CarOperator((op.matrix + op.matrix.conj().T) / 2, n)
    return StateDensity(op, union)


# ---------------------------------------------------------------------------
# Separable saturating mixtures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalTriple:
    """States on ``I\\J``, ``I n J`` and ``J\\I``; at most one may be non-even."""

    w1: StateDensity
    w2: StateDensity
    w3: StateDensity

    def __post_init__(self):
        if sum(not e for e in self.evenness) > 1:
            raise ValueError("at most one marginal of a triple may be non-even")

    @property
    def evenness(self) -> tuple[bool, bool, bool]:
        return tuple(is_even(w) for w in (self.w1, self.w2, self.w3))

    def __iter__(self):
        return iter((self.w1, self.w2, self.w3))


def _range_projection(D: StateDensity) -> np.ndarray:
    small = compress(D.op, D.region)
    w, v = np.linalg.eigh((small + small.conj().T) / 2)
    cols = v[:, w > STATE_TOL]
    return cols @ cols.conj().T


@dataclass(frozen=True)
class MixtureSpec:
    weights: tuple[float, ...]
    triples: tuple[MarginalTriple, ...]
    regions: RegionPair

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "triples", tuple(self.triples))
        if len(w) != len(self.triples) or not w:
            raise ValueError("need one positive weight per marginal triple")
        if any(x <= 0 for x in w):
            raise ValueError("mixture weights must be positive")
        if abs(sum(w) - 1) > 1e-12:
            raise ValueError(f"mixture weights sum to {sum(w)!r}, not 1")
        r = self.regions
        expected = (r.I_minus_J, r.intersection, r.J_minus_I)
        for i, triple in enumerate(self.triples):
            for slot, (D, R) in enumerate(zip(triple, expected), start=1):
                if D.region != R:
                    raise ValueError(
                        f"term {i}: marginal {slot} lives on {{{D.region}}}, expected {{{R}}}"
                    )
        # supports must be orthogonal across terms, separately in each region
        for slot in range(3):
            projs = [_range_projection(list(t)[slot]) for t in self.triples]
            for i in range(len(projs)):
                for j in range(i + 1, len(projs)):
                    overlap = np.linalg.norm(projs[i] @ projs[j], 2)
                    if overlap > ORTHOGONALITY_TOL:
                        raise ValueError(
                            f"marginal m{slot + 1} of terms {i} and {j} does not have "
                            f"a support orthogonal to the other (overlap {overlap:.3e})"
                        )


def build_mixture_state(spec: MixtureSpec) -> StateDensity:
    """``D = sum_i w_i D_{1,i} D_{2,i} D_{3,i}`` on ``A(I u J)``."""
    n = spec.regions.ambient
    total = np.zeros((1 << n, 1 << n), dtype=complex)
    for w, (d1, d2, d3) in zip(spec.weights, spec.triples):
        total += w * (d1.op @ d2.op @ d3.op).matrix
    total = (total + total.conj().T) / 2
    return StateDensity(CarOperator(total, n), spec.regions.union)


def shannon_entropy(weights: Sequence[float]) -> float:
    """``-sum p log p`` in nats with ``0 log 0 = 0``."""
    p = np.asarray(weights, dtype=float)
    if (p < 0).any():
        raise ValueError("probabilities must be non-negative")
    if abs(p.sum() - 1) > 1e-12:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


# ---------------------------------------------------------------------------
# Monomial (non-separable) family
# ---------------------------------------------------------------------------


class MonomialSpecError(ValueError):
    """A monomial term set violates a structural constraint."""


@dataclass(frozen=True)
class OddSplit:
    """``A = a1 a2`` with ``a1`` odd on ``L1`` and ``a2`` odd on ``L2``."""

    L1: ModeSet
    L2: ModeSet
    a1: Monomial
    a2: Monomial


@dataclass(frozen=True)
class MonomialTermSpec:
    alpha: float
    A: Monomial
    B: Monomial
    K: ModeSet
    C_plus: Monomial = field(default_factory=Monomial)
    split: OddSplit | None = None


def find_odd_split(A: Monomial, region: ModeSet) -> OddSplit | None:
    """Split an even monomial with odd factors into two odd pieces covering ``region``."""
    if parity(A) is not Parity.EVEN or A.odd_count == 0:
        return None
    first_odd = next(i for i, k in A.factors if k.is_odd)
    l1 = ModeSet([i for i in region if i <= first_odd], region.ambient)
    l2 = region - l1
    return OddSplit(l1, l2, A.restrict(l1.indices), A.restrict(l2.indices))


def _inside(m: Monomial, region: ModeSet) -> bool:
    return set(m.modes) <= set(region.indices)


def check_monomial_terms(
    terms: Sequence[MonomialTermSpec], regions: RegionPair
) -> list[MonomialTermSpec]:
    """Validate the structural constraints; returns terms with splits filled in.

    Raises:
        MonomialSpecError: naming the violated constraint.
    """
    if not terms:
        raise MonomialSpecError("need at least one term")
    n = regions.ambient
    left, mid, right = regions.I_minus_J, regions.intersection, regions.J_minus_I
    c_plus = terms[0].C_plus
    seen = ModeSet.empty(n)
    out = []
    for idx, t in enumerate(terms):
        if t.C_plus != c_plus:
            raise MonomialSpecError(
                f"term {idx}: C+ must be the same for every term ({t.C_plus} != {c_plus})"
            )
        if not _inside(t.A, left):
            raise MonomialSpecError(f"term {idx}: A={t.A} is not supported in I\\J={{{left}}}")
        if t.K.ambient != n or not t.K <= mid:
            raise MonomialSpecError(f"term {idx}: K={{{t.K}}} is not contained in I n J={{{mid}}}")
        if not _inside(t.B, t.K):
            raise MonomialSpecError(f"term {idx}: B={t.B} is not supported in K={{{t.K}}}")
        if not seen.isdisjoint(t.K):
            raise MonomialSpecError(f"term {idx}: K={{{t.K}}} overlaps an earlier block")
        seen = seen | t.K
        split = t.split
        if parity(t.B) is Parity.ODD and parity(t.A) is Parity.EVEN:
            if split is None:
                split = find_odd_split(t.A, left)
            if split is None:
                raise MonomialSpecError(
                    f"term {idx}: B={t.B} is odd and A={t.A or '1'} is even, so A must be "
                    "a product of two disjoint odd elements"
                )
            _check_split(idx, t.A, split, left)
        out.append(
            MonomialTermSpec(t.alpha, t.A, t.B, t.K, t.C_plus, split)
        )
    if parity(c_plus) is not Parity.EVEN:
        raise MonomialSpecError(f"C+={c_plus} must be even")
    if not _inside(c_plus, right):
        raise MonomialSpecError(f"C+={c_plus} is not supported in J\\I={{{right}}}")
    return out


def _check_split(idx: int, A: Monomial, s: OddSplit, left: ModeSet) -> None:
    if not s.L1.isdisjoint(s.L2) or (s.L1 | s.L2) != left:
        raise MonomialSpecError(f"term {idx}: L1 and L2 must partition I\\J={{{left}}}")
    if parity(s.a1) is not Parity.ODD or parity(s.a2) is not Parity.ODD:
        raise MonomialSpecError(f"term {idx}: both split factors must be odd")
    if not (_inside(s.a1, s.L1) and _inside(s.a2, s.L2)):
        raise MonomialSpecError(f"term {idx}: split factors must live on L1 and L2")
    n = left.ambient
    prod = monomial_matrix(s.a1, n) @ monomial_matrix(s.a2, n)
    if not prod.allclose(monomial_matrix(A, n)):
        raise MonomialSpecError(f"term {idx}: a1 a2 does not reproduce A={A}")


@dataclass(frozen=True)
class MonomialStateResult:
    """Outcome of :func:`build_monomial_state`; ``state`` is ``None`` unless valid."""

    state: StateDensity | None
    validation: StateReport | None
    raw_hermitian_delta: float
    effective_alphas: tuple[float, ...]
    commutator_i_j: float = math.nan
    commutator_d_int: float = math.nan
    product_identity: float = math.nan
    gap: float = math.nan
    terms: tuple[MonomialTermSpec, ...] = ()
    reason: str = ""

    @property
    def valid(self) -> bool:
        return self.state is not None


def build_monomial_state(
    terms: Sequence[MonomialTermSpec],
    regions: RegionPair,
    identity_tol: float = 1e-9,
) -> MonomialStateResult:
    """Assemble ``sum_i alpha_i A_i B_i C+``, symmetrise, normalise and validate.

    Positivity is checked, never enforced. The saturation identities
    (``[D_I, D_J] = 0``, ``[D, D_{InJ}] = 0``, ``D D_{InJ} = D_I D_J``) are
    measured on the result and a violation makes it invalid.

    Raises:
        MonomialSpecError: a structural constraint is violated.
    """
    from car_entropy.entropy import ssa_report

    terms = check_monomial_terms(terms, regions)
    n = regions.ambient
    c_mat = monomial_matrix(terms[0].C_plus, n)
    X = CarOperator(np.zeros((1 << n, 1 << n)), n)
    for t in terms:
        X = X + (monomial_matrix(t.A, n) @ monomial_matrix(t.B, n) @ c_mat) * t.alpha
    raw_delta = hs_norm(X - X.H)
    X = (X + X.H) * 0.5
    t_val = tau(X).real
    if t_val <= STATE_TOL:
        return MonomialStateResult(
            None, None, raw_delta, (), terms=tuple(terms),
            reason=f"assembled operator is not normalisable (tau = {t_val:.3e})",
        )
    X = X / t_val
    alphas = tuple(t.alpha / t_val for t in terms)
    report = validate_state(X, regions.union)
    if not report.valid:
        return MonomialStateResult(None, report, raw_delta, alphas, terms=tuple(terms), reason=report.reason)

    D = StateDensity(X, regions.union, check=False)
    d_i = restrict_state(D, regions.I).op
    d_j = restrict_state(D, regions.J).op
    d_int = restrict_state(D, regions.intersection).op
    comm_ij = hs_norm(d_i @ d_j - d_j @ d_i)
    comm_dint = hs_norm(X @ d_int - d_int @ X)
    prod = hs_norm(X @ d_int - d_i @ d_j)
    gap = ssa_report(D, regions).gap
    worst = max(comm_ij, comm_dint, prod)
    reason = ""
    if worst > identity_tol:
        reason = f"saturation identities fail after symmetrisation (worst residual {worst:.3e})"
    return MonomialStateResult(
        None if reason else D, report, raw_delta, alphas,
        comm_ij, comm_dint, prod, gap, tuple(terms), reason,
    )


# ---------------------------------------------------------------------------
# Separability witness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessResult:
    found: bool
    terms: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.found


def _describe_pattern(labels: np.ndarray, modes: tuple[int, ...]) -> str:
    """Name a basis element from its tensor labels (``p<k>`` stands for ``1 - 2 n_k``)."""
    parts = []
    right_odd = 0
    names = {}
    for s in reversed(modes):
        lab = int(labels[s - 1])
        if lab == 1:
            names[s] = f"a{s}"
        elif lab == 2:
            names[s] = f"a{s}*"
        else:
            is_z = (lab == 3) != (right_odd % 2 == 1)
            names[s] = f"p{s}" if is_z else ""
        if lab in _basis.ODD_LABELS:
            right_odd += 1
    parts = [names[s] for s in modes if names[s]]
    return " ".join(parts) or "1"


def odd_cross_witness(
    D: StateDensity, regions: RegionPair, tol: float = 1e-10
) -> WitnessResult:
    """Look for basis terms that are odd on two of ``I\\J``, ``I n J``, ``J\\I``.

    Such terms are excluded for separable states, so finding one certifies
    non-separability.
    """
    n = D.n
    union = regions.union
    coef = _basis.to_coefficients(D.matrix, n)
    flat, labels = _basis.subalgebra_patterns(n, union.indices)
    c = coef[flat]
    odd = np.isin(labels, _basis.ODD_LABELS)
    parts = [regions.I_minus_J, regions.intersection, regions.J_minus_I]
    counts = np.stack(
        [odd[:, np.asarray(p.indices, dtype=int) - 1].sum(axis=1) % 2 for p in parts], axis=1
    )
    hits = np.nonzero((np.abs(c) > tol) & (counts.sum(axis=1) >= 2))[0]
    names = tuple(_describe_pattern(labels[h], union.indices) for h in hits)
    return WitnessResult(bool(hits.size), names)


# ---------------------------------------------------------------------------
# Random family samplers
# ---------------------------------------------------------------------------


def random_mixture_spec(
    rng: np.random.Generator, regions: RegionPair, n_terms: int = 1, odd_slot: int | None = None
) -> MixtureSpec:
    """Random separable mixture with orthogonal supports in every region.

    ``odd_slot`` (0, 1 or 2) selects a region whose marginals keep their
    parity coherences; the others are even.
    """
    parts = (regions.I_minus_J, regions.intersection, regions.J_minus_I)
    groups = []
    for R in parts:
        dim = 1 << len(R)
        if dim < n_terms:
            raise ValueError(f"region {{{R}}} is too small for {n_terms} orthogonal terms")
        groups.append(np.array_split(rng.permutation(dim), n_terms))
    triples = []
    for i in range(n_terms):
        ws = [
            random_even_state(R, rng, groups[s][i], even=(s != odd_slot))
            for s, R in enumerate(parts)
        ]
        triples.append(MarginalTriple(*ws))
    w = rng.uniform(0.2, 1.0, n_terms)
    w = w / w.sum()
    w[-1] = 1 - w[:-1].sum()
    return MixtureSpec(tuple(w), tuple(triples), regions)


_ALL_KINDS = (None, FactorKind.A, FactorKind.ADAG, FactorKind.A_ADAG, FactorKind.ADAG_A)
_DIAG_KINDS = (None, FactorKind.A_ADAG, FactorKind.ADAG_A)


def _random_monomial(rng: np.random.Generator, modes: Sequence[int], kinds) -> Monomial:
    factors = []
    for i in modes:
        k = kinds[rng.integers(len(kinds))]
        if k is not None:
            factors.append((i, k))
    return Monomial(tuple(factors))


def random_monomial_terms(
    rng: np.random.Generator,
    regions: RegionPair,
    n_blocks: int | None = None,
    faithful: bool = True,
    strength: float = 0.8,
) -> list[MonomialTermSpec]:
    """Random term set obeying the monomial-family constraints.

    An identity term is always present. When ``faithful`` is set ``C+`` is the
    identity and the remaining coefficients sum in absolute value to
    ``strength < 1``, which keeps the density strictly positive. Terms whose
    ``A`` has a non-zero trace get a diagonal ``B`` so the symmetrised sum keeps
    the commutation structure.
    """
    n = regions.ambient
    left, mid, right = regions.I_minus_J, regions.intersection, regions.J_minus_I
    modes = list(mid.indices)
    rng.shuffle(modes)
    if n_blocks is None:
        n_blocks = max(1, len(modes))
    blocks = [b for b in np.array_split(np.asarray(modes, dtype=int), n_blocks) if b.size]
    c_plus = Monomial() if faithful else _random_monomial(rng, right.indices, _DIAG_KINDS)
    terms = [MonomialTermSpec(1.0, Monomial(), Monomial(), ModeSet.empty(n), c_plus)]
    extra = []
    for block in blocks:
        K = ModeSet(block.tolist(), n)
        B = _random_monomial(rng, K.indices, _ALL_KINDS)
        if not left:
            # A is forced to be the identity, which needs a diagonal B
            B = _random_monomial(rng, K.indices, _DIAG_KINDS)
        while True:
            A = _random_monomial(rng, left.indices, _ALL_KINDS)
            traceless = A.odd_count > 0
            if parity(B) is Parity.ODD and parity(A) is Parity.EVEN and not traceless:
                continue
            if not traceless and B.odd_count > 0:
                continue
            break
        extra.append((A, B, K))
    if not extra:
        extra.append((_random_monomial(rng, left.indices, _DIAG_KINDS), Monomial(), ModeSet.empty(n)))
    coeffs = rng.uniform(0.2, 1.0, len(extra)) * rng.choice([-1.0, 1.0], len(extra))
    coeffs *= strength / np.abs(coeffs).sum()
    for (A, B, K), a in zip(extra, coeffs):
        terms.append(MonomialTermSpec(float(a), A, B, K, c_plus))
    return terms
