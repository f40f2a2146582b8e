"""Property suites behind ``car-entropy verify``.

Each check returns the worst residual it saw together with its tolerance.
Samples are drawn from a seeded generator and evaluated in order, so a run
is reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterator

import numpy as np
from scipy.integrate import quad_vec

from car_entropy.car_core import (
    CarOperator,
    FactorKind,
    ModeSet,
    Monomial,
    annihilator,
    graded_sign,
    hs_norm,
    matrix_unit,
    monomial_matrix,
    parity,
    parse_monomial,
    tau,
)
from car_entropy.entropy import (
    compressed_density,
    klein_gap,
    lieb_chain,
    lieb_inequality_gap,
    relative_entropy_pivot,
    ssa_report,
    t_map,
    von_neumann_entropy,
)
from car_entropy.states import (
    MonomialTermSpec,
    build_mixture_state,
    build_monomial_state,
    is_even,
    odd_cross_witness,
    product_extension,
    random_even_state,
    random_faithful_state,
    random_mixture_spec,
    random_monomial_terms,
    shannon_entropy,
)
from car_entropy.subalgebra import (
    RegionPair,
    conditional_expectation,
    f1,
    f2,
    restrict_state,
)

__all__ = ["PropertyResult", "SUITES", "run_suite", "random_operator", "random_regions"]


@dataclass(frozen=True)
class PropertyResult:
    suite: str
    name: str
    worst: float
    tol: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.suite}.{self.name} worst={self.worst:.3e} "
            f"tol={self.tol:.0e} samples={self.samples}"
        )


class _Tracker:
    def __init__(self, suite: str):
        self.suite = suite
        self.results: dict[str, list] = {}

    def add(self, name: str, value: float, tol: float) -> None:
        entry = self.results.setdefault(name, [0.0, tol, 0])
        entry[0] = max(entry[0], float(value))
        entry[2] += 1

    def flag(self, name: str, ok: bool) -> None:
        self.add(name, 0.0 if ok else 1.0, 0.0)

    def done(self) -> list[PropertyResult]:
        return [PropertyResult(self.suite, k, v[0], v[1], v[2]) for k, v in self.results.items()]


def random_operator(rng: np.random.Generator, n: int, region: ModeSet | None = None) -> CarOperator:
    """Gaussian element of ``A(region)`` (the whole algebra by default)."""
    dim = 1 << n
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    X = CarOperator(g / np.sqrt(dim), n)
    if region is not None:
        X = conditional_expectation(ModeSet.full(n), region, X)
    return X


def random_subset(rng: np.random.Generator, n: int, of: ModeSet | None = None) -> ModeSet:
    pool = list(range(1, n + 1)) if of is None else list(of.indices)
    keep = [i for i in pool if rng.random() < 0.5]
    return ModeSet(keep, n)


def random_regions(rng: np.random.Generator, n: int, proper: bool = False) -> RegionPair:
    """Random ``(I, J)`` covering ``[1, n]``.

    With ``proper`` all three of ``I\\J``, ``I n J`` and ``J\\I`` are non-empty
    (needs ``n >= 3``).
    """
    while True:
        labels = rng.integers(0, 3, n)  # 0: I only, 1: both, 2: J only
        if proper and not all((labels == k).any() for k in range(3)):
            continue
        I = [i + 1 for i in range(n) if labels[i] in (0, 1)]
        J = [i + 1 for i in range(n) if labels[i] in (1, 2)]
        return RegionPair.from_lists(I, J, n)


def _all_monomials(n: int) -> Iterator[Monomial]:
    kinds = (None,) + tuple(FactorKind)
    for combo in product(kinds, repeat=n):
        yield Monomial(tuple((i + 1, k) for i, k in enumerate(combo) if k is not None))


def _disjoint_pairs(n: int) -> Iterator[tuple[Monomial, Monomial]]:
    """All pairs of normal-form monomials with disjoint supports."""
    choices = [None] + [(side, k) for side in (0, 1) for k in FactorKind]
    for combo in product(choices, repeat=n):
        a = tuple((i + 1, c[1]) for i, c in enumerate(combo) if c and c[0] == 0)
        b = tuple((i + 1, c[1]) for i, c in enumerate(combo) if c and c[0] == 1)
        yield Monomial(a), Monomial(b)


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def suite_core(n_max: int, samples: int, seed: int) -> list[PropertyResult]:
    t = _Tracker("core")
    rng = np.random.default_rng(seed)
    for n in range(1, n_max + 1):
        a = [annihilator(i, n).matrix for i in range(1, n + 1)]
        eye = np.eye(1 << n)
        for i in range(n):
            for j in range(n):
                t.add("car_aa", np.abs(a[i] @ a[j] + a[j] @ a[i]).max(), 1e-12)
                anti = a[i] @ a[j].T + a[j].T @ a[i]
                t.add("car_aadag", np.abs(anti - (i == j) * eye).max(), 1e-12)
        units = {
            (s, r, c): matrix_unit(s, r, c, n).matrix
            for s in range(1, n + 1)
            for r in (1, 2)
            for c in (1, 2)
        }
        for (s1, r1, c1), u1 in units.items():
            for (s2, r2, c2), u2 in units.items():
                if s1 != s2:
                    t.add("unit_commute", np.abs(u1 @ u2 - u2 @ u1).max(), 1e-12)
                else:
                    expect = units[(s1, r1, c2)] if c1 == r2 else 0
                    t.add("unit_product", np.abs(u1 @ u2 - expect).max(), 1e-12)
        if n <= 3:
            basis = np.stack([monomial_matrix(m, n).matrix.ravel() for m in _all_monomials(n)])
            rank = np.linalg.matrix_rank(basis.conj() @ basis.T / (1 << n))
            t.add("span_rank_deficit", 4**n - rank, 0)
        if n <= 4:
            for ma, mb in _disjoint_pairs(n):
                A = monomial_matrix(ma, n).matrix
                B = monomial_matrix(mb, n).matrix
                sign = graded_sign(parity(ma), parity(mb))
                t.add("graded_commutation", np.abs(A @ B - sign * B @ A).max(), 1e-12)
                prod_tau = np.trace(A @ B) / (1 << n)
                split_tau = np.trace(A) * np.trace(B) / 4**n
                t.add("trace_product", abs(prod_tau - split_tau), 1e-12)
        for _ in range(samples):
            X, Y = random_operator(rng, n), random_operator(rng, n)
            t.add("tracial", abs(tau(X @ Y) - tau(Y @ X)), 1e-12)
    return t.done()


def suite_expect(n_max: int, samples: int, seed: int) -> list[PropertyResult]:
    t = _Tracker("expect")
    rng = np.random.default_rng(seed)
    n4 = 4
    full4, first2 = ModeSet.full(n4), ModeSet([1, 2], n4)
    ex1 = conditional_expectation(full4, first2, monomial_matrix(parse_monomial("a1 n2 a3* a4"), n4))
    t.add("worked_example_zero", hs_norm(ex1), 1e-12)
    ex2 = conditional_expectation(full4, first2, monomial_matrix(parse_monomial("a1 n2 h3 n4"), n4))
    t.add("worked_example_quarter", hs_norm(ex2 - monomial_matrix(parse_monomial("a1 n2"), n4) * 0.25), 1e-12)

    for s in range(samples):
        n = 1 + s % max(1, n_max)
        full = ModeSet.full(n)
        I = random_subset(rng, n)
        J1, J2 = random_subset(rng, n, I), random_subset(rng, n, I)
        X = random_operator(rng, n, I)
        e1 = conditional_expectation(I, J1, X)
        t.add("f2_f1_factorization", hs_norm(f2(I, J1, f1(I, J1, X)) - e1), 1e-10)
        common = J1 & J2
        t.add(
            "commuting_square",
            hs_norm(conditional_expectation(J1, common, e1) - conditional_expectation(I, common, X)),
            1e-10,
        )
        X2 = random_operator(rng, n, J2)
        t.add(
            "restriction_property",
            hs_norm(conditional_expectation(I | J2, J1, X2) - conditional_expectation(J2, common, X2)),
            1e-10,
        )
        P = random_subset(rng, n, J1)
        t.add(
            "tower_law",
            hs_norm(conditional_expectation(J1, P, e1) - conditional_expectation(I, P, X)),
            1e-10,
        )
        A, B = random_operator(rng, n, J1), random_operator(rng, n, J1)
        t.add(
            "module_property",
            hs_norm(conditional_expectation(I, J1, A @ X @ B) - A @ e1 @ B),
            1e-10,
        )
        t.add("trace_preservation", abs(tau(e1) - tau(X)), 1e-12)
        pos = X @ X.H
        w = np.linalg.eigvalsh(conditional_expectation(I, J1, pos).matrix)
        t.add("positivity", max(0.0, -w[0]), 1e-10)
        k = int(rng.integers(0, n + 1))
        D = random_faithful_state(full, int(rng.integers(2**31)))
        t.add("partial_trace_oracle", hs_norm(restrict_state(D, ModeSet(range(1, k + 1), n)).op - _ptrace_oracle(D.op, k)), 1e-10)
    return t.done()


def _ptrace_oracle(X: CarOperator, k: int) -> CarOperator:
    """Normalised partial trace over modes ``k+1..n``, re-tensored with the identity."""
    n = X.n
    head, tail = 1 << k, 1 << (n - k)
    red = np.trace(X.matrix.reshape(head, tail, head, tail), axis1=1, axis2=3) / tail
    return CarOperator(np.kron(red, np.eye(tail)), n)


def suite_entropy(n_max: int, samples: int, seed: int) -> list[PropertyResult]:
    t = _Tracker("entropy")
    rng = np.random.default_rng(seed)
    n_lo = min(2, n_max)
    for s in range(samples):
        n = n_lo + s % (n_max - n_lo + 1)
        regions = random_regions(rng, n)
        D = random_faithful_state(ModeSet.full(n), int(rng.integers(2**31)))
        rep = ssa_report(D, regions)
        t.add("ssa_gap", max(0.0, rep.gap), 1e-9)
        for K in (regions.I, regions.J, regions.intersection):
            Dk = restrict_state(D, K)
            w = np.linalg.eigvalsh(compressed_density(Dk))
            w = w[w > 1e-15]
            t.add("entropy_convention", abs(von_neumann_entropy(Dk) + np.sum(w * np.log(w))), 1e-10)
        first, second = relative_entropy_pivot(D, regions)
        t.add("relative_entropy_pivot", abs(abs(rep.gap) - abs(first - second)), 1e-8)
        lower, upper = lieb_chain(D, regions)
        t.add("t_map_telescoping", abs(upper - 1), 1e-8)
        t.add("lieb_bound_order", max(0.0, lower - upper), 1e-9)
        if n >= 3 and s % 4 == 0:
            proper = random_regions(rng, n, proper=True)
            rep2 = ssa_report(D, proper)
            t.add("generic_strict_gap", max(0.0, rep2.gap + 1e-6), 0.0)
            t.add("generic_residual_positive", max(0.0, 1e-3 - rep2.residual), 0.0)

    for _ in range(samples):
        A = random_faithful_state(ModeSet.full(2), int(rng.integers(2**31))).op
        B = random_faithful_state(ModeSet.full(2), int(rng.integers(2**31))).op
        t.add("klein_nonnegative", max(0.0, -klein_gap(A, B)), 1e-10)
        t.add("klein_equal", abs(klein_gap(A, A)), 1e-10)
        H = [_random_hermitian(rng, 8) for _ in range(3)]
        t.add("lieb_inequality", max(0.0, -lieb_inequality_gap(*H)), 1e-9)
        diag = [np.diag(rng.standard_normal(8)) for _ in range(3)]
        t.add("lieb_commuting_equality", abs(lieb_inequality_gap(*diag)), 1e-10)

    for _ in range(min(samples, 5)):
        A = _random_positive(rng, 8)
        K = _random_hermitian(rng, 8)
        t.add("t_map_quadrature", np.abs(t_map(A, K) - _t_map_quadrature(A, K)).max(), 1e-6)
    return t.done()


def _random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / (2 * np.sqrt(dim))


def _random_positive(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return g @ g.conj().T / dim + 0.1 * np.eye(dim)


def _t_map_quadrature(A: np.ndarray, K: np.ndarray) -> np.ndarray:
    eye = np.eye(A.shape[0])

    def integrand(u):
        # t = u / (1 - u) maps [0, 1) onto [0, inf)
        tt = u / (1 - u)
        R = np.linalg.inv(tt * eye + A)
        return R @ K @ R / (1 - u) ** 2

    val, _ = quad_vec(integrand, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12)
    return val


def suite_families(n_max: int, samples: int, seed: int) -> list[PropertyResult]:
    t = _Tracker("families")
    rng = np.random.default_rng(seed)
    n_hi = max(3, n_max)
    for s in range(samples):
        n = 3 + s % (n_hi - 2)
        regions = random_regions(rng, n, proper=True)
        cap = min(1 << len(r) for r in (regions.I_minus_J, regions.intersection, regions.J_minus_I))
        n_terms = int(rng.integers(1, min(cap, 3) + 1))
        slot = rng.integers(-1, 3)
        spec = random_mixture_spec(rng, regions, n_terms, odd_slot=None if slot < 0 else int(slot))
        D = build_mixture_state(spec)
        rep = ssa_report(D, regions)
        t.add("mixture_gap", abs(rep.gap), 1e-8)
        if rep.faithful:
            t.add("mixture_residual", rep.residual, 1e-6)
        ops = [[x.op for x in tr] for tr in spec.triples]
        lam = spec.weights
        d_i = sum((w * (o[0] @ o[1]) for w, o in zip(lam, ops)), start=ops[0][0] * 0)
        d_j = sum((w * (o[1] @ o[2]) for w, o in zip(lam, ops)), start=ops[0][0] * 0)
        d_int = sum((w * o[1] for w, o in zip(lam, ops)), start=ops[0][0] * 0)
        t.add("mixture_restriction_I", hs_norm(restrict_state(D, regions.I).op - d_i), 1e-10)
        t.add("mixture_restriction_J", hs_norm(restrict_state(D, regions.J).op - d_j), 1e-10)
        t.add("mixture_restriction_int", hs_norm(restrict_state(D, regions.intersection).op - d_int), 1e-10)
        h = shannon_entropy(lam)
        parts = [[von_neumann_entropy(x) for x in tr] for tr in spec.triples]
        avg = lambda idx: sum(w * sum(p[i] for i in idx) for w, p in zip(lam, parts))  # noqa: E731
        t.add("mixture_entropy_union", abs(rep.s_union - h - avg((0, 1, 2))), 1e-8)
        t.add("mixture_entropy_I", abs(rep.s_i - h - avg((0, 1))), 1e-8)
        t.add("mixture_entropy_J", abs(rep.s_j - h - avg((1, 2))), 1e-8)
        t.add("mixture_entropy_int", abs(rep.s_int - h - avg((1,))), 1e-8)
        t.flag("mixture_no_witness", not odd_cross_witness(D, regions).found)

        terms = random_monomial_terms(rng, regions, faithful=bool(s % 2 == 0))
        res = build_monomial_state(terms, regions)
        t.flag("monomial_valid", res.valid)
        if res.valid:
            t.add("monomial_commute_I_J", res.commutator_i_j, 1e-10)
            t.add("monomial_commute_D_int", res.commutator_d_int, 1e-10)
            t.add("monomial_product_identity", res.product_identity, 1e-9)
            t.add("monomial_gap", abs(res.gap), 1e-8)
            rep5 = ssa_report(res.state, regions)
            if rep5.faithful:
                t.add("monomial_residual", rep5.residual, 1e-6)

        marg = _one_odd_marginals(regions, rng)
        P = product_extension(marg)
        t.add(
            "product_extension_roundtrip",
            max(hs_norm(restrict_state(P, m.region).op - m.op) for m in marg),
            1e-10,
        )
        non_even = [random_faithful_state(R, int(rng.integers(2**31))) for R in (regions.I_minus_J, regions.J_minus_I)]
        refused = False
        if not any(is_even(x) for x in non_even):
            try:
                product_extension(non_even)
            except ValueError:
                refused = True
            t.flag("product_extension_refusal", refused)

    example = _odd_cross_example_state()
    regions = RegionPair.from_lists([1, 2, 3], [3, 4], 4)
    t.flag("monomial_example_witness", odd_cross_witness(example, regions).found)
    t.add("monomial_example_gap", abs(ssa_report(example, regions).gap), 1e-8)
    return t.done()


def _one_odd_marginals(regions: RegionPair, rng: np.random.Generator):
    """Marginals on the three parts of ``I u J``; one random slot is not even."""
    parts = (regions.I_minus_J, regions.intersection, regions.J_minus_I)
    slot = int(rng.integers(3))
    return [
        random_faithful_state(R, int(rng.integers(2**31))) if i == slot else random_even_state(R, rng)
        for i, R in enumerate(parts)
    ]


def _odd_cross_example_state():
    n = 4
    regions = RegionPair.from_lists([1, 2, 3], [3, 4], n)
    terms = [
        MonomialTermSpec(1.0, Monomial(), Monomial(), ModeSet.empty(n)),
        MonomialTermSpec(0.4, parse_monomial("a1"), parse_monomial("a3"), ModeSet([3], n)),
    ]
    return build_monomial_state(terms, regions).state


SUITES: dict[str, Callable[[int, int, int], list[PropertyResult]]] = {
    "core": suite_core,
    "expect": suite_expect,
    "entropy": suite_entropy,
    "families": suite_families,
}


def run_suite(name: str, n_max: int = 4, samples: int = 50, seed: int = 0) -> list[PropertyResult]:
    if name == "all":
        out = []
        for key, fn in SUITES.items():
            out.extend(fn(n_max, samples, seed))
        return out
    try:
        fn = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}") from None
    return fn(n_max, samples, seed)
