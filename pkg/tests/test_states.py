import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from car_entropy.car_core import CarOperator, ModeSet, Monomial, StateDensity, identity, InvalidStateError, parse_monomial, tau
from car_entropy.entropy import ssa_report, von_neumann_entropy
from car_entropy.states import (
    MarginalTriple,
    MixtureSpec,
    MonomialTermSpec,
    MonomialSpecError,
    build_mixture_state,
    build_monomial_state,
    find_odd_split,
    is_even,
    odd_cross_witness,
    product_extension,
    pure_state,
    random_even_state,
    random_faithful_state,
    random_mixture_spec,
    random_monomial_terms,
    shannon_entropy,
    tracial_state,
    validate_state,
)
from car_entropy.subalgebra import RegionPair, restrict_state
from test_subalgebra import projection_oracle

ODD_CROSS_REGIONS = RegionPair.from_lists([1, 2, 3], [3, 4], 4)


def odd_cross_terms(alpha=0.4):
    n = 4
    return [
        MonomialTermSpec(1.0, Monomial(), Monomial(), ModeSet.empty(n)),
        MonomialTermSpec(alpha, parse_monomial("a1"), parse_monomial("a3"), ModeSet([3], n)),
    ]


def test_validate_identity():
    rep = validate_state(identity(2), ModeSet.full(2))
    assert rep.valid and rep.faithful
    assert rep.tau == pytest.approx(1.0)


def test_validate_rejects_non_hermitian():
    a1 = CarOperator(np.array([[0, 1], [0, 0]], dtype=complex), 1)
    rep = validate_state(a1, ModeSet.full(1))
    assert not rep.valid
    assert "Hermitian" in rep.reason
    assert "valid=false" in rep.to_text()


def test_validate_pure_state_non_faithful():
    rep = validate_state(CarOperator(np.diag([2.0, 0.0]), 1), ModeSet.full(1))
    assert rep.valid and not rep.faithful
    assert rep.min_eig == pytest.approx(0.0)


def test_validate_rejects_outside_region():
    n = 2
    X = CarOperator(np.diag([2.0, 0.0, 2.0, 0.0]), n)  # 2 h2, lives on mode 2
    assert validate_state(X, ModeSet([2], n)).valid
    assert not validate_state(X, ModeSet([1], n)).valid


def test_state_density_raises():
    with pytest.raises(InvalidStateError):
        StateDensity(CarOperator(np.diag([3.0, -1.0]), 1), ModeSet.full(1))


def test_random_states_are_deterministic():
    region = ModeSet([1, 3], 4)
    a, b = random_faithful_state(region, 42), random_faithful_state(region, 42)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    assert not np.array_equal(a.matrix, random_faithful_state(region, 43).matrix)
    assert validate_state(a.op, region).faithful


def test_random_even_state_is_even(rng):
    D = random_even_state(ModeSet([1, 2], 3), rng)
    assert is_even(D)
    assert not is_even(random_faithful_state(ModeSet([1, 2], 3), 0))


def test_pure_state():
    D = pure_state(parse_monomial("n1 h2"), ModeSet([1, 2], 3))
    assert von_neumann_entropy(D) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        pure_state(parse_monomial("a1"), ModeSet([1], 3))


def test_product_extension_single_marginal_is_identity_map():
    D = random_faithful_state(ModeSet([2], 3), 1)
    assert product_extension([D]).op.allclose(D.op)


def test_product_extension_of_tracial_is_tracial():
    n = 3
    out = product_extension([tracial_state(ModeSet([1], n)), tracial_state(ModeSet([2, 3], n))])
    assert out.op.allclose(identity(n))
    assert out.region == ModeSet.full(n)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_product_extension_roundtrip(seed, odd_slot):
    rng = np.random.default_rng(seed)
    n = 4
    regions = (ModeSet([1], n), ModeSet([2, 3], n), ModeSet([4], n))
    marg = [
        random_faithful_state(R, int(rng.integers(2**31))) if i == odd_slot else random_even_state(R, rng)
        for i, R in enumerate(regions)
    ]
    P = product_extension(marg)
    for m in marg:
        np.testing.assert_allclose(restrict_state(P, m.region).matrix, m.matrix, atol=1e-10)
    # product expectation values: tau(P x y) = tau(D1 x) tau(D2 y)
    x = CarOperator(projection_oracle(rng.standard_normal((16, 16)), (1,), n), n)
    y = CarOperator(projection_oracle(rng.standard_normal((16, 16)), (4,), n), n)
    assert tau(P.op @ x @ y) == pytest.approx(tau(marg[0].op @ x) * tau(marg[2].op @ y), abs=1e-10)


def test_product_extension_rejects_two_odd_marginals():
    n = 2
    a = random_faithful_state(ModeSet([1], n), 0)
    b = random_faithful_state(ModeSet([2], n), 1)
    assert not is_even(a) and not is_even(b)
    with pytest.raises(ValueError, match="not even"):
        product_extension([a, b])
    with pytest.raises(ValueError, match="disjoint"):
        product_extension([a, random_even_state(ModeSet([1], n), np.random.default_rng(0))])


@pytest.mark.parametrize(
    "weights, expect",
    [((1.0,), 0.0), ((0.5, 0.5), math.log(2)), ((0.3, 0.7), 0.6108643020548935)],
)
def test_shannon_entropy(weights, expect):
    assert shannon_entropy(weights) == pytest.approx(expect, abs=1e-14)


def test_shannon_rejects_bad_input():
    with pytest.raises(ValueError):
        shannon_entropy([0.5, 0.6])
    with pytest.raises(ValueError):
        shannon_entropy([-0.1, 1.1])


def test_mixture_tracial_single_term():
    regions = RegionPair.from_lists([1, 2], [2, 3], 3)
    triple = MarginalTriple(*(tracial_state(R) for R in (regions.I_minus_J, regions.intersection, regions.J_minus_I)))
    D = build_mixture_state(MixtureSpec((1.0,), (triple,), regions))
    assert D.op.allclose(identity(3))
    assert ssa_report(D, regions).gap == pytest.approx(0.0, abs=1e-14)


def test_mixture_rejects_overlapping_supports():
    n = 3
    regions = RegionPair.from_lists([1, 2], [2, 3], n)
    t = MarginalTriple(*(tracial_state(R) for R in (regions.I_minus_J, regions.intersection, regions.J_minus_I)))
    with pytest.raises(ValueError, match="orthogonal"):
        MixtureSpec((0.5, 0.5), (t, t), regions)
    with pytest.raises(ValueError, match="sum"):
        MixtureSpec((0.5,), (t,), regions)


def test_marginal_triple_allows_one_odd():
    n = 3
    odd = random_faithful_state(ModeSet([1], n), 0)
    MarginalTriple(odd, tracial_state(ModeSet([2], n)), tracial_state(ModeSet([3], n)))
    with pytest.raises(ValueError):
        MarginalTriple(odd, random_faithful_state(ModeSet([2], n), 1), tracial_state(ModeSet([3], n)))


@pytest.mark.parametrize("seed", range(6))
def test_mixture_entropy_decomposition(seed):
    """S(D_K) = H(w) + sum_i w_i S(marginals_i on K), checked on every region."""
    rng = np.random.default_rng(seed)
    n = 5
    regions = RegionPair.from_lists([1, 2, 3], [3, 4, 5], n)
    spec = random_mixture_spec(rng, regions, n_terms=2, odd_slot=seed % 3)
    D = build_mixture_state(spec)
    rep = ssa_report(D, regions)
    h = shannon_entropy(spec.weights)
    ents = [[von_neumann_entropy(m) for m in t] for t in spec.triples]
    mix = lambda slots: h + sum(w * sum(e[s] for s in slots) for w, e in zip(spec.weights, ents))  # noqa: E731
    assert rep.s_union == pytest.approx(mix((0, 1, 2)), abs=1e-9)
    assert rep.s_i == pytest.approx(mix((0, 1)), abs=1e-9)
    assert rep.s_j == pytest.approx(mix((1, 2)), abs=1e-9)
    assert rep.s_int == pytest.approx(mix((1,)), abs=1e-9)
    assert abs(rep.gap) <= 1e-8
    assert not odd_cross_witness(D, regions)


def test_witness_examples():
    n = 3
    regions = RegionPair.from_lists([1, 2], [2, 3], n)
    assert not odd_cross_witness(tracial_state(ModeSet.full(n)), regions)
    res = build_monomial_state(odd_cross_terms(), ODD_CROSS_REGIONS)
    w = odd_cross_witness(res.state, ODD_CROSS_REGIONS)
    assert w.found
    assert set(w.terms) == {"a1 a3", "a1* a3*"}


def test_odd_cross_saturating_example():
    res = build_monomial_state(odd_cross_terms(0.3), ODD_CROSS_REGIONS)
    assert res.valid
    assert res.commutator_i_j <= 1e-10
    assert res.product_identity <= 1e-9
    assert abs(res.gap) <= 1e-8
    rep = ssa_report(res.state, ODD_CROSS_REGIONS)
    assert rep.faithful and rep.residual <= 1e-6


def test_monomial_identities_against_oracle():
    res = build_monomial_state(odd_cross_terms(0.4), ODD_CROSS_REGIONS)
    D = res.state.matrix
    n = 4
    d_i = projection_oracle(D, (1, 2, 3), n)
    d_j = projection_oracle(D, (3, 4), n)
    d_int = projection_oracle(D, (3,), n)
    assert np.abs(d_i @ d_j - d_j @ d_i).max() <= 1e-10
    assert np.abs(D @ d_int - d_i @ d_j).max() <= 1e-10


def test_monomial_rejects_two_c_plus():
    n = 4
    terms = [
        MonomialTermSpec(1.0, Monomial(), Monomial(), ModeSet.empty(n), parse_monomial("h4")),
        MonomialTermSpec(0.3, parse_monomial("a1"), parse_monomial("a3"), ModeSet([3], n), parse_monomial("n4")),
    ]
    with pytest.raises(MonomialSpecError, match="C\\+"):
        build_monomial_state(terms, ODD_CROSS_REGIONS)


@pytest.mark.parametrize(
    "term, message",
    [
        (MonomialTermSpec(0.3, parse_monomial("a4"), Monomial(), ModeSet.empty(4)), "I\\\\J"),
        (MonomialTermSpec(0.3, Monomial(), parse_monomial("n4"), ModeSet([4], 4)), "K="),
        (MonomialTermSpec(0.3, Monomial(), parse_monomial("a3"), ModeSet([3], 4)), "two disjoint odd"),
    ],
)
def test_monomial_structural_errors(term, message):
    base = MonomialTermSpec(1.0, Monomial(), Monomial(), ModeSet.empty(4))
    with pytest.raises(MonomialSpecError, match=message):
        build_monomial_state([base, term], ODD_CROSS_REGIONS)


def test_monomial_overlapping_blocks_rejected():
    n = 4
    terms = [
        MonomialTermSpec(0.2, parse_monomial("a1"), parse_monomial("a3"), ModeSet([3], n)),
        MonomialTermSpec(0.2, parse_monomial("a2"), parse_monomial("a3*"), ModeSet([3], n)),
    ]
    with pytest.raises(MonomialSpecError, match="overlaps"):
        build_monomial_state(terms, ODD_CROSS_REGIONS)


def test_monomial_even_a_with_odd_b_uses_split():
    n = 5
    regions = RegionPair.from_lists([1, 2, 3], [3, 4, 5], n)
    A = parse_monomial("a1 a2*")
    split = find_odd_split(A, regions.I_minus_J)
    assert split.a1 == parse_monomial("a1") and split.a2 == parse_monomial("a2*")
    terms = [
        MonomialTermSpec(1.0, Monomial(), Monomial(), ModeSet.empty(n)),
        MonomialTermSpec(0.25, A, parse_monomial("n3"), ModeSet([3], n)),
    ]
    res = build_monomial_state(terms, regions)
    assert res.valid
    assert abs(res.gap) <= 1e-8


def test_monomial_non_positive_is_invalid():
    n = 4
    terms = [
        MonomialTermSpec(1.0, Monomial(), Monomial(), ModeSet.empty(n)),
        MonomialTermSpec(3.0, parse_monomial("a1"), parse_monomial("a3"), ModeSet([3], n)),
    ]
    res = build_monomial_state(terms, ODD_CROSS_REGIONS)
    assert not res.valid
    assert "positive" in res.reason


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_random_monomial_states_saturate(seed, faithful):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 6))
    labels = rng.permutation(np.r_[0, 1, 2, rng.integers(0, 3, n - 3)])
    I = [i + 1 for i in range(n) if labels[i] < 2]
    J = [i + 1 for i in range(n) if labels[i] > 0]
    regions = RegionPair.from_lists(I, J, n)
    res = build_monomial_state(random_monomial_terms(rng, regions, faithful=faithful), regions)
    assert res.valid, res.reason
    assert res.commutator_i_j <= 1e-10
    assert res.commutator_d_int <= 1e-10
    assert res.product_identity <= 1e-9
    assert abs(res.gap) <= 1e-8


@pytest.mark.parametrize("seed", range(4))
def test_mixture_marginals(seed):
    rng = np.random.default_rng(100 + seed)
    n = 4
    regions = RegionPair.from_lists([1, 2], [2, 3, 4], n)
    spec = random_mixture_spec(rng, regions, n_terms=2, odd_slot=seed % 3)
    D = build_mixture_state(spec)
    ops = [[m.op for m in t] for t in spec.triples]
    d_i = sum(w * (o[0] @ o[1]).matrix for w, o in zip(spec.weights, ops))
    d_j = sum(w * (o[1] @ o[2]).matrix for w, o in zip(spec.weights, ops))
    d_int = sum(w * o[1].matrix for w, o in zip(spec.weights, ops))
    np.testing.assert_allclose(restrict_state(D, regions.I).matrix, d_i, atol=1e-10)
    np.testing.assert_allclose(restrict_state(D, regions.J).matrix, d_j, atol=1e-10)
    np.testing.assert_allclose(restrict_state(D, regions.intersection).matrix, d_int, atol=1e-10)
