import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from car_entropy.car_core import CarOperator, ModeSet, StateDensity, identity
from car_entropy.entropy import (
    NonFaithfulStateError,
    SsaReport,
    _format_number,
    compressed_density,
    equality_check,
    exp_hermitian,
    hermitian_eig,
    klein_gap,
    lieb_chain,
    lieb_inequality_gap,
    log_supported,
    regularize,
    relative_entropy,
    relative_entropy_pivot,
    ssa_report,
    t_map,
    von_neumann_entropy,
)
from car_entropy.states import product_extension, random_even_state, random_faithful_state, tracial_state
from car_entropy.subalgebra import RegionPair, embed, restrict_state
from conftest import eig_entropy, random_density
from test_subalgebra import projection_oracle


def tau_xlogx_oracle(D, region):
    """tau(D_K log D_K) from the full 2**n spectrum of the projected marginal."""
    mat = projection_oracle(D.matrix, region.indices, D.n) if region != D.region else D.matrix
    w = np.linalg.eigvalsh((mat + mat.conj().T) / 2)
    w = w[w > 1e-14]
    return float(np.sum(w * np.log(w))) / mat.shape[0]


def entropy_oracle(D, region):
    return len(region) * math.log(2) - tau_xlogx_oracle(D, region)


def random_hermitian(rng, dim):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2


def test_hermitian_eig_roundtrip(rng):
    H = random_hermitian(rng, 8)
    dec = hermitian_eig(H)
    np.testing.assert_allclose(dec.reconstruct(), H, atol=1e-12)
    assert np.all(np.diff(dec.eigenvalues) >= 0)
    with pytest.raises(ValueError):
        hermitian_eig(H + 1j * np.eye(8) * 0 + np.triu(np.ones((8, 8)), 1))


def test_log_supported_cuts_kernel():
    P = np.diag([0.5, 0.5, 0.0, 0.0])
    L, cut = log_supported(P)
    assert cut
    np.testing.assert_allclose(L, np.diag([math.log(0.5)] * 2 + [0, 0]), atol=1e-14)
    with pytest.raises(ValueError):
        log_supported(np.diag([1.0, -1e-3]))


def test_exp_inverts_log(rng):
    rho = random_density(rng, 8)
    L, cut = log_supported(rho)
    assert not cut
    np.testing.assert_allclose(exp_hermitian(L), rho, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_tracial_state_entropy_is_maximal(n):
    D = tracial_state(ModeSet.full(n))
    assert von_neumann_entropy(D) == pytest.approx(n * math.log(2), abs=1e-14)


def test_pure_occupation_has_zero_entropy():
    n = 2
    full = ModeSet.full(n)
    D = StateDensity(CarOperator(np.diag([0.0, 0, 0, 4.0]), n), full)
    assert von_neumann_entropy(D) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_entropy_matches_spectrum_oracle(n, rng):
    full = ModeSet.full(n)
    D = random_faithful_state(full, int(rng.integers(2**31)))
    assert von_neumann_entropy(D) == pytest.approx(eig_entropy(D.matrix / (1 << n)), abs=1e-10)
    for _ in range(5):
        K = ModeSet([i for i in range(1, n + 1) if rng.random() < 0.5], n)
        DK = restrict_state(D, K)
        assert von_neumann_entropy(DK) == pytest.approx(entropy_oracle(D, K), abs=1e-10)
        assert von_neumann_entropy(DK) == pytest.approx(eig_entropy(compressed_density(DK)), abs=1e-10)


def test_relative_entropy_brute_force(rng):
    n = 2
    full = ModeSet.full(n)
    r1, r2 = random_density(rng, 4), random_density(rng, 4)
    D1 = StateDensity(CarOperator(4 * r1, n), full)
    D2 = StateDensity(CarOperator(4 * r2, n), full)
    w1, v1 = np.linalg.eigh(r1)
    w2, v2 = np.linalg.eigh(r2)
    # sum_{ij} p_i |<i|j>|^2 (log p_i - log q_j)
    overlap = np.abs(v1.conj().T @ v2) ** 2
    oracle = float(np.sum(w1[:, None] * overlap * (np.log(w1)[:, None] - np.log(w2)[None, :])))
    assert relative_entropy(D1, D2) == pytest.approx(oracle, abs=1e-12)
    assert relative_entropy(D1, D1) == pytest.approx(0.0, abs=1e-12)


def test_relative_entropy_infinite_off_support():
    n = 1
    full = ModeSet.full(n)
    D1 = StateDensity(CarOperator(np.diag([1.0, 1.0]), n), full)
    D2 = StateDensity(CarOperator(np.diag([2.0, 0.0]), n), full)
    assert relative_entropy(D1, D2) == math.inf


def test_klein_example():
    # scalar oracle: lam (log lam - log mu) - (lam - mu)
    assert klein_gap(np.eye(2), 2 * np.eye(2)) == pytest.approx(1 - math.log(2), abs=1e-14)
    assert klein_gap(np.diag([2.0, 0.0]), np.eye(2)) == pytest.approx(math.log(2), abs=1e-14)
    assert klein_gap(np.diag([2.0, 1.0]), np.diag([1.0, 2.0])) == pytest.approx(math.log(2) / 2, abs=1e-14)
    assert klein_gap(np.array([[1.0]]), np.array([[math.e]])) == pytest.approx(math.e - 2, abs=1e-14)


def test_klein_rejects_support_violation():
    with pytest.raises(ValueError):
        klein_gap(np.diag([1.0, 1.0]), np.diag([1.0, 0.0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_klein_nonnegative(seed):
    rng = np.random.default_rng(seed)
    A, B = random_density(rng, 4) * 4, random_density(rng, 4) * 3
    assert klein_gap(A, B) >= -1e-12
    assert abs(klein_gap(A, A)) <= 1e-12


def test_t_map_scalar_identity():
    # T_a(k) = k / a for scalars: integral of (t + a)^-2 over [0, inf) is 1/a
    for a in (0.3, 1.0, 7.5):
        integral, _ = quad(lambda t: 1 / (t + a) ** 2, 0, np.inf)
        assert integral == pytest.approx(1 / a, rel=1e-10)
        np.testing.assert_allclose(t_map(np.array([[a]]), np.array([[2.0]])), [[2.0 / a]])


def test_t_map_commuting_case():
    A = np.diag([0.5, 2.0, 3.0])
    K = np.diag([1.0, -1.0, 4.0])
    np.testing.assert_allclose(t_map(A, K), np.diag([2.0, -0.5, 4 / 3]), atol=1e-14)


def test_t_map_is_derivative_of_log(rng):
    """T_A(K) is the Frechet derivative of log at A in direction K."""
    A = random_density(rng, 6) * 6
    K = random_hermitian(rng, 6)
    h = 1e-6
    fd = (log_supported(A + h * K)[0] - log_supported(A - h * K)[0]) / (2 * h)
    np.testing.assert_allclose(t_map(A, K), fd, atol=1e-6)


def test_t_map_rejects_singular():
    with pytest.raises(ValueError):
        t_map(np.diag([1.0, 0.0]), np.eye(2))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lieb_inequality(seed):
    rng = np.random.default_rng(seed)
    H = [random_hermitian(rng, 8) / 4 for _ in range(3)]
    assert lieb_inequality_gap(*H) >= -1e-9


def test_lieb_commuting_equality(rng):
    for _ in range(10):
        H = [np.diag(rng.standard_normal(8)) for _ in range(3)]
        assert abs(lieb_inequality_gap(*H)) <= 1e-10


@pytest.mark.parametrize("n", [2, 3, 4])
def test_ssa_report_matches_oracle(n, rng):
    full = ModeSet.full(n)
    D = random_faithful_state(full, int(rng.integers(2**31)))
    I = [i for i in range(1, n + 1) if i % 2]
    J = list(range(max(1, n // 2), n + 1))
    regions = RegionPair.from_lists(I, J, n)
    rep = ssa_report(D, regions)
    s = [entropy_oracle(D, K) for K in (regions.union, regions.I, regions.J, regions.intersection)]
    assert rep.s_union == pytest.approx(s[0], abs=1e-10)
    assert rep.s_i == pytest.approx(s[1], abs=1e-10)
    assert rep.s_j == pytest.approx(s[2], abs=1e-10)
    assert rep.s_int == pytest.approx(s[3], abs=1e-10)
    assert rep.gap == pytest.approx(s[0] - s[1] - s[2] + s[3], abs=1e-10)
    assert rep.gap <= 1e-9
    assert rep.faithful and rep.residual is not None


def test_ssa_rejects_mismatched_regions():
    D = random_faithful_state(ModeSet.full(3), 0)
    with pytest.raises(ValueError):
        ssa_report(D, RegionPair.from_lists([1], [2], 3))


def test_product_of_even_states_saturates(rng):
    n = 3
    regions = RegionPair.from_lists([1, 2], [2, 3], n)
    parts = [random_even_state(R, rng) for R in (regions.I_minus_J, regions.intersection, regions.J_minus_I)]
    D = product_extension(parts)
    check = equality_check(D, regions)
    assert check.holds
    assert check.gap <= 1e-10


def test_equality_check_generic_strict():
    n = 3
    regions = RegionPair.from_lists([1, 2], [2, 3], n)
    D = random_faithful_state(ModeSet.full(n), 11)
    check = equality_check(D, regions)
    assert not check
    assert check.residual > 1e-3


def test_equality_check_needs_faithful():
    n = 2
    D = StateDensity(CarOperator(np.diag([4.0, 0, 0, 0]), n), ModeSet.full(n))
    regions = RegionPair.from_lists([1], [1, 2], n)
    with pytest.raises(NonFaithfulStateError):
        equality_check(D, regions)
    rep = ssa_report(D, regions)
    assert not rep.faithful and rep.residual is None
    assert "residual=not evaluated (non-faithful)" in rep.to_text()
    reg = regularize(D, 1e-3)
    assert ssa_report(reg, regions).faithful


@pytest.mark.parametrize("n", [3, 4])
def test_pivot_and_telescoping(n, rng):
    regions = RegionPair.from_lists(range(1, n), range(2, n + 1), n)
    D = random_faithful_state(ModeSet.full(n), int(rng.integers(2**31)))
    rep = ssa_report(D, regions)
    first, second = relative_entropy_pivot(D, regions)
    assert first - second == pytest.approx(-rep.gap, abs=1e-8)
    lower, upper = lieb_chain(D, regions)
    assert upper == pytest.approx(1.0, abs=1e-8)
    assert lower <= upper + 1e-9


def test_regularize_bounds():
    D = tracial_state(ModeSet.full(2))
    with pytest.raises(ValueError):
        regularize(D, 2.0)
    assert regularize(D, 0.5).op.allclose(identity(2))


@pytest.mark.parametrize(
    "x, text",
    [
        (0.0, "0.000000000000e0"),
        (-0.0, "0.000000000000e0"),
        (1.0, "1.000000000000e0"),
        (2.0794415416798357, "2.079441541680e0"),
        (0.125, "1.250000000000e-1"),
        (-3.5e-17, "-3.500000000000e-17"),
    ],
)
def test_number_format(x, text):
    assert _format_number(x) == text


def test_report_text_layout():
    rep = SsaReport(0.0, 1.0, 0.5, 0.5, 0.0, 0.0, True, 0.25)
    keys = [ln.split("=")[0] for ln in rep.to_text().splitlines()]
    assert keys == ["gap", "s_union", "s_i", "s_j", "s_int", "residual", "faithful", "min_eig"]


def test_embed_compressed_density_roundtrip(rng):
    n = 3
    region = ModeSet([1, 3], n)
    rho = random_density(rng, 4)
    D = StateDensity(embed(4 * rho, region), region)
    np.testing.assert_allclose(compressed_density(D), rho, atol=1e-12)


def test_residual_grows_continuously_from_saturation(rng):
    n = 3
    regions = RegionPair.from_lists([1, 2], [2, 3], n)
    parts = [random_even_state(R, rng) for R in (regions.I_minus_J, regions.intersection, regions.J_minus_I)]
    D0 = product_extension(parts)
    D1 = random_faithful_state(ModeSet.full(n), 5)
    residuals, gaps = [], []
    for t in (0.0, 1e-4, 1e-3, 1e-2, 1e-1):
        D = StateDensity((1 - t) * D0.op + t * D1.op, D0.region)
        rep = ssa_report(D, regions)
        residuals.append(rep.residual)
        gaps.append(rep.gap)
    assert residuals[0] <= 1e-10
    assert all(a < b for a, b in zip(residuals, residuals[1:]))
    assert residuals[1] < 1e-2
    assert all(g <= 1e-9 for g in gaps)
