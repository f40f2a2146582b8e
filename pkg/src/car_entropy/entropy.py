"""Spectral calculus, entropies and the strong subadditivity machinery.

All logarithms are natural. Densities are normalised with the tracial state
(``tau(D) = 1``), so the entropy of a state on ``A(K)`` with density ``D`` is
``|K| log 2 - tau(D log D)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from car_entropy.car_core import CarOperator, StateDensity, hs_norm, identity, tau
from car_entropy.subalgebra import RegionPair, compress, embed, restrict_state

__all__ = [
    "HERMITIAN_TOL",
    "SUPPORT_CUTOFF",
    "FAITHFUL_FLOOR",
    "SSA_TOL",
    "SpectralDecomposition",
    "hermitian_eig",
    "log_supported",
    "exp_hermitian",
    "compressed_density",
    "von_neumann_entropy",
    "relative_entropy",
    "klein_gap",
    "t_map",
    "lieb_inequality_gap",
    "regularize",
    "SsaReport",
    "ssa_report",
    "EqualityCheck",
    "equality_check",
    "equality_residual",
    "relative_entropy_pivot",
    "lieb_chain",
    "NonFaithfulStateError",
]

HERMITIAN_TOL = 1e-10
SUPPORT_CUTOFF = 1e-10
FAITHFUL_FLOOR = 1e-10
SSA_TOL = 1e-9

Matrix = Union[CarOperator, np.ndarray]


class NonFaithfulStateError(ValueError):
    """The density has eigenvalues at or below the faithfulness floor."""


def _as_array(X: Matrix) -> np.ndarray:
    return X.matrix if isinstance(X, CarOperator) else np.asarray(X, dtype=complex)


def _like(X: Matrix, mat: np.ndarray) -> Matrix:
    return CarOperator(mat, X.n) if isinstance(X, CarOperator) else mat


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dim: int

    def apply(self, fn) -> np.ndarray:
        """Matrix ``U fn(Lambda) U*``."""
        U = self.eigenvectors
        return (U * fn(self.eigenvalues)) @ U.conj().T

    def reconstruct(self) -> np.ndarray:
        return self.apply(lambda x: x)


def hermitian_eig(X: Matrix, tol: float = HERMITIAN_TOL) -> SpectralDecomposition:
    """Full eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises:
        ValueError: ``||X - X*||`` exceeds ``tol`` (scaled by ``max(1, ||X||)``).
    """
    mat = _as_array(X)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    scale = max(1.0, float(np.linalg.norm(mat)))
    if np.linalg.norm(mat - mat.conj().T) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2)
    return SpectralDecomposition(w, v, mat.shape[0])


def _log_eigs(w: np.ndarray, cutoff: float) -> tuple[np.ndarray, bool]:
    if w.size and w[0] < -cutoff:
        raise ValueError(f"matrix has a negative eigenvalue {w[0]:.3e} below -{cutoff:g}")
    keep = w >= cutoff
    out = np.zeros_like(w)
    out[keep] = np.log(w[keep])
    return out, bool((~keep).any())


def log_supported(X: Matrix, cutoff: float = SUPPORT_CUTOFF) -> tuple[Matrix, bool]:
    """Natural log on the support of a positive semidefinite matrix.

    Eigenvalues below ``cutoff`` are sent to 0. Returns the logarithm and a
    flag telling whether any eigenvalue was cut.
    """
    dec = hermitian_eig(X)
    logs, cut = _log_eigs(dec.eigenvalues, cutoff)
    return _like(X, dec.apply(lambda _: logs)), cut


def exp_hermitian(X: Matrix) -> Matrix:
    dec = hermitian_eig(X)
    return _like(X, dec.apply(np.exp))


def _xlogx(w: np.ndarray, cutoff: float = SUPPORT_CUTOFF) -> float:
    w = w[w >= cutoff]
    return float(np.sum(w * np.log(w)))


def compressed_density(D: StateDensity) -> np.ndarray:
    """Trace-one density matrix of the state in the ``2**|K|`` representation."""
    small = compress(D.op, D.region)
    return (small + small.conj().T) / 2 / small.shape[0]


def _tau_dlogd(D: StateDensity) -> float:
    small = compress(D.op, D.region)
    w = np.linalg.eigvalsh((small + small.conj().T) / 2)
    return _xlogx(w) / w.size


def von_neumann_entropy(D: StateDensity) -> float:
    """``S = |K| log 2 - tau(D log D)`` for a state on ``A(K)``, in nats."""
    return len(D.region) * math.log(2) - _tau_dlogd(D)


def _log_in_region(D: StateDensity, cutoff: float = SUPPORT_CUTOFF) -> tuple[CarOperator, bool]:
    """``log D`` computed in the compressed representation and embedded back."""
    small = compress(D.op, D.region)
    logs, cut = log_supported((small + small.conj().T) / 2, cutoff)
    return embed(logs, D.region), cut


def _support_contained(A: np.ndarray, B: np.ndarray, cutoff: float) -> bool:
    dec = hermitian_eig(B)
    ker = dec.eigenvectors[:, dec.eigenvalues < cutoff]
    if ker.shape[1] == 0:
        return True
    leak = ker.conj().T @ A @ ker
    return float(np.linalg.norm(leak)) <= cutoff * max(1.0, float(np.linalg.norm(A)))


def relative_entropy(D1: StateDensity, D2: StateDensity, cutoff: float = SUPPORT_CUTOFF) -> float:
    """``tau(D1 (log D1 - log D2))``, or ``inf`` when ``supp D1`` is not inside ``supp D2``."""
    if D1.region != D2.region:
        raise ValueError("relative entropy needs both states on the same region")
    a = compress(D1.op, D1.region)
    b = compress(D2.op, D2.region)
    if not _support_contained(a, b, cutoff):
        return math.inf
    la, _ = log_supported(a, cutoff)
    lb, _ = log_supported(b, cutoff)
    return float(np.real(np.trace(a @ (la - lb)))) / a.shape[0]


def _normalised_trace(mat: np.ndarray) -> float:
    return float(np.real(np.trace(mat))) / mat.shape[0]


def klein_gap(A: Matrix, B: Matrix, cutoff: float = SUPPORT_CUTOFF) -> float:
    """``tau(A (log A - log B)) - tau(A - B)``; non-negative, zero iff ``A = B``.

    Raises:
        ValueError: the support of ``A`` is not inside the support of ``B``.
    """
    a, b = _as_array(A), _as_array(B)
    if not _support_contained(a, b, cutoff):
        raise ValueError("support of A is not contained in the support of B")
    la, _ = log_supported(a, cutoff)
    lb, _ = log_supported(b, cutoff)
    return _normalised_trace(a @ (la - lb)) - _normalised_trace(a - b)


def _log_divided_difference(lam: np.ndarray) -> np.ndarray:
    """``c(x, y) = (log x - log y) / (x - y)`` with ``c(x, x) = 1 / x``."""
    x = lam[:, None]
    y = lam[None, :]
    diff = x - y
    same = diff == 0
    safe = np.where(same, 1.0, diff)
    c = np.log1p(np.where(same, 0.0, diff / y)) / safe
    return np.where(same, 1.0 / x, c)


def t_map(A: Matrix, K: Matrix) -> Matrix:
    """``T_A(K) = int_0^inf (t + A)^-1 K (t + A)^-1 dt`` for positive definite ``A``.

    In the eigenbasis of ``A`` the integral is the Schur product of ``K`` with
    the divided differences of the logarithm.
    """
    dec = hermitian_eig(A)
    lam = dec.eigenvalues
    if lam[0] <= 0:
        raise ValueError("T_A needs a positive definite A")
    U = dec.eigenvectors
    k = U.conj().T @ _as_array(K) @ U
    return _like(A, U @ (k * _log_divided_difference(lam)) @ U.conj().T)


def lieb_inequality_gap(A: Matrix, B: Matrix, C: Matrix) -> float:
    """``Tr e^C T_{exp(-A)}(e^B) - Tr e^{A+B+C}``; non-negative for Hermitian inputs."""
    a, b, c = _as_array(A), _as_array(B), _as_array(C)
    lhs = np.trace(exp_hermitian(c) @ t_map(exp_hermitian(-a), exp_hermitian(b)))
    rhs = np.trace(exp_hermitian(a + b + c))
    return float(np.real(lhs - rhs))


def regularize(D: StateDensity, eps: float = 1e-6) -> StateDensity:
    """``(1 - eps) D + eps * 1``; an explicit, caller-visible perturbation."""
    if not 0 <= eps <= 1:
        raise ValueError("regularisation weight must lie in [0, 1]")
    op = D.op * (1 - eps) + identity(D.n) * eps
    return StateDensity(op, D.region, check=False)


# ---------------------------------------------------------------------------
# Strong subadditivity
# ---------------------------------------------------------------------------


def _format_number(x: float) -> str:
    """Scientific notation with 12 digits after the point and a bare exponent."""
    x = float(x) + 0.0
    mant, exp = f"{x:.12e}".split("e")
    return f"{mant}e{int(exp)}"


@dataclass(frozen=True)
class SsaReport:
    gap: float
    s_union: float
    s_i: float
    s_j: float
    s_int: float
    residual: float | None
    faithful: bool
    min_eig: float

    NOT_EVALUATED = "not evaluated (non-faithful)"

    def to_text(self) -> str:
        residual = self.NOT_EVALUATED if self.residual is None else _format_number(self.residual)
        rows = [
            ("gap", _format_number(self.gap)),
            ("s_union", _format_number(self.s_union)),
            ("s_i", _format_number(self.s_i)),
            ("s_j", _format_number(self.s_j)),
            ("s_int", _format_number(self.s_int)),
            ("residual", residual),
            ("faithful", "true" if self.faithful else "false"),
            ("min_eig", _format_number(self.min_eig)),
        ]
        return "".join(f"{k}={v}\n" for k, v in rows)


def _check_regions(D: StateDensity, regions: RegionPair) -> None:
    if regions.ambient != D.n:
        raise ValueError("regions and state live in different ambients")
    if D.region != regions.union:
        raise ValueError(
            f"state region {{{D.region}}} differs from I u J = {{{regions.union}}}"
        )


def _marginals(D: StateDensity, regions: RegionPair):
    return (
        restrict_state(D, regions.I),
        restrict_state(D, regions.J),
        restrict_state(D, regions.intersection),
    )


def equality_residual(D: StateDensity, regions: RegionPair) -> float:
    """``||log D + log D_{I n J} - log D_I - log D_J||`` (trace HS norm)."""
    d_i, d_j, d_int = _marginals(D, regions)
    parts = [_log_in_region(x)[0] for x in (D, d_int, d_i, d_j)]
    return hs_norm(parts[0] + parts[1] - parts[2] - parts[3])


def ssa_report(
    D: StateDensity,
    regions: RegionPair,
    floor: float = FAITHFUL_FLOOR,
) -> SsaReport:
    """Four entropies, the SSA gap and (for faithful ``D``) the equality residual.

    The gap is ``S(I u J) - S(I) - S(J) + S(I n J)``; the ``|K| log 2`` terms
    cancel identically, so it is formed from the ``tau(D log D)`` parts only.
    """
    _check_regions(D, regions)
    d_i, d_j, d_int = _marginals(D, regions)
    t_u, t_i, t_j, t_int = (_tau_dlogd(x) for x in (D, d_i, d_j, d_int))
    log2 = math.log(2)
    s = [len(x.region) * log2 - t for x, t in zip((D, d_i, d_j, d_int), (t_u, t_i, t_j, t_int))]
    gap = (t_i + t_j) - (t_u + t_int)
    min_eig = float(np.linalg.eigvalsh(compressed_density(D))[0])
    faithful = min_eig > floor
    residual = equality_residual(D, regions) if faithful else None
    return SsaReport(gap, s[0], s[1], s[2], s[3], residual, faithful, min_eig)


@dataclass(frozen=True)
class EqualityCheck:
    holds: bool
    gap: float
    residual: float

    def __bool__(self) -> bool:
        return self.holds


def equality_check(
    D: StateDensity, regions: RegionPair, tol: float = 1e-6, floor: float = FAITHFUL_FLOOR
) -> EqualityCheck:
    """Whether ``log D + log D_{I n J} = log D_I + log D_J`` within ``tol``.

    Raises:
        NonFaithfulStateError: ``D`` is not faithful; regularise first.
    """
    report = ssa_report(D, regions, floor=floor)
    if not report.faithful:
        raise NonFaithfulStateError(
            f"state is not faithful (min eigenvalue {report.min_eig:.3e}); regularise first"
        )
    return EqualityCheck(report.residual <= tol, abs(report.gap), report.residual)


def relative_entropy_pivot(D: StateDensity, regions: RegionPair) -> tuple[float, float]:
    """``S(w, w o E_I)`` and ``S(w o E_J, w o E_{I n J})`` as states on ``A(I u J)``.

    Their difference equals minus the SSA gap.
    """
    _check_regions(D, regions)
    d_i, d_j, d_int = _marginals(D, regions)
    as_union = lambda x: StateDensity(x.op, regions.union, check=False)  # noqa: E731
    first = relative_entropy(D, as_union(d_i))
    second = relative_entropy(as_union(d_j), as_union(d_int))
    return first, second


def lieb_chain(D: StateDensity, regions: RegionPair) -> tuple[float, float]:
    """Both sides of the trace bound used for the necessity argument.

    Returns ``tau(exp(log D_I - log D_{InJ} + log D_J))`` and the upper bound
    ``tau(D_I T_{D_{InJ}}(D_J))``; the latter telescopes to ``tau(D_{InJ}) = 1``.
    """
    _check_regions(D, regions)
    d_i, d_j, d_int = _marginals(D, regions)
    l_i, l_j, l_int = (_log_in_region(x)[0] for x in (d_i, d_j, d_int))
    lower = tau(exp_hermitian(l_i - l_int + l_j)).real
    upper = tau(d_i.op @ t_map(d_int.op, d_j.op)).real
    return float(lower), float(upper)
