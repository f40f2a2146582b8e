"""Orthonormal product basis of ``A(K)`` in Jordan-Wigner tensor coordinates.

Every ``2**n`` matrix is expanded over tensor products of the per-site
operators ``{1, sqrt2*e12, sqrt2*e21, Z}`` (labels 0..3), orthonormal for the
normalised trace. A normal-form product over modes ``K`` of the per-mode
factors ``{1, sqrt2*a, sqrt2*a*, 1-2a*a}`` is, up to sign, exactly one such
tensor: free labels on ``K`` and, on a mode ``s`` outside ``K``, label ``Z``
when an odd number of odd factors sits to the right of ``s`` (the string) and
``1`` otherwise. Selecting those coefficients gives the trace-preserving
projection onto ``A(K)``, and reading them off on ``K`` alone gives the
compressed ``2**|K|`` representation of the same element.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_S2 = np.sqrt(2.0)
SITE_BASIS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, _S2], [0, 0]],
        [[0, 0], [_S2, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
ODD_LABELS = (1, 2)

# coefficient_l = sum_rc conj(P_l[r, c]) X[r, c] / 2
_ANALYSIS = SITE_BASIS.reshape(4, 4).conj() / 2
_SYNTHESIS = SITE_BASIS.reshape(4, 4).T.copy()


def _apply_per_site(t: np.ndarray, n: int, op: np.ndarray) -> np.ndarray:
    t = t.reshape((4,) * n) if n else t.reshape(())
    for s in range(n):
        t = t.reshape(4**s, 4, 4 ** (n - s - 1))
        t = np.matmul(op, t)
    return t.reshape(-1)


def _interleave(mat: np.ndarray, n: int) -> np.ndarray:
    """Reorder a ``2**n`` matrix into per-site ``(row, col)`` pairs, shape ``(4,)*n``."""
    t = mat.reshape((2,) * (2 * n))
    order = [ax for s in range(n) for ax in (s, n + s)]
    return t.transpose(order).reshape(-1)


def _deinterleave(vec: np.ndarray, n: int) -> np.ndarray:
    t = vec.reshape((2,) * (2 * n))
    inv = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return t.transpose(inv).reshape(1 << n, 1 << n)


def to_coefficients(mat: np.ndarray, n: int) -> np.ndarray:
    """Flat coefficient vector of length ``4**n`` (site 1 most significant)."""
    if n == 0:
        return np.asarray(mat, dtype=complex).reshape(1)
    return _apply_per_site(_interleave(np.asarray(mat, dtype=complex), n), n, _ANALYSIS)


def from_coefficients(coef: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return np.asarray(coef, dtype=complex).reshape(1, 1)
    return _deinterleave(_apply_per_site(np.asarray(coef, dtype=complex), n, _SYNTHESIS), n)


@lru_cache(maxsize=256)
def subalgebra_patterns(n: int, modes: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Label patterns of the ``A(modes)`` basis.

    Returns ``(flat_index, labels)``: for each of the ``4**k`` compressed
    patterns (C order over ``modes``), its flat index in the ``4**n``
    coefficient vector, and the full label array of shape ``(4**k, n)``.
    """
    k = len(modes)
    local = np.indices((4,) * k).reshape(k, -1).T if k else np.zeros((1, 0), dtype=int)
    labels = np.zeros((local.shape[0], n), dtype=np.int64)
    pos = np.asarray(modes, dtype=int) - 1
    labels[:, pos] = local
    odd = np.isin(labels, ODD_LABELS)
    # parity of odd factors strictly to the right of each site
    right = (np.cumsum(odd[:, ::-1], axis=1)[:, ::-1] - odd) % 2
    outside = np.ones(n, dtype=bool)
    outside[pos] = False
    labels[:, outside] = np.where(right[:, outside] == 1, 3, 0)
    weights = 4 ** np.arange(n - 1, -1, -1)
    flat = labels @ weights if n else np.zeros(1, dtype=np.int64)
    flat.setflags(write=False)
    labels.setflags(write=False)
    return flat, labels


def outside_norm(coef: np.ndarray, n: int, modes: tuple[int, ...]) -> float:
    """HS norm (under tau) of the part of ``coef`` outside ``A(modes)``.

    The basis is tau-orthonormal, so this is a plain vector norm.
    """
    flat, _ = subalgebra_patterns(n, modes)
    outside = coef.copy()
    outside[flat] = 0.0
    return float(np.linalg.norm(outside))


def project_coefficients(coef: np.ndarray, n: int, modes: tuple[int, ...]) -> np.ndarray:
    flat, _ = subalgebra_patterns(n, modes)
    kept = np.zeros_like(coef)
    kept[flat] = coef[flat]
    return from_coefficients(kept, n)


def project(mat: np.ndarray, n: int, modes: tuple[int, ...]) -> np.ndarray:
    """Hilbert-Schmidt orthogonal projection onto ``A(modes)``."""
    coef = to_coefficients(mat, n)
    flat, _ = subalgebra_patterns(n, modes)
    kept = np.zeros_like(coef)
    kept[flat] = coef[flat]
    return from_coefficients(kept, n)


def compress(mat: np.ndarray, n: int, modes: tuple[int, ...]) -> np.ndarray:
    """Image of an element of ``A(modes)`` under ``A(modes) ~ M_{2**k}``."""
    coef = to_coefficients(mat, n)
    flat, _ = subalgebra_patterns(n, modes)
    return from_coefficients(coef[flat], len(modes))


def embed(small: np.ndarray, n: int, modes: tuple[int, ...]) -> np.ndarray:
    """Inverse of :func:`compress`."""
    k = len(modes)
    coef = to_coefficients(small, k)
    flat, _ = subalgebra_patterns(n, modes)
    full = np.zeros(4**n, dtype=complex)
    full[flat] = coef
    return from_coefficients(full, n)
