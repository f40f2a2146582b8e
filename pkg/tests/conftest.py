"""Independent oracles shared by the test modules.

Everything here is built from ``np.kron`` and plain numpy so it never routes
through the library's own bit-twiddling or tensor-coordinate machinery.
"""

from functools import reduce

import numpy as np
import pytest

I2 = np.eye(2)
Z2 = np.diag([1.0, -1.0])
E12 = np.array([[0.0, 1.0], [0.0, 0.0]])
E21 = E12.T
E11 = np.diag([1.0, 0.0])
E22 = np.diag([0.0, 1.0])


def kron_all(factors):
    return reduce(np.kron, factors, np.eye(1))


def kron_annihilator(i, n):
    """Jordan-Wigner annihilator for mode ``i`` (1-based), leftmost factor first."""
    return kron_all([Z2] * (i - 1) + [E12] + [I2] * (n - i))


def kron_site(site, op, n):
    return kron_all([I2] * (site - 1) + [op] + [I2] * (n - site))


def random_density(rng, dim, floor=0.05):
    """Faithful trace-one density, smallest eigenvalue at least ``floor / dim``."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return (1 - floor) * rho + floor * np.eye(dim) / dim


def eig_entropy(rho):
    """Shannon entropy of the spectrum of a trace-one density."""
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-14]
    return float(-np.sum(w * np.log(w)))


def expm_logm_oracle(rho):
    w, v = np.linalg.eigh(rho)
    return v @ np.diag(np.log(w)) @ v.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
