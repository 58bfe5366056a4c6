"""Shared fixtures and independent numerical oracles.

The finite-difference oracles here deliberately avoid the package's analytic
derivative paths so that agreement between the two is a real check.
"""

import numpy as np
import pytest
from scipy.linalg import expm

from qmetro.fisher_info import bures_distance
from qmetro.qubit_core import I2, X, Y, Z


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_full_rank_state(rng, dim=2, floor=0.02):
    """Random density matrix with eigenvalues bounded away from zero."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T + floor * dim * np.eye(dim)
    return rho / np.trace(rho).real


def random_traceless_hermitian(rng, dim=2, unit=True):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (g + g.conj().T) / 2.0
    h -= np.trace(h).real / dim * np.eye(dim)
    if unit:
        h /= np.linalg.norm(h)
    return h


def fd_bures_qfi(state_at, dtheta=1e-4):
    """Finite-difference Bures QFI with one Richardson extrapolation level.

    ``state_at(theta)`` must return the density matrix of the family at the
    given parameter value.
    """

    def estimate(h):
        d = bures_distance(state_at(h), state_at(-h))
        return d * d / (h * h)

    coarse = estimate(dtheta)
    fine = estimate(dtheta / 2.0)
    return (4.0 * fine - coarse) / 3.0


def dephasing_apply(fam, theta, rho):
    """Exact finite-theta action of a dephasing family (oracle path)."""
    p_theta = fam.p + fam.pdot * theta
    u0 = expm(-1j * fam.g0 * theta)
    u1 = expm(-1j * fam.g1 * theta)
    zu1 = Z @ u1
    return (1.0 - p_theta) * (u0 @ rho @ u0.conj().T) + p_theta * (zu1 @ rho @ zu1.conj().T)


def bloch_state_matrix(v):
    return (I2 + v[0] * X + v[1] * Y + v[2] * Z) / 2.0
