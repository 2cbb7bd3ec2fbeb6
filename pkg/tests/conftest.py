"""Shared test helpers: random media ensembles with controlled conditioning."""

from __future__ import annotations

import numpy as np
import pytest

from mslwave import MslCoefficients, PartitionError, solve_qep


def random_hermitian_medium(rng, n: int, p_scale: float = 0.4,
                            w_scale: float = 3.0) -> MslCoefficients:
    """Formally hermitian medium: b = b^H (positive definite), w = w^H,
    y = -p^H, with moderate conditioning."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = a @ a.conj().T / n + np.eye(n)
    h = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    w = w_scale * (h + h.conj().T) / 2.0
    p = p_scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return MslCoefficients(b=b, p=p, y=-p.conj().T, w=w)


def random_evanescent_medium(rng, n: int) -> MslCoefficients:
    """Hermitian medium whose 2N wavenumbers are all purely imaginary:
    b positive definite, p = y = 0, w negative definite."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = a @ a.conj().T / n + np.eye(n)
    c = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    w = -(c @ c.conj().T / n + 0.5 * np.eye(n))
    z = np.zeros((n, n))
    return MslCoefficients(b=b, p=z, y=z, w=w)


def random_partitionable_medium(rng, n: int, **kwargs):
    """Hermitian medium redrawn until its spectrum splits N/N.

    Formal hermiticity permits real eigenvalues that do not pair up by
    sign (one-sided drift spectra); those media have no plus/minus mode
    split and are rejected here.
    """
    for _ in range(64):
        m = random_hermitian_medium(rng, n, **kwargs)
        try:
            return m, solve_qep(m)
        except PartitionError:
            continue
    raise AssertionError("could not draw a partitionable medium")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
