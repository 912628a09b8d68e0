"""Shared test helpers."""

import numpy as np
import pytest
from scipy.linalg import expm

from entfarm import gaussian


def random_symplectic(n_modes: int, rng: np.random.Generator, scale: float = 0.4) -> np.ndarray:
    """Random symplectic matrix exp(Omega A) with A symmetric."""
    a = rng.normal(scale=scale, size=(2 * n_modes, 2 * n_modes))
    a = (a + a.T) / 2.0
    return expm(gaussian.symplectic_form(n_modes) @ a)


def random_covariance(
    n_modes: int, rng: np.random.Generator, excitation: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """Random physical covariance matrix and its symplectic spectrum.

    Built as S D S^T from a random symplectic S, so the spectrum is known
    by construction.  Returns (sigma, nus_descending).
    """
    nus = np.sort(1.0 + rng.exponential(excitation, size=n_modes))[::-1]
    d = np.diag(np.repeat(nus, 2))
    s = random_symplectic(n_modes, rng)
    return s @ d @ s.T, nus


@pytest.fixture(autouse=True)
def _natural_log_base():
    """Tests assume nats unless they opt in to another base."""
    gaussian.set_log_base(np.e)
    yield
    gaussian.set_log_base(np.e)
