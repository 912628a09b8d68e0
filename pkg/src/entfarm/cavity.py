"""Cavity, detectors, and the quadratic Hamiltonian they generate.

A massless field in a Dirichlet cavity of length L has modes
phi_n(x) = sin(n pi x / L) / sqrt(pi n) with omega_n = n pi / L (c = hbar = 1).
Two gapped oscillator detectors at fixed positions x1, x2 couple to the local
field amplitude with equal strength lambda.  The phase-space vector is
ordered (q_d1, p_d1, q_d2, p_d2, q_1, p_1, ..., q_M, p_M): detectors first,
then the retained field modes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_N_MODES = 128


@dataclass(frozen=True)
class CavityConfig:
    """Physical parameters of one detector-pair / cavity setup.

    mode_numbers lists the physical indices n of the retained field modes
    (not necessarily contiguous, so resonant-window truncations are
    first-class).  x1 and x2 default to L/3 and 2L/3.
    """

    length: float = 8.0
    coupling: float = 0.01
    detector_frequency: float = math.pi / 8.0
    x1: float | None = None
    x2: float | None = None
    cycle_time: float = 20.0
    mode_numbers: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.x1 is None:
            object.__setattr__(self, "x1", self.length / 3.0)
        if self.x2 is None:
            object.__setattr__(self, "x2", 2.0 * self.length / 3.0)
        if self.mode_numbers is None:
            object.__setattr__(self, "mode_numbers", tuple(range(1, DEFAULT_N_MODES + 1)))
        else:
            object.__setattr__(self, "mode_numbers", tuple(int(n) for n in self.mode_numbers))
        if self.length <= 0:
            raise ValueError("cavity length must be positive")
        if self.coupling < 0:
            raise ValueError("coupling must be non-negative")
        if self.detector_frequency <= 0:
            raise ValueError("detector frequency must be positive")
        if self.cycle_time <= 0:
            raise ValueError("cycle time must be positive")
        for x in (self.x1, self.x2):
            if not 0 < x < self.length:
                raise ValueError(f"detector position {x} outside the cavity (0, {self.length})")
        if not self.mode_numbers:
            raise ValueError("at least one field mode is required")
        if any(n < 1 for n in self.mode_numbers) or any(
            b <= a for a, b in zip(self.mode_numbers, self.mode_numbers[1:])
        ):
            raise ValueError("mode numbers must be positive and strictly increasing")

    @property
    def n_field_modes(self) -> int:
        return len(self.mode_numbers)

    @property
    def n_modes(self) -> int:
        """Total oscillators: two detectors plus the retained field modes."""
        return 2 + self.n_field_modes

    def fingerprint(self) -> str:
        payload = repr(
            (
                self.length,
                self.coupling,
                self.detector_frequency,
                self.x1,
                self.x2,
                self.cycle_time,
                self.mode_numbers,
            )
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def standard_config(n_modes: int = DEFAULT_N_MODES, **overrides) -> CavityConfig:
    """The reference setup with the first n_modes field modes retained."""
    return CavityConfig(mode_numbers=tuple(range(1, n_modes + 1)), **overrides)


def resonant_window(config: CavityConfig, width: float | None = None) -> CavityConfig:
    """Truncate to field modes near the detector frequency.

    With an explicit width, keeps modes with |omega_n - Omega| < width.
    Without one, keeps the five lowest retained modes, which is enough to
    cover the resonance and its nearest neighbors in the reference setup.
    """
    if width is None:
        kept = config.mode_numbers[: min(5, len(config.mode_numbers))]
    else:
        kept = tuple(
            n
            for n in config.mode_numbers
            if abs(n * math.pi / config.length - config.detector_frequency) < width
        )
    if not kept:
        raise ValueError("resonant window is empty; widen it")
    return CavityConfig(
        length=config.length,
        coupling=config.coupling,
        detector_frequency=config.detector_frequency,
        x1=config.x1,
        x2=config.x2,
        cycle_time=config.cycle_time,
        mode_numbers=kept,
    )


def mode_frequencies(config: CavityConfig) -> np.ndarray:
    """omega_n = n pi / L for each retained mode (massless dispersion)."""
    return np.array([n * math.pi / config.length for n in config.mode_numbers])


def joint_frequencies(config: CavityConfig) -> np.ndarray:
    """Free frequencies of the full system: both detectors, then the field."""
    return np.concatenate(
        [[config.detector_frequency, config.detector_frequency], mode_frequencies(config)]
    )


def _mode_amplitude(n: int, x: float, length: float) -> float:
    # phi_n(x) = sin(k_n x) / sqrt(pi n)
    return math.sin(n * math.pi * x / length) / math.sqrt(math.pi * n)


def coupling_matrix(config: CavityConfig) -> np.ndarray:
    """Detector-field coupling block X (4 x 2M).

    Only q-q entries are populated: X[0, 2j] couples detector 1 to mode j,
    X[2, 2j] detector 2 to mode j, with amplitude sin(k_n x_d)/sqrt(pi n).
    """
    m = config.n_field_modes
    x = np.zeros((4, 2 * m))
    for j, n in enumerate(config.mode_numbers):
        x[0, 2 * j] = _mode_amplitude(n, config.x1, config.length)
        x[2, 2 * j] = _mode_amplitude(n, config.x2, config.length)
    return x


def hamiltonian_matrix(config: CavityConfig) -> np.ndarray:
    """Symmetrized quadratic form F_sym with H = (1/2) x^T F_sym x.

    Free part: diag(Omega, Omega, Omega, Omega, omega_1, omega_1, ...).
    Interaction: off-diagonal blocks 2 lambda X and its transpose.
    """
    n = config.n_modes
    diag = np.repeat(joint_frequencies(config), 2)
    f_sym = np.diag(diag)
    if config.coupling != 0.0:
        x = coupling_matrix(config)
        f_sym[0:4, 4 : 2 * n] = 2.0 * config.coupling * x
        f_sym[4 : 2 * n, 0:4] = 2.0 * config.coupling * x.T
    return f_sym


def decoupled_modes(config: CavityConfig, threshold: float = 1e-12) -> list[int]:
    """Retained mode numbers whose profile has a node at both detectors.

    These modes never talk to the detectors: their propagator block is an
    exact free rotation no matter the coupling.
    """
    out = []
    for n in config.mode_numbers:
        a1 = math.sin(n * math.pi * config.x1 / config.length)
        a2 = math.sin(n * math.pi * config.x2 / config.length)
        if abs(a1) < threshold and abs(a2) < threshold:
            out.append(n)
    return out


def decoupled_positions(config: CavityConfig, threshold: float = 1e-12) -> list[int]:
    """Storage positions (0-based within the field block) of decoupled modes."""
    dead = set(decoupled_modes(config, threshold))
    return [j for j, n in enumerate(config.mode_numbers) if n in dead]
