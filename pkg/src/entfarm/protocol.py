"""The repeated extraction cycle.

Each cycle injects a fresh detector pair (ground state by default), evolves
the joint system for the cycle time, reads the detector diagnostics, and
discards the detector-field correlations.  The surviving field state obeys
the affine update sigma_f -> D sigma_f D^T + C C^T, where (C, D) are blocks
of the one-cycle propagator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from entfarm import cavity, dynamics, gaussian, thermo
from entfarm.dynamics import Propagator
from entfarm.gaussian import InvalidStateError


@dataclass(frozen=True)
class CycleBlocks:
    """Propagator blocks: detector rows first, field rows second."""

    a: np.ndarray  # 4 x 4, detector -> detector
    b: np.ndarray  # 4 x 2M, field -> detector
    c: np.ndarray  # 2M x 4, detector -> field
    d: np.ndarray  # 2M x 2M, field -> field


@dataclass
class CycleRecord:
    """Diagnostics captured at the end of one cycle.

    field_thermality is NaN when the estimator is undefined (field at
    vacuum energy).  field_sigma is populated only on snapshot cycles.
    """

    cycle: int
    detector_sigma: np.ndarray
    log_negativity: float
    energy_input: float
    field_purity: float
    field_thermality: float
    field_sigma: np.ndarray | None = None


@dataclass
class Trajectory:
    fingerprint: str
    initial_field: str
    records: list[CycleRecord] = field(default_factory=list)
    final_field_sigma: np.ndarray | None = None


def block_decompose(s: np.ndarray, detector_dim: int = 4) -> CycleBlocks:
    """Partition a propagator into detector and field blocks."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < detector_dim + 2:
        raise ValueError("propagator must be square and include at least one field mode")
    k = detector_dim
    return CycleBlocks(
        a=s[:k, :k].copy(), b=s[:k, k:].copy(), c=s[k:, :k].copy(), d=s[k:, k:].copy()
    )


def blocks_for(config: cavity.CavityConfig) -> CycleBlocks:
    return block_decompose(dynamics.propagator_for(config).s)


def superoperator_step(sigma_f: np.ndarray, blocks: CycleBlocks) -> np.ndarray:
    """One field update D sigma_f D^T + C C^T with ground-state detectors.

    The inhomogeneity C C^T encodes the injected detector vacuum; starting
    detectors in any other state requires full_cycle instead.
    """
    sigma_f = np.asarray(sigma_f, dtype=float)
    if sigma_f.shape != blocks.d.shape:
        raise ValueError(
            f"field state shape {sigma_f.shape} does not match D block {blocks.d.shape}"
        )
    if not np.allclose(sigma_f, sigma_f.T, atol=1e-9 * max(1.0, np.abs(sigma_f).max())):
        raise InvalidStateError("field covariance must be symmetric")
    out = blocks.d @ sigma_f @ blocks.d.T + blocks.c @ blocks.c.T
    return (out + out.T) / 2.0


def full_cycle(
    sigma_f: np.ndarray, sigma_d0: np.ndarray, prop: Propagator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evolve detectors (+) field jointly for one cycle; return the blocks.

    Returns (sigma_d_out, gamma_df, sigma_f_out) of the evolved joint
    state S (sigma_d0 xor sigma_f) S^T.  Works for arbitrary injected
    detector states.
    """
    sigma_f = np.asarray(sigma_f, dtype=float)
    sigma_d0 = np.asarray(sigma_d0, dtype=float)
    if sigma_d0.shape != (4, 4):
        raise ValueError("detector state must be 4x4 (two modes)")
    blocks = block_decompose(prop.s)
    if sigma_f.shape != blocks.d.shape:
        raise ValueError("field state does not match the propagator mode count")
    a, b, c, d = blocks.a, blocks.b, blocks.c, blocks.d
    asd = a @ sigma_d0
    bsf = b @ sigma_f
    csd = c @ sigma_d0
    dsf = d @ sigma_f
    sigma_d_out = asd @ a.T + bsf @ b.T
    gamma_df = asd @ c.T + bsf @ d.T
    sigma_f_out = csd @ c.T + dsf @ d.T
    return (
        (sigma_d_out + sigma_d_out.T) / 2.0,
        gamma_df,
        (sigma_f_out + sigma_f_out.T) / 2.0,
    )


def _snapshot_cycles(n_cycles: int, stride) -> set[int]:
    if stride == "geometric":
        out = set()
        k = 1
        while k <= n_cycles:
            out.add(k)
            k *= 2
        out.add(n_cycles)
        return out
    stride = int(stride)
    if stride < 1:
        raise ValueError("snapshot stride must be positive or 'geometric'")
    return set(range(stride, n_cycles + 1, stride)) | {n_cycles}


def run_cycles(
    config: cavity.CavityConfig,
    sigma_f0: np.ndarray | None = None,
    sigma_d0: np.ndarray | None = None,
    n_cycles: int = 1,
    snapshot_stride="geometric",
    initial_label: str = "",
    field_observer=None,
) -> Trajectory:
    """Run the extraction protocol for n_cycles and record diagnostics.

    Defaults: vacuum field, ground-state detector pair.  Per cycle the
    record holds the detector state and its log-negativity, the energy the
    cycle pumped into the system (free-Hamiltonian convention including
    zero-point terms), and the purity / thermality of the surviving field.
    Field snapshots are kept at powers of two by default so ultralong runs
    stay in bounded memory.  field_observer(cycle, sigma_f), when given, is
    called with the surviving field state every cycle; it exists for extra
    per-cycle diagnostics without a second pass over the evolution.
    """
    if n_cycles < 1:
        raise ValueError("need at least one cycle")
    n_field = config.n_field_modes
    if sigma_f0 is None:
        sigma_f = gaussian.vacuum_state(n_field)
        initial_label = initial_label or "vacuum"
    else:
        sigma_f = np.asarray(sigma_f0, dtype=float).copy()
        initial_label = initial_label or "custom"
    if sigma_d0 is None:
        sigma_d0 = gaussian.vacuum_state(2)
    prop = dynamics.propagator_for(config)
    freqs = cavity.joint_frequencies(config)
    field_freqs = cavity.mode_frequencies(config)
    snapshots = _snapshot_cycles(n_cycles, snapshot_stride)

    traj = Trajectory(fingerprint=config.fingerprint(), initial_field=initial_label)
    e_detectors_in = gaussian.energy(sigma_d0, freqs[:2], "paper")
    for k in range(1, n_cycles + 1):
        e_start = e_detectors_in + gaussian.energy(sigma_f, field_freqs, "paper")
        sigma_d_out, _, sigma_f_next = full_cycle(sigma_f, sigma_d0, prop)
        if not np.all(np.isfinite(sigma_f_next)):
            raise InvalidStateError(f"cycle {k}: field state became non-finite")
        e_end = gaussian.energy(sigma_d_out, freqs[:2], "paper") + gaussian.energy(
            sigma_f_next, field_freqs, "paper"
        )
        try:
            neg = gaussian.log_negativity(sigma_d_out)
            purity = gaussian.purity(sigma_f_next)
            try:
                therm = thermo.thermality_estimator(sigma_f_next, field_freqs)
            except thermo.UndefinedEstimatorError:
                therm = math.nan
        except InvalidStateError as exc:
            raise InvalidStateError(f"cycle {k}: {exc}") from exc
        traj.records.append(
            CycleRecord(
                cycle=k,
                detector_sigma=sigma_d_out,
                log_negativity=neg,
                energy_input=e_end - e_start,
                field_purity=purity,
                field_thermality=therm,
                field_sigma=sigma_f_next.copy() if k in snapshots else None,
            )
        )
        if field_observer is not None:
            field_observer(k, sigma_f_next)
        sigma_f = sigma_f_next
    traj.final_field_sigma = sigma_f
    return traj
