"""Single-excitation Hamiltonian of a Heisenberg chain in a moving parabolic field.

The Hamiltonian restricted to the one-flip sector splits into a static
tridiagonal hopping part and a time-dependent diagonal produced by a parabolic
magnetic field that tracks the trap center and is truncated to zero a fixed
radius away from it. Couplings may carry quenched disorder; draws are keyed by
(master_seed, realization_index) so ensembles reproduce under any scheduling.

Units are natural throughout: hbar = 1, energies in units of the nominal
coupling J, lengths in units of the lattice spacing, times in hbar/J.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

HBAR = 1.0


class MappingValidityWarning(UserWarning):
    """Parameters strain the harmonic-oscillator picture behind the controls."""


@dataclass(frozen=True)
class ChainSpec:
    """Chain geometry and couplings. Site n sits at x_n = (n - 1) * lattice_spacing."""

    n_sites: int
    coupling: float = 1.0
    bond_couplings: tuple[float, ...] | None = None
    lattice_spacing: float = 1.0

    def __post_init__(self) -> None:
        if self.n_sites < 3:
            raise ValueError(f"n_sites must be >= 3, got {self.n_sites}")
        if not (self.coupling > 0 and math.isfinite(self.coupling)):
            raise ValueError("coupling must be positive and finite")
        if not (self.lattice_spacing > 0 and math.isfinite(self.lattice_spacing)):
            raise ValueError("lattice_spacing must be positive and finite")
        if self.bond_couplings is not None:
            bonds = tuple(float(j) for j in self.bond_couplings)
            if len(bonds) != self.n_sites - 1:
                raise ValueError(
                    f"expected {self.n_sites - 1} bond couplings, got {len(bonds)}"
                )
            if not all(math.isfinite(j) for j in bonds):
                raise ValueError("bond couplings must be finite")
            object.__setattr__(self, "bond_couplings", bonds)

    def bonds(self) -> np.ndarray:
        """Per-bond couplings J_1 .. J_{N-1}; uniform unless overridden."""
        if self.bond_couplings is None:
            return np.full(self.n_sites - 1, self.coupling, dtype=float)
        return np.asarray(self.bond_couplings, dtype=float)

    def site_positions(self) -> np.ndarray:
        return self.lattice_spacing * np.arange(self.n_sites, dtype=float)

    def site_position(self, n: int) -> float:
        """Position of site n, indexed 1..N."""
        if not 1 <= n <= self.n_sites:
            raise ValueError(f"site index {n} outside 1..{self.n_sites}")
        return (n - 1) * self.lattice_spacing

    @property
    def length(self) -> float:
        return (self.n_sites - 1) * self.lattice_spacing


@dataclass(frozen=True)
class TrapConfig:
    """Trap parameters: resting frequency, start position, transport distance.

    truncation_radius defaults to five packet widths once resolved against a
    chain; the width always derives from omega0, never from the instantaneous
    frequency of a protocol.
    """

    omega0: float
    x_start: float
    distance: float
    omega_f: float | None = None
    truncation_radius: float | None = None

    def __post_init__(self) -> None:
        if not (self.omega0 > 0 and math.isfinite(self.omega0)):
            raise ValueError("omega0 must be positive and finite")
        if self.omega_f is not None and not (self.omega_f > 0 and math.isfinite(self.omega_f)):
            raise ValueError("omega_f must be positive and finite")
        if self.truncation_radius is not None and not (
            self.truncation_radius > 0 and math.isfinite(self.truncation_radius)
        ):
            raise ValueError("truncation_radius must be positive and finite")
        if not (math.isfinite(self.x_start) and math.isfinite(self.distance)):
            raise ValueError("x_start and distance must be finite")

    @property
    def omega_final(self) -> float:
        return self.omega0 if self.omega_f is None else self.omega_f

    @property
    def x_target(self) -> float:
        return self.x_start + self.distance

    @property
    def gamma(self) -> float:
        """Width expansion factor sqrt(omega0 / omega_f)."""
        return math.sqrt(self.omega0 / self.omega_final)


@dataclass(frozen=True)
class DisorderSpec:
    """One realization of bond disorder, keyed by (master_seed, realization_index)."""

    amplitude: float
    master_seed: int
    realization_index: int = 0

    def __post_init__(self) -> None:
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise ValueError("amplitude must be non-negative and finite")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.realization_index < 0:
            raise ValueError("realization_index must be non-negative")


def magnon_sigma(trap: TrapConfig, spec: ChainSpec, omega: float | None = None) -> float:
    """Packet width sigma = dx * sqrt(2 J / (hbar * omega)). omega defaults to omega0."""
    w = trap.omega0 if omega is None else omega
    if w <= 0:
        raise ValueError("frequency must be positive")
    return spec.lattice_spacing * math.sqrt(2.0 * spec.coupling / (HBAR * w))


def resolve_truncation_radius(trap: TrapConfig, spec: ChainSpec) -> float:
    """Explicit radius if configured, otherwise the 5 sigma default."""
    if trap.truncation_radius is not None:
        return trap.truncation_radius
    return 5.0 * magnon_sigma(trap, spec)


def check_mapping_validity(trap: TrapConfig, spec: ChainSpec) -> None:
    """Warn when the trap frequency leaves the regime where the continuum
    oscillator picture is trustworthy (omega0 approaching the band scale 2J/hbar)."""
    band = 2.0 * spec.coupling / HBAR
    if trap.omega0 >= band:
        warnings.warn(
            f"omega0 = {trap.omega0} is not small against 2J/hbar = {band}; "
            "the harmonic mapping behind the control design degrades here",
            MappingValidityWarning,
            stacklevel=2,
        )


def validate_geometry(trap: TrapConfig, spec: ChainSpec) -> None:
    """Both trap endpoints must lie strictly inside the chain."""
    for label, x in (("x_start", trap.x_start), ("x_start + distance", trap.x_target)):
        if not 0.0 < x < spec.length:
            raise ValueError(
                f"{label} = {x} falls outside the open chain interval (0, {spec.length})"
            )


def static_bands(
    spec: ChainSpec, diagonal_bonds: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and first off-diagonal of the static Hamiltonian.

    Diagonal at site n is -(J_{n-1} + J_n) with the convention J_0 = J_N = 0;
    hopping between n and n+1 is +J_n. diagonal_bonds overrides the couplings
    entering the diagonal only; the hopping-only disorder convention passes
    uniform couplings here while the hopping stays disordered.
    """
    hop = spec.bonds()
    dbonds = hop if diagonal_bonds is None else np.asarray(diagonal_bonds, dtype=float)
    if dbonds.shape != hop.shape:
        raise ValueError("diagonal_bonds must have one entry per bond")
    diag = -(np.concatenate(([0.0], dbonds)) + np.concatenate((dbonds, [0.0])))
    return diag, hop.copy()


def build_static_hamiltonian(
    spec: ChainSpec, diagonal_bonds: np.ndarray | None = None
) -> np.ndarray:
    """Dense N x N static Hamiltonian; symmetric tridiagonal by construction."""
    diag, off = static_bands(spec, diagonal_bonds)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def field_profile(t: float, protocol, trap: TrapConfig, spec: ChainSpec) -> np.ndarray:
    """Diagonal field B_n(t) of the moving truncated parabola.

    B_n = -(hbar^2 w2(t) / 4J) * ((x_n - X0(t)) / dx)^2 inside the truncation
    radius and exactly zero outside (hard cutoff, no continuity offset).
    Negative w2 values are accepted; the field then flips sign.
    """
    if t < 0.0 or t > protocol.duration:
        raise ValueError(f"t = {t} outside protocol window [0, {protocol.duration}]")
    x0 = protocol.trajectory(t)
    w2 = protocol.squared_frequency(t)
    radius = resolve_truncation_radius(trap, spec)
    delta = spec.site_positions() - x0
    field = -(HBAR**2 * w2 / (4.0 * spec.coupling)) * (delta / spec.lattice_spacing) ** 2
    field[np.abs(delta) > radius] = 0.0
    return field


def disorder_stream_seed(dis: DisorderSpec) -> int:
    """64-bit identifier of the realization's random stream, for result records."""
    ss = np.random.SeedSequence(entropy=dis.master_seed, spawn_key=(dis.realization_index,))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_disordered_couplings(spec: ChainSpec, dis: DisorderSpec) -> np.ndarray:
    """Draw J_n = J (1 + eps_n) with eps_n uniform on [-amplitude, amplitude].

    The stream is PCG64 seeded via SeedSequence(master_seed, spawn_key=(index,)),
    one independent stream per realization. The generator choice is part of the
    reproducibility contract: identical (seed, index) yields identical couplings
    across runs, platforms, and any parallel execution order.
    """
    ss = np.random.SeedSequence(entropy=dis.master_seed, spawn_key=(dis.realization_index,))
    rng = np.random.Generator(np.random.PCG64(ss))
    eps = rng.uniform(-dis.amplitude, dis.amplitude, spec.n_sites - 1)
    return spec.coupling * (1.0 + eps)
