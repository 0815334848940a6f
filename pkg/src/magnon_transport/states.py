"""Gaussian magnon wavepackets and the observables computed from them."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec, MappingValidityWarning, TrapConfig, check_mapping_validity, magnon_sigma

NORM_TOL = 1.0e-9


@dataclass(frozen=True)
class WaveState:
    """Complex site amplitudes in the one-flip basis, unit norm within 1e-9."""

    amplitudes: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self) -> None:
        arr = np.array(self.amplitudes, dtype=complex)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("amplitudes must be a non-empty 1-d vector")
        if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
            raise ValueError("amplitudes must be finite")
        nrm = float(np.linalg.norm(arr))
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {nrm!r} deviates from 1 beyond {NORM_TOL}")
        arr.flags.writeable = False
        object.__setattr__(self, "amplitudes", arr)

    @property
    def n_sites(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def gaussian_packet(
    center: float,
    trap: TrapConfig,
    spec: ChainSpec,
    sigma: float | None = None,
    time_stamp: float = 0.0,
) -> WaveState:
    """Normalized Gaussian amplitudes exp(-(x_n - center)^2 / 2 sigma^2).

    sigma defaults to the width the trap imposes through the mapping; an
    explicit value overrides it. The packet spans all sites (no support
    cutoff); amplitudes below underflow are exactly zero and harmless.
    """
    if not 0.0 <= center <= spec.length:
        raise ValueError(f"center {center} outside the chain [0, {spec.length}]")
    check_mapping_validity(trap, spec)
    width = magnon_sigma(trap, spec) if sigma is None else sigma
    if width <= 0:
        raise ValueError("sigma must be positive")
    x = spec.site_positions()
    b = np.exp(-((x - center) ** 2) / (2.0 * width * width))
    nrm = float(np.linalg.norm(b))
    if nrm == 0.0:
        raise ValueError("packet has no support on the chain")
    b /= nrm
    if int(np.count_nonzero(b > 1.0e-6)) < 3:
        warnings.warn(
            f"packet width {width} leaves fewer than 3 sites with amplitude above 1e-6; "
            "a packet this localized is outside the regime the control design assumes",
            MappingValidityWarning,
            stacklevel=2,
        )
    return WaveState(b.astype(complex), time_stamp)


def fidelity(a: WaveState, b: WaveState) -> float:
    """Modulus-squared overlap |<a|b>|^2; invariant under global phases."""
    if a.n_sites != b.n_sites:
        raise ValueError(f"state lengths differ: {a.n_sites} vs {b.n_sites}")
    value = float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    return min(value, 1.0)  # guards rounding overshoot just above 1


def local_magnetization(psi: WaveState) -> np.ndarray:
    """Per-site <sigma_z>: 2|psi_n|^2 - 1 in the one-flip sector."""
    return 2.0 * np.abs(psi.amplitudes) ** 2 - 1.0


def packet_center(psi: WaveState, spec: ChainSpec) -> float:
    """Position expectation value of the excitation."""
    if psi.n_sites != spec.n_sites:
        raise ValueError("state length does not match the chain")
    weights = np.abs(psi.amplitudes) ** 2
    return float(np.dot(spec.site_positions(), weights))
