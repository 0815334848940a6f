"""Continuum reference for the chain dynamics.

The mapped problem is a particle in a moving harmonic trap, so the centroid
obeys x_ddot + omega^2(t) (x - X0(t)) = 0 independent of the mass, and
identical-width Gaussian states overlap in closed form. Integrating the
centroid equation and comparing against the chain's position expectation gives
an operational measure of how far the discrete dynamics strays from the
continuum picture the controls were designed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import HBAR, ChainSpec
from .control import ControlProtocol
from .states import WaveState


@dataclass(frozen=True)
class ClassicalState:
    position: float
    velocity: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.position) and math.isfinite(self.velocity)):
            raise ValueError("classical state must be finite")


def classical_trajectory(
    protocol: ControlProtocol,
    x0: float,
    v0: float,
    t_f: float,
    dt: float = 0.01,
) -> list[tuple[float, ClassicalState]]:
    """Integrate x_ddot = -omega^2(t) (x - X0(t)) by classic RK4.

    Fourth-order accurate in dt; the step is adjusted to divide t_f exactly.
    Aborts on non-finite values (runaway inverted-trap phases can blow up).
    """
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if protocol.duration < t_f - 1.0e-12:
        raise ValueError(f"protocol duration {protocol.duration} shorter than t_f {t_f}")
    n = max(1, int(round(t_f / dt)))
    step = t_f / n

    def acc(t: float, x: float) -> float:
        return -protocol.squared_frequency(t) * (x - protocol.trajectory(t))

    out = [(0.0, ClassicalState(float(x0), float(v0)))]
    x, v = float(x0), float(v0)
    for j in range(n):
        t = j * step
        k1x = v
        k1v = acc(t, x)
        k2x = v + 0.5 * step * k1v
        k2v = acc(t + 0.5 * step, x + 0.5 * step * k1x)
        k3x = v + 0.5 * step * k2v
        k3v = acc(t + 0.5 * step, x + 0.5 * step * k2x)
        k4x = v + step * k3v
        k4v = acc(t + step, x + step * k3x)
        x += step * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
        v += step * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
        if not (math.isfinite(x) and math.isfinite(v)):
            raise RuntimeError(f"classical trajectory blew up at t = {(j + 1) * step:.6g}")
        out.append(((j + 1) * step, ClassicalState(x, v)))
    return out


def continuum_fidelity(delta_x: float, delta_p: float, sigma: float) -> float:
    """Modulus-squared overlap of two identical-width Gaussians offset in phase space:
    exp(-delta_x^2 / (2 sigma^2) - delta_p^2 sigma^2 / (2 hbar^2))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return math.exp(
        -(delta_x**2) / (2.0 * sigma**2) - (delta_p**2) * sigma**2 / (2.0 * HBAR**2)
    )


def ehrenfest_deviation(
    trajectory: list[tuple[float, WaveState]],
    classical: list[tuple[float, ClassicalState]],
    spec: ChainSpec,
) -> list[tuple[float, float]]:
    """|<x>_chain - x_classical| over the chain's recording times.

    The classical series is linearly interpolated onto the chain grid; chain
    times outside the classical window are rejected rather than extrapolated.
    """
    if not trajectory or not classical:
        raise ValueError("both trajectories must be non-empty")
    times_c = np.array([t for t, _ in classical])
    xs_c = np.array([st.position for _, st in classical])
    span = max(times_c[-1] - times_c[0], 1.0)
    slack = 1.0e-9 * span
    positions = spec.site_positions()
    out: list[tuple[float, float]] = []
    for t, state in trajectory:
        if t < times_c[0] - slack or t > times_c[-1] + slack:
            raise ValueError(
                f"chain time {t} outside the classical window [{times_c[0]}, {times_c[-1]}]"
            )
        mean_x = float(np.dot(positions, np.abs(state.amplitudes) ** 2))
        x_ref = float(np.interp(t, times_c, xs_c))
        out.append((t, abs(mean_x - x_ref)))
    return out
