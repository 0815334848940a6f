"""Control protocols for trap transport.

Three families: a constant-frequency linear ramp, the closed-form
shortcut trajectory obtained from the minimal quintic transport ansatz, and
general invariant-based inverse engineering that turns a pair of auxiliary
functions (x_c, rho) into physical controls (omega^2, X0) via

    omega^2(t) = omega0^2 / rho^4 - rho_ddot / rho
    X0(t)      = x_c_ddot / omega^2(t) + x_c.

Protocols are evaluable functions plus metadata, not sampled tables; the
propagator decides the sampling cadence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .chain import TrapConfig


class ControlSingularityError(ValueError):
    """Inverse engineering hit omega^2 ~ 0 where the transport term needs to divide by it."""

    def __init__(self, time: float, squared_frequency: float):
        self.time = time
        self.squared_frequency = squared_frequency
        super().__init__(
            f"omega^2(t) = {squared_frequency:.3e} at t = {time} is inside the "
            "division floor while x_c acceleration is nonzero"
        )


@dataclass(frozen=True)
class ControlProtocol:
    """Trap trajectory X0(t) and squared frequency omega^2(t) over [0, duration]."""

    duration: float
    trajectory: Callable[[float], float]
    squared_frequency: Callable[[float], float]
    label: str
    metadata: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError("duration must be positive and finite")


@dataclass(frozen=True)
class AuxiliaryAnsatz:
    """Auxiliary transport and scaling functions with analytic derivatives.

    Derivatives are supplied in closed form rather than by numerical
    differentiation; the frequency law involves rho_ddot and finite differences
    would inject avoidable noise into the control.
    """

    x_c: Callable[[float], float]
    x_c_dot: Callable[[float], float]
    x_c_ddot: Callable[[float], float]
    rho: Callable[[float], float]
    rho_dot: Callable[[float], float]
    rho_ddot: Callable[[float], float]
    gamma: float
    x_start: float
    x_target: float


@dataclass(frozen=True)
class BoundaryCondition:
    name: str
    value: float
    target: float
    passed: bool

    @property
    def residual(self) -> float:
        return abs(self.value - self.target)


@dataclass(frozen=True)
class BoundaryReport:
    """Endpoint values of (x_c, rho) and their first two derivatives."""

    conditions: tuple[BoundaryCondition, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failures(self) -> tuple[BoundaryCondition, ...]:
        return tuple(c for c in self.conditions if not c.passed)

    def summary(self) -> str:
        parts = [
            f"{c.name}: value={c.value:.6e} target={c.target:.6e} "
            f"{'ok' if c.passed else 'FAIL'}"
            for c in self.conditions
        ]
        return "; ".join(parts)


def _quintic(s: float) -> float:
    return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _quintic_d1(s: float) -> float:
    return 30.0 * s * s * (s - 1.0) ** 2


def _quintic_d2(s: float) -> float:
    return 60.0 * s * (2.0 * s - 1.0) * (s - 1.0)


def linear_ramp(trap: TrapConfig, t_f: float) -> ControlProtocol:
    """Constant-frequency trap dragged at uniform speed from x_start to x_target."""
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    x_a, d, w2 = trap.x_start, trap.distance, trap.omega0**2

    def trajectory(t: float) -> float:
        return x_a + (t / t_f) * d

    def squared_frequency(t: float) -> float:
        return w2

    meta = {"omega0": trap.omega0, "t_f": t_f, "x_start": x_a, "distance": d}
    return ControlProtocol(t_f, trajectory, squared_frequency, "linear", meta)


def sta_polynomial(trap: TrapConfig, t_f: float) -> ControlProtocol:
    """Closed-form shortcut trajectory at constant frequency.

    X0(s) = x_start + d * [6s^5 - 15s^4 + 10s^3 + k s (1 - 3s + 2s^2)] with
    s = t/t_f and k = 60 / (omega0 t_f)^2. The correction term grows as t_f
    shrinks and the trajectory may overshoot the transport interval; it is
    deliberately not clamped.
    """
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    x_a, d, w2 = trap.x_start, trap.distance, trap.omega0**2
    k = 60.0 / (w2 * t_f * t_f)

    def trajectory(t: float) -> float:
        s = t / t_f
        return x_a + d * (_quintic(s) + k * s * (1.0 - 3.0 * s + 2.0 * s * s))

    def squared_frequency(t: float) -> float:
        return w2

    meta = {
        "omega0": trap.omega0,
        "t_f": t_f,
        "x_start": x_a,
        "distance": d,
        "correction_weight": k,
    }
    return ControlProtocol(t_f, trajectory, squared_frequency, "sta", meta)


def polynomial_xc(trap: TrapConfig, t_f: float) -> AuxiliaryAnsatz:
    """Minimal quintic ansatz for the transport auxiliary, with a matching
    quintic bridge for rho when the final frequency differs from omega0."""
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    x_a, d = trap.x_start, trap.distance
    gamma = trap.gamma

    def x_c(t: float) -> float:
        return x_a + d * _quintic(t / t_f)

    def x_c_dot(t: float) -> float:
        return d * _quintic_d1(t / t_f) / t_f

    def x_c_ddot(t: float) -> float:
        return d * _quintic_d2(t / t_f) / (t_f * t_f)

    if gamma == 1.0:

        def rho(t: float) -> float:
            return 1.0

        def rho_dot(t: float) -> float:
            return 0.0

        def rho_ddot(t: float) -> float:
            return 0.0

    else:
        dg = gamma - 1.0

        def rho(t: float) -> float:
            return 1.0 + dg * _quintic(t / t_f)

        def rho_dot(t: float) -> float:
            return dg * _quintic_d1(t / t_f) / t_f

        def rho_ddot(t: float) -> float:
            return dg * _quintic_d2(t / t_f) / (t_f * t_f)

    return AuxiliaryAnsatz(
        x_c, x_c_dot, x_c_ddot, rho, rho_dot, rho_ddot, gamma, x_a, trap.x_target
    )


def verify_boundary_conditions(
    ansatz: AuxiliaryAnsatz, t_f: float, tol: float = 1.0e-10
) -> BoundaryReport:
    """Evaluate every endpoint condition the inverse engineering relies on.

    Twelve values are reported: x_c, x_c_dot, x_c_ddot and rho, rho_dot,
    rho_ddot at both t = 0 and t = t_f, against targets (x_start, 0, 0,
    x_target, 0, 0, 1, 0, 0, gamma, 0, 0).
    """
    checks = (
        ("x_c(0)", ansatz.x_c(0.0), ansatz.x_start),
        ("x_c_dot(0)", ansatz.x_c_dot(0.0), 0.0),
        ("x_c_ddot(0)", ansatz.x_c_ddot(0.0), 0.0),
        ("x_c(t_f)", ansatz.x_c(t_f), ansatz.x_target),
        ("x_c_dot(t_f)", ansatz.x_c_dot(t_f), 0.0),
        ("x_c_ddot(t_f)", ansatz.x_c_ddot(t_f), 0.0),
        ("rho(0)", ansatz.rho(0.0), 1.0),
        ("rho_dot(0)", ansatz.rho_dot(0.0), 0.0),
        ("rho_ddot(0)", ansatz.rho_ddot(0.0), 0.0),
        ("rho(t_f)", ansatz.rho(t_f), ansatz.gamma),
        ("rho_dot(t_f)", ansatz.rho_dot(t_f), 0.0),
        ("rho_ddot(t_f)", ansatz.rho_ddot(t_f), 0.0),
    )
    conditions = tuple(
        BoundaryCondition(name, float(value), float(target), abs(value - target) <= tol)
        for name, value, target in checks
    )
    return BoundaryReport(conditions, tol)


def inverse_engineer(
    ansatz: AuxiliaryAnsatz,
    trap: TrapConfig,
    t_f: float,
    eps_omega: float = 1.0e-6,
    bc_tol: float = 1.0e-8,
) -> ControlProtocol:
    """Turn a verified auxiliary ansatz into physical controls.

    The transport law divides by omega^2(t); wherever |omega^2| falls below
    eps_omega while the transport acceleration is nonzero, evaluation raises
    ControlSingularityError carrying the offending time.
    """
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    report = verify_boundary_conditions(ansatz, t_f, tol=bc_tol)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures())
        raise ValueError(f"ansatz violates boundary conditions ({names}); {report.summary()}")
    w0sq = trap.omega0**2

    def squared_frequency(t: float) -> float:
        r = ansatz.rho(t)
        return w0sq / r**4 - ansatz.rho_ddot(t) / r

    def trajectory(t: float) -> float:
        w2 = squared_frequency(t)
        acc = ansatz.x_c_ddot(t)
        if abs(w2) < eps_omega:
            if acc != 0.0:
                raise ControlSingularityError(t, w2)
            return ansatz.x_c(t)
        return acc / w2 + ansatz.x_c(t)

    meta = {
        "omega0": trap.omega0,
        "omega_f": trap.omega_final,
        "gamma": ansatz.gamma,
        "t_f": t_f,
        "x_start": ansatz.x_start,
        "distance": ansatz.x_target - ansatz.x_start,
        "eps_omega": eps_omega,
    }
    return ControlProtocol(t_f, trajectory, squared_frequency, "inverse", meta)


def time_reversed(protocol: ControlProtocol) -> ControlProtocol:
    """Same controls traversed backwards: X0'(t) = X0(t_f - t), likewise omega^2."""
    t_f = protocol.duration

    def trajectory(t: float) -> float:
        return protocol.trajectory(t_f - t)

    def squared_frequency(t: float) -> float:
        return protocol.squared_frequency(t_f - t)

    return ControlProtocol(
        t_f, trajectory, squared_frequency, protocol.label + "-reversed", dict(protocol.metadata)
    )


def make_protocol(name: str, trap: TrapConfig, t_f: float) -> ControlProtocol:
    """Construct a protocol by config name: 'linear', 'sta', or 'inverse'.

    'inverse' runs the quintic ansatz through the general engineering path and
    honors omega_f != omega0; the other two keep the frequency constant.
    """
    if name == "linear":
        return linear_ramp(trap, t_f)
    if name == "sta":
        return sta_polynomial(trap, t_f)
    if name == "inverse":
        return inverse_engineer(polynomial_xc(trap, t_f), trap, t_f)
    raise ValueError(f"unknown protocol name {name!r}; expected linear, sta, or inverse")
