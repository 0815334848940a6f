"""Norm-preserving propagation of the single-excitation dynamics.

Exponential midpoint stepping: each step applies exp(-i dt H(t + dt/2)) to the
state. The exponential action is expanded in Chebyshev polynomials of the
tridiagonal Hamiltonian rescaled onto [-1, 1] by Gershgorin-style bounds, with
Bessel-function coefficients truncated at machine precision. Each step is
therefore unitary to rounding; the dt error comes solely from the midpoint
freezing of the controls and is second order, checkable by an optional
step-halving pass.

Batched propagation evolves R independent states with per-row tridiagonals in
one (R, N) array; a single evolution is the R = 1 case of the same kernel, so
serial and batched results agree exactly for identical spectral bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import jv

from .chain import (
    HBAR,
    ChainSpec,
    TrapConfig,
    check_mapping_validity,
    resolve_truncation_radius,
    static_bands,
    validate_geometry,
)
from .control import ControlProtocol
from .states import WaveState, fidelity

COEFF_CUTOFF = 1.0e-16  # Bessel tail cut; keeps every step unitary to rounding
NORM_ABORT = 1.0e-6
BOUND_SAMPLES = 2001
BOUND_MARGIN = 1.01


class NormDriftError(RuntimeError):
    """State norm left the unitarity window; the step size is too coarse."""


class NonFiniteStateError(RuntimeError):
    """Amplitudes stopped being finite during propagation."""


class ConvergenceError(RuntimeError):
    """Step-halving verification found the requested tolerance unmet."""


@dataclass(frozen=True)
class PropagationPlan:
    """Integration window, target step, recording cadence, and tolerance."""

    t_final: float
    step: float = 0.02
    record_stride: int = 1
    tolerance: float = 1.0e-8
    verify_halving: bool = False

    def __post_init__(self) -> None:
        if not (self.t_final >= 0 and math.isfinite(self.t_final)):
            raise ValueError("t_final must be non-negative and finite")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError("step must be positive and finite")
        if self.t_final > 0 and self.step > self.t_final:
            raise ValueError("step must not exceed t_final")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class FidelityTrace:
    """Recorded overlap-with-target and norm series of one evolution."""

    times: np.ndarray
    fidelities: np.ndarray
    norms: np.ndarray

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelities[-1])

    def __iter__(self):
        return iter(zip(self.times, self.fidelities))


@njit(cache=True)
def _chebyshev_step(psi, dgc, offh, coef):  # pragma: no cover - numba compiled
    # psi: (R, N) states; dgc: (R, N) scaled diagonal; offh: (R, N-1) scaled
    # hopping; coef: Chebyshev coefficients with the global phase folded in.
    R, N = psi.shape
    out = np.empty_like(psi)
    t0 = np.empty(N, np.complex128)
    t1 = np.empty(N, np.complex128)
    t2 = np.empty(N, np.complex128)
    for r in range(R):
        for i in range(N):
            t0[i] = psi[r, i]
        t1[0] = dgc[r, 0] * t0[0] + offh[r, 0] * t0[1]
        for i in range(1, N - 1):
            t1[i] = dgc[r, i] * t0[i] + offh[r, i - 1] * t0[i - 1] + offh[r, i] * t0[i + 1]
        t1[N - 1] = dgc[r, N - 1] * t0[N - 1] + offh[r, N - 2] * t0[N - 2]
        for i in range(N):
            out[r, i] = coef[0] * t0[i] + coef[1] * t1[i]
        for k in range(2, coef.shape[0]):
            t2[0] = 2.0 * (dgc[r, 0] * t1[0] + offh[r, 0] * t1[1]) - t0[0]
            for i in range(1, N - 1):
                t2[i] = (
                    2.0 * (dgc[r, i] * t1[i] + offh[r, i - 1] * t1[i - 1] + offh[r, i] * t1[i + 1])
                    - t0[i]
                )
            t2[N - 1] = 2.0 * (dgc[r, N - 1] * t1[N - 1] + offh[r, N - 2] * t1[N - 2]) - t0[N - 1]
            for i in range(N):
                out[r, i] += coef[k] * t2[i]
                t0[i] = t1[i]
                t1[i] = t2[i]
    return out


def _chebyshev_coefficients(z: float, c: float, dt: float) -> np.ndarray:
    """Coefficients of exp(-i dt (c + h X)) in Chebyshev polynomials of X.

    Order grows with z = h dt until the Bessel tail drops below machine
    precision, plus two guard terms.
    """
    K = 4
    while abs(jv(K, z)) > COEFF_CUTOFF:
        K += 1
    K += 2
    k = np.arange(K + 1)
    coef = np.where(k == 0, 1.0, 2.0) * ((-1j) ** k) * jv(k, z)
    return coef * np.exp(-1j * c * dt)


def _frequency_window(protocols: Sequence[ControlProtocol], t_final: float) -> tuple[float, float]:
    """Min and max of omega^2 over all protocols, sampled on a dense grid.

    The shipped protocols are constant or low-order polynomials in t, so a
    2001-point sample plus the spectral margin below bounds them safely.
    """
    ts = np.linspace(0.0, t_final, BOUND_SAMPLES)
    lo, hi = math.inf, -math.inf
    for p in protocols:
        for t in ts:
            w2 = p.squared_frequency(float(t))
            if w2 < lo:
                lo = w2
            if w2 > hi:
                hi = w2
    return lo, hi


def _spectral_window(
    diag_rows: np.ndarray,
    off_rows: np.ndarray,
    w2_lo: float,
    w2_hi: float,
    field_scale: float,
) -> tuple[float, float]:
    # field_scale = (hbar^2 / 4J) (radius / dx)^2, the largest |B_n| per unit w2
    b_lo = -max(w2_hi, 0.0) * field_scale
    b_hi = -min(w2_lo, 0.0) * field_scale
    hop = np.abs(off_rows).max() if off_rows.size else 0.0
    lo = float(diag_rows.min()) + b_lo - 2.0 * hop
    hi = float(diag_rows.max()) + b_hi + 2.0 * hop
    c = 0.5 * (hi + lo)
    h = 0.5 * (hi - lo) * BOUND_MARGIN + 1.0e-12
    return c, h


class _Stepper:
    """Shared state of one propagation run over a batch of rows."""

    def __init__(
        self,
        psi0: np.ndarray,
        spec: ChainSpec,
        trap: TrapConfig,
        protocols: Sequence[ControlProtocol],
        plan: PropagationPlan,
        bond_rows: np.ndarray | None,
        diagonal_bond_rows: np.ndarray | None,
    ):
        R, N = psi0.shape
        if N != spec.n_sites:
            raise ValueError("state length does not match the chain")
        if len(protocols) not in (1, R):
            raise ValueError("need one protocol or one per row")
        for p in protocols:
            if p.duration < plan.t_final - 1.0e-12:
                raise ValueError(
                    f"protocol duration {p.duration} shorter than t_final {plan.t_final}"
                )
        self.spec = spec
        self.trap = trap
        self.protocols = list(protocols)
        self.plan = plan
        self.positions = spec.site_positions()
        self.radius = resolve_truncation_radius(trap, spec)
        self.field_pref = HBAR**2 / (4.0 * spec.coupling * spec.lattice_spacing**2)

        if bond_rows is None:
            hop = np.broadcast_to(spec.bonds(), (R, N - 1))
        else:
            hop = np.asarray(bond_rows, dtype=float)
            if hop.shape != (R, N - 1):
                raise ValueError("bond_rows must have shape (R, N-1)")
        dbonds = hop if diagonal_bond_rows is None else np.asarray(diagonal_bond_rows, float)
        if dbonds.shape != hop.shape:
            raise ValueError("diagonal_bond_rows must match bond_rows in shape")
        self.diag_rows = -(
            np.concatenate((np.zeros((R, 1)), dbonds), axis=1)
            + np.concatenate((dbonds, np.zeros((R, 1))), axis=1)
        )
        self.hop_rows = np.ascontiguousarray(hop)

        n_steps = max(1, int(round(plan.t_final / plan.step))) if plan.t_final > 0 else 0
        self.n_steps = n_steps
        self.dt = plan.t_final / n_steps if n_steps else 0.0

        if n_steps:
            w2_lo, w2_hi = _frequency_window(self.protocols, plan.t_final)
            field_scale = self.field_pref * self.radius**2
            self.c, self.h = _spectral_window(self.diag_rows, hop, w2_lo, w2_hi, field_scale)
            self.coef = np.ascontiguousarray(
                _chebyshev_coefficients(self.h * self.dt / HBAR, self.c / HBAR, self.dt)
            )
            self.offh = np.ascontiguousarray(self.hop_rows / self.h)

    def field_rows(self, t: float) -> np.ndarray:
        x0 = np.array([p.trajectory(t) for p in self.protocols], dtype=float)
        w2 = np.array([p.squared_frequency(t) for p in self.protocols], dtype=float)
        delta = self.positions[None, :] - x0[:, None]
        field = -self.field_pref * w2[:, None] * delta**2
        field[np.abs(delta) > self.radius] = 0.0
        return field

    def advance(self, psi: np.ndarray, j: int) -> np.ndarray:
        t_mid = (j + 0.5) * self.dt
        dgc = (self.diag_rows + self.field_rows(t_mid) - self.c) / self.h
        return _chebyshev_step(psi, dgc, self.offh, self.coef)

    def check(self, psi: np.ndarray, j: int) -> None:
        norms2 = np.einsum("ri,ri->r", psi.real, psi.real) + np.einsum(
            "ri,ri->r", psi.imag, psi.imag
        )
        if not np.all(np.isfinite(norms2)):
            raise NonFiniteStateError(
                f"non-finite amplitudes after step {j + 1} (t = {(j + 1) * self.dt:.6g})"
            )
        drift = float(np.max(np.abs(np.sqrt(norms2) - 1.0)))
        if drift > NORM_ABORT:
            raise NormDriftError(
                f"norm drift {drift:.3e} exceeds {NORM_ABORT} after step {j + 1} "
                f"(t = {(j + 1) * self.dt:.6g}); reduce the plan step below {self.plan.step}"
            )


def _as_batch(psi0: WaveState) -> np.ndarray:
    return np.ascontiguousarray(psi0.amplitudes[None, :], dtype=complex)


def evolve_batch_final(
    amplitudes: np.ndarray,
    spec: ChainSpec,
    trap: TrapConfig,
    protocols: ControlProtocol | Sequence[ControlProtocol],
    plan: PropagationPlan,
    bond_rows: np.ndarray | None = None,
    diagonal_bond_rows: np.ndarray | None = None,
) -> np.ndarray:
    """Propagate R independent rows to t_final and return the final (R, N) array.

    Rows may differ in protocol (one per row) and in couplings (bond_rows for
    the hopping, diagonal_bond_rows to decouple the diagonal for the
    hopping-only disorder convention). All rows share the chain geometry, the
    trap truncation radius, and the integration grid, which is what makes
    batched and per-row execution agree deterministically.
    """
    psi = np.ascontiguousarray(amplitudes, dtype=complex)
    if psi.ndim != 2:
        raise ValueError("amplitudes must be (R, N)")
    if psi.shape[0] == 0:
        return psi.copy()
    if isinstance(protocols, ControlProtocol):
        protocols = [protocols]
    stepper = _Stepper(psi, spec, trap, list(protocols), plan, bond_rows, diagonal_bond_rows)
    for j in range(stepper.n_steps):
        psi = stepper.advance(psi, j)
        stepper.check(psi, j)
    return psi


def evolve(
    psi0: WaveState,
    chain: ChainSpec,
    trap: TrapConfig,
    protocol: ControlProtocol,
    plan: PropagationPlan,
) -> list[tuple[float, WaveState]]:
    """Integrate one state and record (time, WaveState) at the plan stride.

    The target step is adjusted to divide t_final exactly; t = 0 and t =
    t_final are always recorded. Recorded states carry their raw amplitudes
    (no renormalization), so their norms witness the actual drift.
    """
    check_mapping_validity(trap, chain)
    validate_geometry(trap, chain)
    psi = _as_batch(psi0)
    stepper = _Stepper(psi, chain, trap, [protocol], plan, None, None)
    records: list[tuple[float, WaveState]] = [(0.0, WaveState(psi[0].copy(), 0.0))]
    for j in range(stepper.n_steps):
        psi = stepper.advance(psi, j)
        stepper.check(psi, j)
        if (j + 1) % plan.record_stride == 0 or j + 1 == stepper.n_steps:
            t = (j + 1) * stepper.dt
            records.append((t, WaveState(psi[0].copy(), t)))
    if plan.verify_halving:
        _verify_by_halving(psi0, chain, trap, protocol, plan, records[-1][1])
    return records


def _verify_by_halving(
    psi0: WaveState,
    chain: ChainSpec,
    trap: TrapConfig,
    protocol: ControlProtocol,
    plan: PropagationPlan,
    full_step_final: WaveState,
) -> None:
    if plan.t_final == 0:
        return
    half = PropagationPlan(
        t_final=plan.t_final,
        step=plan.step / 2.0,
        record_stride=plan.record_stride,
        tolerance=plan.tolerance,
        verify_halving=False,
    )
    ref = evolve_batch_final(_as_batch(psi0), chain, trap, protocol, half)
    agreement = fidelity(full_step_final, WaveState(ref[0], plan.t_final))
    if agreement < 1.0 - plan.tolerance:
        raise ConvergenceError(
            f"step-halving agreement {agreement!r} below 1 - {plan.tolerance}; "
            f"reduce the plan step below {plan.step}"
        )


def evolve_fidelity(
    psi0: WaveState,
    target: WaveState,
    chain: ChainSpec,
    trap: TrapConfig,
    protocol: ControlProtocol,
    plan: PropagationPlan,
) -> FidelityTrace:
    """Like evolve, but record overlap with a fixed target plus the norm."""
    if target.n_sites != psi0.n_sites:
        raise ValueError("target length does not match the initial state")
    check_mapping_validity(trap, chain)
    validate_geometry(trap, chain)
    psi = _as_batch(psi0)
    stepper = _Stepper(psi, chain, trap, [protocol], plan, None, None)
    tgt = target.amplitudes
    times = [0.0]
    fids = [min(float(abs(np.vdot(tgt, psi[0])) ** 2), 1.0)]
    norms = [float(np.linalg.norm(psi[0]))]
    for j in range(stepper.n_steps):
        psi = stepper.advance(psi, j)
        stepper.check(psi, j)
        if (j + 1) % plan.record_stride == 0 or j + 1 == stepper.n_steps:
            times.append((j + 1) * stepper.dt)
            fids.append(min(float(abs(np.vdot(tgt, psi[0])) ** 2), 1.0))
            norms.append(float(np.linalg.norm(psi[0])))
    if plan.verify_halving:
        _verify_by_halving(
            psi0, chain, trap, protocol, plan, WaveState(psi[0].copy(), plan.t_final)
        )
    return FidelityTrace(np.asarray(times), np.asarray(fids), np.asarray(norms))


def warm_kernel() -> None:
    """Trigger the jit compile on a toy problem.

    Called once before worker pools fork so children inherit the compiled
    kernel instead of racing on the on-disk cache.
    """
    psi = np.zeros((1, 3), dtype=complex)
    psi[0, 0] = 1.0
    dgc = np.zeros((1, 3))
    offh = np.zeros((1, 2))
    coef = np.array([1.0 + 0.0j, 0.0j])  # kernel reads coef[1] unconditionally
    _chebyshev_step(psi, dgc, offh, coef)
