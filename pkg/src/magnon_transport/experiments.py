"""Experiment runners: single evolutions, duration sweeps, (duration, distance)
fidelity maps with speed-limit extraction, disorder ensembles, and field dumps.

Determinism contract: identical config and seed produce byte-identical CSV no
matter how many workers run the job. Work is cut into chunks whose composition
depends only on the config (never on worker count), results are merged in
sorted row order, floats are written with full round-trip precision, and all
timing information goes to metadata.json instead of the CSV files.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import svg
from .chain import (
    HBAR,
    ChainSpec,
    DisorderSpec,
    TrapConfig,
    disorder_stream_seed,
    field_profile,
    magnon_sigma,
    resolve_truncation_radius,
    sample_disordered_couplings,
    validate_geometry,
)
from .control import make_protocol, sta_polynomial
from .propagator import PropagationPlan, evolve, evolve_batch_final, warm_kernel
from .states import gaussian_packet, local_magnetization

# Chunk size for ensemble realizations. Fixed so that chunk composition, and
# therefore the floating-point reduction order, never depends on worker count.
ENSEMBLE_CHUNK = 64

GROUP_VELOCITY_FACTOR = 2.0  # band-edge packet speed, units dx J / hbar
LIEB_ROBINSON_FACTOR = 6.0  # information-propagation bound, same units

HEATMAP_HEADER = ["t", "site", "x_n", "sz"]
FIDELITY_HEADER = ["t", "fidelity", "norm"]
SWEEP_HEADER = ["protocol", "omega0", "tf", "d", "fidelity"]
ENSEMBLE_HEADER = ["delta", "realization", "seed", "fidelity"]
SUMMARY_HEADER = ["delta", "mean_fidelity", "std_fidelity", "count"]
FIELD_HEADER = ["t", "site", "x_n", "field"]
TRANSITION_HEADER = ["omega0", "d", "t_star"]
SPEED_HEADER = ["omega0", "v_b", "v_group", "v_lieb_robinson"]


class ConfigError(ValueError):
    """Configuration document rejected; the message names the offending key."""


# ---------------------------------------------------------------------------
# Run configuration


@dataclass(frozen=True)
class ProtocolSettings:
    name: str = "sta"
    t_f: float = 200.0

    def __post_init__(self) -> None:
        if self.name not in ("linear", "sta", "inverse"):
            raise ValueError(f"unknown protocol name {self.name!r}")
        if not (self.t_f > 0 and math.isfinite(self.t_f)):
            raise ValueError("t_f must be positive and finite")


@dataclass(frozen=True)
class PlanSettings:
    dt: float = 0.02
    record_stride: int = 50
    tolerance: float = 1.0e-8

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be positive")

    def plan(self, t_final: float, record_stride: int | None = None) -> PropagationPlan:
        stride = self.record_stride if record_stride is None else record_stride
        return PropagationPlan(t_final, self.dt, stride, self.tolerance)


@dataclass(frozen=True)
class SweepSettings:
    tf_grid: tuple[float, ...] = tuple(float(t) for t in range(50, 701, 10))
    d_grid: tuple[float, ...] = tuple(float(d) for d in range(20, 161, 10))
    omega0_grid: tuple[float, ...] = (0.5,)
    refine: int = 4  # extra samples inside the bracketing interval of each 0.5 crossing

    def __post_init__(self) -> None:
        for name, grid in (
            ("tf_grid", self.tf_grid),
            ("d_grid", self.d_grid),
            ("omega0_grid", self.omega0_grid),
        ):
            if len(grid) == 0:
                raise ValueError(f"{name} must be non-empty")
            if any(not (g > 0 and math.isfinite(g)) for g in grid):
                raise ValueError(f"{name} entries must be positive and finite")
            if list(grid) != sorted(set(grid)):
                raise ValueError(f"{name} must be strictly increasing")
        if self.refine < 0:
            raise ValueError("refine must be >= 0")


@dataclass(frozen=True)
class DisorderSettings:
    amplitudes: tuple[float, ...] = (0.0, 0.01, 0.05, 0.1, 0.15, 0.2)
    realizations: int = 1000
    master_seed: int = 823518529
    hopping_only: bool = False

    def __post_init__(self) -> None:
        if len(self.amplitudes) == 0:
            raise ValueError("amplitudes must be non-empty")
        if any(a < 0 or not math.isfinite(a) for a in self.amplitudes):
            raise ValueError("amplitudes must be non-negative and finite")
        if list(self.amplitudes) != sorted(set(self.amplitudes)):
            raise ValueError("amplitudes must be strictly increasing")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")


@dataclass(frozen=True)
class RunConfig:
    chain: ChainSpec = ChainSpec(251)
    trap: TrapConfig = TrapConfig(omega0=0.5, x_start=50.0, distance=150.0)
    protocol: ProtocolSettings = ProtocolSettings()
    plan: PlanSettings = PlanSettings()
    sweep: SweepSettings = SweepSettings()
    disorder: DisorderSettings = DisorderSettings()
    output_dir: str = "out"
    emit_svg: bool = True


_SECTION_KEYS = {
    "chain": {"n_sites", "coupling"},
    "trap": {"omega0", "omega_f", "x_start", "distance", "truncation_radius"},
    "protocol": {"name", "t_f"},
    "plan": {"dt", "record_stride", "tolerance"},
    "sweep": {"tf_grid", "d_grid", "omega0_grid", "refine"},
    "disorder": {"amplitudes", "realizations", "master_seed", "hopping_only"},
}
_ROOT_KEYS = set(_SECTION_KEYS) | {"output_dir", "emit_svg"}


def _require_keys(doc: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {path}; allowed: {sorted(allowed)}")


def _section(doc: dict, name: str) -> dict:
    section = doc.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be an object")
    _require_keys(section, _SECTION_KEYS[name], name)
    return section


def _grid(raw, name: str) -> tuple[float, ...]:
    if not isinstance(raw, (list, tuple)):
        raise ConfigError(f"{name} must be an array of numbers")
    return tuple(float(v) for v in raw)


def parse_config(doc: dict) -> RunConfig:
    """Build a RunConfig from a parsed JSON document, failing on unknown keys.

    Silent typos in physics parameters are the costliest failure mode, so the
    parser is closed: every key must be recognized.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _require_keys(doc, _ROOT_KEYS, "config root")
    try:
        c = _section(doc, "chain")
        chain = ChainSpec(
            n_sites=int(c.get("n_sites", 251)), coupling=float(c.get("coupling", 1.0))
        )
        t = _section(doc, "trap")
        trap = TrapConfig(
            omega0=float(t.get("omega0", 0.5)),
            x_start=float(t.get("x_start", 50.0)),
            distance=float(t.get("distance", 150.0)),
            omega_f=None if t.get("omega_f") is None else float(t["omega_f"]),
            truncation_radius=(
                None if t.get("truncation_radius") is None else float(t["truncation_radius"])
            ),
        )
        p = _section(doc, "protocol")
        protocol = ProtocolSettings(
            name=str(p.get("name", "sta")), t_f=float(p.get("t_f", 200.0))
        )
        pl = _section(doc, "plan")
        plan = PlanSettings(
            dt=float(pl.get("dt", 0.02)),
            record_stride=int(pl.get("record_stride", 50)),
            tolerance=float(pl.get("tolerance", 1.0e-8)),
        )
        sw = _section(doc, "sweep")
        defaults = SweepSettings()
        sweep = SweepSettings(
            tf_grid=_grid(sw["tf_grid"], "tf_grid") if "tf_grid" in sw else defaults.tf_grid,
            d_grid=_grid(sw["d_grid"], "d_grid") if "d_grid" in sw else defaults.d_grid,
            omega0_grid=(
                _grid(sw["omega0_grid"], "omega0_grid")
                if "omega0_grid" in sw
                else defaults.omega0_grid
            ),
            refine=int(sw.get("refine", defaults.refine)),
        )
        di = _section(doc, "disorder")
        ddef = DisorderSettings()
        disorder = DisorderSettings(
            amplitudes=(
                _grid(di["amplitudes"], "amplitudes")
                if "amplitudes" in di
                else ddef.amplitudes
            ),
            realizations=int(di.get("realizations", ddef.realizations)),
            master_seed=int(di.get("master_seed", ddef.master_seed)),
            hopping_only=bool(di.get("hopping_only", ddef.hopping_only)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    output_dir = doc.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir must be a string")
    emit_svg = doc.get("emit_svg", True)
    if not isinstance(emit_svg, bool):
        raise ConfigError("emit_svg must be a boolean")
    return RunConfig(chain, trap, protocol, plan, sweep, disorder, output_dir, emit_svg)


def config_to_dict(config: RunConfig) -> dict:
    return {
        "chain": {"n_sites": config.chain.n_sites, "coupling": config.chain.coupling},
        "trap": {
            "omega0": config.trap.omega0,
            "omega_f": config.trap.omega_f,
            "x_start": config.trap.x_start,
            "distance": config.trap.distance,
            "truncation_radius": config.trap.truncation_radius,
        },
        "protocol": {"name": config.protocol.name, "t_f": config.protocol.t_f},
        "plan": {
            "dt": config.plan.dt,
            "record_stride": config.plan.record_stride,
            "tolerance": config.plan.tolerance,
        },
        "sweep": {
            "tf_grid": list(config.sweep.tf_grid),
            "d_grid": list(config.sweep.d_grid),
            "omega0_grid": list(config.sweep.omega0_grid),
            "refine": config.sweep.refine,
        },
        "disorder": {
            "amplitudes": list(config.disorder.amplitudes),
            "realizations": config.disorder.realizations,
            "master_seed": config.disorder.master_seed,
            "hopping_only": config.disorder.hopping_only,
        },
        "output_dir": config.output_dir,
        "emit_svg": config.emit_svg,
    }


def dump_config(config: RunConfig) -> str:
    """Canonical textual form; load(dump(config)) round-trips bit-exactly."""
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(config), encoding="utf-8")


# ---------------------------------------------------------------------------
# Deterministic output helpers


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip representation
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


def _write_metadata(out_dir: Path, command: str, wall_time: float, workers: int, extra: dict) -> None:
    doc = {
        "command": command,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "wall_time_s": round(wall_time, 3),
        "workers": workers,
    }
    doc.update(extra)
    path = out_dir / "metadata.json"
    try:
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n")
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Analysis helpers (pure, unit-testable)


def transition_time(tfs: Sequence[float], fs: Sequence[float]) -> tuple[float | None, str | None]:
    """First duration where the fidelity series crosses 0.5 from below.

    Linear interpolation between the bracketing grid points. Returns
    (t_star, None) on success or (None, reason) when the grid misses the
    crossing on either side.
    """
    if len(tfs) != len(fs) or len(tfs) < 2:
        raise ValueError("need two equal-length series with at least two points")
    if fs[0] >= 0.5:
        return None, "already above 0.5 at the smallest grid duration"
    for i in range(1, len(fs)):
        if fs[i] >= 0.5:
            t1, t2, f1, f2 = tfs[i - 1], tfs[i], fs[i - 1], fs[i]
            return t1 + (0.5 - f1) * (t2 - t1) / (f2 - f1), None
    return None, "no 0.5 crossing within the grid"


def fit_speed_limit(distances: Sequence[float], t_stars: Sequence[float]) -> float:
    """Through-origin least squares slope of distance against transition time."""
    d = np.asarray(distances, dtype=float)
    t = np.asarray(t_stars, dtype=float)
    if d.size == 0 or d.size != t.size:
        raise ValueError("need matching non-empty distance and time arrays")
    denom = float(np.dot(t, t))
    if denom == 0.0:
        raise ValueError("degenerate transition times")
    return float(np.dot(d, t) / denom)


def quadratic_loss_fit(amplitudes: Sequence[float], mean_fidelities: Sequence[float]) -> tuple[float, float]:
    """Fit 1 - mean_F = c * amplitude^2; returns (c, r_squared)."""
    a = np.asarray(amplitudes, dtype=float)
    y = 1.0 - np.asarray(mean_fidelities, dtype=float)
    if a.size < 2:
        raise ValueError("need at least two amplitudes for the fit")
    x = a**2
    c = float(np.dot(y, x) / np.dot(x, x))
    residual = y - c * x
    ss_res = float(np.dot(residual, residual))
    centered = y - y.mean()
    ss_tot = float(np.dot(centered, centered))
    if ss_tot == 0.0:
        return c, 1.0
    return c, 1.0 - ss_res / ss_tot


def _overlap2(a: np.ndarray, b: np.ndarray) -> float:
    return min(float(abs(np.vdot(a, b)) ** 2), 1.0)


def _packets(chain: ChainSpec, trap: TrapConfig):
    """Initial and target packets; the target width follows the final frequency."""
    psi0 = gaussian_packet(trap.x_start, trap, chain)
    sigma_f = magnon_sigma(trap, chain, trap.omega_final)
    target = gaussian_packet(trap.x_target, trap, chain, sigma=sigma_f)
    return psi0, target


def _record_times(t_final: float, dt: float, stride: int) -> list[float]:
    # mirrors the recording grid of propagator.evolve
    if t_final == 0:
        return [0.0]
    n = max(1, int(round(t_final / dt)))
    step = t_final / n
    times = [0.0]
    times.extend((j + 1) * step for j in range(n) if (j + 1) % stride == 0 or j + 1 == n)
    return times


# ---------------------------------------------------------------------------
# Worker tasks (module level so they pickle)


def _sweep_task(payload) -> list[tuple]:
    chain, trap, name, omega0, t_f, settings = payload
    trap_w = replace(trap, omega0=omega0, omega_f=None)
    protocol = make_protocol(name, trap_w, t_f)
    psi0, target = _packets(chain, trap_w)
    final = evolve_batch_final(
        psi0.amplitudes[None, :], chain, trap_w, protocol, settings.plan(t_f)
    )
    return [(name, omega0, t_f, trap_w.distance, _overlap2(target.amplitudes, final[0]))]


def _map_task(payload) -> list[tuple]:
    chain, trap, omega0, t_f, d_list, settings = payload
    trap_w = replace(trap, omega0=omega0, omega_f=None)
    protocols = [sta_polynomial(replace(trap_w, distance=d), t_f) for d in d_list]
    psi0 = gaussian_packet(trap_w.x_start, trap_w, chain)
    batch = np.repeat(psi0.amplitudes[None, :], len(d_list), axis=0)
    finals = evolve_batch_final(batch, chain, trap_w, protocols, settings.plan(t_f))
    rows = []
    for r, d in enumerate(d_list):
        target = gaussian_packet(trap_w.x_start + d, trap_w, chain)
        rows.append(("sta", omega0, t_f, d, _overlap2(target.amplitudes, finals[r])))
    return rows


def _map_refine_task(payload) -> list[tuple]:
    chain, trap, omega0, d, tf_points, settings = payload
    rows = []
    for t_f in tf_points:
        rows.extend(_map_task((chain, trap, omega0, t_f, (d,), settings)))
    return rows


def _ensemble_task(payload) -> list[tuple]:
    chain, trap, name, t_f, settings, delta, master_seed, start, stop, hopping_only = payload
    protocol = make_protocol(name, trap, t_f)
    psi0, target = _packets(chain, trap)
    indices = range(start, stop)
    bond_rows = np.stack(
        [
            sample_disordered_couplings(chain, DisorderSpec(delta, master_seed, i))
            for i in indices
        ]
    )
    diagonal_rows = None
    if hopping_only:
        diagonal_rows = np.broadcast_to(chain.bonds(), bond_rows.shape)
    batch = np.repeat(psi0.amplitudes[None, :], len(bond_rows), axis=0)
    finals = evolve_batch_final(
        batch,
        chain,
        trap,
        protocol,
        settings.plan(t_f),
        bond_rows=bond_rows,
        diagonal_bond_rows=diagonal_rows,
    )
    rows = []
    for r, i in enumerate(indices):
        seed_id = disorder_stream_seed(DisorderSpec(delta, master_seed, i))
        rows.append((delta, i, seed_id, _overlap2(target.amplitudes, finals[r])))
    return rows


def _run_tasks(task_fn, payloads: list, workers: int) -> list[list[tuple]]:
    warm_kernel()  # compile before forking so children inherit the jit kernel
    if workers <= 1 or len(payloads) <= 1:
        return [task_fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task_fn, payloads))


# ---------------------------------------------------------------------------
# Runners


def run_evolution(config: RunConfig, out_dir: Path, workers: int = 1) -> dict:
    """Propagate one configured protocol; emit magnetization heatmap, fidelity
    series, optional SVG rendering, and metadata."""
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chain, trap = config.chain, config.trap
    validate_geometry(trap, chain)
    protocol = make_protocol(config.protocol.name, trap, config.protocol.t_f)
    plan = config.plan.plan(config.protocol.t_f)
    psi0, target = _packets(chain, trap)
    trajectory = evolve(psi0, chain, trap, protocol, plan)

    positions = chain.site_positions()
    heat_rows: list[tuple] = []
    fid_rows: list[tuple] = []
    sz_matrix = []
    times = []
    for t, state in trajectory:
        sz = local_magnetization(state)
        sz_matrix.append(sz)
        times.append(t)
        heat_rows.extend(
            (t, n + 1, positions[n], sz[n]) for n in range(chain.n_sites)
        )
        fid_rows.append((t, _overlap2(target.amplitudes, state.amplitudes), state.norm()))
    write_csv(out_dir / "heatmap.csv", HEATMAP_HEADER, heat_rows)
    write_csv(out_dir / "fidelity.csv", FIDELITY_HEADER, fid_rows)

    paths = ["heatmap.csv", "fidelity.csv"]
    if config.emit_svg:
        centers = np.array([protocol.trajectory(t) for t in times])
        svg.render_heatmap(
            out_dir / "heatmap.svg",
            np.asarray(times),
            positions,
            np.asarray(sz_matrix),
            boundary_center=centers,
            boundary_radius=resolve_truncation_radius(trap, chain),
            title=f"{protocol.label} protocol, t_f = {config.protocol.t_f:g}",
        )
        paths.append("heatmap.svg")

    final_fidelity = float(fid_rows[-1][1])
    _write_metadata(
        out_dir,
        "evolve",
        time.perf_counter() - started,
        workers,
        {
            "protocol": protocol.label,
            "t_f": config.protocol.t_f,
            "final_fidelity": final_fidelity,
            "final_norm": float(fid_rows[-1][2]),
        },
    )
    return {
        "final_fidelity": final_fidelity,
        "paths": paths,
        "lines": [f"final fidelity {final_fidelity:.6f} ({protocol.label}, t_f={config.protocol.t_f:g})"],
    }


def run_tf_sweep(config: RunConfig, out_dir: Path, workers: int = 1) -> dict:
    """Final fidelity of both constant-frequency protocols across the duration grid."""
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chain, trap = config.chain, config.trap
    for omega0 in config.sweep.omega0_grid:
        validate_geometry(replace(trap, omega0=omega0, omega_f=None), chain)
    payloads = [
        (chain, trap, name, omega0, t_f, config.plan)
        for omega0 in config.sweep.omega0_grid
        for name in ("linear", "sta")
        for t_f in config.sweep.tf_grid
    ]
    rows = [row for chunk in _run_tasks(_sweep_task, payloads, workers) for row in chunk]
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    write_csv(out_dir / "sweep.csv", SWEEP_HEADER, rows)

    # local fidelity maxima of the adiabatic ramp: candidate resonant durations
    peaks: dict[str, list[list[float]]] = {}
    for omega0 in config.sweep.omega0_grid:
        series = [(r[2], r[4]) for r in rows if r[0] == "linear" and r[1] == omega0]
        ps = [
            [series[i][0], series[i][1]]
            for i in range(1, len(series) - 1)
            if series[i][1] > series[i - 1][1] and series[i][1] > series[i + 1][1]
        ]
        peaks[repr(float(omega0))] = ps
    _write_metadata(
        out_dir,
        "sweep-tf",
        time.perf_counter() - started,
        workers,
        {
            "rows": len(rows),
            "omega0_grid": list(config.sweep.omega0_grid),
            "linear_fidelity_peaks": peaks,
        },
    )
    return {
        "rows": rows,
        "lines": [f"swept {len(rows)} protocol/duration points -> sweep.csv"],
    }


def run_dt_map(config: RunConfig, out_dir: Path, workers: int = 1) -> dict:
    """Fidelity over the (duration, distance) grid plus speed-limit extraction.

    For each distance the transition duration t*(d) is the first grid point
    where fidelity crosses 0.5 (linearly interpolated, optionally refined by
    extra samples inside the bracketing interval). The limiting velocity v_b
    is the through-origin least-squares slope of d against t*(d); distances
    without a crossing are excluded and reported.
    """
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chain, trap = config.chain, config.trap
    sweep = config.sweep
    for omega0 in sweep.omega0_grid:
        for d in sweep.d_grid:
            validate_geometry(replace(trap, omega0=omega0, omega_f=None, distance=d), chain)

    payloads = [
        (chain, trap, omega0, t_f, sweep.d_grid, config.plan)
        for omega0 in sweep.omega0_grid
        for t_f in sweep.tf_grid
    ]
    rows = [row for chunk in _run_tasks(_map_task, payloads, workers) for row in chunk]

    # refinement pass: extra samples inside each coarse bracketing interval
    if sweep.refine > 0:
        refine_payloads = []
        for omega0 in sweep.omega0_grid:
            for d in sweep.d_grid:
                series = sorted(
                    (r[2], r[4]) for r in rows if r[1] == omega0 and r[3] == d
                )
                tfs = [s[0] for s in series]
                fs = [s[1] for s in series]
                bracket = _bracket_of_crossing(tfs, fs)
                if bracket is None:
                    continue
                t1, t2 = bracket
                inner = np.linspace(t1, t2, sweep.refine + 2)[1:-1]
                refine_payloads.append(
                    (chain, trap, omega0, d, tuple(float(t) for t in inner), config.plan)
                )
        for chunk in _run_tasks(_map_refine_task, refine_payloads, workers):
            rows.extend(chunk)

    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    write_csv(out_dir / "map.csv", SWEEP_HEADER, rows)

    transition_rows: list[tuple] = []
    speed_rows: list[tuple] = []
    excluded: dict[str, list[list]] = {}
    v_b: dict[float, float] = {}
    v_group = GROUP_VELOCITY_FACTOR * chain.coupling * chain.lattice_spacing / HBAR
    v_lr = LIEB_ROBINSON_FACTOR * chain.coupling * chain.lattice_spacing / HBAR
    for omega0 in sweep.omega0_grid:
        ds, t_stars, dropped = [], [], []
        for d in sweep.d_grid:
            series = sorted((r[2], r[4]) for r in rows if r[1] == omega0 and r[3] == d)
            t_star, reason = transition_time([s[0] for s in series], [s[1] for s in series])
            if t_star is None:
                dropped.append([d, reason])
            else:
                ds.append(d)
                t_stars.append(t_star)
                transition_rows.append((omega0, d, t_star))
        if dropped:
            excluded[repr(float(omega0))] = dropped
        if ds:
            v_b[omega0] = fit_speed_limit(ds, t_stars)
            speed_rows.append((omega0, v_b[omega0], v_group, v_lr))
    transition_rows.sort(key=lambda r: (r[0], r[1]))
    speed_rows.sort(key=lambda r: r[0])
    write_csv(out_dir / "transitions.csv", TRANSITION_HEADER, transition_rows)
    write_csv(out_dir / "speed_limit.csv", SPEED_HEADER, speed_rows)
    _write_metadata(
        out_dir,
        "map-dt",
        time.perf_counter() - started,
        workers,
        {
            "rows": len(rows),
            "v_b": {repr(float(w)): v for w, v in v_b.items()},
            "v_group": v_group,
            "v_lieb_robinson": v_lr,
            "excluded_distances": excluded,
        },
    )
    lines = [
        f"v_b(omega0={w:g}) = {v:.4f} (group velocity {v_group:g}, "
        f"information bound {v_lr:g})"
        for w, v in sorted(v_b.items())
    ]
    if excluded:
        lines.append(f"excluded distances: {excluded}")
    return {"v_b": v_b, "excluded": excluded, "rows": rows, "lines": lines}


def _bracket_of_crossing(tfs: list[float], fs: list[float]) -> tuple[float, float] | None:
    if not tfs or fs[0] >= 0.5:
        return None
    for i in range(1, len(fs)):
        if fs[i] >= 0.5:
            return tfs[i - 1], tfs[i]
    return None


def run_disorder_ensemble(config: RunConfig, out_dir: Path, workers: int = 1) -> dict:
    """Fidelity statistics over disordered coupling realizations.

    Realizations are keyed by (master_seed, realization_index), computed in
    fixed chunks of ENSEMBLE_CHUNK, and merged in sorted order, so the output
    is identical for any worker count. Zero-amplitude entries run a single
    realization: every replica would be identical.
    """
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chain, trap = config.chain, config.trap
    validate_geometry(trap, chain)
    dis = config.disorder
    payloads = []
    for delta in dis.amplitudes:
        count = 1 if delta == 0.0 else dis.realizations
        for start in range(0, count, ENSEMBLE_CHUNK):
            payloads.append(
                (
                    chain,
                    trap,
                    config.protocol.name,
                    config.protocol.t_f,
                    config.plan,
                    delta,
                    dis.master_seed,
                    start,
                    min(start + ENSEMBLE_CHUNK, count),
                    dis.hopping_only,
                )
            )
    rows = [row for chunk in _run_tasks(_ensemble_task, payloads, workers) for row in chunk]
    rows.sort(key=lambda r: (r[0], r[1]))
    write_csv(out_dir / "ensemble.csv", ENSEMBLE_HEADER, rows)

    summary_rows: list[tuple] = []
    summary: dict[float, tuple[float, float, int]] = {}
    for delta in dis.amplitudes:
        fs = np.array([r[3] for r in rows if r[0] == delta])
        mean = float(fs.mean())
        std = float(fs.std(ddof=1)) if fs.size > 1 else 0.0
        summary_rows.append((delta, mean, std, int(fs.size)))
        summary[delta] = (mean, std, int(fs.size))
    write_csv(out_dir / "summary.csv", SUMMARY_HEADER, summary_rows)

    nonzero = [d for d in dis.amplitudes if d > 0.0]
    fit: dict[str, float] = {}
    if len(nonzero) >= 2:
        c, r2 = quadratic_loss_fit(nonzero, [summary[d][0] for d in nonzero])
        fit = {"quadratic_coefficient": c, "r_squared": r2}
    _write_metadata(
        out_dir,
        "disorder",
        time.perf_counter() - started,
        workers,
        {
            "chunk": ENSEMBLE_CHUNK,
            "master_seed": dis.master_seed,
            "hopping_only": dis.hopping_only,
            "realizations": dis.realizations,
            **fit,
        },
    )
    lines = [
        f"delta={delta:g}: mean F = {summary[delta][0]:.6f} "
        f"(std {summary[delta][1]:.2e}, n={summary[delta][2]})"
        for delta in dis.amplitudes
    ]
    if fit:
        lines.append(
            f"quadratic loss fit: c = {fit['quadratic_coefficient']:.4f}, "
            f"R^2 = {fit['r_squared']:.4f}"
        )
    return {"summary": summary, "fit": fit, "lines": lines}


def run_field_dump(config: RunConfig, out_dir: Path, workers: int = 1) -> dict:
    """Sample the applied diagonal field on the recording grid, for inspection."""
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chain, trap = config.chain, config.trap
    validate_geometry(trap, chain)
    protocol = make_protocol(config.protocol.name, trap, config.protocol.t_f)
    times = _record_times(config.protocol.t_f, config.plan.dt, config.plan.record_stride)
    positions = chain.site_positions()
    rows: list[tuple] = []
    for t in times:
        field = field_profile(t, protocol, trap, chain)
        rows.extend((t, n + 1, positions[n], field[n]) for n in range(chain.n_sites))
    write_csv(out_dir / "field.csv", FIELD_HEADER, rows)
    _write_metadata(
        out_dir,
        "field-dump",
        time.perf_counter() - started,
        workers,
        {"protocol": protocol.label, "t_f": config.protocol.t_f, "samples": len(times)},
    )
    return {"lines": [f"dumped {len(rows)} field samples -> field.csv"]}
