"""Time stepping for the damped wave equation and the heat equation.

The wave scheme is leapfrog with the damping term taken at the half levels,

    u^{n+1} = [2u^n - (1 - a dt/2) u^{n-1} + dt^2 lap_h u^n] / (1 + a dt/2),

which is explicit because ``a`` acts pointwise.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from . import energy as em
from .domain import DomainSpec, GridMask, build_grid
from .energy import EnergyTrace, laplacian
from .errors import Blowup, ShapeMismatch

BLOWUP_LEVEL = 1e12


@dataclass(frozen=True)
class SolverState:
    u_prev: np.ndarray
    u_curr: np.ndarray
    dt: float
    n: int

    @property
    def t(self) -> float:
        return self.n * self.dt


@dataclass(frozen=True)
class HeatState:
    v_curr: np.ndarray
    dt: float
    n: int

    @property
    def t(self) -> float:
        return self.n * self.dt


@dataclass
class Snapshots:
    """Solution samples at requested times (nearest step)."""

    requested: np.ndarray
    times: np.ndarray
    fields: list
    h: float


@dataclass
class RunResult:
    trace: EnergyTrace
    state: SolverState
    snapshots: Snapshots | None = None


def cfl_timestep(h: float, N: int, safety: float = 0.9) -> float:
    if not 0 < safety <= 1:
        raise ValueError(f"CFL safety factor must lie in (0, 1], got {safety}")
    return safety * h / math.sqrt(N)


def default_stride(dt: float) -> int:
    return max(1, math.ceil(0.5 / dt))


class _Stepper:
    """Precomputed coefficients of the damped leapfrog update."""

    def __init__(self, a: np.ndarray, grid: GridMask, dt: float):
        half = 0.5 * a * dt
        self.inv = grid.interior / (1.0 + half)
        self.c_prev = grid.interior * (1.0 - half) / (1.0 + half)
        self.dt2 = dt * dt
        self.h = grid.h

    def __call__(self, u_prev, u_curr):
        u_next = (2.0 * u_curr + self.dt2 * laplacian(u_curr, self.h)) * self.inv
        u_next -= self.c_prev * u_prev
        peak = np.abs(u_next).max()
        if not peak <= BLOWUP_LEVEL:
            raise Blowup(f"max|u| = {peak:.3g} exceeds {BLOWUP_LEVEL:g}; check CFL and configuration")
        return u_next


def step(state: SolverState, a: np.ndarray, grid: GridMask) -> SolverState:
    u_next = _Stepper(a, grid, state.dt)(state.u_prev, state.u_curr)
    return SolverState(state.u_curr, u_next, state.dt, state.n + 1)


def first_step(u0, u1, a, grid: GridMask, dt: float) -> np.ndarray:
    """Second-order Taylor start u^1 = u0 + dt u1 + dt^2/2 (lap u0 - a u1)."""
    u = u0 + dt * u1 + 0.5 * dt * dt * (laplacian(u0, grid.h) - a * u1)
    return grid.mask(u)


def _snapshot_steps(times, dt: float, n_steps: int) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    return np.clip(np.rint(times / dt).astype(int), 0, n_steps)


def run(spec: DomainSpec, damper: np.ndarray, data, T_end: float,
        observer_stride: int | None = None, *, grid: GridMask | None = None,
        safety: float = 0.9, local_radii=None, check_dissipation: bool = True,
        snapshot_times=None, observers=(), theorem_run: bool = False,
        gcc_report=None) -> RunResult:
    """Advance the damped wave equation from ``data = (u0, u1)`` to ``T_end``.

    Observations (energies, L2 mass, and any ``observers(state)`` callables,
    stored under their ``__name__`` in ``trace.extras``) are taken every
    ``observer_stride`` steps and at step 1. Energies are the staggered
    E^{n+1/2} of the levels ``(u^n, u^{n+1})``, reported at time t_{n+1}.
    """
    if grid is None:
        grid = build_grid(spec)
    if theorem_run and (gcc_report is None or not gcc_report.satisfied):
        warnings.warn("decay run without a satisfied GCC certificate", stacklevel=2)
    u0, u1 = data
    a = np.asarray(damper, dtype=float)
    for arr in (a, u0, u1):
        if arr.shape != grid.shape:
            raise ShapeMismatch(f"field shape {arr.shape} != grid shape {grid.shape}")
    dt = cfl_timestep(grid.h, grid.dim, safety)
    stride = observer_stride or default_stride(dt)
    n_steps = int(math.ceil(T_end / dt - 1e-9))
    radii = tuple(local_radii) if local_radii is not None else (spec.r1,)
    masks = [em.radius_mask(grid, r) for r in radii]
    vol = grid.cell_volume
    stepper = _Stepper(a, grid, dt)

    snap_req = None if snapshot_times is None else np.asarray(snapshot_times, dtype=float)
    snap_steps = None if snap_req is None else _snapshot_steps(snap_req, dt, n_steps)
    snap_fields = {}

    times, e_tot, l2, res = [], [], [], []
    e_loc = [[] for _ in radii]
    extras = {getattr(o, "__name__", f"observer{i}"): [] for i, o in enumerate(observers)}

    u_prev = grid.mask(u0)
    u_curr = first_step(u_prev, u1, a, grid, dt)
    e_prev = em.staggered_energy(u_prev, u_curr, dt, grid.h) if check_dissipation else 0.0
    e_scale = abs(e_prev)
    window_res = 0.0 if check_dissipation else math.nan

    def take_snap(n, u):
        if snap_steps is not None:
            for k in np.nonzero(snap_steps == n)[0]:
                snap_fields[int(k)] = u.copy()

    take_snap(0, u_prev)
    take_snap(1, u_curr)

    def observe(n, u_old, u_new, residual):
        dens = em.energy_density(u_old, u_new, dt, grid.h)
        times.append(n * dt)
        e_tot.append(dens.sum() * vol)
        for lst, m in zip(e_loc, masks):
            lst.append(dens[m].sum() * vol)
        l2.append(em.l2_norm_sq(u_new, grid.h))
        res.append(residual)
        state = SolverState(u_old, u_new, dt, n)
        for o, lst in zip(observers, extras.values()):
            lst.append(o(state))

    observe(1, u_prev, u_curr, window_res)
    for n in range(1, n_steps):
        u_next = stepper(u_prev, u_curr)
        if check_dissipation:
            e_next = em.staggered_energy(u_curr, u_next, dt, grid.h)
            rate = em.dissipation_rate(u_prev, u_next, a, dt, grid.h)
            floor = 1e-30 * e_scale + 1e-300
            r = abs((e_next - e_prev) / dt + rate) / max(e_next, floor)
            window_res = max(window_res, r)
            e_prev = e_next
        u_prev, u_curr = u_curr, u_next
        take_snap(n + 1, u_curr)
        if (n + 1) % stride == 0:
            observe(n + 1, u_prev, u_curr, window_res)
            window_res = 0.0 if check_dissipation else math.nan

    trace = EnergyTrace(np.array(times), np.array(e_tot),
                        {r: np.array(v) for r, v in zip(radii, e_loc)},
                        np.array(l2), np.array(res),
                        {k: np.array(v) for k, v in extras.items()})
    snaps = None
    if snap_req is not None:
        order = sorted(snap_fields)
        snaps = Snapshots(snap_req[order], snap_steps[order] * dt,
                          [snap_fields[k] for k in order], grid.h)
    return RunResult(trace, SolverState(u_prev, u_curr, dt, n_steps), snaps)


# -- heat equation ---------------------------------------------------------

HEAT_DT_FACTOR = 0.24


def heat_step(state: HeatState, grid: GridMask) -> HeatState:
    v = grid.mask(state.v_curr + state.dt * laplacian(state.v_curr, grid.h))
    return HeatState(v, state.dt, state.n + 1)


@dataclass
class HeatResult:
    times: np.ndarray
    l2: np.ndarray
    vmax: np.ndarray
    state: HeatState
    snapshots: Snapshots | None = None


def heat_run(spec: DomainSpec, v0: np.ndarray, T_end: float,
             observer_stride: int | None = None, *, grid: GridMask | None = None,
             snapshot_times=None) -> HeatResult:
    """Explicit heat stepping with dt = 0.24 h^2.

    ``snapshot_times`` are matched to the nearest heat step; pass the wave
    run's actual snapshot times to pair the two runs.
    """
    if grid is None:
        grid = build_grid(spec)
    if v0.shape != grid.shape:
        raise ShapeMismatch(f"field shape {v0.shape} != grid shape {grid.shape}")
    dt = HEAT_DT_FACTOR * grid.h**2
    n_steps = int(math.ceil(T_end / dt - 1e-9))
    stride = observer_stride or max(1, math.ceil(0.5 / dt))
    snap_req = None if snapshot_times is None else np.asarray(snapshot_times, dtype=float)
    snap_steps = None if snap_req is None else _snapshot_steps(snap_req, dt, n_steps)
    snap_fields = {}
    v = grid.mask(v0)
    times, l2, vmax = [], [], []
    inner = grid.interior

    def observe(n):
        times.append(n * dt)
        l2.append(math.sqrt(em.l2_norm_sq(v, grid.h)))
        vmax.append(float(v.max()))

    def take_snap(n):
        if snap_steps is not None:
            for k in np.nonzero(snap_steps == n)[0]:
                snap_fields[int(k)] = v.copy()

    observe(0)
    take_snap(0)
    for n in range(1, n_steps + 1):
        v = np.where(inner, v + dt * laplacian(v, grid.h), 0.0)
        if n % stride == 0:
            observe(n)
        take_snap(n)
    snaps = None
    if snap_req is not None:
        order = sorted(snap_fields)
        snaps = Snapshots(snap_req[order], snap_steps[order] * dt,
                          [snap_fields[k] for k in order], grid.h)
    return HeatResult(np.array(times), np.array(l2), np.array(vmax),
                      HeatState(v, dt, n_steps), snaps)


@dataclass
class GapTrace:
    times: np.ndarray
    norm_u: np.ndarray
    norm_v: np.ndarray
    gap: np.ndarray

    def fits(self, window):
        return {"gap": em.fit_decay(self.times, self.gap, window),
                "u": em.fit_decay(self.times, self.norm_u, window)}

    def to_csv(self) -> str:
        lines = ["t,norm_u,norm_v,gap"]
        for row in zip(self.times, self.norm_u, self.norm_v, self.gap):
            lines.append(",".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"


def diffusion_gap(wave: Snapshots, heat: Snapshots, time_tol: float | None = None) -> GapTrace:
    """||u(t) - v(t)||_L2 at the shared observation times."""
    if len(wave.fields) != len(heat.fields):
        raise ShapeMismatch(f"{len(wave.fields)} wave snapshots vs {len(heat.fields)} heat snapshots")
    if wave.h != heat.h:
        raise ShapeMismatch(f"grid spacings differ: {wave.h} vs {heat.h}")
    if time_tol is not None and np.abs(wave.times - heat.times).max(initial=0) > time_tol:
        raise ShapeMismatch("observation times are not matched")
    nu, nv, gap = [], [], []
    for u, v in zip(wave.fields, heat.fields):
        if u.shape != v.shape:
            raise ShapeMismatch(f"snapshot shapes differ: {u.shape} vs {v.shape}")
        nu.append(math.sqrt(em.l2_norm_sq(u, wave.h)))
        nv.append(math.sqrt(em.l2_norm_sq(v, heat.h)))
        gap.append(math.sqrt(em.l2_norm_sq(u - v, wave.h)))
    return GapTrace(np.asarray(wave.times, dtype=float), np.array(nu), np.array(nv), np.array(gap))


# -- snapshot files --------------------------------------------------------

def write_snapshot(path, field: np.ndarray, h: float, t: float) -> None:
    """Little-endian: int64 N, int64 dims[N], float64 h, float64 t, values."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<q", field.ndim))
        fh.write(struct.pack(f"<{field.ndim}q", *field.shape))
        fh.write(struct.pack("<dd", h, t))
        fh.write(np.ascontiguousarray(field, dtype="<f8").tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        (ndim,) = struct.unpack("<q", fh.read(8))
        dims = struct.unpack(f"<{ndim}q", fh.read(8 * ndim))
        h, t = struct.unpack("<dd", fh.read(16))
        values = np.frombuffer(fh.read(), dtype="<f8").reshape(dims)
    return values.copy(), h, t
