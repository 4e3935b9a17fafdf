"""Energy functionals, decay fits and the convolution-bound quadrature.

The discrete energy is the staggered leapfrog energy

    E^{n+1/2} = 1/2 sum h^N [ ((u^{n+1} - u^n)/dt)^2 + grad u^{n+1} . grad u^n ]

with forward-difference gradients. It is the quantity for which the damped
leapfrog scheme satisfies an exact dissipation identity.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .domain import GridMask, smooth_step
from .errors import HypothesisViolated, NonpositiveData, RadiusOutOfRange, ShapeMismatch


def forward_diffs(u: np.ndarray, h: float) -> list[np.ndarray]:
    """Forward differences along each axis, zero-padded to ``u.shape``."""
    out = []
    for ax in range(u.ndim):
        d = np.zeros_like(u)
        lead = [slice(None)] * u.ndim
        lead[ax] = slice(0, -1)
        d[tuple(lead)] = np.diff(u, axis=ax) / h
        out.append(d)
    return out


def energy_density(u_old: np.ndarray, u_new: np.ndarray, dt: float, h: float) -> np.ndarray:
    """Per-node staggered energy density; each edge belongs to its lower node."""
    v = (u_new - u_old) / dt
    dens = v * v
    for g_new, g_old in zip(forward_diffs(u_new, h), forward_diffs(u_old, h)):
        dens += g_new * g_old
    return 0.5 * dens


def staggered_energy(u_old, u_new, dt: float, h: float) -> float:
    return float(energy_density(u_old, u_new, dt, h).sum() * h ** np.ndim(u_new))


def total_energy(state, grid: GridMask) -> float:
    """E^{n+1/2} of ``state`` (levels ``u_prev``, ``u_curr``)."""
    return staggered_energy(state.u_prev, state.u_curr, state.dt, grid.h)


def radius_mask(grid: GridMask, r: float) -> np.ndarray:
    """Nodes counted in E_r. ``r == R_box`` selects the whole truncated box."""
    r_box = grid.n * grid.h
    if not 0 < r <= r_box * (1 + 1e-12):
        raise RadiusOutOfRange(f"radius {r} outside (0, {r_box}]")
    if r >= r_box * (1 - 1e-12):
        return np.ones(grid.shape, dtype=bool)
    return grid.radius <= r


def local_energy(state, grid: GridMask, r: float) -> float:
    dens = energy_density(state.u_prev, state.u_curr, state.dt, grid.h)
    return float(dens[radius_mask(grid, r)].sum() * grid.cell_volume)


def l2_norm_sq(u: np.ndarray, h: float) -> float:
    return float(np.vdot(u, u).real * h ** np.ndim(u))


def dissipation_rate(u_prev, u_next, a, dt: float, h: float) -> float:
    """sum h^N a ((u^{n+1} - u^{n-1}) / (2 dt))^2."""
    v = (u_next - u_prev) / (2 * dt)
    return float((a * v * v).sum() * h ** np.ndim(u_next))


def dissipation_residual(u_prevprev, u_prev, u_curr, a, dt: float, h: float,
                         floor: float = 1e-300) -> float:
    """Relative defect of the discrete dissipation identity over one step.

    The three arguments are u^{n-1}, u^n, u^{n+1}.
    """
    e_old = staggered_energy(u_prevprev, u_prev, dt, h)
    e_new = staggered_energy(u_prev, u_curr, dt, h)
    rate = dissipation_rate(u_prevprev, u_curr, a, dt, h)
    return abs((e_new - e_old) / dt + rate) / max(e_new, floor)


# -- traces and fits -------------------------------------------------------

@dataclass
class EnergyTrace:
    """Observed time series of one run.

    ``residual[k]`` is the largest per-step dissipation residual since the
    previous observation (NaN when the check was disabled).
    """

    times: np.ndarray
    E_total: np.ndarray
    E_local: dict[float, np.ndarray]
    l2_sq: np.ndarray
    residual: np.ndarray
    extras: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(np.nanmax(self.residual)) if len(self.residual) else 0.0

    def primary_local(self) -> np.ndarray:
        return next(iter(self.E_local.values()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "E_total", "E_r", "l2_sq", "residual"])
        e_r = self.primary_local() if self.E_local else np.full_like(self.times, np.nan)
        for row in zip(self.times, self.E_total, e_r, self.l2_sq, self.residual):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def read_trace_csv(text: str) -> dict[str, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        return {name: np.array([]) for name in (rows[0] if rows else [])}
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body if r])
    return {name: data[:, i] for i, name in enumerate(header)}


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    window: tuple[float, float]
    r2: float
    n_samples: int

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "intercept": self.intercept,
                "r2": self.r2, "window": list(self.window)}


def fit_decay(times, values, window, floor: float = 0.0) -> DecayFit:
    """Least-squares slope of log y against log(1 + t) on ``window``.

    Returns the decay exponent (minus the slope). ``floor`` is an absolute
    round-off level; samples at or below it are rejected like nonpositive ones.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    t_min, t_max = window
    if not t_min < t_max:
        raise ValueError(f"empty fit window {window}")
    sel = (t >= t_min) & (t <= t_max)
    if sel.sum() < 10:
        raise ValueError(f"need at least 10 samples in window {window}, got {int(sel.sum())}")
    ys = y[sel]
    if (ys <= max(floor, 0.0)).any():
        raise NonpositiveData(f"values at or below {floor} inside window {window}; shrink the window")
    x = np.log1p(t[sel])
    ly = np.log(ys)
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_tot = ((ly - ly.mean()) ** 2).sum()
    r2 = 1.0 - (resid**2).sum() / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(-slope), float(intercept), (float(t_min), float(t_max)),
                    float(r2), int(sel.sum()))


def default_fit_window(r0: float, r1: float, T_end: float) -> tuple[float, float]:
    return max(10.0, 2.0 * (r1 + r0)), 0.9 * T_end


def theta(N: int) -> Fraction:
    """Total-energy decay exponent min(1 + N/2, 3N/4)."""
    if N < 1 or int(N) != N:
        raise ValueError(f"dimension must be a positive integer, got {N}")
    return min(1 + Fraction(N, 2), Fraction(3 * N, 4))


# -- convolution bound -----------------------------------------------------

def adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature with absolute tolerance ``tol``."""
    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4 * fm + fb) / 6
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = f(0.5 * (lo + mid)), f(0.5 * (mid + hi))
        left = (mid - lo) * (flo + 4 * fl + fmid) / 6
        right = (hi - mid) * (fmid + 4 * fr + fhi) / 6
        delta = left + right - est
        if depth >= max_depth or abs(delta) <= 15 * eps:
            total += left + right + delta / 15
        else:
            stack.append((lo, mid, flo, fl, fmid, left, eps / 2, depth + 1))
            stack.append((mid, hi, fmid, fr, fhi, right, eps / 2, depth + 1))
    return total


def _geometric_breaks(t: float) -> list[float]:
    # panels refine toward both ends where the integrand varies on unit scale
    pts = {0.0, t}
    w = 1.0
    while w < t / 2:
        pts.update((w, t - w))
        w *= 2
    pts.add(t / 2)
    return sorted(pts)


def convolution_integral(a: float, b: float, t: float, rtol: float = 1e-8) -> float:
    """int_0^t (1 + t - s)^-a (1 + s)^-b ds by adaptive Simpson."""
    if t <= 0:
        return 0.0

    def f(s):
        return (1.0 + t - s) ** -a * (1.0 + s) ** -b

    breaks = _geometric_breaks(t)
    crude = sum((q - p) * (f(p) + 4 * f(0.5 * (p + q)) + f(q)) / 6
                for p, q in zip(breaks, breaks[1:]))
    tol = rtol * abs(crude) / (len(breaks) - 1)
    return sum(adaptive_simpson(f, p, q, tol) for p, q in zip(breaks, breaks[1:]))


def conv_bound_ratio(a: float, b: float, t: float, rtol: float = 1e-8) -> float:
    """Convolution integral divided by (1 + t)^-min(a, b)."""
    if not (a > 0 and b > 0):
        raise HypothesisViolated(f"exponents must be positive, got a={a}, b={b}")
    if max(a, b) <= 1:
        raise HypothesisViolated(f"max(a, b) must exceed 1, got a={a}, b={b}")
    return convolution_integral(a, b, t, rtol) * (1.0 + t) ** min(a, b)


def decade_maxima(ts, ratios) -> dict[int, float]:
    """Max ratio over each closed decade [10^k, 10^(k+1)] covered by ``ts``."""
    ts = np.asarray(ts, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    out = {}
    k_lo = int(math.floor(math.log10(ts.min()) + 1e-12))
    k_hi = int(math.ceil(math.log10(ts.max()) - 1e-12))
    for k in range(k_lo, k_hi):
        sel = (ts >= 10.0**k * (1 - 1e-12)) & (ts <= 10.0 ** (k + 1) * (1 + 1e-12))
        if sel.any():
            out[k] = float(ratios[sel].max())
    return out


# -- cutoff diagnostic -----------------------------------------------------

def cutoff_profile(grid: GridMask, r0: float, r1: float) -> np.ndarray:
    """phi = 0 on |x| <= r0, phi = 1 on |x| >= r1."""
    return smooth_step(grid.radius, r0, r1)


def centered_grad(u: np.ndarray, h: float) -> list[np.ndarray]:
    return [np.gradient(u, h, axis=ax, edge_order=1) for ax in range(u.ndim)]


def laplacian(u: np.ndarray, h: float) -> np.ndarray:
    """(2N+1)-point Laplacian; zero on the outermost layer."""
    out = np.zeros_like(u)
    inner = (slice(1, -1),) * u.ndim
    for ax in range(u.ndim):
        plus = list(inner)
        minus = list(inner)
        plus[ax] = slice(2, None)
        minus[ax] = slice(0, -2)
        out[inner] += u[tuple(plus)] + u[tuple(minus)]
    out[inner] -= 2 * u.ndim * u[inner]
    out /= h * h
    return out


def cutoff_forcing(u: np.ndarray, phi: np.ndarray, grid: GridMask) -> np.ndarray:
    """Forcing f = -2 grad(phi).grad(u) - lap(phi) u felt by w = phi u."""
    if u.shape != grid.shape or phi.shape != grid.shape:
        raise ShapeMismatch(f"field shapes {u.shape}, {phi.shape} != grid {grid.shape}")
    f = -laplacian(phi, grid.h) * u
    for gp, gu in zip(centered_grad(phi, grid.h), centered_grad(u, grid.h)):
        f -= 2.0 * gp * gu
    return grid.mask(f)


def cutoff_ratio(state, phi: np.ndarray, grid: GridMask, r1: float) -> float:
    """||f||^2 / E_r1 for the cutoff forcing of the current level."""
    f = cutoff_forcing(state.u_curr, phi, grid)
    e = local_energy(state, grid, r1)
    return l2_norm_sq(f, grid.h) / e if e > 0 else 0.0
