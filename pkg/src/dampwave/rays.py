"""Billiard rays off circular obstacles and numerical geometric control checks.

Rays travel at unit speed and reflect specularly off the obstacle disks.
Gliding and diffracted rays are not modelled; tangential hits are flagged
and continued straight.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .domain import Disk, DomainSpec, GridMask, build_grid

TANGENT_TOL = 1e-12
_HIT_EPS = 1e-12


@dataclass(frozen=True)
class Ray:
    position: tuple[float, float]
    direction: tuple[float, float]
    time: float = 0.0


@dataclass(frozen=True)
class Segment:
    start: Ray
    length: float
    obstacle: int | None = None  # disk hit at the end of the segment
    degenerate: bool = False

    @property
    def end_time(self) -> float:
        return self.start.time + self.length

    def point(self, s):
        p = np.asarray(self.start.position)
        d = np.asarray(self.start.direction)
        return p + np.multiply.outer(np.asarray(s), d)


def reflect(d, n):
    """Specular reflection d - 2 (d.n) n."""
    d = np.asarray(d, dtype=float)
    n = np.asarray(n, dtype=float)
    return d - 2.0 * np.dot(d, n) * n


def _first_hit(p, d, obstacles):
    best, which = math.inf, None
    for k, disk in enumerate(obstacles):
        rel = p - np.asarray(disk.center)
        b = float(np.dot(d, rel))
        c = float(np.dot(rel, rel)) - disk.radius**2
        disc = b * b - c
        if disc < 0:
            continue
        tau = -b - math.sqrt(disc)
        if tau > _HIT_EPS and tau < best:
            best, which = tau, k
    return best, which


def trace_ray(start: Ray, obstacles, t_max: float) -> list[Segment]:
    """Piecewise-linear billiard path of total duration ``t_max``."""
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    p = np.asarray(start.position, dtype=float)
    d = np.asarray(start.direction, dtype=float)
    for disk in obstacles:
        if math.dist(p, disk.center) < disk.radius:
            raise ValueError(f"ray starts inside obstacle {disk}")
    t = start.time
    t_end = start.time + t_max
    segments = []
    while True:
        remaining = t_end - t
        tau, k = _first_hit(p, d, obstacles)
        ray = Ray(tuple(p), tuple(d), t)
        if k is None or tau >= remaining:
            segments.append(Segment(ray, remaining))
            return segments
        q = p + tau * d
        disk = obstacles[k]
        n = (q - np.asarray(disk.center)) / disk.radius
        dn = float(np.dot(d, n))
        degenerate = abs(dn) < TANGENT_TOL
        segments.append(Segment(ray, tau, k, degenerate))
        if not degenerate:
            d = d - 2.0 * dn * n
        p, t = q, t + tau


def interpolate(field: np.ndarray, grid: GridMask, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation that ignores masked nodes.

    Weights of masked corners are dropped and the rest renormalized, so a
    damper pinned to zero inside obstacles does not leak into free space.
    Points with no valid corner (or outside the box) get 0.
    """
    pts = np.atleast_2d(points)
    dim = grid.dim
    u = (pts[:, :dim] / grid.h) + grid.n
    base = np.floor(u).astype(int)
    frac = u - base
    size = 2 * grid.n + 1
    inside = np.all((base >= 0) & (base < size - 1), axis=1)
    base = np.clip(base, 0, size - 2)
    num = np.zeros(len(pts))
    den = np.zeros(len(pts))
    valid = grid.interior
    for corner in np.ndindex(*([2] * dim)):
        idx = tuple(base[:, ax] + corner[ax] for ax in range(dim))
        w = np.ones(len(pts))
        for ax in range(dim):
            w *= frac[:, ax] if corner[ax] else 1.0 - frac[:, ax]
        w = w * valid[idx]
        num += w * field[idx]
        den += w
    out = np.zeros(len(pts))
    ok = inside & (den > 0)
    out[ok] = num[ok] / den[ok]
    return out


@dataclass(frozen=True)
class GccReport:
    satisfied: bool
    T0_estimate: float
    worst_ray: Ray | None
    num_samples: int
    escape_radius: float | None = None
    num_failed: int = 0
    num_degenerate: int = 0
    t_max: float = 0.0
    eps_omega: float = 0.0

    def to_dict(self) -> dict:
        worst = None
        if self.worst_ray is not None:
            worst = {"position": list(self.worst_ray.position),
                     "direction": list(self.worst_ray.direction)}
        t0 = self.T0_estimate if math.isfinite(self.T0_estimate) else None
        return {"satisfied": self.satisfied, "T0_estimate": t0, "worst_ray": worst,
                "num_samples": self.num_samples, "escape_radius": self.escape_radius,
                "num_failed": self.num_failed, "num_degenerate": self.num_degenerate,
                "t_max": self.t_max, "eps_omega": self.eps_omega}

    def to_text(self) -> str:
        kind = "EGC" if self.escape_radius is not None else "GCC"
        verdict = "satisfied" if self.satisfied else "NOT satisfied"
        lines = [f"{kind} {verdict} ({self.num_samples} rays, t_max={self.t_max:g}, "
                 f"eps={self.eps_omega:g})",
                 f"T0 estimate: {self.T0_estimate:.4g}",
                 f"failed rays: {self.num_failed}, tangential hits: {self.num_degenerate}"]
        if self.worst_ray is not None:
            p, d = self.worst_ray.position, self.worst_ray.direction
            lines.append(f"worst ray: start ({p[0]:.4g}, {p[1]:.4g}) direction ({d[0]:.4g}, {d[1]:.4g})")
        return "\n".join(lines)


def _snap(x: np.ndarray, scale: float) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[np.abs(x) < 1e-12 * scale] = 0.0
    return x


def sample_positions(spec: DomainSpec, n_pos: int) -> np.ndarray:
    """Polar lattice of about ``n_pos`` points in B_{r0+1} minus obstacles.

    Rings are equal-area; each ring starts at angle 0, so points on the
    x-axis are always included.
    """
    radius = spec.r0 + 1.0
    rings = max(1, round(math.sqrt(n_pos)))
    pts = []
    for k in range(1, rings + 1):
        rho = radius * math.sqrt((k - 0.5) / rings)
        m = max(1, round(n_pos * (2 * k - 1) / rings**2))
        ang = 2 * np.pi * np.arange(m) / m
        pts.append(np.column_stack([rho * np.cos(ang), rho * np.sin(ang)]))
    pts = _snap(np.vstack(pts), radius)
    keep = np.ones(len(pts), dtype=bool)
    for disk in spec.obstacles:
        keep &= np.hypot(*(pts - np.asarray(disk.center)).T) > disk.radius
    return pts[keep]


def sample_directions(n_dir: int) -> np.ndarray:
    ang = 2 * np.pi * np.arange(n_dir) / n_dir
    return _snap(np.column_stack([np.cos(ang), np.sin(ang)]), 1.0)


def first_success_time(segments, damper, grid, eps_omega, escape_radius=None,
                       ds=None, chunk=256) -> float:
    """First time the path enters {a > eps} (or leaves B_R). inf if never."""
    ds = ds or grid.h / 4
    for seg in segments:
        n_pts = max(2, int(math.ceil(seg.length / ds)) + 1)
        s_all = np.linspace(0.0, seg.length, n_pts)
        for lo in range(0, n_pts, chunk):
            s = s_all[lo:lo + chunk]
            pts = seg.point(s)
            hit = interpolate(damper, grid, pts) > eps_omega
            if escape_radius is not None:
                hit |= np.hypot(pts[:, 0], pts[:, 1]) > escape_radius
            if hit.any():
                return seg.start.time + float(s[np.argmax(hit)])
    return math.inf


def _check(damper, spec, sampling, t_max, eps_omega, escape_radius, grid, threads):
    if spec.dim != 2:
        raise ValueError("ray checks need dim=2")
    n_pos, n_dir = sampling
    if n_pos < 1 or n_dir < 1:
        raise ValueError("sampling counts must be >= 1")
    if not eps_omega > 0:
        raise ValueError("eps_omega must be positive")
    grid = grid or build_grid(spec)
    obstacles = list(spec.obstacles)
    starts = [Ray(tuple(p), tuple(d)) for p in sample_positions(spec, n_pos)
              for d in sample_directions(n_dir)]

    def one(ray):
        segs = trace_ray(ray, obstacles, t_max)
        t_hit = first_success_time(segs, damper, grid, eps_omega, escape_radius)
        return t_hit, sum(s.degenerate for s in segs)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, starts))
    else:
        results = [one(r) for r in starts]
    hits = np.array([r[0] for r in results])
    worst = int(np.argmax(hits)) if len(hits) else None
    failed = int(np.sum(~np.isfinite(hits)))
    return GccReport(
        satisfied=failed == 0,
        T0_estimate=float(hits.max()) if len(hits) else 0.0,
        worst_ray=starts[worst] if worst is not None else None,
        num_samples=len(starts),
        escape_radius=escape_radius,
        num_failed=failed,
        num_degenerate=int(sum(r[1] for r in results)),
        t_max=t_max,
        eps_omega=eps_omega,
    )


def check_gcc(damper, spec: DomainSpec, sampling=(200, 64), t_max: float = 50.0,
              eps_omega: float = 1e-3, *, grid: GridMask | None = None,
              threads: int | None = None) -> GccReport:
    """Does every sampled ray meet {a > eps} before ``t_max``?"""
    return _check(damper, spec, sampling, t_max, eps_omega, None, grid, threads)


def check_egc(damper, spec: DomainSpec, sampling=(200, 64), t_max: float = 50.0,
              escape_radius: float = 5.0, eps_omega: float = 1e-3, *,
              grid: GridMask | None = None, threads: int | None = None) -> GccReport:
    """Like ``check_gcc`` but leaving B_R also counts as success."""
    return _check(damper, spec, sampling, t_max, eps_omega, escape_radius, grid, threads)


__all__ = ["Ray", "Segment", "GccReport", "Disk", "reflect", "trace_ray", "interpolate",
           "check_gcc", "check_egc", "sample_positions", "sample_directions"]
