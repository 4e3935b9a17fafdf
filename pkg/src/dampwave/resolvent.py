"""Discrete reduced equation and the damped-wave resolvent.

At real frequency s the reduced equation is

    -lap_h w - s^2 w + i s a w = F

on INTERIOR nodes with homogeneous Dirichlet data. More generally the
resolvent R_a(lam) inverts lam^2 + lam a - lap_h, and the first-order
resolvent (lam - B_a)^{-1} is assembled from it blockwise.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import BumpKind, DomainSpec, GridMask, bump, initial_data, smooth_step
from .energy import forward_diffs, laplacian
from .errors import SolverStagnated

DIRECT_LIMIT = 200_000


def _stencil(grid: GridMask):
    """Interior numbering and the (row, col) pairs of interior neighbours."""
    flat = grid.interior.ravel()
    number = np.full(flat.size, -1, dtype=np.int64)
    number[flat] = np.arange(int(flat.sum()))
    number = number.reshape(grid.shape)
    rows, cols = [], []
    for ax in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        a_idx, b_idx = number[tuple(lo)], number[tuple(hi)]
        both = (a_idx >= 0) & (b_idx >= 0)
        rows.append(a_idx[both])
        cols.append(b_idx[both])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return number, np.concatenate([rows, cols]), np.concatenate([cols, rows])


@dataclass(eq=False)
class HelmholtzSystem:
    """Sparse operator on INTERIOR nodes; ``lam`` is the Laplace variable.

    For the reduced equation at real ``s``, ``lam = i s``.
    """

    matrix: sp.csc_matrix
    lam: complex
    grid: GridMask
    number: np.ndarray = field(repr=False)

    @property
    def s(self) -> float:
        return float(self.lam.imag)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def restrict(self, f: np.ndarray) -> np.ndarray:
        return np.asarray(f)[self.grid.interior]

    def extend(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.shape, dtype=np.result_type(x, float))
        out[self.grid.interior] = x
        return out

    @cached_property
    def lu(self):
        return spla.splu(self.matrix, permc_spec="COLAMD")


def _assemble(grid: GridMask, diag: np.ndarray, lam: complex) -> HelmholtzSystem:
    number, rows, cols = _stencil(grid)
    n = int(grid.interior.sum())
    off = np.full(rows.size, -1.0 / grid.h**2, dtype=complex)
    m = sp.coo_matrix((np.concatenate([diag, off]),
                       (np.concatenate([np.arange(n), rows]), np.concatenate([np.arange(n), cols]))),
                      shape=(n, n)).tocsc()
    return HelmholtzSystem(m, complex(lam), grid, number)


def assemble(grid: GridMask, a: np.ndarray, s: float) -> HelmholtzSystem:
    """-lap_h - s^2 + i s a on INTERIOR nodes."""
    a_int = np.asarray(a, dtype=float)[grid.interior]
    diag = (2 * grid.dim / grid.h**2 - s * s) + 1j * s * a_int
    return _assemble(grid, diag, 1j * s)


def assemble_resolvent(grid: GridMask, a: np.ndarray, lam: complex) -> HelmholtzSystem:
    """lam^2 + lam a - lap_h on INTERIOR nodes."""
    lam = complex(lam)
    a_int = np.asarray(a, dtype=float)[grid.interior]
    diag = 2 * grid.dim / grid.h**2 + lam * lam + lam * a_int
    return _assemble(grid, diag.astype(complex), lam)


@dataclass(frozen=True)
class SolveInfo:
    residual: float
    method: str
    iterations: int


def solve(system: HelmholtzSystem, F: np.ndarray, tol: float = 1e-10,
          direct_limit: int = DIRECT_LIMIT, maxiter: int = 4000):
    """Solve ``system w = F``; returns ``(w, info)`` with ``w`` a grid field.

    Sparse LU below ``direct_limit`` unknowns, otherwise GMRES preconditioned
    by an incomplete factorization of the complex-shifted operator.
    """
    b = system.restrict(F).astype(complex)
    nb = np.linalg.norm(b)
    if nb == 0:
        return system.extend(np.zeros(system.size, dtype=complex)), SolveInfo(0.0, "trivial", 0)
    if system.size <= direct_limit:
        x = system.lu.solve(b)
        method, its = "direct", 1
    else:
        x, its = _iterative(system, b, tol, maxiter)
        method = "gmres+ilu(shifted)"
    res = float(np.linalg.norm(system.matrix @ x - b) / nb)
    if not res <= tol:
        raise SolverStagnated(f"relative residual {res:.3g} > tol {tol:g} ({method}, {its} iterations)")
    return system.extend(x), SolveInfo(res, method, its)


def _iterative(system, b, tol, maxiter):
    # complex-shifted operator: lam^2 -> lam^2 (1 + 0.5i)
    shift = -0.5j * system.lam**2 * sp.identity(system.size, dtype=complex, format="csc")
    ilu = spla.spilu((system.matrix + shift).tocsc(), drop_tol=1e-4, fill_factor=10)
    precond = spla.LinearOperator(system.matrix.shape, ilu.solve, dtype=complex)
    count = [0]

    def cb(_):
        count[0] += 1

    # scipy counts restart cycles; maxiter here bounds inner iterations
    restart = min(200, maxiter)
    x, _ = spla.gmres(system.matrix, b, rtol=tol * 0.1, atol=0.0, restart=restart,
                      maxiter=max(1, maxiter // restart),
                      M=precond, callback=cb, callback_type="pr_norm")
    return x, count[0]


def l2_norm(w: np.ndarray, h: float) -> float:
    return math.sqrt(float(np.vdot(w, w).real) * h ** np.ndim(w))


def grad_norm(w: np.ndarray, h: float) -> float:
    total = sum(float(np.vdot(g, g).real) for g in forward_diffs(w, h))
    return math.sqrt(total * h ** np.ndim(w))


def quadratic_form_defect(system: HelmholtzSystem, w: np.ndarray, F: np.ndarray, a: np.ndarray) -> float:
    """| ||grad w||^2 - s^2 ||w||^2 + i s sum a|w|^2 - <F, w> |, weighted by h^N."""
    h = system.grid.h
    vol = h**system.grid.dim
    s = system.s
    lhs = grad_norm(w, h) ** 2 - s * s * l2_norm(w, h) ** 2 + 1j * s * float((a * np.abs(w) ** 2).sum()) * vol
    rhs = complex(np.vdot(w, F)) * vol  # sum F conj(w)
    return abs(lhs - rhs)


# -- sweeps ----------------------------------------------------------------

@dataclass
class ResolventSample:
    s: float
    norm_w: float = math.nan
    norm_gradw: float = math.nan
    norm_F: float = math.nan
    residual: float = math.nan
    method: str = ""
    iterations: int = 0
    identity_defect: float = math.nan  # relative to ||F|| ||w||
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def h1_ratio(self) -> float:
        return (self.norm_gradw**2 + self.norm_w**2) / self.norm_F**2

    @property
    def hf_ratio(self) -> float:
        return abs(self.s) * self.norm_w / self.norm_F


CSV_FIELDS = ["s", "norm_w", "norm_gradw", "norm_F", "h1_ratio", "hf_ratio", "residual", "method"]


@dataclass
class SweepReport:
    samples: list[ResolventSample]
    band: tuple[float, float]
    tol: float
    metadata: dict = field(default_factory=lambda: {
        "low_frequency_norm": "sampled pointwise boundedness only; Besov norm not computed"})

    @property
    def failures(self) -> list[ResolventSample]:
        return [x for x in self.samples if not x.ok]

    def _ok_in(self, lo=-math.inf, hi=math.inf):
        return [x for x in self.samples if x.ok and lo <= abs(x.s) <= hi]

    def max_over(self, attr: str, lo=-math.inf, hi=math.inf) -> float:
        vals = [getattr(x, attr) for x in self._ok_in(lo, hi)]
        return max(vals) if vals else math.nan

    @property
    def sup_h1(self) -> float:
        return self.max_over("h1_ratio")

    @property
    def sup_hf(self) -> float:
        return self.max_over("hf_ratio")

    def summary(self) -> dict:
        return {"band": list(self.band), "n_samples": len(self.samples),
                "n_failed": len(self.failures), "sup_h1_ratio": self.sup_h1,
                "sup_hf_ratio": self.sup_hf, "tol": self.tol,
                "max_residual": max((x.residual for x in self._ok_in()), default=math.nan),
                "max_identity_defect": max((x.identity_defect for x in self._ok_in()), default=math.nan),
                **self.metadata}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for x in self.samples:
            w.writerow([repr(float(x.s)), repr(x.norm_w), repr(x.norm_gradw), repr(x.norm_F),
                        repr(x.h1_ratio) if x.ok else "nan", repr(x.hf_ratio) if x.ok else "nan",
                        repr(x.residual), x.method if x.ok else x.error])
        return buf.getvalue()


def forcing(kind: str, spec: DomainSpec, grid: GridMask, seed: int = 0,
            center=None, width: float = 0.5) -> np.ndarray:
    """Right-hand sides: ``bump`` (compact, in B_r1), ``random`` (seeded sum of
    bumps in B_r1), ``spread`` (wide bump over most of the box)."""
    if kind == "bump":
        return initial_data(BumpKind.BUMP_U0, spec, grid, center=center, width=width)[0]
    if kind == "random":
        rng = np.random.default_rng(seed)
        out = grid.zeros()
        placed = attempts = 0
        while placed < 8:
            attempts += 1
            if attempts > 10_000:
                raise ValueError("could not place random bumps inside B_r1")
            c = rng.uniform(-spec.r1, spec.r1, size=spec.dim)
            try:
                b = initial_data(BumpKind.BUMP_U0, spec, grid, center=c, width=width)[0]
            except ValueError:
                continue
            out += rng.normal() * b
            placed += 1
        return out
    if kind == "spread":
        reach = grid.n * grid.h
        return grid.mask(bump(grid, (0.0,) * spec.dim, 0.75 * reach))
    raise ValueError(f"unknown forcing family {kind!r}")


def sample_at(grid: GridMask, a: np.ndarray, s: float, F: np.ndarray, tol: float = 1e-10,
              direct_limit: int = DIRECT_LIMIT) -> ResolventSample:
    system = assemble(grid, a, s)
    out = ResolventSample(s=float(s), norm_F=l2_norm(F, grid.h))
    try:
        w, info = solve(system, F, tol, direct_limit)
    except SolverStagnated as exc:
        out.error = f"{exc.code}: {exc}"
        return out
    out.norm_w = l2_norm(w, grid.h)
    out.norm_gradw = grad_norm(w, grid.h)
    out.residual, out.method, out.iterations = info.residual, info.method, info.iterations
    scale = out.norm_F * out.norm_w
    out.identity_defect = quadratic_form_defect(system, w, F, a) / scale if scale > 0 else 0.0
    return out


def sweep(grid: GridMask, a: np.ndarray, band, n_samples: int, F: np.ndarray,
          tol: float = 1e-10, direct_limit: int = DIRECT_LIMIT) -> SweepReport:
    """Solve at ``n_samples`` log-spaced frequencies in ``band``."""
    s_min, s_max = band
    if not 0 < s_min < s_max:
        raise ValueError(f"band must satisfy 0 < s_min < s_max, got {band}")
    freqs = np.geomspace(s_min, s_max, n_samples)
    samples = [sample_at(grid, a, s, F, tol, direct_limit) for s in freqs]
    return SweepReport(samples, (float(s_min), float(s_max)), tol)


def growth_ratio(report: SweepReport, early, late, attr: str = "hf_ratio") -> float:
    """max of ``attr`` over the late band divided by its max over the early band."""
    return report.max_over(attr, *late) / report.max_over(attr, *early)


def resolvent_norm_estimate(system: HelmholtzSystem, iters: int = 30, seed: int = 0) -> float:
    """Power-iteration estimate of the l2 operator norm of the inverse matrix."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=system.size) + 1j * rng.normal(size=system.size)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = system.lu.solve(x)
        z = system.lu.solve(y, trans="H")
        est = math.sqrt(np.linalg.norm(z))
        x = z / np.linalg.norm(z)
    return est


# -- first-order resolvent -------------------------------------------------

@dataclass(frozen=True)
class BlockResult:
    U1: np.ndarray
    U2: np.ndarray
    residual: float


def energy_norm(U1: np.ndarray, U2: np.ndarray, h: float) -> float:
    """||grad U1|| + ||U2||."""
    return grad_norm(U1, h) + l2_norm(U2, h)


def block_resolvent_apply(grid: GridMask, a: np.ndarray, lam: complex, f, tol: float = 1e-9,
                          system: HelmholtzSystem | None = None) -> BlockResult:
    """(lam - B_a)^{-1} (f1, f2) with B_a = [[0, I], [lap, -a]].

    U1 = R_a(lam)((lam + a) f1 + f2), U2 = lam U1 - f1, then the second
    row -lap U1 + (lam + a) U2 = f2 is checked a posteriori.
    """
    lam = complex(lam)
    if lam.real < 0 or lam == 0:
        raise ValueError(f"need Re lam >= 0 and lam != 0, got {lam}")
    f1, f2 = (np.asarray(x) for x in f)
    a = np.asarray(a, dtype=float)
    system = system or assemble_resolvent(grid, a, lam)
    rhs = grid.mask((lam + a) * f1 + f2)
    U1, _ = solve(system, rhs, tol=tol)
    U2 = grid.mask(lam * U1 - f1)
    r2 = grid.mask(-laplacian(U1, grid.h) + (lam + a) * U2 - f2)
    r1 = grid.mask(lam * U1 - U2 - f1)
    scale = l2_norm(f1, grid.h) + l2_norm(f2, grid.h)
    residual = 0.0 if scale == 0 else (l2_norm(r1, grid.h) + l2_norm(r2, grid.h)) / scale
    if residual > tol:
        raise SolverStagnated(f"block resolvent residual {residual:.3g} > {tol:g}")
    return BlockResult(U1, U2, residual)


@dataclass
class LowFreqReport:
    betas: list[float]
    s_grid: np.ndarray
    norms: np.ndarray  # shape (len(betas), len(s_grid))
    data_norm: float

    @property
    def max_per_beta(self) -> np.ndarray:
        return self.norms.max(axis=1)

    @property
    def growth(self) -> np.ndarray:
        m = self.max_per_beta
        return m[1:] / m[:-1]

    @property
    def bounded(self) -> bool:
        return bool(np.all(self.growth < 2.0))

    def summary(self) -> dict:
        return {"betas": list(self.betas), "max_norm_per_beta": self.max_per_beta.tolist(),
                "growth_per_halving": self.growth.tolist(), "bounded": self.bounded,
                "data_norm": self.data_norm,
                "note": "sampled pointwise boundedness only; Besov norm not computed"}


def cutoff(grid: GridMask, radius: float) -> np.ndarray:
    """chi = 1 on |x| <= radius, 0 on |x| >= radius + 1."""
    return 1.0 - smooth_step(grid.radius, radius, radius + 1.0)


def low_freq_probe(grid: GridMask, a: np.ndarray, f, betas=(0.2, 0.1, 0.05, 0.025),
                   s_grid=None, chi_radius: float = 3.0, delta: float = 0.25,
                   tol: float = 1e-9) -> LowFreqReport:
    """Energy norms of chi (lam - B_a)^{-1} chi f along lam = beta + i s."""
    if any(not 0 < b <= delta for b in betas):
        raise ValueError(f"betas must lie in (0, {delta}]")
    if s_grid is None:
        half = delta * np.arange(1, 6) / 5
        s_grid = np.concatenate([-half[::-1], half])
    s_grid = np.asarray(s_grid, dtype=float)
    chi = cutoff(grid, chi_radius)
    f1, f2 = (grid.mask(chi * np.asarray(x)) for x in f)
    norms = np.zeros((len(betas), len(s_grid)))
    for i, beta in enumerate(betas):
        for j, s in enumerate(s_grid):
            res = block_resolvent_apply(grid, a, complex(beta, s), (f1, f2), tol)
            norms[i, j] = energy_norm(chi * res.U1, chi * res.U2, grid.h)
    return LowFreqReport(list(betas), s_grid, norms, energy_norm(f1, f2, grid.h))
