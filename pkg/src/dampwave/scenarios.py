"""Canonical experiments and the acceptance checks run by ``dampwave verify``.

Each check returns a :class:`Check` holding a status, the measured numbers,
and the CSV/JSON text it wants persisted. Heavy runs are memoized per
configuration so checks that share a run (local and total decay, for
instance) only pay for it once per process.
"""
from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import domain as dm
from . import energy as em
from . import resolvent as rl
from . import solver
from .config import (DamperSection, DomainSection, ExperimentConfig, InitialSection,
                     ResolventSection, RunSection, with_overrides)
from .rays import check_gcc, trace_ray

PASS, FAIL, ERROR = "PASS", "FAIL", "ERROR"
SKIPPED_GCC = "SKIPPED(GCC_FAIL)"

# -- canonical configurations ---------------------------------------------

EXTERIOR_DISK = ExperimentConfig(
    domain=DomainSection(dim=2, R_box=30.0, h=0.1, obstacles=((0.0, 0.0, 1.0),), r0=2.0, r1=3.0),
    damper=DamperSection(kind="exterior_smooth", inner_radius=1.5),
    initial=InitialSection(kind="bump_u0", center=(2.0, 0.0), width=0.5),
    run=RunSection(name="exterior_disk", T_end=50.0),
)
# box large enough that doubling moves E_total by < 1% up to T_end
DECAY = with_overrides(EXTERIOR_DISK, domain={"R_box": 40.0}, run={"name": "exterior_disk_decay"})
FREE_SPACE = ExperimentConfig(
    domain=DomainSection(dim=2, R_box=70.0, h=0.25, obstacles=(), r0=2.0, r1=3.0),
    damper=DamperSection(kind="constant_one"),
    initial=InitialSection(kind="bump_both", center=(0.0, 0.0), width=2.0),
    run=RunSection(name="free_space", T_end=200.0, fit_tmin=20.0, fit_tmax=180.0, theorem_run=False),
)
RESOLVENT_DISK = ExperimentConfig(
    domain=DomainSection(dim=2, R_box=8.0, h=0.0625, obstacles=((0.0, 0.0, 1.0),), r0=2.0, r1=3.0),
    damper=DamperSection(kind="exterior_smooth", inner_radius=1.5),
    run=RunSection(name="resolvent_disk"),
    resolvent=ResolventSection(),
)
TWO_DISK_TRAP = ExperimentConfig(
    domain=DomainSection(dim=2, R_box=8.0, h=0.1, obstacles=((-2.0, 0.0, 0.5), (2.0, 0.0, 0.5)),
                         r0=3.0, r1=3.5),
    damper=DamperSection(kind="exterior_with_hole", holes=((-2.0, 2.0, -0.1, 0.1),)),
    initial=InitialSection(kind="bump_u0", center=(0.0, 1.5), width=0.5),
    run=RunSection(name="two_disk_trap"),
)
GCC_DISK = with_overrides(EXTERIOR_DISK, domain={"R_box": 8.0}, run={"name": "gcc_disk"})
GCC_FULL = with_overrides(GCC_DISK, damper={"kind": "constant_one"}, run={"name": "gcc_full"})

SHIPPED = {cfg.run.name: cfg for cfg in (EXTERIOR_DISK, DECAY, FREE_SPACE, RESOLVENT_DISK, TWO_DISK_TRAP)}


@dataclass(frozen=True)
class Scale:
    """Knobs that trade fidelity for runtime. ``full`` is the acceptance scale."""

    name: str = "full"
    h_factor: float = 1.0
    T_factor: float = 1.0
    box_factor: float = 1.0
    n_samples: int = 40
    gcc_sampling: tuple[int, int] = (200, 64)
    quad_per_decade: int = 20


FULL = Scale()
QUICK = Scale("quick", h_factor=2.0, T_factor=0.6, box_factor=0.75, n_samples=8,
              gcc_sampling=(60, 24), quad_per_decade=6)


def scaled(cfg: ExperimentConfig, scale: Scale) -> ExperimentConfig:
    if scale.name == "full":
        return cfg
    d, r = cfg.domain, cfg.run
    T = r.T_end * scale.T_factor
    run = {"T_end": T}
    if r.fit_tmax is not None:
        run["fit_tmax"] = 0.9 * T
    dom = {"h": d.h * scale.h_factor}
    if d.R_box is not None:
        dom["R_box"] = max(d.R_box * scale.box_factor, max(d.r0, d.r1) + 2.0)
    return with_overrides(cfg, domain=dom, run=run,
                          resolvent={"n_samples": min(cfg.resolvent.n_samples, scale.n_samples)})


# -- building blocks -------------------------------------------------------

@dataclass
class Problem:
    cfg: ExperimentConfig
    spec: dm.DomainSpec
    grid: dm.GridMask
    damper: np.ndarray

    @classmethod
    def of(cls, cfg: ExperimentConfig) -> "Problem":
        spec = cfg.domain_spec()
        spec.validate()
        grid = dm.build_grid(spec)
        return cls(cfg, spec, grid, dm.sample_damper(cfg.damper_kind(), spec, grid))

    def data(self):
        i = self.cfg.initial
        return dm.initial_data(dm.BumpKind(i.kind), self.spec, self.grid,
                               center=i.center, width=i.width, amplitude=i.amplitude)


@functools.lru_cache(maxsize=None)
def problem(cfg: ExperimentConfig) -> Problem:
    return Problem.of(cfg)


@functools.lru_cache(maxsize=None)
def gcc_report(cfg: ExperimentConfig, threads: int | None = None):
    p = problem(cfg)
    k = cfg.damper
    return check_gcc(p.damper, p.spec, (k.gcc_n_pos, k.gcc_n_dir), k.gcc_t_max, k.gcc_eps,
                     grid=p.grid, threads=threads)


@functools.lru_cache(maxsize=None)
def wave_run(cfg: ExperimentConfig, check_dissipation: bool = True, undamped: bool = False,
             snapshot_times: tuple[float, ...] | None = None) -> solver.RunResult:
    p = problem(cfg)
    a = np.zeros(p.grid.shape) if undamped else p.damper
    return solver.run(p.spec, a, p.data(), cfg.run.T_end, cfg.run.observer_stride or None,
                      grid=p.grid, safety=cfg.run.safety, check_dissipation=check_dissipation,
                      snapshot_times=snapshot_times)


@functools.lru_cache(maxsize=None)
def resolvent_sweeps(cfg: ExperimentConfig, seed: int = 0):
    p = problem(cfg)
    rs = cfg.resolvent
    F = rl.forcing(rs.f_family, p.spec, p.grid, seed=seed)
    mid = rl.sweep(p.grid, p.damper, rs.mid_band, rs.n_samples, F, rs.tol)
    high = rl.sweep(p.grid, p.damper, rs.high_band, rs.n_samples, F, rs.tol)
    return mid, high


def gap_times(cfg: ExperimentConfig) -> tuple[float, ...]:
    lo, hi = cfg.fit_window()
    inner = np.geomspace(lo, hi, 24)
    outer = np.geomspace(max(1.0, lo / 4), cfg.run.T_end, 12)
    return tuple(float(t) for t in np.unique(np.round(np.concatenate([inner, outer]), 9)))


@functools.lru_cache(maxsize=None)
def diffusion_pair(cfg: ExperimentConfig):
    """Wave run and heat run from v0 = u0 + u1, sampled at the same times."""
    p = problem(cfg)
    wave = wave_run(cfg, check_dissipation=False, snapshot_times=gap_times(cfg))
    u0, u1 = p.data()
    heat = solver.heat_run(p.spec, u0 + u1, cfg.run.T_end, grid=p.grid,
                           snapshot_times=wave.snapshots.times)
    return wave, heat, solver.diffusion_gap(wave.snapshots, heat.snapshots)


def fit_json(fit: em.DecayFit) -> dict:
    return fit.to_dict() | {"n_samples": fit.n_samples}


def clear_caches() -> None:
    for fn in (problem, gcc_report, wave_run, resolvent_sweeps, diffusion_pair):
        fn.cache_clear()


# -- checks ----------------------------------------------------------------

@dataclass
class Check:
    key: str
    claim: str
    status: str = PASS
    measured: dict = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)
    detail: str = ""
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def line(self) -> str:
        return f"[{self.status}] {self.key}: {self.detail}"


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


def check_energy_identity(cfg: ExperimentConfig = EXTERIOR_DISK) -> Check:
    damped = wave_run(cfg).trace
    free = wave_run(cfg, undamped=True).trace
    drift = float(np.max(np.abs(free.E_total / free.E_total[0] - 1.0)))
    res = damped.max_residual
    ok = res <= 1e-10 and drift <= 1e-10
    return Check("energy_identity", "energy identity", _status(ok),
                 {"max_residual": res, "undamped_drift": drift},
                 {"trace.csv": damped.to_csv(), "trace_undamped.csv": free.to_csv()},
                 f"max residual {res:.2e}, undamped drift {drift:.2e} (both <= 1e-10)")


def check_free_space(cfg: ExperimentConfig = FREE_SPACE) -> Check:
    tr = wave_run(cfg, check_dissipation=False).trace
    window = cfg.fit_window()
    f_l2 = em.fit_decay(tr.times, tr.l2_sq, window)
    f_e = em.fit_decay(tr.times, tr.E_total, window)
    ok = (0.7 <= f_l2.exponent <= 1.4 and 1.5 <= f_e.exponent <= 2.6
          and min(f_l2.r2, f_e.r2) >= 0.98)
    return Check("free_space_rates", "constant damping rates", _status(ok),
                 {"l2_sq": fit_json(f_l2), "E_total": fit_json(f_e)},
                 {"trace.csv": tr.to_csv()},
                 f"||u||^2 exponent {f_l2.exponent:.3f} (R2 {f_l2.r2:.4f}), "
                 f"E exponent {f_e.exponent:.3f} (R2 {f_e.r2:.4f})")


def _gated(cfg, key, claim, threads):
    rep = gcc_report(cfg, threads)
    if not rep.satisfied:
        return None, Check(key, claim, SKIPPED_GCC, {"gcc": rep.to_dict()},
                           detail=f"{rep.num_failed} sampled rays miss the damper")
    return rep, None


def check_local_decay(cfg: ExperimentConfig = DECAY, threads: int | None = None) -> Check:
    rep, skipped = _gated(cfg, "local_decay", "local energy decay", threads)
    if skipped:
        return skipped
    tr = wave_run(cfg).trace
    fit = em.fit_decay(tr.times, tr.primary_local(), cfg.fit_window())
    ok = fit.exponent >= 1.6 and fit.r2 >= 0.95
    return Check("local_decay", "local energy decay", _status(ok),
                 {"E_r1": fit_json(fit), "gcc": rep.to_dict()},
                 {"trace.csv": tr.to_csv()},
                 f"E_r1 exponent {fit.exponent:.3f} >= 1.6, R2 {fit.r2:.4f} >= 0.95; "
                 f"GCC T0 ~ {rep.T0_estimate:.3g}")


def check_total_decay(cfg: ExperimentConfig = DECAY, threads: int | None = None) -> Check:
    rep, skipped = _gated(cfg, "total_decay", "total energy decay", threads)
    if skipped:
        return skipped
    tr = wave_run(cfg).trace
    window = cfg.fit_window()
    f_l2 = em.fit_decay(tr.times, tr.l2_sq, window)
    f_e = em.fit_decay(tr.times, tr.E_total, window)
    ok = f_l2.exponent >= 0.8 and f_e.exponent >= 1.2
    return Check("total_decay", "total energy decay", _status(ok),
                 {"l2_sq": fit_json(f_l2), "E_total": fit_json(f_e),
                  "theta": str(em.theta(cfg.domain.dim))},
                 {"fits.csv": "quantity,exponent,r2\n"
                  f"l2_sq,{f_l2.exponent!r},{f_l2.r2!r}\nE_total,{f_e.exponent!r},{f_e.r2!r}\n"},
                 f"||u||^2 exponent {f_l2.exponent:.3f} >= 0.8, E exponent {f_e.exponent:.3f} >= 1.2")


def check_box_doubling(cfg: ExperimentConfig = DECAY, threads: int | None = None) -> Check:
    _, skipped = _gated(cfg, "box_doubling", "truncation certificate", threads)
    if skipped:
        return skipped
    base = wave_run(cfg).trace
    big_cfg = with_overrides(cfg, domain={"R_box": 2.0 * cfg.R_box})
    big = wave_run(big_cfg, check_dissipation=False).trace
    change = np.abs(base.E_total - big.E_total) / big.E_total
    worst = float(change.max())
    csv = "t,E_total,E_total_doubled,rel_change\n" + "".join(
        f"{t!r},{a!r},{b!r},{c!r}\n" for t, a, b, c in
        zip(base.times.tolist(), base.E_total.tolist(), big.E_total.tolist(), change.tolist()))
    return Check("box_doubling", "truncation certificate", _status(worst <= 0.01),
                 {"max_rel_change": worst, "R_box": cfg.R_box, "R_box_doubled": big_cfg.R_box},
                 {"doubling.csv": csv},
                 f"max relative change of E_total {worst:.2e} <= 1e-2 (R_box {cfg.R_box:g} vs {big_cfg.R_box:g})")


def check_resolvent_sweeps(cfg: ExperimentConfig = RESOLVENT_DISK, seed: int = 0) -> Check:
    mid, high = resolvent_sweeps(cfg, seed)
    rs = cfg.resolvent
    growth = rl.growth_ratio(high, rs.growth_early, rs.growth_late)
    sup_h1 = mid.sup_h1
    max_res = max(x.residual for x in mid.samples + high.samples if x.ok) if not (
        mid.failures or high.failures) else math.inf
    ok = (not mid.failures and not high.failures and max_res <= rs.tol
          and math.isfinite(sup_h1) and growth <= 1.2)
    return Check("resolvent_sweeps", "intermediate and high frequency resolvent", _status(ok),
                 {"intermediate": mid.summary(), "high": high.summary(), "hf_growth_ratio": growth},
                 {"sweep_mid.csv": mid.to_csv(), "sweep_high.csv": high.to_csv()},
                 f"failures {len(mid.failures) + len(high.failures)}, max residual {max_res:.1e}, "
                 f"sup h1_ratio {sup_h1:.4g}, hf growth {growth:.3f} <= 1.2")


def check_quadratic_identity(cfg: ExperimentConfig = RESOLVENT_DISK, seed: int = 0) -> Check:
    mid, high = resolvent_sweeps(cfg, seed)
    ok_samples = [x for x in mid.samples + high.samples if x.ok]
    worst = max(x.identity_defect for x in ok_samples) if ok_samples else math.nan
    bound = 10 * cfg.resolvent.tol
    csv = "s,identity_defect\n" + "".join(f"{float(x.s)!r},{float(x.identity_defect)!r}\n" for x in ok_samples)
    return Check("quadratic_identity", "quadratic form identity", _status(bool(ok_samples) and worst <= bound),
                 {"max_defect": worst, "bound": bound, "n_solves": len(ok_samples)},
                 {"defects.csv": csv},
                 f"max relative defect {worst:.2e} <= {bound:.0e} over {len(ok_samples)} solves")


CONV_PAIRS = ((2.0, 1.5), (1.25, 3.0), (0.5, 1.5))


def check_convolution_bound(scale: Scale = FULL) -> Check:
    ts = np.geomspace(1.0, 1e4, 4 * scale.quad_per_decade + 1)
    rows, measured, ok = [], {}, True
    for a, b in CONV_PAIRS:
        ratios = [em.conv_bound_ratio(a, b, float(t)) for t in ts]
        rows += [f"{a!r},{b!r},{float(t)!r},{float(r)!r}\n" for t, r in zip(ts, ratios)]
        dmax = em.decade_maxima(ts, ratios)
        growth = {k: dmax[k] / dmax[k - 1] for k in sorted(dmax) if k - 1 in dmax and 10.0**k >= 100}
        ok &= all(g < 1.05 for g in growth.values())
        measured[f"{a:g},{b:g}"] = {"decade_max": {str(k): v for k, v in dmax.items()},
                                    "growth_beyond_100": {str(k): g for k, g in growth.items()}}
    worst = max(max(m["growth_beyond_100"].values()) for m in measured.values())
    return Check("convolution_bound", "convolution bound", _status(ok), measured,
                 {"ratios.csv": "a,b,t,ratio\n" + "".join(rows)},
                 f"largest per-decade growth beyond t=100: {worst:.4f} < 1.05")


def check_diffusion(cfg: ExperimentConfig = FREE_SPACE) -> Check:
    _, heat, gap = diffusion_pair(cfg)
    fits = gap.fits(cfg.fit_window())
    margin = fits["gap"].exponent - fits["u"].exponent
    heat_csv = "t,norm_v,vmax\n" + "".join(
        f"{t!r},{n!r},{m!r}\n" for t, n, m in zip(heat.times.tolist(), heat.l2.tolist(), heat.vmax.tolist()))
    return Check("diffusion_phenomenon", "diffusion phenomenon", _status(margin >= 0.3),
                 {"gap": fit_json(fits["gap"]), "u": fit_json(fits["u"]), "margin": margin},
                 {"gap.csv": gap.to_csv(), "heat.csv": heat_csv},
                 f"gap exponent {fits['gap'].exponent:.3f} - ||u|| exponent "
                 f"{fits['u'].exponent:.3f} = {margin:.3f} >= 0.3")


def _max_offset_from_axis(report, cfg, samples=2000) -> float:
    ray = report.worst_ray
    segs = trace_ray(ray, list(cfg.domain_spec().obstacles), cfg.damper.gcc_t_max)
    return max(float(np.abs(s.point(np.linspace(0, s.length, samples))[:, 1]).max()) for s in segs)


def check_gcc_certifier(scale: Scale = FULL, threads: int | None = None) -> Check:
    sampling = {"gcc_n_pos": scale.gcc_sampling[0], "gcc_n_dir": scale.gcc_sampling[1]}
    disk = with_overrides(GCC_DISK, damper=sampling)
    trap = with_overrides(TWO_DISK_TRAP, damper=sampling)
    full = with_overrides(GCC_FULL, damper=sampling)
    r_disk, r_trap, r_full = (gcc_report(c, threads) for c in (disk, trap, full))
    h = trap.domain.h
    offset = _max_offset_from_axis(r_trap, trap) if r_trap.worst_ray is not None else math.inf
    ok = (r_disk.satisfied and not r_trap.satisfied and offset <= 2 * h
          and r_full.T0_estimate == 0.0)
    return Check("gcc_certifier", "geometric control certifier", _status(ok),
                 {"single_disk": r_disk.to_dict(), "two_disk_trap": r_trap.to_dict(),
                  "trap_axis_offset": offset, "constant_damper": r_full.to_dict()},
                 {"gcc.csv": "case,satisfied,T0_estimate,num_failed,num_samples\n" + "".join(
                     f"{name},{r.satisfied},{float(r.T0_estimate)!r},{r.num_failed},{r.num_samples}\n"
                     for name, r in (("single_disk", r_disk), ("two_disk_trap", r_trap),
                                     ("constant_damper", r_full)))},
                 f"disk satisfied={r_disk.satisfied}, trap satisfied={r_trap.satisfied} "
                 f"(worst ray within {offset:.2g} of axis), a=1 T0={r_full.T0_estimate:g}")


ONE_D = ExperimentConfig(
    domain=DomainSection(dim=1, R_box=5.0, h=0.1, obstacles=(), r0=1.0, r1=2.0),
    damper=DamperSection(kind="constant_one"),
    initial=InitialSection(center=(1.5,)),
    run=RunSection(name="oracle_1d", theorem_run=False),
)


def eigen_oracle_errors(cfg: ExperimentConfig = ONE_D, modes=(1, 2, 5), freqs=(0.5, 2.0, 10.0),
                        a0: float = 1.0, tol: float = 1e-12):
    """Relative errors of the sparse solve against the closed-form modal solution."""
    p = problem(cfg)
    g = p.grid
    length = 2 * g.n * g.h
    x = g.axis + g.n * g.h
    a = g.mask(np.full(g.shape, a0))
    rows = []
    for k in modes:
        F = g.mask(np.sin(k * np.pi * x / length))
        lam_k = 4.0 / g.h**2 * math.sin(k * math.pi * g.h / (2 * length)) ** 2
        for s in freqs:
            exact = F / (lam_k - s * s + 1j * s * a0)
            w, _ = rl.solve(rl.assemble(g, a, s), F, tol)
            err = rl.l2_norm(w - exact, g.h) / rl.l2_norm(exact, g.h)
            rows.append((k, s, err))
    return rows


def check_oracle_1d() -> Check:
    rows = eigen_oracle_errors()
    worst = max(r[2] for r in rows)
    return Check("oracle_1d", "1D eigenfunction oracle", _status(worst <= 1e-9),
                 {"max_rel_error": worst},
                 {"errors.csv": "k,s,rel_error\n" + "".join(f"{k},{float(s)!r},{float(e)!r}\n" for k, s, e in rows)},
                 f"max relative error {worst:.2e} <= 1e-9 over {len(rows)} cases")


# -- suite -----------------------------------------------------------------

def suite(config: ExperimentConfig | None = None, scale: Scale = FULL, seed: int = 0,
          threads: int | None = None):
    """(key, thunk) pairs in report order. ``config`` replaces the decay and
    resolvent scenarios; the remaining checks always use canonical setups."""
    ext = scaled(config or EXTERIOR_DISK, scale)
    decay = scaled(config or DECAY, scale)
    res = scaled(config or RESOLVENT_DISK, scale)
    free = scaled(FREE_SPACE, scale)
    return [
        ("energy_identity", lambda: check_energy_identity(ext)),
        ("free_space_rates", lambda: check_free_space(free)),
        ("local_decay", lambda: check_local_decay(decay, threads)),
        ("total_decay", lambda: check_total_decay(decay, threads)),
        ("box_doubling", lambda: check_box_doubling(decay, threads)),
        ("resolvent_sweeps", lambda: check_resolvent_sweeps(res, seed)),
        ("quadratic_identity", lambda: check_quadratic_identity(res, seed)),
        ("convolution_bound", lambda: check_convolution_bound(scale)),
        ("diffusion_phenomenon", lambda: check_diffusion(free)),
        ("gcc_certifier", lambda: check_gcc_certifier(scale, threads)),
        ("oracle_1d", check_oracle_1d),
    ]


def run_check(key: str, thunk) -> Check:
    t0 = time.perf_counter()
    try:
        out = thunk()
    except Exception as exc:  # reported as a table row, not a crash
        code = getattr(exc, "code", type(exc).__name__)
        out = Check(key, key, ERROR, {"error": code, "message": str(exc)}, detail=f"{code}: {exc}")
    out.seconds = time.perf_counter() - t0
    return out


def format_table(checks: list[Check]) -> str:
    wk = max(len(c.key) for c in checks)
    ws = max([len("status")] + [len(c.status) for c in checks])
    lines = [f"{'check':<{wk}}  {'status':<{ws}}  detail", "-" * (wk + ws + 40)]
    lines += [f"{c.key:<{wk}}  {c.status:<{ws}}  {c.detail}" for c in checks]
    return "\n".join(lines)
