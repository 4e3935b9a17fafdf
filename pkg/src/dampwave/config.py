"""Sectioned ``key = value`` experiment configuration.

Sections: ``[domain] [damper] [initial] [run] [resolvent] [output]``.
Lines starting with ``#`` or ``;`` are comments. Optional values may be
written as ``auto``. ``parse_config(serialize(cfg)) == cfg`` for every
valid config.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import domain as dm
from .errors import ParseError, SpecInvalid, ValidationError

DAMPER_KINDS = ("constant_one", "zero", "exterior_smooth", "exterior_with_hole", "table")
F_FAMILIES = ("bump", "random", "spread")


@dataclass(frozen=True)
class DomainSection:
    dim: int = 2
    R_box: float | None = None  # auto: r1 + T_end/2 + 10h
    h: float = 0.1
    obstacles: tuple[tuple[float, ...], ...] = ((0.0, 0.0, 1.0),)  # (x, y, radius)
    r0: float = 2.0
    r1: float = 3.0


@dataclass(frozen=True)
class DamperSection:
    kind: str = "exterior_smooth"
    inner_radius: float = 1.5
    holes: tuple[tuple[float, ...], ...] = ()
    table_file: str = ""
    gcc_n_pos: int = 200
    gcc_n_dir: int = 64
    gcc_t_max: float = 50.0
    gcc_eps: float = 1e-3


@dataclass(frozen=True)
class InitialSection:
    kind: str = "bump_u0"
    center: tuple[float, ...] | None = None
    width: float = 0.5
    amplitude: float = 1.0


@dataclass(frozen=True)
class RunSection:
    name: str = "scenario"
    T_end: float = 50.0
    safety: float = 0.9
    observer_stride: int = 0  # 0: every ceil(0.5/dt) steps
    fit_tmin: float | None = None
    fit_tmax: float | None = None
    theorem_run: bool = True


@dataclass(frozen=True)
class ResolventSection:
    mid_band: tuple[float, ...] = (0.25, 4.0)
    high_band: tuple[float, ...] = (5.0, 40.0)
    n_samples: int = 40
    f_family: str = "bump"
    tol: float = 1e-10
    growth_early: tuple[float, ...] = (5.0, 10.0)
    growth_late: tuple[float, ...] = (20.0, 40.0)


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"
    seed: int = 0


SECTIONS = {
    "domain": DomainSection,
    "damper": DamperSection,
    "initial": InitialSection,
    "run": RunSection,
    "resolvent": ResolventSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    domain: DomainSection = field(default_factory=DomainSection)
    damper: DamperSection = field(default_factory=DamperSection)
    initial: InitialSection = field(default_factory=InitialSection)
    run: RunSection = field(default_factory=RunSection)
    resolvent: ResolventSection = field(default_factory=ResolventSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- derived objects ---------------------------------------------------
    @property
    def R_box(self) -> float:
        d = self.domain
        if d.R_box is not None:
            return d.R_box
        return d.r1 + self.run.T_end / 2 + 10 * d.h

    def domain_spec(self) -> dm.DomainSpec:
        d = self.domain
        disks = tuple(dm.Disk(tuple(o[:-1]), o[-1]) for o in d.obstacles)
        return dm.DomainSpec(d.dim, self.R_box, d.h, disks, d.r0, d.r1)

    def damper_kind(self):
        k = self.damper
        if k.kind == "constant_one":
            return dm.ConstantOne()
        if k.kind == "zero":
            return dm.Zero()
        if k.kind == "exterior_smooth":
            return dm.ExteriorSmooth(k.inner_radius)
        if k.kind == "exterior_with_hole":
            return dm.ExteriorWithHole(k.holes)
        return dm.Table(np.loadtxt(k.table_file, delimiter=",", ndmin=1))

    def fit_window(self) -> tuple[float, float]:
        lo, hi = dm_default_window(self)
        return (self.run.fit_tmin if self.run.fit_tmin is not None else lo,
                self.run.fit_tmax if self.run.fit_tmax is not None else hi)

    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def dm_default_window(cfg: ExperimentConfig):
    return max(10.0, 2.0 * (cfg.domain.r1 + cfg.domain.r0)), 0.9 * cfg.run.T_end


# -- value codecs ----------------------------------------------------------

def _field_type(cls, name):
    return {f.name: f.type for f in fields(cls)}[name]


def _decode(typ: str, raw: str):
    raw = raw.strip()
    optional = "None" in typ
    if optional and raw.lower() == "auto":
        return None
    if typ.startswith("tuple[tuple"):
        if not raw:
            return ()
        return tuple(tuple(float(x) for x in group.split(",")) for group in raw.split(";") if group.strip())
    if typ.startswith("tuple"):
        return tuple(float(x) for x in raw.split(","))
    if typ.startswith("bool"):
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ.startswith("int"):
        return int(raw)
    if typ.startswith("float"):
        return float(raw)
    return raw


def _encode(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(", ".join(repr(float(x)) for x in g) for g in value)
        return ", ".join(repr(float(x)) for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(cfg: ExperimentConfig) -> str:
    lines = []
    for name in SECTIONS:
        section = getattr(cfg, name)
        lines.append(f"[{name}]")
        for f in fields(section):
            lines.append(f"{f.name} = {_encode(getattr(section, f.name))}".rstrip())
        lines.append("")
    return "\n".join(lines)


def parse_config(text: str) -> ExperimentConfig:
    values: dict[str, dict[str, str]] = {name: {} for name in SECTIONS}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError(f"malformed section header {stripped!r}", lineno)
            current = stripped[1:-1].strip()
            if current not in SECTIONS:
                raise ParseError(f"unknown section [{current}]", lineno)
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {stripped!r}", lineno)
        if current is None:
            raise ParseError("key outside of any section", lineno)
        key, raw = (p.strip() for p in stripped.split("=", 1))
        cls = SECTIONS[current]
        if key not in {f.name for f in fields(cls)}:
            raise ParseError(f"unknown key {key!r} in [{current}]", lineno)
        if key in values[current]:
            raise ParseError(f"duplicate key {key!r} in [{current}]", lineno)
        try:
            values[current][key] = _decode(_field_type(cls, key), raw)
        except ValueError as exc:
            raise ParseError(f"bad value for {key!r}: {exc}", lineno) from None
    cfg = ExperimentConfig(**{name: SECTIONS[name](**values[name]) for name in SECTIONS})
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    d, k, i, r, rs = cfg.domain, cfg.damper, cfg.initial, cfg.run, cfg.resolvent

    def need(ok, name, msg):
        if not ok:
            raise ValidationError(name, msg)

    need(d.dim in (1, 2), "dim", "must be 1 or 2")
    need(d.h > 0 and math.isfinite(d.h), "h", "must be positive")
    need(d.r0 > 0, "r0", "must be positive")
    need(d.r1 > 0, "r1", "must be positive")
    need(d.R_box is None or d.R_box > max(d.r0, d.r1), "R_box", "must exceed r0 and r1")
    need(all(len(o) == d.dim + 1 for o in d.obstacles), "obstacles", "each entry is center..., radius")
    need(k.kind in DAMPER_KINDS, "kind", f"damper kind must be one of {DAMPER_KINDS}")
    need(k.kind != "table" or bool(k.table_file), "table_file", "required for kind = table")
    need(k.gcc_n_pos >= 1 and k.gcc_n_dir >= 1, "gcc_n_pos", "sampling counts must be >= 1")
    need(k.gcc_t_max > 0, "gcc_t_max", "must be positive")
    need(k.gcc_eps > 0, "gcc_eps", "must be positive")
    need(i.kind in {b.value for b in dm.BumpKind}, "kind", "initial kind must be bump_u0, bump_u1 or bump_both")
    need(i.center is None or len(i.center) == d.dim, "center", "wrong dimension")
    need(i.width > 0, "width", "must be positive")
    need(r.T_end > 0, "T_end", "must be positive")
    need(0 < r.safety <= 1, "safety", "must lie in (0, 1]")
    need(r.observer_stride >= 0, "observer_stride", "must be >= 0")
    lo, hi = cfg.fit_window()
    need(lo < hi, "fit_tmin", "fit window is empty")
    for name in ("mid_band", "high_band", "growth_early", "growth_late"):
        band = getattr(rs, name)
        need(len(band) == 2 and 0 < band[0] < band[1], name, "need 0 < lo < hi")
    need(rs.n_samples >= 2, "n_samples", "must be >= 2")
    need(rs.f_family in F_FAMILIES, "f_family", f"must be one of {F_FAMILIES}")
    need(rs.tol > 0, "tol", "must be positive")
    need(cfg.output.seed >= 0, "seed", "must be a non-negative integer")
    try:
        cfg.domain_spec().validate()
    except SpecInvalid as exc:
        raise ValidationError("obstacles", str(exc)) from None


def with_overrides(cfg: ExperimentConfig, **sections) -> ExperimentConfig:
    """Replace fields section-wise: ``with_overrides(cfg, run={"T_end": 10})``."""
    out = {name: getattr(cfg, name) for name in SECTIONS}
    for name, changes in sections.items():
        out[name] = dataclasses.replace(out[name], **changes)
    return ExperimentConfig(**out)
