"""Tolerances, resolution tiers and construction defaults in one place."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any


BACKEND_ENV = "FBMS_BACKEND"


def backend_name() -> str:
    """Kernel backend requested through the environment: ``numba`` or ``numpy``."""
    value = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    return "numpy" if value in {"numpy", "python", "off", "0"} else "numba"


@dataclass(frozen=True)
class Tolerances:
    geometric: float = 1e-9
    integral: float = 1e-6
    degenerate_area: float = 1e-12
    group_axioms: float = 1e-12
    index_relative: float = 1e-6
    root: float = 1e-14
    quadrature: float = 1e-10


@dataclass(frozen=True)
class Tier:
    name: str
    # octant resolution of sweepout slices: catenoid columns, rows, ribbon columns
    slice_columns: int
    slice_rows: int
    slice_ribbon: int
    # revolved catenoid and disc meshes
    radial: int
    axial: int
    disc_rings: int
    # octant resolution of the starting surface for the genus-one search
    search_columns: int
    search_rows: int
    search_ribbon: int


TIERS: dict[str, Tier] = {
    "fast": Tier("fast", 8, 8, 4, 48, 24, 24, 8, 8, 6),
    "standard": Tier("standard", 16, 16, 6, 96, 48, 50, 12, 12, 8),
    "fine": Tier("fine", 32, 32, 12, 192, 96, 100, 16, 16, 10),
}


def finer(t: Tier) -> Tier:
    """The next tier up; ``fine`` refines itself by doubling."""
    order = ["fast", "standard", "fine"]
    if t.name != "fine":
        return TIERS[order[order.index(t.name) + 1]]
    return Tier("fine-x2", *(2 * getattr(t, f.name) for f in fields(Tier) if f.name != "name"))


def tier(name: str) -> Tier:
    try:
        return TIERS[name]
    except KeyError:
        raise ValueError(f"unknown tier {name!r}; expected one of {sorted(TIERS)}") from None


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run depends on. Loaded from a flat ``key = value`` file."""

    tier: str = "standard"
    seed: int = 0
    h0: float = 0.1
    smoothing_width: float = 0.02
    t0: float = 0.15
    eps0: float = 0.03
    beta_max: float = 80.0
    grid_ns: int = 16
    grid_nt: int = 16
    max_iterations: int = 400
    search_iterations: int = 60
    search_start_s: float = 0.5
    search_start_t: float = 0.5
    gradient_tolerance: float = 1e-6
    volume_samples: int = 20000
    tolerances: Tolerances = field(default_factory=Tolerances)

    def with_overrides(self, **kwargs: Any) -> "RunConfig":
        tol_keys = {f.name for f in fields(Tolerances)}
        tol_updates = {k: v for k, v in kwargs.items() if k in tol_keys}
        own = {k: v for k, v in kwargs.items() if k not in tol_keys}
        cfg = replace(self, **own)
        if tol_updates:
            cfg = replace(cfg, tolerances=replace(cfg.tolerances, **tol_updates))
        return cfg


def _coerce(raw: str, template: Any) -> Any:
    if isinstance(template, bool):
        return raw.lower() in {"1", "true", "yes", "on"}
    if isinstance(template, int):
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    return raw


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines. ``#`` starts a comment; blank lines are ignored."""
    cfg = base or RunConfig()
    known = {f.name: getattr(cfg, f.name) for f in fields(RunConfig) if f.name != "tolerances"}
    known.update({f.name: getattr(cfg.tolerances, f.name) for f in fields(Tolerances)})
    updates: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        try:
            updates[key] = _coerce(raw.strip('"'), known[key])
        except ValueError:
            raise ValueError(f"config line {lineno}: bad value {raw!r} for {key}") from None
    cfg = cfg.with_overrides(**updates)
    tier(cfg.tier)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


DEFAULT_TOLERANCES = Tolerances()
