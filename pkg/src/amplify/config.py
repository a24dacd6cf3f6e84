"""Experiment configuration: ``[section]`` headers with ``key = value`` lines.

Three sections are recognized, ``algebra``, ``analysis`` and ``run``.  Every
key is optional; unknown sections or keys are errors.  List values are comma
separated.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AlgebraConfig:
    a: Optional[int] = None
    b: Optional[int] = None
    D: int = 3
    E: int = 1
    f: int = 1
    Cprime: Optional[float] = None      # None: computed from k_nu and b
    vol_gamma: float = 2 * math.pi
    unit_height_H: int = 20


@dataclass(frozen=True)
class AnalysisConfig:
    rmax: float = 320.0                 # transform window beyond nu
    grid_step: float = 0.01
    osc_panels: int = 20000
    error_C: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    command: Optional[str] = None
    nus: tuple = (40.0, 80.0, 160.0)
    r_grid: tuple = (50.0, 100.0, 200.0, 400.0)
    n_max: int = 200
    stab_n_max: int = 1000
    deltas: tuple = (0.05, 0.1, 0.2)
    side_ns: tuple = (1, 2, 3, 4)
    side_nu: float = 40.0
    M_grid: tuple = (1e3, 1e4, 1e5, 1e6)
    budget_nu: float = 1e6
    budget_A: float = 0.1
    budget_Cpp: float = 0.1
    orbital_max: float = 15.0          # recorded sup of |I| (1 + nu d)^(1/2) on the standard grid: 14.968
    out: str = "reports"
    threads: int = 1
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    algebra: AlgebraConfig = field(default_factory=AlgebraConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def echo(self) -> dict:
        """Experiment parameters; output directory and thread count are left out
        so reports do not depend on where or how they were produced."""
        return {
            name: {f.name: _jsonable(getattr(getattr(self, name), f.name))
                   for f in fields(getattr(self, name)) if f.name not in _EXECUTION_ONLY}
            for name in ("algebra", "analysis", "run")
        }


_EXECUTION_ONLY = ("out", "threads")


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


_SECTIONS = {"algebra": AlgebraConfig, "analysis": AnalysisConfig, "run": RunConfig}


def _convert(cls, key: str, raw: str):
    default = getattr(cls(), key)
    hint = {f.name: f.type for f in fields(cls)}[key]
    try:
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            kind = int if key == "side_ns" else float
            return tuple(kind(s) for s in items)
        if "int" in str(hint) and "float" not in str(hint):
            return int(raw)
        if "float" in str(hint):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{cls.__name__[:-6].lower()}.{key}: cannot parse {raw!r}") from exc


def _validate(cfg: ExperimentConfig) -> None:
    al, an, run = cfg.algebra, cfg.analysis, cfg.run
    if al.D <= 1 or math.isqrt(al.D) ** 2 == al.D:
        raise ConfigError("algebra.D must be a non-square integer > 1")
    if al.E < 1 or al.f < 1:
        raise ConfigError("algebra.E and algebra.f must be positive")
    if al.a is not None and al.a != al.D:
        raise ConfigError("algebra.a must equal algebra.D")
    if al.b is not None and al.b != -al.E:
        raise ConfigError("algebra.b must equal -algebra.E")
    if al.Cprime is not None and al.Cprime < 1:
        raise ConfigError("algebra.Cprime must be at least 1")
    if al.vol_gamma <= 0 or al.unit_height_H < 1:
        raise ConfigError("algebra.vol_gamma and algebra.unit_height_H must be positive")
    if an.rmax <= 0 or not 0 < an.grid_step <= 0.1 or an.osc_panels < 16 or an.error_C <= 0:
        raise ConfigError("analysis values out of range")
    if any(nu <= 0 for nu in run.nus) or any(r <= 0 for r in run.r_grid):
        raise ConfigError("run.nus and run.r_grid must be positive")
    if run.n_max < 1 or run.stab_n_max < 1 or any(n < 1 for n in run.side_ns):
        raise ConfigError("run counts must be positive")
    if any(not 0 < d < 1 for d in run.deltas):
        raise ConfigError("run.deltas must lie in (0, 1)")
    if any(M <= 3 for M in run.M_grid):
        raise ConfigError("run.M_grid entries must exceed 3")
    if run.threads < 1 or run.seed < 0 or run.seed >= 2**64:
        raise ConfigError("run.threads must be >= 1 and run.seed a u64")


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (D, E, Cprime)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    parts = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        cls = _SECTIONS[section]
        known = {f.name for f in fields(cls)}
        values = {}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {section}.{key}")
            values[key] = _convert(cls, key, raw)
        parts[section] = replace(cls(), **values)
    cfg = ExperimentConfig(**parts)
    _validate(cfg)
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return parse_config("")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
