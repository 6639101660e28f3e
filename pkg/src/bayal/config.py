"""Experiment configuration: defaults, flat ``key=value`` files, validation.

Precedence is command-line flags, then the config file, then defaults.
``output_dir`` falls back to ``$BAYAL_OUTPUT_DIR`` and then ``bayal-output``.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

SCENARIOS = ("synthetic", "uneven", "bupa", "wdbc")
METHODS = ("proposed", "adsl")
DEFAULT_OUTPUT_DIR = "bayal-output"


class ConfigError(ValueError):
    """Raised with every validation problem found, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    scenario: str = "synthetic"
    methods: tuple = ("proposed", "adsl")
    n0: int = 0
    adsl_n0: int = 0
    budget: int = 30
    omega: float = 0.5
    gamma: float = 0.5
    adsl_alpha: Optional[float] = None  # ADSL's single level; defaults to gamma
    M_prior: int = 1000
    M_reps: int = 100
    k_cap: Optional[int] = None
    k0: int = 20
    seed: int = 0
    points_per_level: int = 5
    uneven_scale: int = 2
    grid_points: int = 61
    bupa_path: Optional[str] = None
    wdbc_path: Optional[str] = None
    output_dir: Optional[str] = None

    def problems(self) -> list:
        out = []
        if self.scenario not in SCENARIOS:
            out.append(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not self.methods:
            out.append("methods must be nonempty")
        for m in self.methods:
            if m not in METHODS:
                out.append(f"unknown method {m!r}; choose from {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            out.append("methods contains duplicates")
        for name in ("omega", "gamma", "adsl_alpha"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                out.append(f"{name} must lie strictly inside (0, 1), got {v}")
        if self.budget < 1:
            out.append(f"budget must be >= 1, got {self.budget}")
        for name in ("n0", "adsl_n0"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be >= 0")
        for name in ("M_prior", "M_reps", "k0", "points_per_level", "uneven_scale", "grid_points"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.k_cap is not None and self.k_cap < 1:
            out.append(f"k_cap must be >= 1, got {self.k_cap}")
        if self.scenario in ("bupa", "wdbc"):
            path = getattr(self, f"{self.scenario}_path")
            if not path:
                out.append(f"scenario {self.scenario} needs {self.scenario}_path")
            elif not Path(path).is_file():
                out.append(f"{self.scenario}_path {path!r} does not exist")
        return out

    def validate(self) -> "ExperimentConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def resolved_output_dir(self) -> str:
        return self.output_dir or os.environ.get("BAYAL_OUTPUT_DIR") or DEFAULT_OUTPUT_DIR

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        return d

    def to_text(self) -> str:
        lines = []
        for k, v in self.to_dict().items():
            if v is None:
                continue
            lines.append(f"{k}={','.join(v) if isinstance(v, list) else v}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INT = {"n0", "adsl_n0", "budget", "M_prior", "M_reps", "k_cap", "k0", "seed", "points_per_level", "uneven_scale", "grid_points"}
_FLOAT = {"omega", "gamma", "adsl_alpha"}
ALIASES = {"reps": "M_reps", "m_reps": "M_reps", "m_prior": "M_prior"}


def coerce(key: str, value):
    """Parse a raw string (or pass through a typed value) for field ``key``."""
    key = ALIASES.get(key, key)
    if key not in _FIELDS:
        raise ConfigError([f"unknown config key {key!r}"])
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
        return key, None
    try:
        if key == "methods":
            if isinstance(value, str):
                value = [m.strip() for m in value.split(",") if m.strip()]
            return key, tuple(value)
        if key in _INT:
            return key, int(value)
        if key in _FLOAT:
            return key, float(value)
    except (TypeError, ValueError):
        raise ConfigError([f"{key}: cannot parse {value!r}"]) from None
    return key, str(value)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """``key=value`` lines; ``#`` starts a comment; blank lines are skipped."""
    out, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source} line {lineno}: expected key=value")
            continue
        k, v = (s.strip() for s in line.split("=", 1))
        try:
            key, val = coerce(k, v)
            out[key] = val
        except ConfigError as err:
            problems.extend(f"{source} line {lineno}: {p}" for p in err.problems)
    if problems:
        raise ConfigError(problems)
    return out


def load_config_file(path) -> dict:
    """A flat ``key=value`` file, or a run manifest (``.json``) whose ``config`` is reused."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file {str(path)!r} does not exist"])
    text = path.read_text()
    if path.suffix == ".json":
        try:
            raw = json.loads(text)["config"]
        except (ValueError, KeyError):
            raise ConfigError([f"{path}: not a run manifest"]) from None
        return dict(coerce(k, v) for k, v in raw.items())
    return parse_config_text(text, str(path))


def build_config(file_values: Optional[dict] = None, flag_values: Optional[dict] = None) -> ExperimentConfig:
    """Merge defaults < file < flags and validate the result."""
    values = {}
    values.update(file_values or {})
    values.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    return ExperimentConfig(**values).validate()
