"""Run configuration: dataclasses, TOML loading and validation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field

from .errors import ConfigError
from .evolution import EvolutionConfig, PerturbationSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
STAGES = ("flrw", "geometry-verify", "evolve", "diagnose")


@dataclass
class BackgroundConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    a_min: float = 1e-6

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "a_min"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"background.{name} must be positive")
        if self.a_min >= 1.0:
            raise ConfigError("background.a_min must be below 1")


@dataclass
class GeometryConfig:
    n_eta: int = 16
    n_xi1: int = 16
    n_xi2: int = 16
    fd_order: int = 2
    n_points: int = 20

    def __post_init__(self):
        if self.fd_order not in (2, 4, 6):
            raise ConfigError("geometry.fd_order must be 2, 4 or 6")
        if min(self.n_eta, self.n_xi1, self.n_xi2) < 2:
            raise ConfigError("geometry grid sizes must be at least 2")


@dataclass
class DiagnosticsConfig:
    lambda_star: float = 0.1
    energy_order: int = 1
    a_fit: float = 1e-2
    fit_degree: int = 2
    blowup_a_max: float = 1e-2
    c_eps: float = 0.0
    monotonicity_a_cut: float = 0.5
    identity_dt_scale: float = 5e-4
    identity_stride: int = 8
    energy_every: int = 1

    def __post_init__(self):
        if not self.lambda_star > 0.0:
            raise ConfigError("diagnostics.lambda_star must be positive")
        if self.energy_order not in (0, 1):
            raise ConfigError("diagnostics.energy_order must be 0 or 1")
        if not 0.0 < self.a_fit < 1.0:
            raise ConfigError("diagnostics.a_fit must lie in (0, 1)")
        if not self.identity_dt_scale > 0.0:
            raise ConfigError("diagnostics.identity_dt_scale must be positive")
        if self.identity_stride < 1 or self.energy_every < 1:
            raise ConfigError("diagnostics strides must be at least 1")


@dataclass
class OutputConfig:
    directory: str = "s3crunch-out"
    checkpoint_every: int = 1
    tail_rows: int = 200

    def __post_init__(self):
        if self.checkpoint_every < 1 or self.tail_rows < 1:
            raise ConfigError("output.checkpoint_every and output.tail_rows must be at least 1")


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    stages: tuple = STAGES
    background: BackgroundConfig = field(default_factory=BackgroundConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """sha256 of the canonical JSON form of the resolved configuration."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    key: str
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.key}: {self.message}"


SECTIONS = {
    "background": BackgroundConfig,
    "geometry": GeometryConfig,
    "evolution": EvolutionConfig,
    "diagnostics": DiagnosticsConfig,
    "output": OutputConfig,
}
TOP_LEVEL = {"schema_version", "seed", "stages"} | set(SECTIONS)


def _field_names(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def _build_section(name: str, cls, raw: dict, diags: list):
    kwargs = {}
    for key, value in raw.items():
        if key not in _field_names(cls):
            diags.append(Diagnostic("warning", f"{name}.{key}", "unknown key ignored"))
            continue
        if cls is EvolutionConfig and key == "perturbation":
            if not isinstance(value, dict):
                diags.append(Diagnostic("error", "evolution.perturbation", "must be a table"))
                continue
            sub = {}
            for pk, pv in value.items():
                if pk not in _field_names(PerturbationSpec):
                    diags.append(Diagnostic("warning", f"evolution.perturbation.{pk}", "unknown key ignored"))
                else:
                    sub[pk] = tuple(pv) if isinstance(pv, list) else pv
            try:
                value = PerturbationSpec(**sub)
            except (ConfigError, TypeError) as exc:
                diags.append(Diagnostic("error", "evolution.perturbation", str(exc)))
                continue
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ConfigError, TypeError) as exc:
        diags.append(Diagnostic("error", name, str(exc)))
        return None


def config_from_dict(raw: dict) -> tuple[RunConfig | None, list]:
    """Build a RunConfig; returns (config or None, diagnostics)."""
    diags: list[Diagnostic] = []
    for key in raw:
        if key not in TOP_LEVEL:
            diags.append(Diagnostic("warning", key, "unknown key ignored"))
    version = raw.get("schema_version")
    if version is None:
        diags.append(Diagnostic("error", "schema_version", "missing schema version"))
    elif version != SCHEMA_VERSION:
        diags.append(Diagnostic("error", "schema_version", f"unsupported version {version!r}"))
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        diags.append(Diagnostic("error", "seed", "must be a non-negative integer"))
    stages = tuple(raw.get("stages", STAGES))
    bad = [s for s in stages if s not in STAGES]
    if bad:
        diags.append(Diagnostic("error", "stages", f"unknown stages {bad}"))
    sections = {}
    for name, cls in SECTIONS.items():
        sub = raw.get(name, {})
        if not isinstance(sub, dict):
            diags.append(Diagnostic("error", name, "must be a table"))
            continue
        sections[name] = _build_section(name, cls, sub, diags)
    bgc, evc = sections.get("background"), sections.get("evolution")
    if bgc is not None and evc is not None and evc.a_stop < bgc.a_min:
        diags.append(Diagnostic("error", "evolution.a_stop",
                                f"evolution.a_stop ({evc.a_stop}) is below background.a_min ({bgc.a_min})"))
    if any(d.level == "error" for d in diags):
        return None, diags
    return RunConfig(schema_version=version, seed=seed, stages=stages, **sections), diags


def read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc


def validate(path) -> list:
    """Schema and cross-field checks; an empty list means the file is well formed."""
    try:
        raw = read_toml(path)
    except ConfigError as exc:
        return [Diagnostic("error", "<file>", str(exc))]
    return config_from_dict(raw)[1]


def load_config(path) -> tuple[RunConfig, list]:
    """Load and validate; raises ConfigError listing every error, returns warnings."""
    cfg, diags = config_from_dict(read_toml(path))
    errors = [d for d in diags if d.level == "error"]
    if errors:
        raise ConfigError("; ".join(f"{d.key}: {d.message}" for d in errors))
    return cfg, diags
