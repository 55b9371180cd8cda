"""Per-command run configurations and their flat ``key = value`` text form."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .metrics import AGGREGATIONS, DEFAULT_NORMALS_K
from .resample import UpsampleConfig
from .spectral import ModelConfig
from .synth import SyntheticSpec


class ConfigError(ValueError):
    pass


@dataclass
class ModelParams:
    grid: str = "auto"
    kmax: int = 8
    max_iter: int = 100
    gamma: float = 0.5
    rho: float = 0.7
    rho_f: float = 0.9
    stop_eps: float = 1e-10
    min_block_points: int = 3
    clamp_margin: float = 0.5

    def upsample_config(self, scale: float) -> UpsampleConfig:
        if self.grid == "auto":
            grid = None
        else:
            try:
                grid = int(self.grid)
            except ValueError:
                raise ConfigError(f"grid must be an integer or 'auto', got {self.grid!r}") from None
        model = ModelConfig(self.kmax, self.max_iter, self.gamma, self.rho, self.rho_f, self.stop_eps)
        return UpsampleConfig(scale, model, grid, self.min_block_points, self.clamp_margin)


@dataclass
class UpsampleRun(ModelParams):
    command = "upsample"
    input: str = ""
    output: str = ""
    report: str = ""
    scale: float = 2.0
    format: str = "binary-le"
    precision: int = 64
    timing: bool = False


@dataclass
class EvaluateRun:
    command = "evaluate"
    test: str = ""
    reference: str = ""
    report: str = ""
    aggregation: str = "mean-norm"
    normals_k: int = DEFAULT_NORMALS_K


@dataclass
class SynthRun:
    command = "synth"
    shape: str = "plane"
    n_points: int = 1000
    seed: int = 0
    height: float = 0.3
    offset: float = 0.25
    amplitude: float = 0.1
    frequency: float = 1.0
    radius: float = 0.5
    cap_angle: float = 60.0
    output: str = ""
    format: str = "binary-le"
    precision: int = 64

    def spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            self.shape, self.n_points, self.seed, self.height, self.offset,
            self.amplitude, self.frequency, self.radius, self.cap_angle,
        )


@dataclass
class BenchRun(ModelParams):
    command = "bench"
    manifest: str = ""
    output: str = ""  # CSV table
    report: str = ""  # JSON sweep record
    sweep: str = ""  # e.g. "gamma=0.25,0.5,1.0;rho=0.6,0.7"
    aggregation: str = "mean-norm"
    normals_k: int = DEFAULT_NORMALS_K


RUN_TYPES = {cls.command: cls for cls in (UpsampleRun, EvaluateRun, SynthRun, BenchRun)}


def _parse_value(kind, text: str, key: str):
    try:
        if kind is bool or kind == "bool":
            low = text.strip().lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if kind is int or kind == "int":
            return int(text)
        if kind is float or kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from None
    return text


def _field_types(cls):
    return {f.name: f.type for f in fields(cls)}


def check(run) -> None:
    """Validate enumerated options shared by all commands."""
    agg = getattr(run, "aggregation", None)
    if agg is not None and agg not in AGGREGATIONS:
        raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {agg!r}")
    fmt = getattr(run, "format", None)
    if fmt is not None and fmt not in ("ascii", "binary-le"):
        raise ConfigError(f"format must be 'ascii' or 'binary-le', got {fmt!r}")
    prec = getattr(run, "precision", None)
    if prec is not None and prec not in (32, 64):
        raise ConfigError(f"precision must be 32 or 64, got {prec}")


def dumps(run) -> str:
    lines = [f"command = {run.command}"]
    for f in fields(run):
        v = getattr(run, f.name)
        text = repr(v) if isinstance(v, float) else str(v)
        if "\n" in text:
            raise ConfigError(f"value of {f.name!r} contains a newline")
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def loads(text: str, cls=None):
    """Parse ``key = value`` lines; ``#`` starts a comment line."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    command = values.pop("command", None)
    if cls is None:
        if command not in RUN_TYPES:
            raise ConfigError(f"unknown or missing command {command!r}")
        cls = RUN_TYPES[command]
    elif command is not None and command != cls.command:
        raise ConfigError(f"config is for {command!r}, not {cls.command!r}")
    types = _field_types(cls)
    unknown = sorted(set(values) - set(types))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    run = cls(**{k: _parse_value(types[k], v, k) for k, v in values.items()})
    check(run)
    return run


def load(path, cls=None):
    with open(path, encoding="utf-8") as f:
        return loads(f.read(), cls)


def replace(run, **changes):
    types = _field_types(type(run))
    unknown = sorted(set(changes) - set(types))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    out = dataclasses.replace(run, **changes)
    check(out)
    return out

