"""Experiment configuration and the flat key=value config-file format."""
import math
from dataclasses import dataclass, fields, replace

from ..errors import ConfigError

PRESET_CHOICES = (
    "ou_accuracy",
    "anisotropic",
    "rfp_reduced",
    "beam_relaxation",
    "positivity_importance",
    "dr_benchmark",
)


@dataclass
class ExperimentConfig:
    """One experiment: preset identity plus every tunable it honors."""

    preset: str
    degree: int = 2
    nx: int = 64
    ny: int = 64
    tau: float = 1e-2
    t0: float = 0.0
    t_end: float = 1.0
    sigma: float = 1.0
    m: float = 1.0
    m_b: float = 1.0
    T: float = 1.0
    u: tuple = (0.0, 0.0)
    eps_inv: float = 1.0
    limiter: bool = True
    output_stride: int = 100
    out_dir: str = "."

    def __post_init__(self):
        if self.preset not in PRESET_CHOICES:
            raise ConfigError(
                f"unknown preset {self.preset!r}; choose one of {PRESET_CHOICES}"
            )
        for name in ("degree", "nx", "ny", "output_stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("tau", "sigma", "m", "m_b", "T", "eps_inv"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not math.isfinite(self.t_end) or self.t_end <= self.t0:
            raise ConfigError(f"t_end must exceed t0, got {self.t0} .. {self.t_end}")


def _parse_value(name: str, kind, raw: str):
    raw = raw.strip()
    if kind is bool or name == "limiter":
        if raw.lower() in ("on", "true", "1", "yes"):
            return True
        if raw.lower() in ("off", "false", "0", "no"):
            return False
        raise ConfigError(f"cannot parse boolean {name}={raw!r} (use on/off)")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is tuple:
        parts = [p for p in raw.replace(",", " ").split() if p]
        if len(parts) != 2:
            raise ConfigError(f"{name} must be two numbers, got {raw!r}")
        return (float(parts[0]), float(parts[1]))
    return raw


def parse_config_file(path) -> ExperimentConfig:
    """Read a flat key=value file; unknown keys are errors."""
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    kinds = {
        "preset": str, "degree": int, "nx": int, "ny": int, "tau": float,
        "t0": float, "t_end": float, "sigma": float, "m": float, "m_b": float,
        "T": float, "u": tuple, "eps_inv": float, "limiter": bool,
        "output_stride": int, "out_dir": str,
    }
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, kinds[key], raw)
    if "preset" not in values:
        raise ConfigError(f"{path}: missing required key 'preset'")
    from .presets import preset_defaults

    base = preset_defaults(values["preset"])
    return replace(base, **values)
