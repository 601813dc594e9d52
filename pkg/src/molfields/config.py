"""Run configuration: documented defaults, flat key=value config files, and
command-line overrides with precedence flag > file > default."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .extract import ExtractionConfig
from .grid import GridSpec, RbfParams, channel_layout
from .schedule import NoiseSchedule, build_schedule


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    channels: str = "qm9"
    grid: tuple[int, int, int] = (32, 32, 32)
    res: float = 0.33
    sigma: float = 0.224
    amplitude: float = 1.0
    steps: int = 100
    nu_atoms: float = 1.0
    nu_bonds: float = 1.5
    schedule_offset: float = 0.008
    beta: float = 2.0
    peak_threshold: float = 0.3
    bond_margin: float = 0.35
    bond_probe_radius: float = 0.45
    bond_value_threshold: float = 0.3
    opt_iterations: int = 500
    opt_learning_rate: float = 5.0
    gamma_keep_threshold: float = 0.5

    def grid_spec(self) -> GridSpec:
        return GridSpec(self.grid, self.res)

    def rbf_params(self) -> RbfParams:
        return RbfParams(self.sigma, self.amplitude)

    def atom_channels(self) -> tuple[str, ...]:
        return channel_layout(self.channels)

    def schedule(self) -> NoiseSchedule:
        return build_schedule(self.steps, self.nu_atoms, self.nu_bonds, self.schedule_offset)

    def extraction_config(self, optimize_gammas: bool = True) -> ExtractionConfig:
        return ExtractionConfig(
            peak_threshold=self.peak_threshold,
            bond_margin=self.bond_margin,
            bond_probe_radius=self.bond_probe_radius,
            bond_value_threshold=self.bond_value_threshold,
            opt_iterations=self.opt_iterations,
            opt_learning_rate=self.opt_learning_rate,
            gamma_keep_threshold=self.gamma_keep_threshold,
            optimize_gammas=optimize_gammas,
        )

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


def _parse_value(name: str, raw: str, target_type) -> object:
    raw = raw.strip()
    if name == "grid":
        parts = raw.replace("x", " ").replace(",", " ").split()
        if len(parts) != 3:
            raise ValueError(f"grid must look like HxWxD, got {raw!r}")
        return tuple(int(p) for p in parts)
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {f.name: type(getattr(RunConfig(), f.name)) for f in fields(RunConfig)}
    overrides: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {line_no}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ValueError(f"config line {line_no}: unknown key {key!r}")
        overrides[key] = _parse_value(key, raw, types[key])
    return overrides


def load_run_config(path: str | None, cli_overrides: dict | None = None) -> RunConfig:
    """Assemble the effective config: defaults, then file, then CLI flags."""
    config = RunConfig()
    if path is not None:
        with open(path) as fh:
            config = replace(config, **parse_config_text(fh.read()))
    if cli_overrides:
        config = replace(config, **{k: v for k, v in cli_overrides.items() if v is not None})
    return config
