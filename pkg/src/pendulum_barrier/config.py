"""Run configuration: a flat key = value text format with CLI overrides."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .integrator import ArcOptions
from .model import PendulumParams, TWO_PI


class ConfigError(ValueError):
    """Bad configuration file or values."""


@dataclass
class RunConfig:
    M: float = 0.1
    m: float = 0.1
    l: float = 1.0
    g: float = 10.0
    k_min: int = -1
    k_max: int = 1
    tol_abs: float = 1e-10
    tol_rel: float = 1e-9
    max_step: float = 0.01
    theta1_win_lo: float = -TWO_PI - 1.0
    theta1_win_hi: float = TWO_PI + 1.0
    theta2_max: float = 0.0  # 0 = auto (3 sqrt(g/l))
    max_backward_time: float = 30.0
    grid_n: int = 241
    oracle_grid_n: int = 60
    oracle_t_max: float = 10.0
    seed: int = 0
    out_dir: str = "out"

    def validate(self):
        if not (self.M > 0 and self.m > 0 and self.l > 0 and self.g > 0):
            raise ConfigError("M, m, l, g must all be positive")
        if not (self.tol_abs > 0 and self.tol_rel > 0 and self.max_step > 0):
            raise ConfigError("tolerances and max_step must be positive")
        if not (self.theta1_win_lo < self.theta1_win_hi):
            raise ConfigError("theta1 window must satisfy lo < hi")
        if self.theta2_max < 0:
            raise ConfigError("theta2_max must be >= 0 (0 = auto)")
        if self.k_min > self.k_max:
            raise ConfigError("k_min must be <= k_max")
        if self.grid_n < 16 or self.oracle_grid_n < 4:
            raise ConfigError("grid resolutions too small")
        if self.max_backward_time <= 0 or self.oracle_t_max <= 0:
            raise ConfigError("time horizons must be positive")
        return self

    def params(self) -> PendulumParams:
        return PendulumParams(self.M, self.m, self.l, self.g)

    def k_range(self):
        return tuple(range(self.k_min, self.k_max + 1))

    def arc_options(self) -> ArcOptions:
        return ArcOptions(
            max_backward_time=self.max_backward_time,
            theta1_window=(self.theta1_win_lo, self.theta1_win_hi),
            theta2_max=None if self.theta2_max == 0.0 else self.theta2_max,
            rtol=self.tol_rel,
            atol=self.tol_abs,
            max_step=self.max_step,
        )

    def resolved_theta2_max(self) -> float:
        return 3.0 * math.sqrt(self.g / self.l) if self.theta2_max == 0.0 else self.theta2_max


def render_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {v!r}" if isinstance(v, str) else f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    known = {f.name: f.type for f in fields(RunConfig)}
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in ("k_min", "k_max", "grid_n", "oracle_grid_n", "seed"):
                kwargs[key] = int(value)
            elif key == "out_dir":
                kwargs[key] = value.strip("'\"")
            else:
                kwargs[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return RunConfig(**kwargs).validate()


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
