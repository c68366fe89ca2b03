"""Tunable parameters shared by the connector, absorber and pipeline."""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

CONFIG_ENV = "HAMEXPANDER_CONFIG"


def next_odd(x: float) -> int:
    k = math.ceil(x)
    return k if k % 2 else k + 1


@dataclass(frozen=True)
class PipelineConfig:
    # connector
    ell: int = 9
    ell_cap: int = 1000
    copies_r: int = 32
    last_step_threshold: int | None = None   # None: max(8, ceil(m/20))
    connector_retries: int = 5
    max_rounds: int = 400
    use_dummies: bool = False
    # absorber
    gadget_ell: int = 3
    p_reservoir: float = 0.02
    max_gadgets: int = 24
    template_degree: int = 3
    template_m0: int = 1
    absorber_retries: int = 3
    gadget_copies_r: int = 256
    alpha_target: float = 0.5
    # cover / hookups
    forest_parts: int = 8
    merge_forest: bool = True
    rotation_budget: int = 4000
    reservoir_ell: int = 12
    reservoir_retries: int = 5
    # dispatcher
    regime_epsilon: float = 0.05
    inside_degree_exponent: float = 0.5      # X = vertices with >= (1/2) d^{1-c} own-side neighbours
    exact_max_n: int = 22
    search_max_n: int = 64
    search_node_budget: int = 2_000_000
    time_limit: float = 120.0
    pipeline_retries: int = 3
    # measurement
    tv_tolerance: float = 1e-3
    master_seed: int = 0
    threads: int = 1
    adjustments: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        notes = list(self.adjustments)
        cap = self.ell_cap if self.ell_cap % 2 else self.ell_cap - 1
        for name in ("ell", "gadget_ell", "reservoir_ell"):
            value = getattr(self, name)
            if value < 1:
                raise ValueError(f"{name} must be positive")
            fixed = next_odd(value) if name != "reservoir_ell" else value
            fixed = min(fixed, cap)
            if fixed != value:
                object.__setattr__(self, name, fixed)
                notes.append(f"{name} {value} -> {fixed}")
        if not 0 <= self.p_reservoir <= 1:
            raise ValueError("p_reservoir must lie in [0, 1]")
        for name in ("copies_r", "gadget_copies_r", "connector_retries", "absorber_retries", "reservoir_retries",
                     "max_rounds", "pipeline_retries", "forest_parts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.template_degree % 2 == 0 or self.template_m0 % 2 == 0:
            raise ValueError("template degree and m0 must be odd")
        object.__setattr__(self, "adjustments", tuple(notes))

    def threshold(self, m: int) -> int:
        if self.last_step_threshold is not None:
            return self.last_step_threshold
        return max(8, math.ceil(m / 20))

    def replace(self, **kw) -> "PipelineConfig":
        return dataclasses.replace(self, adjustments=(), **kw)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["adjustments"] = list(self.adjustments)
        return out


def _coerce(text: str, kind):
    if kind in (bool, "bool"):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    if kind == "int | None":
        return None if text.strip().lower() in ("none", "") else int(text)
    return text


_TYPES = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def parse_config_text(text: str) -> dict:
    """Flat `key = value` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES or key == "adjustments":
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _coerce(value, _TYPES[key])
    return out


def load_config(path=None, **overrides) -> PipelineConfig:
    values = {}
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)
