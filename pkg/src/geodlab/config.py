"""Experiment configuration: typed key = value files with fail-fast checks.

A config file is plain text, one `key = value` per line, with blank
lines and `#` comments ignored.  Every experiment declares its keys in a
registry; unknown keys, malformed values, non-increasing grids, and
out-of-range probabilities are rejected with the offending key named.
Values given on the command line override file values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """A configuration value failed validation."""


@dataclass(frozen=True)
class ParamSpec:
    """One config key: value kind, default, optional inclusive minimum."""

    kind: str  # int | float | prob | grid
    default: object
    minimum: float | None = None


# Per-experiment key registries.  Grids are strictly increasing tuples;
# prob values live in the open interval (0, 1); minima bound counts.
EXPERIMENTS: dict = {
    "count": {
        "r_grid": ParamSpec("grid", (3.0, 4.0, 5.0, 6.0)),
    },
    "thin": {
        "delta_grid": ParamSpec("grid", (0.05, 0.1, 0.2)),
        "tau": ParamSpec("float", 1.5, minimum=0.5),
        "steps": ParamSpec("int", 5, minimum=3),
        "base_height": ParamSpec("float", 40.0, minimum=2.0),
        "tolerance": ParamSpec("float", 2.1, minimum=0.1),
    },
    "bias-verify": {
        "factors": ParamSpec("int", 1, minimum=1),
        "tau_grid": ParamSpec("grid", (3.0, 4.0, 5.0, 6.0, 7.0)),
        "samples": ParamSpec("int", 100_000, minimum=1000),
    },
    "walk": {
        "tau": ParamSpec("float", 2.0, minimum=0.5),
        "steps": ParamSpec("int", 4, minimum=2),
        "delta": ParamSpec("prob", 0.05),
    },
    "mix": {
        "time": ParamSpec("float", 6.0, minimum=1.0),
        "samples": ParamSpec("int", 1_000_000, minimum=10_000),
        "fraction": ParamSpec("prob", 0.02),
    },
    "close": {
        "r_grid": ParamSpec("grid", (3.0, 4.0, 5.0)),
        "samples": ParamSpec("int", 32_000, minimum=1000),
        "fraction": ParamSpec("prob", 0.02),
    },
    "lattice": {
        "systole_grid": ParamSpec("grid", (0.01, 0.1, 1.0)),
        "tau_grid": ParamSpec("grid", (2.0, 3.0, 4.0, 5.0, 6.0)),
        "spread_radius": ParamSpec("float", 0.5, minimum=0.05),
    },
    "veech": {
        "max_length": ParamSpec("float", 6.0, minimum=1.0),
        "step": ParamSpec("float", 0.02, minimum=0.001),
    },
    "recurrence": {
        "horizon": ParamSpec("int", 8, minimum=2),
        "samples": ParamSpec("int", 20_000, minimum=1000),
        "delta": ParamSpec("prob", 0.25),
        "theta": ParamSpec("prob", 0.5),
    },
    "assemble": {
        "r": ParamSpec("float", 6.0, minimum=1.0),
        "bands": ParamSpec("int", 3, minimum=1),
    },
}

DEFAULT_SEED = 20260821


@dataclass
class ExperimentConfig:
    """Validated parameters for one experiment run."""

    experiment: str
    seed: int = DEFAULT_SEED
    workers: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment '{self.experiment}'; choose from "
                f"{', '.join(sorted(EXPERIMENTS))}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit nonnegative integer")
        if int(self.workers) < 1:
            raise ConfigError("workers must be at least 1")
        self.seed = int(self.seed)
        self.workers = int(self.workers)
        spec = EXPERIMENTS[self.experiment]
        unknown = set(self.params) - set(spec)
        if unknown:
            raise ConfigError(
                f"unknown key '{sorted(unknown)[0]}' for experiment "
                f"'{self.experiment}'; valid keys: {', '.join(sorted(spec))}")
        full = {}
        for key, ps in spec.items():
            raw = self.params.get(key, ps.default)
            full[key] = _coerce(self.experiment, key, ps, raw)
        self.params = full


def _coerce(experiment: str, key: str, ps: ParamSpec, raw):
    try:
        if ps.kind == "int":
            v = int(str(raw)) if not isinstance(raw, (int, float)) else int(raw)
            if isinstance(raw, float) and raw != v:
                raise ValueError
        elif ps.kind in ("float", "prob"):
            v = float(raw)
        elif ps.kind == "grid":
            if isinstance(raw, str):
                parts = [p for p in raw.replace(",", " ").split() if p]
                v = tuple(float(p) for p in parts)
            else:
                v = tuple(float(p) for p in raw)
        else:  # pragma: no cover - registry is static
            raise ConfigError(f"bad kind {ps.kind}")
    except (TypeError, ValueError):
        raise ConfigError(
            f"{experiment}.{key}: cannot read {raw!r} as {ps.kind}") from None
    if ps.kind == "grid":
        if len(v) < 1:
            raise ConfigError(f"{experiment}.{key}: grid is empty")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ConfigError(
                f"{experiment}.{key}: grid must be strictly increasing, got {v}")
        if any(not math.isfinite(g) for g in v):
            raise ConfigError(f"{experiment}.{key}: grid entries must be finite")
        return v
    if ps.kind == "prob" and not 0.0 < v < 1.0:
        raise ConfigError(f"{experiment}.{key}: must lie in (0, 1), got {v}")
    if ps.kind in ("float", "int") and not math.isfinite(float(v)):
        raise ConfigError(f"{experiment}.{key}: must be finite")
    if ps.minimum is not None and v < ps.minimum:
        raise ConfigError(
            f"{experiment}.{key}: must be at least {ps.minimum}, got {v}")
    return v


def parse_kv_text(text: str) -> dict:
    """key = value lines into a string dict; comments and blanks skipped."""
    out = {}
    for ln, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {ln}: expected 'key = value', got {line!r}")
        key, val = body.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {ln}: empty key")
        if key in out:
            raise ConfigError(f"line {ln}: duplicate key '{key}'")
        out[key] = val.strip()
    return out


def build_config(experiment: str, file_text: str | None = None,
                 overrides: dict | None = None) -> ExperimentConfig:
    """Merge file values and overrides (overrides win) into a config."""
    kv = parse_kv_text(file_text) if file_text else {}
    if overrides:
        kv.update({k: v for k, v in overrides.items() if v is not None})
    seed = kv.pop("seed", DEFAULT_SEED)
    workers = kv.pop("workers", 1)
    try:
        seed = int(str(seed))
        workers = int(str(workers))
    except ValueError:
        raise ConfigError("seed and workers must be integers") from None
    return ExperimentConfig(experiment=experiment, seed=seed,
                            workers=workers, params=kv)
