"""Run configuration: a line-oriented ``key = value`` format.

Each non-blank line not starting with ``#`` holds one ``key = value`` pair.
Values are Python literals (numbers, ``True``/``False``, quoted strings,
lists and nested lists); a bare word is read as a string.  For example::

    model = mixture
    means = [[0.2, 0.2], [0.75, 0.3]]
    sigma = 0.1
    energy_levels = [1.38, 2.2, 3.2, 5.0]
    temperatures = [1, 2, 4, 8]
    n_values = [10000, 50000, 100000]
    replications = 20

Parsing collects every problem before reporting, so a config with three
mistakes produces three messages.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .estimate import DEFAULT_FUNCTIONALS, FUNCTIONALS, SamplerSettings
from .kernel_lab import SCENARIOS
from .proposals import GaussianRandomWalk, MatrixProposal
from .target import DoubleWell, FiniteModel, GaussianMixture, LadderConfig

MODELS = ("mixture", "double-well", "finite")


class ConfigError(ValueError):
    """Raised with the full list of problems found in a config."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    model: str | None = None
    means: tuple | None = None
    sigma: float = 0.1
    weights: tuple | None = None
    height: float = 1.0
    box: tuple = (-3.0, 3.0)
    energies: tuple | None = None
    energy_levels: tuple | None = None
    temperatures: tuple | None = None
    ring_policy: str = "clamp"
    theta: float = 0.5
    gamma0: float = 1.0
    c: float = 0.2
    p_ee: float = 0.1
    burn_in_N: int = 1000
    s0: float = 0.1
    min_stage_factor: int = 50
    min_ring_samples: int = 25
    flatten: bool = False
    n_values: tuple = (10_000,)
    replications: int = 20
    functionals: tuple | None = None
    seed: int = 0
    scenario: str | None = None
    kernel_file: str | None = None
    out: str | None = None

    @property
    def has_sampler(self) -> bool:
        return self.model is not None

    @property
    def dimension(self) -> int:
        return len(self.means[0]) if self.model == "mixture" and self.means else 1

    @property
    def active_functionals(self) -> tuple:
        """The configured functionals, or a default suited to the model."""
        if self.functionals is not None:
            return self.functionals
        if self.model == "mixture" and self.dimension >= 2:
            return DEFAULT_FUNCTIONALS
        return ("mean_x1", "mean_x1_sq")

    def build_model(self):
        if self.model == "mixture":
            return GaussianMixture(self.means, self.sigma, self.weights)
        if self.model == "double-well":
            return DoubleWell(self.height, self.box)
        if self.model == "finite":
            return FiniteModel(self.energies)
        raise ConfigError(["model: no sampler model configured"])

    def build_ladder(self) -> LadderConfig:
        return LadderConfig(self.energy_levels, self.temperatures, self.ring_policy)

    def build_proposals(self, ladder: LadderConfig):
        """Uniform proposal for finite models, ``s0 sqrt(T_i)`` random walks otherwise."""
        if self.model == "finite":
            S = len(self.energies)
            return MatrixProposal(np.full((S, S), 1.0 / S))
        return GaussianRandomWalk.for_ladder(self.s0, ladder.temperatures)

    def settings(self) -> SamplerSettings:
        return SamplerSettings(theta=self.theta, gamma0=self.gamma0, c=self.c, p_ee=self.p_ee,
                               burn_in_N=self.burn_in_N, s0=self.s0,
                               min_stage_factor=self.min_stage_factor,
                               min_ring_samples=self.min_ring_samples, flatten=self.flatten)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_FLOATS = ("sigma", "height", "theta", "gamma0", "c", "p_ee", "s0")
_INTS = ("burn_in_N", "min_stage_factor", "min_ring_samples", "replications", "seed")
_STRINGS = ("model", "ring_policy", "scenario", "kernel_file", "out")


def _read_value(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        pass
    if raw in ("true", "false"):
        return raw == "true"
    if raw and all(ch.isalnum() or ch in "-_./" for ch in raw):
        return raw
    raise ValueError(f"malformed value {raw!r}")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _number_list(key, v, errors, nested=False):
    if not isinstance(v, (list, tuple)) or not v:
        errors.append(f"{key}: expected a non-empty list")
        return None
    if nested:
        rows = [_number_list(key, r, errors) for r in v]
        if any(r is None for r in rows):
            return None
        if len({len(r) for r in rows}) != 1:
            errors.append(f"{key}: rows have different lengths")
            return None
        return tuple(rows)
    if not all(_is_number(x) and math.isfinite(x) for x in v):
        errors.append(f"{key}: entries must be finite numbers")
        return None
    return tuple(float(x) for x in v)


def _coerce(key, v, errors):
    if key in _FLOATS:
        if not _is_number(v) or not math.isfinite(v):
            errors.append(f"{key}: expected a finite number, got {v!r}")
            return None
        return float(v)
    if key in _INTS:
        if isinstance(v, bool) or not isinstance(v, int):
            errors.append(f"{key}: expected an integer, got {v!r}")
            return None
        return v
    if key in _STRINGS:
        if not isinstance(v, str):
            errors.append(f"{key}: expected a string, got {v!r}")
            return None
        return v
    if key == "flatten":
        if not isinstance(v, bool):
            errors.append(f"flatten: expected True or False, got {v!r}")
            return None
        return v
    if key == "means":
        return _number_list(key, v, errors, nested=True)
    if key in ("weights", "box", "energies", "energy_levels", "temperatures"):
        return _number_list(key, v, errors)
    if key == "n_values":
        if (not isinstance(v, (list, tuple)) or not v
                or not all(isinstance(n, int) and not isinstance(n, bool) for n in v)):
            errors.append("n_values: expected a non-empty list of integers")
            return None
        return tuple(v)
    if key == "functionals":
        if not isinstance(v, (list, tuple)) or not v or not all(isinstance(f, str) for f in v):
            errors.append("functionals: expected a non-empty list of names")
            return None
        return tuple(v)
    raise AssertionError(key)


def _validate(cfg: RunConfig, given: set, errors: list) -> None:
    if cfg.model is None and cfg.scenario is None:
        errors.append("model: missing required key (or give a kernel-lab scenario)")
    if cfg.model is not None:
        if cfg.model not in MODELS:
            errors.append(f"model: must be one of {', '.join(MODELS)}")
        for key in ("energy_levels", "temperatures"):
            if getattr(cfg, key) is None and key not in given:
                errors.append(f"{key}: missing required key")
        if cfg.model == "mixture" and cfg.means is None and "means" not in given:
            errors.append("means: missing required key for a mixture model")
        if cfg.model == "finite" and cfg.energies is None and "energies" not in given:
            errors.append("energies: missing required key for a finite model")
    if cfg.energy_levels is not None and cfg.temperatures is not None:
        try:
            LadderConfig(cfg.energy_levels, cfg.temperatures, cfg.ring_policy)
        except ValueError as exc:
            errors.append(f"ladder: {exc}")
    elif cfg.temperatures is not None:
        T = cfg.temperatures
        if any(b <= a for a, b in zip(T, T[1:])):
            errors.append("ladder: temperatures not increasing")
    if cfg.ring_policy not in ("clamp", "strict"):
        errors.append("ring_policy: must be 'clamp' or 'strict'")
    if cfg.sigma <= 0:
        errors.append("sigma: must be positive")
    if cfg.weights is not None:
        if any(w <= 0 for w in cfg.weights):
            errors.append("weights: must be positive")
        if cfg.means is not None and len(cfg.weights) != len(cfg.means):
            errors.append("weights: need one weight per mixture component")
    if cfg.box is not None and (len(cfg.box) != 2 or cfg.box[0] >= cfg.box[1]):
        errors.append("box: expected [low, high] with low < high")
    if not 0.0 <= cfg.theta <= 1.0:
        errors.append("theta: must lie in [0, 1]")
    if cfg.gamma0 <= 0:
        errors.append("gamma0: must be positive")
    if not 0.0 < cfg.c < 1.0:
        errors.append("c: must lie in (0, 1)")
    if not 0.0 <= cfg.p_ee <= 1.0:
        errors.append("p_ee: must lie in [0, 1]")
    if cfg.burn_in_N < 0:
        errors.append("burn_in_N: must be nonnegative")
    if cfg.s0 <= 0:
        errors.append("s0: must be positive")
    if cfg.min_stage_factor < 1:
        errors.append("min_stage_factor: must be at least 1")
    if cfg.min_ring_samples < 1:
        errors.append("min_ring_samples: must be at least 1")
    if cfg.replications < 2:
        errors.append("replications: must be at least 2")
    if cfg.seed < 0 or cfg.seed >= 2 ** 64:
        errors.append("seed: must be an unsigned 64-bit integer")
    if any(n <= cfg.burn_in_N for n in cfg.n_values):
        errors.append("n_values: every N must exceed burn_in_N")
    unknown = [f for f in cfg.active_functionals if f not in FUNCTIONALS]
    if unknown:
        errors.append(f"functionals: unknown {unknown}; choose from {sorted(FUNCTIONALS)}")
    if cfg.model is not None and not unknown:
        for f in cfg.active_functionals:
            if f in ("mean_x2", "mean_x2_sq") and cfg.dimension < 2:
                errors.append(f"functionals: {f} needs a two-dimensional model")
            if f == "prob_discs" and cfg.model != "mixture":
                errors.append("functionals: prob_discs needs a mixture model")
    if cfg.scenario is not None and cfg.scenario != "all" and cfg.scenario not in SCENARIOS:
        errors.append(f"scenario: unknown {cfg.scenario!r}; choose from {sorted(SCENARIOS)}")
    if cfg.scenario == "custom" and cfg.kernel_file is None:
        errors.append("kernel_file: required by the custom scenario")


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem."""
    errors: list[str] = []
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, raw = (p.strip() for p in s.split("=", 1))
        if key not in _FIELDS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            v = _read_value(raw)
        except ValueError as exc:
            errors.append(f"{key}: {exc}")
            values[key] = None
            continue
        values[key] = _coerce(key, v, errors) if v is not None else None
    given = set(values)
    clean = {k: v for k, v in values.items() if v is not None}
    cfg = replace(RunConfig(), **clean)
    _validate(cfg, given, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _emit_value(v, bare: bool = True) -> str:
    if isinstance(v, str):
        try:
            ast.literal_eval(v)
        except (ValueError, SyntaxError):
            if bare and v and all(ch.isalnum() or ch in "-_./" for ch in v):
                return v
        return repr(v)
    if isinstance(v, tuple):
        return "[" + ", ".join(_emit_value(x, bare=False) for x in v) + "]"
    return repr(v)


def emit_config(cfg: RunConfig) -> str:
    """Text form of ``cfg``; ``parse_config(emit_config(cfg)) == cfg``."""
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        lines.append(f"{f.name} = {_emit_value(v)}")
    return "\n".join(lines) + "\n"
