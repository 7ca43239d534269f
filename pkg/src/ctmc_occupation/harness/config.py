"""Experiment configuration files (JSON)."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..chain_algebra import GeneratorMatrix, validate_generator
from ..errors import CtmcLabError, ConfigError
from ..formats import read_generator_csv
from ..stoch_integral import OccupationIntegrand, PiecewiseFunction

KEYS = ("generator", "alpha", "n_grid", "horizon", "replications", "master_seed",
        "epsilon", "init", "integrands", "test_level")
MIN_REPLICATIONS = 100


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment input.

    ``init`` is ``"stationary"``, a 1-based state index, or ``None`` for the
    per-experiment default. ``epsilon=None`` means ``0.25 * alpha``.
    """

    generator: GeneratorMatrix
    alpha: float = 1.0
    n_grid: tuple = (100,)
    horizon: float = 1.0
    replications: int = 1000
    master_seed: int = 0
    epsilon: float | None = None
    init: object = None
    integrands: tuple = ()
    test_level: float = 0.01
    integrand_specs: tuple = field(default=(), compare=False)

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not grid:
            raise ConfigError("n_grid must be nonempty")
        if any(n < 1 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"n_grid must be strictly increasing positive integers, got {grid}")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if int(self.replications) != self.replications or self.replications < MIN_REPLICATIONS:
            raise ConfigError(f"replications must be an integer >= {MIN_REPLICATIONS}")
        if self.epsilon is not None and not 0 < self.epsilon < self.alpha / 2:
            raise ConfigError(f"epsilon must lie in (0, alpha/2) = (0, {self.alpha / 2})")
        if not 0 < self.test_level < 1:
            raise ConfigError("test_level must lie in (0, 1)")
        if self.init is not None and self.init != "stationary":
            if isinstance(self.init, bool) or not isinstance(self.init, int) \
                    or not 1 <= self.init <= self.generator.d:
                raise ConfigError(f"init must be 'stationary' or a state in 1..{self.generator.d}")

    @property
    def eps(self) -> float:
        return 0.25 * self.alpha if self.epsilon is None else float(self.epsilon)

    def init_for(self, default):
        """Initial law for the simulator: ``"stationary"`` or a 0-based state."""
        init = default if self.init is None else self.init
        return init if init == "stationary" else int(init) - 1

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, master_seed=int(seed))

    def echo(self) -> dict:
        return {
            "generator": self.generator.matrix.tolist(),
            "alpha": self.alpha,
            "n_grid": list(self.n_grid),
            "horizon": self.horizon,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "epsilon": self.eps,
            "init": self.init,
            "integrands": list(self.integrand_specs),
            "test_level": self.test_level,
        }


def parse_integrand(spec: dict):
    kind = spec.get("kind", "piecewise")
    body = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "piecewise":
        return PiecewiseFunction.from_spec(body)
    if kind == "occupation":
        unknown = set(body) - {"offset", "coefficients"}
        if unknown:
            raise ConfigError(f"unknown occupation-integrand keys {sorted(unknown)}")
        return OccupationIntegrand.from_spec(body)
    raise ConfigError(f"unknown integrand kind {kind!r}")


def config_from_dict(raw: dict, base_dir=None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "generator" not in raw:
        raise ConfigError("config needs a 'generator'")
    gen = raw["generator"]
    try:
        if isinstance(gen, dict):
            if set(gen) != {"csv"}:
                raise ConfigError("generator object must be {\"csv\": path}")
            path = Path(gen["csv"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            generator = read_generator_csv(path)
        else:
            generator = validate_generator(gen)
        specs = tuple(raw.get("integrands", ()))
        integrands = tuple(parse_integrand(s) for s in specs)
    except ConfigError:
        raise
    except (CtmcLabError, ValueError, KeyError, TypeError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    kwargs = {k: raw[k] for k in KEYS if k in raw and k not in ("generator", "integrands")}
    if "n_grid" in kwargs:
        kwargs["n_grid"] = tuple(kwargs["n_grid"])
    return ExperimentConfig(generator=generator, integrands=integrands, integrand_specs=specs, **kwargs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)
