# ramdp/experiment_config.py

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .environments import ENVIRONMENT_KEYS
from .learners import (
    DEFAULT_EPSILON,
    DEFAULT_GAMMA,
    DEFAULT_MAP_PRIOR_ALPHA,
    DEFAULT_PRIOR_STRENGTH,
    LearnerConfig,
    LearnerMethod,
)

logger = logging.getLogger('Ramdp')

EXPLORATION_MODES = ("optimistic", "uniform")


class ConfigError(ValueError):
    """Raised for unreadable, malformed or inconsistent experiment documents."""


@dataclass(frozen=True)
class SwitchingConfig:
    environment: str
    after: int


@dataclass(frozen=True)
class ExperimentConfig:
    environment: str
    learners: tuple
    trajectories: int
    repetitions: int = 100
    seed: int = 0
    horizon: int = None
    xi: float = 1.0
    exploration: str = "optimistic"
    tolerance: float = 1e-6
    max_iterations: int = 100000
    doubling_on_transitions: bool = False
    switching: SwitchingConfig = None
    stop_threshold: float = None
    record_timing: bool = False
    workers: int = None


REQUIRED_EXPERIMENT_KEYS = ("environment", "trajectories")
OPTIONAL_EXPERIMENT_KEYS = {
    "repetitions": 100,
    "seed": 0,
    "horizon": None,
    "xi": 1.0,
    "exploration": "optimistic",
    "tolerance": 1e-6,
    "max_iterations": 100000,
    "doubling_on_transitions": False,
    "switching": None,
    "stop_threshold": None,
    "record_timing": False,
    "workers": None,
}
LEARNER_KEYS = {
    "method": None,
    "label": "",
    "epsilon": DEFAULT_EPSILON,
    "prior_strength": list(DEFAULT_PRIOR_STRENGTH),
    "strength_cap": None,
    "map_prior_alpha": DEFAULT_MAP_PRIOR_ALPHA,
    "gamma": DEFAULT_GAMMA,
    "dirichlet_cap": None,
}
SWITCHING_KEYS = ("environment", "after")


def _reject_unknown(section, allowed, path, source):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{source}: unknown key '{path}{key}'")


def _require(section, key, path, source):
    if key not in section:
        raise ConfigError(f"{source}: missing required key '{path}{key}'")
    return section[key]


def _as_int(value, key, source, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{source}: '{key}' must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{source}: '{key}' must be >= {minimum}, got {value}")
    return value


def _as_float(value, key, source):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{source}: '{key}' must be a number, got {value!r}")
    return float(value)


def _optional(value, convert):
    return None if value is None else convert(value)


def _parse_learner(document, index, source):
    path = f"learners[{index}]."
    if not isinstance(document, dict):
        raise ConfigError(f"{source}: '{path[:-1]}' must be an object")
    _reject_unknown(document, LEARNER_KEYS, path, source)
    method = _require(document, "method", path, source)
    try:
        method = LearnerMethod(method)
    except ValueError:
        known = ", ".join(m.value for m in LearnerMethod)
        raise ConfigError(f"{source}: '{path}method' must be one of {known}, got {method!r}") from None

    values = {key: document.get(key, default) for key, default in LEARNER_KEYS.items()}
    try:
        return LearnerConfig(
            method=method,
            label=str(values["label"]),
            epsilon=_as_float(values["epsilon"], f"{path}epsilon", source),
            prior_strength=tuple(values["prior_strength"]),
            strength_cap=_optional(values["strength_cap"], tuple),
            map_prior_alpha=_as_float(values["map_prior_alpha"], f"{path}map_prior_alpha", source),
            gamma=_as_float(values["gamma"], f"{path}gamma", source),
            dirichlet_cap=_optional(values["dirichlet_cap"], lambda v: _as_float(v, f"{path}dirichlet_cap", source)),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{source}: {path[:-1]}: {e}") from None


def _parse_switching(document, source):
    if document is None:
        return None
    if not isinstance(document, dict):
        raise ConfigError(f"{source}: 'experiment.switching' must be an object")
    _reject_unknown(document, SWITCHING_KEYS, "experiment.switching.", source)
    environment = _require(document, "environment", "experiment.switching.", source)
    if environment not in ENVIRONMENT_KEYS:
        raise ConfigError(f"{source}: unknown environment '{environment}' in 'experiment.switching'")
    after = _as_int(_require(document, "after", "experiment.switching.", source),
                    "experiment.switching.after", source, minimum=0)
    return SwitchingConfig(environment, after)


def parse_experiment_config(document, source="<config>"):
    if not isinstance(document, dict):
        raise ConfigError(f"{source}: top level must be an object")
    _reject_unknown(document, ("experiment", "learners"), "", source)
    experiment = _require(document, "experiment", "", source)
    learners = _require(document, "learners", "", source)
    if not isinstance(experiment, dict):
        raise ConfigError(f"{source}: 'experiment' must be an object")
    _reject_unknown(experiment, REQUIRED_EXPERIMENT_KEYS + tuple(OPTIONAL_EXPERIMENT_KEYS),
                    "experiment.", source)
    if not isinstance(learners, list) or not learners:
        raise ConfigError(f"{source}: 'learners' must be a non-empty list")

    environment = _require(experiment, "environment", "experiment.", source)
    if environment not in ENVIRONMENT_KEYS:
        raise ConfigError(
            f"{source}: unknown environment '{environment}'. Known: {', '.join(ENVIRONMENT_KEYS)}"
        )
    trajectories = _as_int(_require(experiment, "trajectories", "experiment.", source),
                           "experiment.trajectories", source, minimum=1)
    values = {key: experiment.get(key, default) for key, default in OPTIONAL_EXPERIMENT_KEYS.items()}

    xi = _as_float(values["xi"], "experiment.xi", source)
    if not 0.0 <= xi <= 1.0:
        raise ConfigError(f"{source}: 'experiment.xi' must lie in [0, 1], got {xi}")
    if values["exploration"] not in EXPLORATION_MODES:
        raise ConfigError(
            f"{source}: 'experiment.exploration' must be one of {', '.join(EXPLORATION_MODES)}"
        )
    tolerance = _as_float(values["tolerance"], "experiment.tolerance", source)
    if tolerance <= 0:
        raise ConfigError(f"{source}: 'experiment.tolerance' must be positive")

    parsed_learners = tuple(_parse_learner(entry, i, source) for i, entry in enumerate(learners))
    labels = [learner.label for learner in parsed_learners]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"{source}: learner labels must be unique, got {labels}")

    return ExperimentConfig(
        environment=environment,
        learners=parsed_learners,
        trajectories=trajectories,
        repetitions=_as_int(values["repetitions"], "experiment.repetitions", source, minimum=1),
        seed=_as_int(values["seed"], "experiment.seed", source, minimum=0),
        horizon=_optional(values["horizon"],
                          lambda v: _as_int(v, "experiment.horizon", source, minimum=0)),
        xi=xi,
        exploration=values["exploration"],
        tolerance=tolerance,
        max_iterations=_as_int(values["max_iterations"], "experiment.max_iterations", source, minimum=1),
        doubling_on_transitions=bool(values["doubling_on_transitions"]),
        switching=_parse_switching(values["switching"], source),
        stop_threshold=_optional(values["stop_threshold"],
                                 lambda v: _as_float(v, "experiment.stop_threshold", source)),
        record_timing=bool(values["record_timing"]),
        workers=_optional(values["workers"],
                          lambda v: _as_int(v, "experiment.workers", source, minimum=1)),
    )


def load_experiment_config(path):
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
    except FileNotFoundError:
        logger.error(f"❌ Experiment config not found at {path}")
        raise ConfigError(f"Experiment config not found at {path}") from None
    except json.JSONDecodeError as e:
        logger.error(f"❌ Invalid JSON in {path}: {e}")
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    config = parse_experiment_config(document, source=str(path))
    logger.info(f"✅ Loaded experiment config from {path}")
    return config


def dump_experiment_config(config):
    """JSON document that parses back to an equal ExperimentConfig."""
    experiment = {
        "environment": config.environment,
        "trajectories": config.trajectories,
        "repetitions": config.repetitions,
        "seed": config.seed,
        "horizon": config.horizon,
        "xi": config.xi,
        "exploration": config.exploration,
        "tolerance": config.tolerance,
        "max_iterations": config.max_iterations,
        "doubling_on_transitions": config.doubling_on_transitions,
        "switching": (
            {"environment": config.switching.environment, "after": config.switching.after}
            if config.switching else None
        ),
        "stop_threshold": config.stop_threshold,
        "record_timing": config.record_timing,
        "workers": config.workers,
    }
    learners = [
        {
            "method": learner.method.value,
            "label": learner.label,
            "epsilon": learner.epsilon,
            "prior_strength": list(learner.prior_strength),
            "strength_cap": list(learner.strength_cap) if learner.strength_cap else None,
            "map_prior_alpha": learner.map_prior_alpha,
            "gamma": learner.gamma,
            "dirichlet_cap": learner.dirichlet_cap,
        }
        for learner in config.learners
    ]
    return {"experiment": experiment, "learners": learners}


def save_experiment_config(config, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(dump_experiment_config(config), f, indent=2)
        f.write("\n")


def with_overrides(config, seed=None, workers=None, record_timing=None):
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if workers is not None:
        changes["workers"] = workers
    if record_timing is not None:
        changes["record_timing"] = record_timing
    return replace(config, **changes)
