# ramdp/config_loader.py

import copy
import json
import logging
import os
import sys

logger = logging.getLogger('Ramdp')

CONFIG_FILE_NAME = "ramdp.json"
CONFIG_ENV_VAR = "RAMDP_CONFIG"
WORKERS_ENV_VAR = "RAMDP_WORKERS"

DEFAULT_SETTINGS = {
    "logging": {"log_dir": "logs", "level": "INFO"},
    "paths": {"results_dir": "results", "db_path": ""},
    "solver": {"tolerance": 1e-6, "max_iterations": 100000, "acceleration_interval": 50},
    "run": {"workers": 1},
}


def get_base_dir():
    """Return the runtime base directory (project root or frozen executable directory)."""
    if getattr(sys, 'frozen', False):  # PyInstaller check
        return os.path.dirname(sys.executable)

    # Move up one level from ramdp to the project root (where main.py is)
    return os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def get_config_path():
    return os.environ.get(CONFIG_ENV_VAR) or os.path.join(get_base_dir(), CONFIG_FILE_NAME)


def _merge(settings, overrides, config_path):
    for section, values in overrides.items():
        if section not in settings or not isinstance(values, dict):
            logger.warning(f"⚠️ Ignoring unknown settings section '{section}' in {config_path}")
            continue
        settings[section].update(values)
    return settings


def load_config(config_path=None):
    """Load ramdp.json over the built-in defaults. A missing file means defaults."""
    config_path = config_path or get_config_path()
    settings = copy.deepcopy(DEFAULT_SETTINGS)

    try:
        with open(config_path, encoding="utf-8") as f:
            overrides = json.load(f)
    except FileNotFoundError:
        logger.info(f"No settings file at {config_path}, using defaults")
        return settings
    except json.JSONDecodeError as e:
        logger.error(f"❌ Invalid JSON in settings file {config_path}: {e}")
        raise

    if not isinstance(overrides, dict):
        logger.error(f"❌ Settings file {config_path} must hold a JSON object")
        raise ValueError(f"Settings file {config_path} must hold a JSON object")

    logger.info(f"✅ Loaded settings from {config_path}")
    return _merge(settings, overrides, config_path)


def get_setting(section, name, default, cast=float):
    """Read one setting, falling back to default when it is missing or malformed."""
    value = CFG.get(section, {}).get(name, default)
    try:
        return cast(value)
    except (TypeError, ValueError):
        logger.warning(f"⚠️ Setting {section}.{name}={value!r} is not valid, using {default}")
        return default


def get_worker_count(override=None):
    if override is not None:
        return max(1, int(override))
    env_value = os.environ.get(WORKERS_ENV_VAR)
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            logger.warning(f"⚠️ Ignoring {WORKERS_ENV_VAR}={env_value!r}: not an integer")
    return max(1, get_setting("run", "workers", 1, int))


# Load settings globally, main.py reports failures
CFG = load_config()
