# ocs_arc/config.py
import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, Union

import yaml

from .selection_runtime.utils import ConfigError

log = logging.getLogger(__name__)

# -------- Defaults (the synthetic-experiment setup) --------
_DEFAULT: Dict[str, Any] = {
    "experiment": {"name": "default"},
    "data": {
        "source": "synthetic",  # synthetic | bivariate | csv
        "setting": [1],
        "sigma": [1.0],
        "threshold": 0.0,  # c_t for every stream point unless csv.threshold_column is set
        "csv": {},
    },
    "split": {"n_train": 1000, "n_cal": [1000], "n_test": 600},
    "model": {
        "kind": "boosted_trees",
        "n_trees": 100,
        "max_depth": 3,
        "learning_rate": 0.1,
        "min_samples_leaf": 5,
        "l2": 1.0,
    },
    "selection": {
        "methods": ["ocs_arc"],
        "scores": ["clip"],
        "q": [0.1],
        "r": [0.99],
        "clip_constant": 1000.0,
    },
    "evaluation": {"checkpoints": [100, 200, 300], "replicates": 300, "base_seed": 0},
    "output": {"dir": "runs/default", "trajectories": False},
    "runtime": {"workers": 1},
    "logging": {"level": "INFO", "json": False},
}


def _as_bool(v: str) -> bool:
    return v.strip().lower() in ("1", "true", "yes", "on")


# -------- ENV overrides (typed) --------
_ENV_MAP = {
    ("logging", "level"): ("OCS_LOG_LEVEL", lambda v: v.strip().upper()),
    ("logging", "json"): ("OCS_LOG_JSON", _as_bool),
    ("output", "dir"): ("OCS_OUT_DIR", str),
    ("runtime", "workers"): ("OCS_WORKERS", int),
    ("evaluation", "base_seed"): ("OCS_BASE_SEED", int),
}


def _load_dotenv() -> None:
    try:
        from dotenv import load_dotenv

        load_dotenv(Path.cwd() / ".env", override=False)
    except Exception as e:  # pragma: no cover - non-critical
        log.debug("dotenv load skipped: %s", e)


def _deep_merge(base: Dict[str, Any], overlay: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for k, v in (overlay or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def _apply_env_overrides(cfg: Dict[str, Any]) -> Dict[str, Any]:
    for (section, key), (env_name, cast) in _ENV_MAP.items():
        val = os.getenv(env_name)
        if val is None:
            continue
        try:
            casted = cast(val)
        except ValueError as e:
            raise ConfigError(f"{env_name}={val!r}: {e}") from e
        cfg.setdefault(section, {})
        cfg[section][key] = casted
        log.debug("config override %s.%s from %s", section, key, env_name)
    return cfg


def default_config() -> Dict[str, Any]:
    return _apply_env_overrides(copy.deepcopy(_DEFAULT))


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read one experiment YAML file, deep-merged over the defaults, then
    apply environment overrides (a `.env` in the working directory is
    honoured, real environment variables win).
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    _load_dotenv()
    cfg = _deep_merge(copy.deepcopy(_DEFAULT), data)
    cfg = _apply_env_overrides(cfg)
    log.info("loaded config %s", path)
    return cfg
