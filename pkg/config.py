"""
Settings for the Stein operator toolkit.

Every setting is read once at import from the process environment, after an
optional .env file in the working directory has been merged into it.
"""
import logging
import multiprocessing
import os
from typing import Any, Callable, Dict, TypeVar

T = TypeVar("T")

logger = logging.getLogger("config")

try:
    from dotenv import load_dotenv
    _env_loaded = load_dotenv()
except ImportError:
    _env_loaded = False
    logger.warning("python-dotenv not installed, reading the process environment only")


def _env(name: str, default: T, cast: Callable[[str], T]) -> T:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except (ValueError, TypeError):
        logger.warning(f"Ignoring {name}={raw!r}, keeping {default!r}")
        return default


def _as_bool(raw: str) -> bool:
    return raw.strip().lower() in ("1", "true", "t", "yes", "y", "on")


def _get_env_str(name: str, default: str) -> str:
    return _env(name, default, str)


def _get_env_int(name: str, default: int) -> int:
    return _env(name, default, int)


def _get_env_float(name: str, default: float) -> float:
    return _env(name, default, float)


def _get_env_bool(name: str, default: bool) -> bool:
    return _env(name, default, _as_bool)


CPU_COUNT = multiprocessing.cpu_count()

# Monte Carlo
STEIN_SEED = _get_env_int("STEIN_SEED", 20190614)
MC_SAMPLES = _get_env_int("MC_SAMPLES", 1_000_000)
MC_BATCH_SIZE = _get_env_int("MC_BATCH_SIZE", 200_000)
MC_Z_THRESHOLD = _get_env_float("MC_Z_THRESHOLD", 4.0)

# Exact checks
EXACT_MAX_K = _get_env_int("EXACT_MAX_K", 30)
MINIMALITY_EXTRA_ROWS = _get_env_int("MINIMALITY_EXTRA_ROWS", 4)

# Series and quadrature
SERIES_TERMS = _get_env_int("SERIES_TERMS", 30)
BESSEL_TAIL = _get_env_float("BESSEL_TAIL", 50.0)
QUAD_EPSABS = _get_env_float("QUAD_EPSABS", 1e-12)
QUAD_EPSREL = _get_env_float("QUAD_EPSREL", 1e-10)
QUAD_LIMIT = _get_env_int("QUAD_LIMIT", 400)

# Workers
MAX_WORKERS = _get_env_int("MAX_WORKERS", max(1, CPU_COUNT - 1))
USE_NUMBA = _get_env_bool("USE_NUMBA", True)

LOG_LEVEL = _get_env_str("LOG_LEVEL", "WARNING")
LOG_FILE = _get_env_str("LOG_FILE", "")

_SECTIONS = {
    "Sampling": ("STEIN_SEED", "MC_SAMPLES", "MC_BATCH_SIZE", "MC_Z_THRESHOLD"),
    "Exact Checks": ("EXACT_MAX_K", "MINIMALITY_EXTRA_ROWS"),
    "Numerics": ("SERIES_TERMS", "BESSEL_TAIL", "QUAD_EPSABS", "QUAD_EPSREL", "QUAD_LIMIT"),
    "Workers": ("MAX_WORKERS", "USE_NUMBA", "CPU_COUNT"),
    "Logging": ("LOG_LEVEL", "LOG_FILE"),
}


def get_all_config() -> Dict[str, Any]:
    """
    Current value of every setting.

    Returns:
        Dict[str, Any]: Setting name to value
    """
    current = globals()
    return {key: current[key] for keys in _SECTIONS.values() for key in keys}


def print_config():
    """Print the settings grouped by section."""
    values = get_all_config()
    print("\n=== Stein Operator Toolkit Configuration ===")
    for section, keys in _SECTIONS.items():
        print(f"\n{section}:")
        for key in keys:
            print(f"  {key}: {values[key]}")
    source = ".env file + environment" if _env_loaded else "environment"
    print(f"\nRead from: {source}")
    print("============================================\n")


def apply_config(config_dict: Dict[str, Any]):
    """
    Override settings at runtime and mirror them into the environment.

    Unknown names are ignored.

    Args:
        config_dict (Dict[str, Any]): Setting name to new value
    """
    known = get_all_config()
    for key, value in config_dict.items():
        if key not in known:
            logger.debug(f"Ignoring unknown setting {key}")
            continue
        globals()[key] = value
        os.environ[key] = str(value)
