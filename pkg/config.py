"""
Runtime settings for hyperscope, read from the environment (and .env)
"""
import os

from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()

DEFAULT_STATE_CAP = 1_000_000
DEFAULT_STEM_BOUND = 6
DEFAULT_LOOP_BOUND = 6
DEFAULT_QIF_MAX_N = 3


def _int_setting(name: str, default: int, minimum: int = 0) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw.strip().replace('_', ''))
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def state_cap() -> int:
    """Maximum number of automaton states a single construction may build"""
    return _int_setting('HYPERSCOPE_STATE_CAP', DEFAULT_STATE_CAP, minimum=1)


def stem_bound() -> int:
    return _int_setting('HYPERSCOPE_STEM_BOUND', DEFAULT_STEM_BOUND, minimum=1)


def loop_bound() -> int:
    return _int_setting('HYPERSCOPE_LOOP_BOUND', DEFAULT_LOOP_BOUND, minimum=1)


def qif_max_n() -> int:
    return _int_setting('HYPERSCOPE_QIF_MAX_N', DEFAULT_QIF_MAX_N)


def log_level() -> str:
    level = os.getenv('HYPERSCOPE_LOG_LEVEL', 'WARNING').strip().upper()
    if level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        raise ConfigError(f"HYPERSCOPE_LOG_LEVEL has unknown level {level!r}")
    return level
