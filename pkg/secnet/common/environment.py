import os

from secnet.common.errors import ConfigError


class SecnEnv:
    def __init__(self, log_level: str, workers: int, seed: int):
        self.LOG_LEVEL = log_level
        self.WORKERS = workers
        self.SEED = seed


def _int_variable(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(name, f"expected an integer, got '{raw}'")


def load_environment() -> SecnEnv:
    log_level = os.getenv("SECN_LOG_LEVEL") or "INFO"
    if log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise ConfigError("SECN_LOG_LEVEL", f"unknown level '{log_level}'")

    workers = _int_variable("SECN_WORKERS", 1)
    if workers < 1:
        raise ConfigError("SECN_WORKERS", "must be at least 1")

    seed = _int_variable("SECN_SEED", 0)

    return SecnEnv(log_level=log_level.upper(), workers=workers, seed=seed)
