from secnet.common.logger import get_logger

logger = get_logger()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class SecnError(Exception):
    exit_code: int = EXIT_RUNTIME

    def __init__(self, detail: str):
        logger.warning(f"{type(self).__name__}: {detail}")
        self.detail = detail
        super().__init__(detail)


class DimensionError(SecnError):
    def __init__(self, op: str, detail: str):
        super().__init__(f"{op}: {detail}")


class GraphError(SecnError):
    pass


class NonFiniteError(SecnError):
    def __init__(self, op: str):
        super().__init__(f"Non-finite values produced by {op}")


class TrainingError(SecnError):
    def __init__(self, detail: str, frame: int | None = None, component: str | None = None):
        where = []
        if frame is not None:
            where.append(f"frame {frame}")
        if component is not None:
            where.append(f"component {component}")
        suffix = f" ({', '.join(where)})" if where else ""
        self.frame = frame
        self.component = component
        super().__init__(f"{detail}{suffix}")


class ConfigError(SecnError):
    exit_code = EXIT_USAGE

    def __init__(self, key: str, reason: str | None = None):
        self.key = key
        detail = f"Invalid config key '{key}': {reason}" if reason else f"Missing config key '{key}'"
        super().__init__(detail)


class DataError(SecnError):
    pass


class MetricError(SecnError):
    pass
