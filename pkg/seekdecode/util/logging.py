import logging
from pathlib import Path
from typing import Literal

from seekdecode.util.config import SeekDecodeSettings

LOG_FORMAT = "%(asctime)s %(processName)-16s %(name)-24s %(levelname)-8s %(message)s"


class LoggingSettings(SeekDecodeSettings):
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "WARNING"
    # long sweeps can keep a full INFO log next to their results
    log_file: Path | None = None


log_settings = LoggingSettings()


def setup_logging() -> None:
    """
    Console logging at `SND_LOG_LEVEL` (default `WARNING`), plus everything from INFO up in `SND_LOG_FILE` when set.

    Worker processes inherit the configuration, so the process name is part of every line. numpy and scipy numeric
    warnings (overflow in a likelihood, a degenerate interval) are routed through logging rather than printed.
    """
    formatter = logging.Formatter(LOG_FORMAT)
    console = logging.StreamHandler()
    console.setLevel(logging.getLevelName(log_settings.log_level))
    console.setFormatter(formatter)
    handlers: list[logging.Handler] = [console]

    if log_settings.log_file is not None:
        log_settings.log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_settings.log_file)
        file_handler.setLevel(min(logging.INFO, console.level))
        file_handler.setFormatter(formatter)
        handlers.append(file_handler)

    # root stays at NOTSET so an OTEL handler still sees records below the console level
    logging.basicConfig(level=logging.NOTSET, handlers=handlers)
    logging.captureWarnings(True)
