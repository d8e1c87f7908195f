import logging
from pathlib import Path
from unittest.mock import patch

from seekdecode.util.logging import LOG_FORMAT, LoggingSettings, setup_logging


def test_setup_logging_default_level() -> None:
    """Console output defaults to WARNING and there is no log file."""
    with patch("logging.basicConfig") as mock_basic_config, patch("logging.captureWarnings") as capture:
        setup_logging()
    handlers = mock_basic_config.call_args.kwargs["handlers"]
    assert len(handlers) == 1
    assert handlers[0].level == logging.WARNING
    assert mock_basic_config.call_args.kwargs["level"] == logging.NOTSET
    capture.assert_called_once_with(True)


def test_setup_logging_custom_level() -> None:
    with patch("seekdecode.util.logging.log_settings", LoggingSettings(log_level="DEBUG")):
        with patch("logging.StreamHandler") as mock_handler, patch("logging.basicConfig") as mock_basic_config:
            setup_logging()
    mock_handler.return_value.setLevel.assert_called_with(logging.DEBUG)
    mock_basic_config.assert_called_once_with(level=logging.NOTSET, handlers=[mock_handler.return_value])


def test_setup_logging_file(tmp_path: Path) -> None:
    """The log file keeps INFO records even when the console only shows errors."""
    path = tmp_path / "logs" / "sweep.log"
    with patch("seekdecode.util.logging.log_settings", LoggingSettings(log_level="ERROR", log_file=path)):
        with patch("logging.basicConfig") as mock_basic_config:
            setup_logging()
    console, file_handler = mock_basic_config.call_args.kwargs["handlers"]
    try:
        assert console.level == logging.ERROR
        assert isinstance(file_handler, logging.FileHandler)
        assert file_handler.level == logging.INFO
        assert file_handler.formatter is not None and file_handler.formatter._fmt == LOG_FORMAT
        assert path.parent.is_dir()
    finally:
        file_handler.close()


def test_log_settings_from_environment(tmp_path: Path) -> None:
    with patch.dict("os.environ", {"SND_LOG_LEVEL": "INFO", "SND_LOG_FILE": str(tmp_path / "run.log")}):
        settings = LoggingSettings()
    assert settings.log_level == "INFO"
    assert settings.log_file == tmp_path / "run.log"
