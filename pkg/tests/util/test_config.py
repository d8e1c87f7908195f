import os
import typing as t
from unittest.mock import patch

import pytest
from pydantic import BaseModel, ValidationError

from seekdecode.util.config import SeekDecodeSettings, StrictBaseModel


def test_seekdecode_settings() -> None:
    with patch.dict(
        os.environ,
        {
            "WORKERS": "3",
            "SND_WORKERS": "8",
            # Implicit float conversion
            "SND_SNR_DB": "12.5",
            # Nesting via __s
            "SND_CODE__LIFT": "8",
            # Nesting via json
            "SND_CODE2": '{"lift": 24}',
        },
    ):

        class Code(BaseModel):
            lift: int

        class MySettings(SeekDecodeSettings):
            workers: int
            snr_db: float
            out: t.Optional[str] = "results.csv"
            CODE: Code
            code2: Code

        settings = MySettings()
        assert settings.workers == 8
        assert settings.snr_db == 12.5
        assert settings.out == "results.csv"
        assert settings.CODE.lift == 8
        assert settings.code2.lift == 24


def test_seekdecode_settings_frozen() -> None:
    """
    Settings objects can't be changed after creation and can be hashed.
    """

    class MySettings(SeekDecodeSettings):
        workers: int = 1

    settings = MySettings()
    with pytest.raises(ValidationError):
        settings.workers = 2  # type: ignore[misc]
    assert hash(settings) == hash(MySettings())


def test_strict_base_model_rejects_unknown_keys() -> None:
    class Grid(StrictBaseModel):
        snr_db: list[float]

    assert Grid(snr_db=[1, 2]).snr_db == [1.0, 2.0]
    with pytest.raises(ValidationError, match="snr_dB"):
        Grid.model_validate({"snr_db": [1.0], "snr_dB": [2.0]})


def test_strict_base_model_frozen() -> None:
    class Grid(StrictBaseModel):
        slots: int = 10

    grid = Grid()
    with pytest.raises(ValidationError):
        grid.slots = 20  # type: ignore[misc]
    assert hash(grid) == hash(Grid())
