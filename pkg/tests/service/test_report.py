import json
from importlib.metadata import PackageNotFoundError
from pathlib import Path
from unittest.mock import patch

import pytest

from seekdecode.core.code import CodeSpec
from seekdecode.core.errors import ConfigError
from seekdecode.service.config import ExperimentConfig
from seekdecode.service.report import format_value, package_version, sidecar_path, write_rows, write_sidecar
from seekdecode.util.config import StrictBaseModel


class Row(StrictBaseModel):
    strategy: str
    G: float
    plr: float
    plr_defined: bool
    trials: int


ROWS = [
    Row(strategy="snd_jd", G=0.5, plr=0.125, plr_defined=True, trials=200),
    Row(strategy="aloha", G=1.0, plr=float("nan"), plr_defined=False, trials=200),
]


def test_format_value() -> None:
    assert format_value(True) == "true"
    assert format_value(False) == "false"
    assert format_value(3) == "3"
    assert format_value(0.1) == "0.1"
    assert format_value(1 / 3) == "0.333333333333"
    assert format_value(float("inf")) == "inf"
    assert format_value(float("-inf")) == "-inf"
    assert format_value(float("nan")) == "nan"
    assert format_value("jd") == "jd"


def test_write_rows(tmp_path: Path) -> None:
    path = tmp_path / "results" / "sweep.csv"
    write_rows(path, ROWS, Row)
    assert path.read_text() == "strategy,G,plr,plr_defined,trials\nsnd_jd,0.5,0.125,true,200\naloha,1,nan,false,200\n"


def test_write_rows_header_only(tmp_path: Path) -> None:
    path = tmp_path / "empty.csv"
    write_rows(path, [], Row)
    assert path.read_text() == "strategy,G,plr,plr_defined,trials\n"


def test_write_rows_unwritable(tmp_path: Path) -> None:
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ConfigError, match="cannot write results"):
        write_rows(blocker / "sweep.csv", ROWS, Row)


def test_sidecar(tmp_path: Path, hamming_code: CodeSpec) -> None:
    path = tmp_path / "sweep.csv"
    cfg = ExperimentConfig(n_bc=4, seed=3)
    write_sidecar(path, "simulate", cfg, hamming_code, {"trials": 200})
    assert sidecar_path(path) == tmp_path / "sweep.json"
    metadata = json.loads((tmp_path / "sweep.json").read_text())
    assert metadata["command"] == "simulate"
    assert metadata["trials"] == 200
    assert metadata["config"]["seed"] == 3
    assert metadata["config"]["repetition"] == {"kind": "fixed", "d": 2, "p": 0.5}
    assert "workers" not in metadata["config"]
    assert "out" not in metadata["config"]
    assert metadata["code"] == {"n": 7, "k": 4, "rate": 4 / 7, "fingerprint": hamming_code.fingerprint}
    # same inputs, same bytes
    first = (tmp_path / "sweep.json").read_bytes()
    write_sidecar(path, "simulate", cfg, hamming_code, {"trials": 200})
    assert (tmp_path / "sweep.json").read_bytes() == first


def test_package_version() -> None:
    with patch("seekdecode.service.report.version", side_effect=PackageNotFoundError("seekdecode")):
        assert package_version() == "0+unknown"
    with patch("seekdecode.service.report.version", return_value="1.2.3"):
        assert package_version() == "1.2.3"
