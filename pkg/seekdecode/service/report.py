"""
Result files: one CSV per run with a fixed header, and a JSON sidecar describing how it was produced. Neither holds
timestamps or host details, so a repeated run with the same seed reproduces both byte for byte.
"""

import csv
import json
import logging
import math
import typing as t
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from pydantic import BaseModel

from seekdecode.core.code import CodeSpec
from seekdecode.core.errors import ConfigError
from seekdecode.service.config import ExperimentConfig

logger = logging.getLogger(__name__)


def package_version() -> str:
    try:
        return version("seekdecode")
    except PackageNotFoundError:
        return "0+unknown"


def format_value(value: t.Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".12g")
    return str(value)


def write_rows(path: Path, rows: t.Sequence[BaseModel], row_type: type[BaseModel]) -> None:
    header = list(row_type.model_fields)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                values = row.model_dump()
                writer.writerow([format_value(values[name]) for name in header])
    except OSError as e:
        raise ConfigError(f"cannot write results to {path}: {e}") from e
    logger.info(f"wrote {len(rows)} rows to {path}")


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def write_sidecar(path: Path, verb: str, cfg: ExperimentConfig, spec: CodeSpec, extra: t.Mapping[str, t.Any] | None = None) -> None:
    metadata = {
        "command": verb,
        "version": package_version(),
        # results are identical for any worker count or output path
        "config": cfg.model_dump(mode="json", exclude={"workers", "out"}),
        "code": {"n": spec.n, "k": spec.k, "rate": spec.rate, "fingerprint": spec.fingerprint},
        **(extra or {}),
    }
    try:
        sidecar_path(path).write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise ConfigError(f"cannot write metadata next to {path}: {e}") from e
