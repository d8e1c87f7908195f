"""
Experiment configuration: a TOML file validated into ExperimentConfig, with command-line overrides applied on top.

    snr_db = [10.0, 15.0]
    g_grid = [0.2, 0.5, 1.0, 1.5, 2.0, 2.5]
    strategies = ["snd_jd", "jd", "aloha"]
    trials = 200

    [repetition]
    kind = "fixed"
    d = 2
"""

import logging
import tomllib
import typing as t
from functools import lru_cache
from pathlib import Path

from pydantic import Field, ValidationError, field_validator, model_validator

from seekdecode.core.bound import BoundConfig, BoundWeights
from seekdecode.core.channel import FadingPower
from seekdecode.core.code import DEFAULT_CODE_SEED, DEFAULT_MAX_ITERS, CodeSpec, load_code, quasi_cyclic_code
from seekdecode.core.errors import ConfigError, SeekDecodeError
from seekdecode.core.frame import FrameStrategy, RepetitionPolicy
from seekdecode.core.gf2m import FieldSpec
from seekdecode.core.phydec import DEFAULT_K_MAX, DecodeOptions
from seekdecode.util.config import StrictBaseModel

logger = logging.getLogger(__name__)

# Command-line flag names that differ from the config key they set
FLAG_KEYS = {"s": "slots"}


class ExperimentConfig(StrictBaseModel):
    snr_db: list[float] = Field(default_factory=lambda: [15.0], min_length=1)
    g_grid: list[float] = Field(default_factory=lambda: [0.2, 0.5, 0.8, 1.0, 1.2, 1.5, 2.0, 2.5], min_length=1)
    slots: int = Field(default=10, ge=1)
    terminals: int = Field(default=100, ge=1)
    n_bc: int = Field(default=8, ge=1, le=16)
    repetition: RepetitionPolicy = Field(default_factory=RepetitionPolicy)
    k_max: int = Field(default=DEFAULT_K_MAX, ge=1)
    strategies: list[FrameStrategy] = Field(default_factory=lambda: [FrameStrategy.SND_JD, FrameStrategy.JD], min_length=1)

    # alist file; the built-in quasi-cyclic code when unset
    code: Path | None = None
    code_lift: int = Field(default=24, ge=2)
    code_seed: int = DEFAULT_CODE_SEED

    trials: int = Field(default=200, ge=1)
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    out: Path | None = None

    max_iters: int = Field(default=DEFAULT_MAX_ITERS, ge=1)
    refinement: bool = True
    refinement_rounds: int = Field(default=1, ge=0)
    stop_on_failure: bool = False
    fading_power: FadingPower = FadingPower.SNR

    # slot-level study
    slot_k: list[int] = Field(default_factory=lambda: [2, 4], min_length=1)

    # throughput bound
    bound_trials: int = Field(default=2000, ge=1)
    bound_table: Path | None = None
    bound_p: float | None = Field(default=None, gt=0.0, le=1.0)
    bound_epsilon: float = Field(default=1e-9, gt=0.0, lt=1.0)
    bound_max_n_tx: int = Field(default=400, ge=1)
    bound_weights: BoundWeights = BoundWeights.NORMALIZED

    @field_validator("g_grid")
    @classmethod
    def _positive_load(cls, v: list[float]) -> list[float]:
        if any(g <= 0 for g in v):
            raise ValueError("every load in g_grid must be positive")
        return v

    @field_validator("slot_k")
    @classmethod
    def _positive_sizes(cls, v: list[int]) -> list[int]:
        if any(k < 1 for k in v):
            raise ValueError("collision sizes must be at least 1")
        return v

    @model_validator(mode="after")
    def _check_consistency(self) -> "ExperimentConfig":
        if self.repetition.kind == "fixed" and self.repetition.d > self.slots:
            raise ValueError(f"{self.repetition.d} replicas do not fit in {self.slots} slots")
        if self.bound_table is not None and len(self.snr_db) != 1:
            raise ValueError("a cached bound_table holds a single SNR point, configure exactly one snr_db")
        return self

    @property
    def field(self) -> FieldSpec:
        return FieldSpec(m=self.n_bc)

    def decode_options(self) -> DecodeOptions:
        return DecodeOptions(
            max_iters=self.max_iters,
            k_max=self.k_max,
            refinement=self.refinement,
            refinement_rounds=self.refinement_rounds,
            stop_on_failure=self.stop_on_failure,
        )

    def bound_config(self) -> BoundConfig:
        return BoundConfig(
            g_grid=self.g_grid,
            slots=self.slots,
            n_bc=self.n_bc,
            p=self.bound_p,
            epsilon=self.bound_epsilon,
            max_n_tx=self.bound_max_n_tx,
            weights=self.bound_weights,
        )

    def output_path(self, verb: str) -> Path:
        return self.out if self.out is not None else Path(f"{verb}.csv")


def _describe(e: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors())


def load_config(path: Path | None = None, overrides: t.Mapping[str, t.Any] | None = None) -> ExperimentConfig:
    """
    Read the TOML file (if any) and apply the non-None overrides. Every problem, from a missing file to an unknown
    key, is reported as ConfigError before any computation starts.
    """
    data: dict[str, t.Any] = {}
    if path is not None:
        try:
            data = tomllib.loads(path.read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"config {path} is not valid TOML: {e}") from e
    for key, value in (overrides or {}).items():
        if value is not None:
            data[FLAG_KEYS.get(key, key)] = value
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment configuration: {_describe(e)}") from e


@lru_cache(maxsize=4)
def _code_from(path: str | None, lift: int, seed: int) -> CodeSpec:
    if path is None:
        return quasi_cyclic_code(lift=lift, seed=seed)
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read code file {path}: {e}") from e
    try:
        return load_code(text)
    except SeekDecodeError as e:
        raise ConfigError(f"unusable code file {path}: {e}") from e


def load_code_spec(cfg: ExperimentConfig) -> CodeSpec:
    "The configured code, built once per process"
    spec = _code_from(None if cfg.code is None else str(cfg.code), cfg.code_lift, cfg.code_seed)
    if spec.k % cfg.n_bc:
        raise ConfigError(f"code carries {spec.k} bits per message, not a multiple of n_bc={cfg.n_bc}")
    return spec
