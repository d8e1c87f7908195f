"""
seekdecode command line.

    seekdecode simulate --config sweep.toml --workers 8 --out results/sweep.csv
    seekdecode slot-study --snr-db '[0,10,20,30]' --strategies '["sic","snd_jd"]'
    seekdecode bound --config bound.toml
    seekdecode validate-config --config sweep.toml

Flags override the keys of the TOML config. Configuration problems exit with status 2.
"""

import logging
import sys
import typing as t
from pathlib import Path

from pydantic import BaseModel, Field
from pydantic_settings import CliApp, CliSubCommand, SettingsError, get_subcommand

from seekdecode.core.errors import BoundTruncationError, ConfigError
from seekdecode.core.frame import FrameStrategy
from seekdecode.service.config import ExperimentConfig, load_code_spec, load_config
from seekdecode.service.report import write_rows, write_sidecar
from seekdecode.service.runner import BoundRow, SimulateRow, SlotStudyRow, run_bound, run_experiment, run_slot_study
from seekdecode.util.argparse import PydanticArguments
from seekdecode.util.cmd import run_async
from seekdecode.util.sentry import set_run_context

logger = logging.getLogger(__name__)

GAUSSIAN_NOTE = (
    "frame-level combination counts use a Gaussian approximation with S times the per-slot moments; "
    "its accuracy for small S is not quantified"
)


class ExperimentArgs(BaseModel):
    config: Path | None = Field(default=None, description="TOML experiment configuration")
    seed: int | None = Field(default=None, description="master seed")
    workers: int | None = Field(default=None, description="worker processes (1 runs in-process)")
    out: Path | None = Field(default=None, description="CSV output path, metadata goes next to it")
    trials: int | None = Field(default=None, description="trials per grid point")
    snr_db: list[float] | None = Field(default=None, description="average SNR grid in dB")
    g_grid: list[float] | None = Field(default=None, description="offered load grid in packets per slot")
    strategies: list[FrameStrategy] | None = Field(default=None, description="receivers to compare")
    n_bc: int | None = Field(default=None, description="precoding field GF(2^n_bc)")
    s: int | None = Field(default=None, description="slots per frame")
    code: Path | None = Field(default=None, description="alist parity-check file")

    def experiment(self) -> ExperimentConfig:
        overrides = self.model_dump(exclude={"config"})
        return load_config(self.config, overrides)


class SimulateCommand(ExperimentArgs):
    "Frame-level sweep: throughput, sum rate, packet loss and energy efficiency"

    def cli_cmd(self) -> None:
        run_async(simulate(self.experiment()))


class SlotStudyCommand(ExperimentArgs):
    "Innovative packets per slot for fixed collision sizes"

    def cli_cmd(self) -> None:
        run_async(slot_study(self.experiment()))


class BoundCommand(ExperimentArgs):
    "Analytical throughput upper bound from an estimated decode-probability table"

    def cli_cmd(self) -> None:
        run_async(bound(self.experiment()))


class ValidateConfigCommand(ExperimentArgs):
    "Check a configuration (and its code) without running anything"

    def cli_cmd(self) -> None:
        cfg = self.experiment()
        spec = load_code_spec(cfg)
        print(f"configuration valid; code n={spec.n} k={spec.k} fingerprint {spec.fingerprint}")


def _tag_run(command: str, cfg: ExperimentConfig) -> None:
    strategies = [str(s) for s in cfg.strategies]
    set_run_context(command, cfg.seed, load_code_spec(cfg).fingerprint, snr_db=cfg.snr_db, g_grid=cfg.g_grid, strategies=strategies, trials=cfg.trials)


async def simulate(cfg: ExperimentConfig) -> None:
    _tag_run("simulate", cfg)
    rows = await run_experiment(cfg)
    path = cfg.output_path("simulate")
    write_rows(path, rows, SimulateRow)
    write_sidecar(path, "simulate", cfg, load_code_spec(cfg), {"trials": cfg.trials})


async def slot_study(cfg: ExperimentConfig) -> None:
    _tag_run("slot-study", cfg)
    rows = await run_slot_study(cfg)
    path = cfg.output_path("slot_study")
    write_rows(path, rows, SlotStudyRow)
    write_sidecar(path, "slot-study", cfg, load_code_spec(cfg), {"trials": cfg.trials})


async def bound(cfg: ExperimentConfig) -> None:
    _tag_run("bound", cfg)
    rows, tables = await run_bound(cfg)
    path = cfg.output_path("bound")
    write_rows(path, rows, BoundRow)
    table_files = []
    if cfg.bound_table is None:
        for index, table in enumerate(tables):
            table_path = path.with_name(f"{path.stem}_ptilde_{index}.txt")
            try:
                table_path.write_text(table.to_text())
            except OSError as e:
                raise ConfigError(f"cannot write decode-probability table {table_path}: {e}") from e
            table_files.append(table_path.name)
    write_sidecar(
        path,
        "bound",
        cfg,
        load_code_spec(cfg),
        {"bound_trials": cfg.bound_trials, "ptilde_tables": table_files, "note": GAUSSIAN_NOTE},
    )


class SeekDecodeCli(PydanticArguments, cli_prog_name="seekdecode"):
    simulate: CliSubCommand[SimulateCommand] = None
    slot_study: CliSubCommand[SlotStudyCommand] = Field(default=None, alias="slot-study")
    bound: CliSubCommand[BoundCommand] = None
    validate_config: CliSubCommand[ValidateConfigCommand] = Field(default=None, alias="validate-config")

    def cli_cmd(self) -> None:
        if get_subcommand(self, is_required=False) is None:
            raise SettingsError("a command is required: simulate, slot-study, bound or validate-config")
        CliApp.run_subcommand(self)


def main(args: list[str] | None = None) -> t.NoReturn:
    try:
        code = SeekDecodeCli.run(args)
    except (ConfigError, BoundTruncationError) as e:
        print(f"seekdecode: error: {e}", file=sys.stderr)
        sys.exit(2)
    sys.exit(code)


if __name__ == "__main__":
    main()
