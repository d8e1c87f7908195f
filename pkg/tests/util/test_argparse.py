from argparse import ArgumentParser
from unittest import mock

from pydantic import BaseModel
from pydantic_settings import CliApp, CliSubCommand, SettingsError

from seekdecode.util.argparse import PydanticArguments


def test_pydantic_arguments_run() -> None:
    """
    Test that PydanticArguments.run() correctly parses kebab-case arguments.
    """

    run_args: "MyArgs" | None = None

    class MyArgs(PydanticArguments):
        snr_db: float

        def cli_cmd(self) -> None:
            nonlocal run_args
            run_args = self

    with mock.patch("sys.argv", ["test", "--snr-db", "12.5"]):
        assert MyArgs.run() == 0
        assert run_args
        assert run_args.snr_db == 12.5


def test_pydantic_arguments_run_with_explicit_args() -> None:
    seen: list[int] = []

    class MyArgs(PydanticArguments):
        trials: int = 1

        def cli_cmd(self) -> None:
            seen.append(self.trials)

    assert MyArgs.run(["--trials", "7"]) == 0
    assert seen == [7]


def test_pydantic_arguments_subcommand() -> None:
    seen: list[str] = []

    class Simulate(BaseModel):
        seed: int = 0

        def cli_cmd(self) -> None:
            seen.append(f"simulate {self.seed}")

    class MyArgs(PydanticArguments):
        simulate: CliSubCommand[Simulate] = None

        def cli_cmd(self) -> None:
            CliApp.run_subcommand(self)

    assert MyArgs.run(["simulate", "--seed", "4"]) == 0
    assert seen == ["simulate 4"]


def test_pydantic_arguments_run_with_validation_error() -> None:
    """
    Test that PydanticArguments.run() handles validation errors.
    """

    class MyArgs(PydanticArguments):
        trials: int

    with mock.patch("sys.argv", ["test", "--trials", "many"]), mock.patch.object(ArgumentParser, "exit", autospec=True) as exit_override:
        MyArgs.run()
        exit_override.assert_called_once_with(
            mock.ANY, 2, "test: error: \nargument trials: Input should be a valid integer, unable to parse string as an integer\n"
        )


def test_pydantic_arguments_run_with_settings_error() -> None:
    class MyArgs(PydanticArguments):
        trials: int = 1

        def cli_cmd(self) -> None:
            raise SettingsError("a command is required")

    with mock.patch.object(ArgumentParser, "exit", autospec=True) as exit_override:
        MyArgs.run(["--trials", "2"])
        exit_override.assert_called_once_with(mock.ANY, 2, mock.ANY)
        assert exit_override.call_args.args[2].endswith("error: a command is required\n")
