import argparse

from pydantic import ValidationError
from pydantic_settings import CliApp, CliSettingsSource, SettingsError

from seekdecode.util.config import SeekDecodeSettings


class PydanticArguments(SeekDecodeSettings, cli_parse_args=True, cli_kebab_case=True, cli_implicit_flags=True):
    """
    Base for command-line entry points: fields become kebab-case flags, subcommands are `CliSubCommand` fields and the
    selected command's `cli_cmd()` is run.
    """

    @classmethod
    def run(cls, args: list[str] | None = None) -> int:
        css: CliSettingsSource[argparse.ArgumentParser] = CliSettingsSource(cls)
        try:
            if args is None:
                CliApp.run(cls, cli_settings_source=css)
            else:
                CliApp.run(cls, cli_args=args, cli_settings_source=css)
        except ValidationError as e:
            msg = ""
            for err in e.errors():
                loc = ".".join(str(part) for part in err["loc"]) or "config"
                msg += f"\nargument {loc}: {err['msg']}"
            css.root_parser.error(msg)
        except SettingsError as e:
            css.root_parser.error(str(e))
        return 0
