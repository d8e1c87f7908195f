import typing as t

import sentry_sdk

from seekdecode.util.config import SeekDecodeSettings


class SentrySettings(SeekDecodeSettings):
    environment: t.Optional[str] = "dev"
    commit_tag: str = "dev"
    sentry_dsn: t.Optional[str] = None


sentry_settings = SentrySettings()


def _drop_ignored(ignore_exceptions: t.Sequence[t.Type[Exception]]) -> t.Callable[[t.Any, t.Any], t.Any]:
    def before_send(event: t.Any, hint: t.Any) -> t.Any:
        if "exc_info" in hint:
            _, exc_value, _ = hint["exc_info"]
            if isinstance(exc_value, tuple(ignore_exceptions)):
                return None
        return event

    return before_send


def init(ignore_exceptions: t.Sequence[t.Type[Exception]] = ()) -> None:
    """
    Initialize sentry as early as possible. Does nothing unless `SND_SENTRY_DSN` is set.

    :param ignore_exceptions: exception types that are never reported.
    """
    if not sentry_settings.sentry_dsn:
        return

    sentry_sdk.init(
        dsn=sentry_settings.sentry_dsn,
        environment=sentry_settings.environment,
        release=sentry_settings.commit_tag,
        before_send=_drop_ignored(ignore_exceptions),
        # Long simulation runs only report crashes; spans go to OTEL
        traces_sample_rate=0,
        profile_session_sample_rate=0,
    )


def set_run_context(command: str, seed: int, code_fingerprint: str | None = None, **grid: t.Any) -> None:
    "Attach what is needed to reproduce a crashed run: command, seed, code and the sweep grid"
    sentry_sdk.set_tag("command", command)
    sentry_sdk.set_tag("seed", str(seed))
    sentry_sdk.set_context("experiment", {"command": command, "seed": seed, "code": code_fingerprint, **grid})
