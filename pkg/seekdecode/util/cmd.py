"Tools for running seekdecode command-line processes"

import asyncio
import typing as t

import uvloop

from seekdecode.core.errors import ConfigError
from seekdecode.util.logging import setup_logging
from seekdecode.util.sentry import init as setup_sentry

Res = t.TypeVar("Res")


def setup() -> None:
    # Bad configuration is the user's problem, not a crash worth reporting
    setup_sentry(ignore_exceptions=(ConfigError,))
    setup_logging()


def run_async(coro: t.Coroutine[t.Any, t.Any, Res]) -> Res:
    """
    Set up logging and error reporting, then run the specified coroutine on uvloop returning its result.
    """
    setup()
    # Once min supported version is python 3.12 just use uvloop.run(coro)
    asyncio.set_event_loop_policy(uvloop.EventLoopPolicy())
    return asyncio.run(coro)
