from __future__ import annotations

import asyncio
import logging
import sys
from typing import Any, Awaitable, Callable, Dict, List, Optional, Sequence, TextIO, Union

from aioconsole import ainput

from . import errors
from .cog import Cog
from .context import Context
from .core import Command
from .view import split_line

__all__ = ("Console", "setup_logging")

logger = logging.getLogger(__name__)

Listener = Callable[..., Awaitable[Any]]

_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(verbose: bool = False, stream: Optional[TextIO] = None) -> logging.Logger:
    """Attaches one stderr handler to the package logger (INFO, DEBUG with ``verbose``)."""
    root = logging.getLogger("mathoNet")
    for handler in list(root.handlers):
        if getattr(handler, "_mathonet_console", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(logging.Formatter(_LOG_FORMAT))
    handler._mathonet_console = True
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    return root


class Console:
    """Registers commands and runs them from an argv list or a console line.

    Every invocation dispatches ``command`` before the callback, then either
    ``command_completion`` or ``command_error``. The exit code of the
    invocation is 0 or the ``exit_code`` of the error.

    Parameters
    -----------
    out: Optional[TextIO]
        Where command output goes. Defaults to :data:`sys.stdout`.
    err: Optional[TextIO]
        Where error messages go. Defaults to :data:`sys.stderr`.
    prompt: :class:`str`
        The prompt of the interactive loop.
    """

    def __init__(
        self,
        *,
        out: Optional[TextIO] = None,
        err: Optional[TextIO] = None,
        prompt: str = "mathonet> ",
    ):
        self.out: TextIO = out or sys.stdout
        self.err: TextIO = err or sys.stderr
        self.prompt: str = prompt

        self._commands: Dict[str, Command] = {}
        self._cogs: Dict[str, Cog] = {}
        self._listeners: Dict[str, List[Listener]] = {}

    # registry

    @property
    def commands(self) -> List[Command]:
        return list(self._commands.values())

    def add_command(self, command: Command) -> None:
        """Add a :class:`.Command` to the internal list of commands.

        Raises
        -------
        CommandRegistrationError
            A command with the same name is already registered.
        """
        if command.name in self._commands:
            raise errors.CommandRegistrationError(command.name)
        self._commands[command.name] = command

    def remove_command(self, name: str) -> Optional[Command]:
        """Removes a command by name and returns it, or ``None`` if unknown."""
        return self._commands.pop(name, None)

    def get_command(self, name: str) -> Optional[Command]:
        return self._commands.get(name)

    def command(self, name: str = None, cls=Command, **kwargs: Any):
        """A shortcut decorator that creates a command and registers it."""

        def decorator(coro):
            if isinstance(coro, Command):
                raise TypeError("Function is already a command.")
            kwargs["name"] = kwargs.get("name", name)
            command = cls(coro, **kwargs)
            self.add_command(command)
            return command

        return decorator

    def add_cog(self, cog: Cog) -> None:
        if not isinstance(cog, Cog):
            raise TypeError("cogs must derive from Cog")
        self._cogs[cog.qualified_name] = cog._inject(self)

    def get_cog(self, name: str) -> Optional[Cog]:
        return self._cogs.get(name)

    # events

    def add_listener(self, func: Listener, name: Optional[str] = None) -> None:
        """Registers ``func`` for the event ``name`` (defaults to the function name, e.g. ``on_command_error``)."""
        if not asyncio.iscoroutinefunction(func):
            raise TypeError("Listeners must be coroutines.")
        name = name or func.__name__
        self._listeners.setdefault(name, []).append(func)

    def listen(self, name: Optional[str] = None):
        def decorator(func):
            self.add_listener(func, name)
            return func

        return decorator

    async def dispatch(self, event: str, *args: Any) -> None:
        listeners = self._listeners.get(f"on_{event}", [])
        for listener in listeners:
            await listener(*args)
        if event == "command_error" and not listeners:
            await self.on_command_error(*args)

    async def on_command_error(self, context: Context, exception: errors.CommandError) -> None:
        """|coro|

        The default error handler: a one-line message on :attr:`err`, plus
        the full traceback in the log for errors raised outside the command
        framework.

        This only fires if no ``on_command_error`` listener is registered.
        """
        if isinstance(exception, errors.CommandInvokeError):
            logger.error(
                "Ignoring exception in command %s:",
                context.command,
                exc_info=(type(exception), exception, exception.__traceback__),
            )
        self.err.write(f"error: {exception}\n")
        self.err.flush()

    # invocation

    async def get_context(self, message: Union[str, Sequence[str]], /, *, cls=Context) -> Context:
        tokens = split_line(message) if isinstance(message, str) else list(message)
        text = message if isinstance(message, str) else " ".join(tokens)
        ctx = cls(console=self, message=text, tokens=tokens[1:])
        ctx.invoked_with = tokens[0] if tokens else None
        ctx.command = self._commands.get(ctx.invoked_with) if tokens else None
        return ctx

    async def invoke(self, ctx: Context) -> int:
        """|coro|

        Runs ``ctx.command`` and returns the exit code.
        """
        if ctx.command is not None:
            await self.dispatch("command", ctx)
            try:
                await ctx.command.invoke(ctx)
            except errors.CommandError as exc:
                ctx.exit_code = exc.exit_code
                await self.dispatch("command_error", ctx, exc)
            else:
                await self.dispatch("command_completion", ctx)
        elif ctx.invoked_with:
            exc = errors.CommandNotFound(f'Command "{ctx.invoked_with}" is not found')
            ctx.exit_code = exc.exit_code
            await self.dispatch("command_error", ctx, exc)
        return ctx.exit_code

    async def process_commands(self, message: Union[str, Sequence[str]]) -> int:
        """|coro|

        Equivalent to :meth:`get_context` followed by :meth:`invoke`.
        """
        try:
            ctx = await self.get_context(message)
        except errors.CommandError as exc:
            ctx = Context(console=self, message=str(message), exit_code=exc.exit_code)
            await self.dispatch("command_error", ctx, exc)
            return ctx.exit_code
        return await self.invoke(ctx)

    def run(self, argv: Sequence[str]) -> int:
        """Runs one command line to completion and returns its exit code."""
        return asyncio.run(self.process_commands(list(argv)))

    # interactive loop

    async def interactive(self) -> None:
        """|coro|

        Reads lines with aioconsole until ``exit``, ``quit`` or end of input.
        """
        logger.info("Console is ready and is listening for commands")

        while True:
            try:
                line = (await ainput(self.prompt)).strip()
            except EOFError:
                break
            if not line:
                continue
            if line in ("exit", "quit"):
                break
            if line.split()[0] == "console":
                self.err.write("error: the console is already running\n")
                continue
            await self.process_commands(line)

        logger.info("Console is no longer listening for commands")
