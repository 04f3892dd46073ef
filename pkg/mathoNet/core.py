from __future__ import annotations

import asyncio
import functools
import inspect
from typing import Any, Dict, List, Optional, TypeVar, Union

from .context import Context
from .converters import get_converter, run_converters
from .errors import (
    CommandError,
    CommandInvokeError,
    MissingRequiredArgument,
    TooManyArguments,
)
from .view import ArgumentView

__all__ = (
    "Command",
    "command",
)


T = TypeVar("T")


def hooked_wrapped_callback(ctx, coro):
    @functools.wraps(coro)
    async def wrapped(*args, **kwargs):
        try:
            ret = await coro(*args, **kwargs)
        except CommandError:
            ctx.command_failed = True
            raise
        except asyncio.CancelledError:
            ctx.command_failed = True
            return
        except Exception as exc:
            ctx.command_failed = True
            raise CommandInvokeError(exc) from exc
        return ret

    return wrapped


class Command:
    """A console command built from a coroutine.

    Parameters after ``ctx`` become the command's arguments:
    positional parameters are read from words in order, keyword-only
    parameters from ``--name value`` flags, a ``*args`` parameter takes the
    remaining words and a ``**kwargs`` parameter collects every flag the
    signature does not name (as raw strings, ``None`` for a bare flag).
    Annotations pick the converter.
    """

    def __new__(cls, *args: Any, **kwargs: Any):
        self = super().__new__(cls)
        self.__original_kwargs__ = kwargs.copy()
        return self

    def __init__(self, coro, **kwargs):
        if not asyncio.iscoroutinefunction(coro):
            raise TypeError("Function must be a coroutine.")

        name = kwargs.get("name") or coro.__name__
        if not isinstance(name, str):
            raise TypeError("Command name must be a string.")
        self.name = name
        self.callback = coro

        help_doc = kwargs.get("help")
        if help_doc is not None:
            help_doc = inspect.cleandoc(help_doc)
        else:
            help_doc = inspect.getdoc(coro)

        self.help = help_doc
        self.hidden = kwargs.get("hidden", False)
        self.cog = None

    @property
    def callback(self):
        return self._callback

    @callback.setter
    def callback(self, function):
        self._callback = function
        self.module = function.__module__

        signature = inspect.signature(function)
        self.params = signature.parameters.copy()

        # annotations postponed by ``from __future__ import annotations`` arrive as strings
        for key, value in self.params.items():
            if isinstance(value.annotation, str):
                self.params[key] = value.replace(
                    annotation=eval(value.annotation, function.__globals__)
                )

    @property
    def short_doc(self) -> str:
        """:class:`str`: The first line of :attr:`help`."""
        if self.help is not None:
            return self.help.split("\n", 1)[0]
        return ""

    @property
    def signature(self) -> str:
        """:class:`str`: Returns a POSIX-like signature useful for help command output."""
        params = self.clean_params
        if not params:
            return ""

        result = []
        for name, param in params.items():
            optional = self._is_typing_optional(param.annotation)
            if param.kind == param.VAR_KEYWORD:
                result.append("[--option value]...")
                continue
            if param.kind == param.KEYWORD_ONLY:
                flag = f"--{name.replace('_', '-')}"
                if get_converter(param) is bool:
                    result.append(f"[{flag}]")
                elif param.default is not param.empty:
                    # None and '' defaults print as [--name value]
                    should_print = (
                        param.default
                        if isinstance(param.default, str)
                        else param.default is not None
                    )
                    if should_print:
                        result.append(f"[{flag}={param.default}]")
                    else:
                        result.append(f"[{flag} {name}]")
                elif optional:
                    result.append(f"[{flag} {name}]")
                else:
                    result.append(f"{flag} <{name}>")
                continue

            if param.default is not param.empty:
                should_print = (
                    param.default
                    if isinstance(param.default, str)
                    else param.default is not None
                )
                if should_print:
                    result.append(f"[{name}={param.default}]")
                else:
                    result.append(f"[{name}]")
            elif param.kind == param.VAR_POSITIONAL:
                result.append(f"<{name}...>")
            elif optional:
                result.append(f"[{name}]")
            else:
                result.append(f"<{name}>")

        return " ".join(result)

    @property
    def clean_params(self) -> Dict[str, inspect.Parameter]:
        """Dict[:class:`str`, :class:`inspect.Parameter`]:
        Retrieves the parameter dictionary without the context or self parameters.
        """
        result = self.params.copy()
        if self.cog is not None:
            try:
                del result[next(iter(result))]
            except StopIteration:
                raise ValueError("missing 'self' parameter") from None

        try:
            del result[next(iter(result))]
        except StopIteration:
            raise ValueError("missing 'context' parameter") from None

        return result

    @property
    def switches(self) -> List[str]:
        """Keyword-only ``bool`` parameters; their flags take no value."""
        return [
            name
            for name, param in self.clean_params.items()
            if param.kind == param.KEYWORD_ONLY and get_converter(param) is bool
        ]

    def __str__(self):
        return self.name

    async def __call__(self, *args, **kwargs):
        """|coro|

        Calls the internal callback, bypassing argument parsing.
        """
        if self.cog is not None:
            return await self.callback(self.cog, *args, **kwargs)
        else:
            return await self.callback(*args, **kwargs)

    def _is_typing_optional(self, annotation: Union[T, Optional[T]]) -> bool:
        return getattr(annotation, "__origin__", None) is Union and type(None) in annotation.__args__  # type: ignore

    async def transform(self, ctx: Context, param: inspect.Parameter):
        required = param.default is param.empty
        converter = get_converter(param)
        view = ctx.view

        if view.eof:
            if param.kind == param.VAR_POSITIONAL:
                raise RuntimeError()  # break the loop
            if required:
                if self._is_typing_optional(param.annotation):
                    return None
                raise MissingRequiredArgument(param)
            return param.default

        argument = view.get_word()
        return await run_converters(ctx, converter, argument, param)

    async def transform_flag(self, ctx: Context, param: inspect.Parameter):
        converter = get_converter(param)
        view = ctx.view
        if not view.has_flag(param.name):
            if param.default is param.empty:
                if self._is_typing_optional(param.annotation):
                    return None
                raise MissingRequiredArgument(param)
            return param.default

        argument = view.pop_flag(param.name)
        if argument is None:
            if converter is bool:
                return True
            raise MissingRequiredArgument(param)
        return await run_converters(ctx, converter, argument, param)

    async def _parse_arguments(self, ctx: Context):
        ctx.args = [ctx] if self.cog is None else [self.cog, ctx]
        ctx.kwargs = {}
        args = ctx.args
        kwargs = ctx.kwargs

        view = ctx.view
        iterator = iter(self.params.items())

        if self.cog is not None:
            try:
                next(iterator)
            except StopIteration:
                raise TypeError(f'Callback for {self.name} command is missing "self" parameter.')

        try:
            next(iterator)
        except StopIteration:
            raise TypeError(f'Callback for {self.name} command is missing "ctx" parameter.')

        collect_rest = False
        for name, param in iterator:
            if param.kind in (param.POSITIONAL_OR_KEYWORD, param.POSITIONAL_ONLY):
                transformed = await self.transform(ctx, param)
                args.append(transformed)

            elif param.kind == param.KEYWORD_ONLY:
                kwargs[name] = await self.transform_flag(ctx, param)

            elif param.kind == param.VAR_POSITIONAL:
                while not view.eof:
                    try:
                        transformed = await self.transform(ctx, param)
                        args.append(transformed)
                    except RuntimeError:
                        break

            elif param.kind == param.VAR_KEYWORD:
                collect_rest = True

        if not view.eof:
            raise TooManyArguments(f"Too many arguments passed to {self.name}")
        if view.flags:
            if not collect_rest:
                unknown = ", ".join(f"--{name}" for name in view.flags)
                raise TooManyArguments(f"Unknown option(s) for {self.name}: {unknown}")
            kwargs.update(view.flags)
            view.flags = {}

    def copy(self) -> Command:
        """A new, unbound command with the same callback and options."""
        return self.__class__(self.callback, **self.__original_kwargs__)

    async def prepare(self, ctx: Context):
        ctx.command = self
        ctx.view = ArgumentView(ctx.tokens, switches=self.switches)
        await self._parse_arguments(ctx)

    async def invoke(self, ctx: Context):
        await self.prepare(ctx)
        injected = hooked_wrapped_callback(ctx, self.callback)
        await injected(*ctx.args, **ctx.kwargs)


def command(name: str = None, cls=Command, **kwargs):
    """A decorator that transforms a function into a :class:`.Command`.

    By default the help attribute is received automatically from the docstring
    of the function and is cleaned up with the use of inspect.cleandoc.

    Parameters
    -----------
    name: :class:`str`
        The name to create the command with. By default this uses the function name unchanged.
    cls
        The class to construct with. By default this is :class:`.Command`.
    attrs
        Keyword arguments to pass into the construction of the class denoted by ``cls``.

    Raises
    -------
    TypeError
        If the function is not a coroutine or is already a command.
    """

    def decorator(coro):
        if isinstance(coro, Command):
            raise TypeError("Function is already a command.")
        kwargs["name"] = kwargs.get("name", name)
        return cls(coro, **kwargs)

    return decorator
