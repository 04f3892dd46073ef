from __future__ import annotations

import inspect
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    Any,
    Dict,
    List,
    Literal,
    Protocol,
    Type,
    TypeVar,
    Union,
    runtime_checkable,
)

import numpy as np
import re2

from .benchmarks import NOISE_LEVELS
from .config import SYSTEMS, TrainConfig
from .errors import (
    BadArgument,
    BadBoolArgument,
    BadLiteralArgument,
    BadUnionArgument,
    CommandError,
    ConfigError,
    ConversionError,
)

if TYPE_CHECKING:
    from .context import Context


__all__ = (
    "Converter",
    "SystemName",
    "Vector",
    "ExistingPath",
    "NoiseLevel",
    "coerce_field",
    "get_converter",
    "run_converters",
)


T_co = TypeVar("T_co", covariant=True)


@runtime_checkable
class Converter(Protocol[T_co]):
    """Turns one command-line string into a value.

    Used as a parameter annotation, either the class or an instance. Failures
    should raise :exc:`.BadArgument` so they map to exit code 2.
    """

    async def convert(self, ctx: Context, argument: str):
        raise NotImplementedError("Derived classes need to implement this.")


_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_NUMBER_LIST_REGEX = re2.compile(rf"\s*{_NUMBER}\s*(?:,\s*{_NUMBER}\s*)*$")
_SYSTEM_ALIASES = {"lv": "lotka_volterra", "fisher": "fisher_kpp", "kpp": "fisher_kpp"}


def _numbers(argument: str) -> List[float]:
    if _NUMBER_LIST_REGEX.match(argument) is None:
        raise BadArgument(f'"{argument}" is not a comma separated list of numbers.')
    return [float(part) for part in argument.split(",")]


class SystemName(Converter[str]):
    """Converts to a benchmark system name.

    Dashes are accepted for underscores, and ``lv`` / ``fisher`` as shorthands.
    """

    async def convert(self, ctx: Context, argument: str) -> str:
        name = argument.strip().lower().replace("-", "_")
        name = _SYSTEM_ALIASES.get(name, name)
        if name not in SYSTEMS:
            raise BadArgument(
                f'Unknown system "{argument}"; expected one of {", ".join(SYSTEMS)}.'
            )
        return name


class Vector(Converter[np.ndarray]):
    """Converts ``1,2,3`` to a state vector."""

    async def convert(self, ctx: Context, argument: str) -> np.ndarray:
        return np.array(_numbers(argument))


class ExistingPath(Converter[Path]):
    async def convert(self, ctx: Context, argument: str) -> Path:
        path = Path(argument)
        if not path.exists():
            raise BadArgument(f'File "{argument}" does not exist.')
        return path


class NoiseLevel(Converter[float]):
    """A non-negative noise standard deviation; the benchmark levels are listed on failure."""

    async def convert(self, ctx: Context, argument: str) -> float:
        try:
            value = float(argument)
        except ValueError:
            value = -1.0
        if not value >= 0.0:
            levels = ", ".join(f"{v:g}" for v in NOISE_LEVELS)
            raise BadArgument(f'Noise "{argument}" must be a non-negative number (e.g. {levels}).')
        return value


def _convert_to_bool(argument: str) -> bool:
    lowered = argument.lower()
    if lowered in ("yes", "y", "true", "t", "1", "enable", "on"):
        return True
    elif lowered in ("no", "n", "false", "f", "0", "disable", "off"):
        return False
    else:
        raise BadBoolArgument(lowered)


def coerce_field(name: str, argument: Union[str, None]) -> Any:
    """Converts a ``--name value`` override to the type of the :class:`TrainConfig` field.

    Raises
    -------
    ConfigError
        There is no such field or the value does not fit it.
    """
    default = TrainConfig.field_default(name)
    if argument is None:
        if isinstance(default, bool):
            return True
        raise ConfigError(f"--{name} needs a value.", name)
    try:
        if isinstance(default, bool):
            return _convert_to_bool(argument)
        if isinstance(default, (list, tuple)):
            parts = [part.strip() for part in argument.split(",") if part.strip()]
            if name == "hidden":
                return [int(part) for part in parts]
            if name == "unary_set":
                return parts
            return [float(part) for part in parts]
        if isinstance(default, int) or default is None:
            return int(argument)
        if isinstance(default, float):
            return float(argument)
        return argument
    except (ValueError, BadBoolArgument) as exc:
        raise ConfigError(f'"{argument}" is not a valid value for {name}.', name) from exc


def get_converter(param: inspect.Parameter) -> Any:
    converter = param.annotation
    if converter is param.empty:
        if param.default is not param.empty:
            converter = str if param.default is None else type(param.default)
        else:
            converter = str
    return converter


CONVERTER_MAPPING: Dict[Type[Any], Any] = {
    np.ndarray: Vector,
}


async def _actual_conversion(ctx: Context, converter, argument: str, param: inspect.Parameter):
    if converter is bool:
        return _convert_to_bool(argument)

    converter = CONVERTER_MAPPING.get(converter, converter)

    try:
        if inspect.isclass(converter) and issubclass(converter, Converter):
            if inspect.ismethod(converter.convert):
                return await converter.convert(ctx, argument)
            else:
                return await converter().convert(ctx, argument)
        elif isinstance(converter, Converter):
            return await converter.convert(ctx, argument)
    except CommandError:
        raise
    except Exception as exc:
        raise ConversionError(converter, exc) from exc

    try:
        return converter(argument)
    except CommandError:
        raise
    except Exception as exc:
        try:
            name = converter.__name__
        except AttributeError:
            name = converter.__class__.__name__

        raise BadArgument(f'Converting to "{name}" failed for parameter "{param.name}".') from exc


async def run_converters(ctx: Context, converter, argument: str, param: inspect.Parameter):
    """|coro|

    Converts ``argument`` for ``param`` following its annotation.

    ``Optional``/``Union`` members are tried in order, ``Literal`` values are
    matched after converting to their type, and any other generic is
    converted through its origin.
    """
    origin = getattr(converter, "__origin__", None)

    if origin is Union:
        errors = []
        _NoneType = type(None)
        union_args = converter.__args__
        for conv in union_args:
            # a positional word that fits no earlier type is left for the next parameter
            if conv is _NoneType:
                if param.kind in (param.POSITIONAL_ONLY, param.POSITIONAL_OR_KEYWORD):
                    ctx.view.undo()
                    return None if param.default is param.empty else param.default
                continue

            try:
                value = await run_converters(ctx, conv, argument, param)
            except CommandError as exc:
                errors.append(exc)
            else:
                return value

        if len(errors) == 1:
            raise errors[0]
        raise BadUnionArgument(param, union_args, errors)

    if origin is Literal:
        errors = []
        conversions = {}
        literal_args = converter.__args__
        for literal in literal_args:
            literal_type = type(literal)
            try:
                value = conversions[literal_type]
            except KeyError:
                try:
                    value = await _actual_conversion(ctx, literal_type, argument, param)
                except CommandError as exc:
                    errors.append(exc)
                    conversions[literal_type] = object()
                    continue
                else:
                    conversions[literal_type] = value

            if value == literal:
                return value

        raise BadLiteralArgument(param, literal_args, errors)

    if origin is not None:
        converter = origin

    return await _actual_conversion(ctx, converter, argument, param)
