from __future__ import annotations

from typing import TYPE_CHECKING, Any, List, Tuple

if TYPE_CHECKING:
    from inspect import Parameter

    from .trainer import DiscoveryReport


__all__ = (
    "MathONetError",
    "StructuralError",
    "DegenerateStencilError",
    "IntegrationError",
    "DivergenceError",
    "AllRunsDivergedError",
    "CommandError",
    "CommandRegistrationError",
    "CommandNotFound",
    "CommandInvokeError",
    "UserInputError",
    "MissingRequiredArgument",
    "TooManyArguments",
    "BadArgument",
    "BadBoolArgument",
    "BadLiteralArgument",
    "BadUnionArgument",
    "ConversionError",
    "ConfigError",
    "DataError",
    "DivergedRunsError",
)


def _either(names: List[str]) -> str:
    if len(names) > 2:
        return f"{', '.join(names[:-1])}, or {names[-1]}"
    return " or ".join(names)


class MathONetError(Exception):
    """The base exception type for every error raised by this package.

    Numerical failures derive from it directly, console failures derive
    from :exc:`CommandError`.
    """

    pass


class StructuralError(MathONetError):
    """Exception raised when an input does not match the shape a model
    or operator expects (wrong vector length, too short a grid, ...).

    This inherits from :exc:`MathONetError`.
    """

    pass


class DegenerateStencilError(MathONetError):
    """Exception raised when a stencil cannot be rescaled because its
    centre tap is zero.

    This inherits from :exc:`MathONetError`.

    Attributes
    -----------
    kernel: Tuple[:class:`float`, :class:`float`, :class:`float`]
        The offending kernel.
    """

    def __init__(self, kernel: Tuple[float, float, float]):
        self.kernel = tuple(kernel)
        super().__init__(f"Stencil {list(self.kernel)} has a zero centre tap.")


class IntegrationError(MathONetError):
    """Exception raised when an integration step produces a non-finite state.

    This inherits from :exc:`MathONetError`.

    Attributes
    -----------
    step: :class:`int`
        The index of the step that failed, ``-1`` when unknown.
    """

    def __init__(self, message: str, step: int = -1):
        self.step = step
        super().__init__(message)


class DivergenceError(MathONetError):
    """Exception raised when the training loss stops being finite.

    This inherits from :exc:`MathONetError`.

    Attributes
    -----------
    epoch: :class:`int`
        The global epoch index at which the loss diverged.
    """

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"Training loss became non-finite at epoch {epoch}.")


class AllRunsDivergedError(MathONetError):
    """Exception raised when every run of a sweep diverged.

    This inherits from :exc:`MathONetError`.

    Attributes
    -----------
    report: :class:`~mathoNet.trainer.DiscoveryReport`
        The report holding the failed runs, still worth writing to disk.
    """

    def __init__(self, report: DiscoveryReport):
        self.report = report
        super().__init__(f"All {len(report.runs)} runs diverged.")


class CommandError(MathONetError):
    r"""The base exception type for all console command related errors.

    This inherits from :exc:`MathONetError`.

    Attributes
    -----------
    exit_code: :class:`int`
        The process exit code the console reports for this error.
    """

    exit_code: int = 1

    def __init__(self, message: str = None, *args: Any):
        if message is not None:
            super().__init__(message, *args)
        else:
            super().__init__(*args)


class CommandRegistrationError(CommandError):
    """An exception raised when the command can't be added
    because the name is already taken by a different command.

    This inherits from :exc:`CommandError`.

    Attributes
    ----------
    name: :class:`str`
        The command name that had the error.
    """

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"The command {name} is already an existing command.")


class CommandNotFound(CommandError):
    """Exception raised when a command is attempted to be invoked
    but no command under that name is found.

    This inherits from :exc:`CommandError`.
    """

    exit_code = 2


class CommandInvokeError(CommandError):
    """Exception raised when the command being invoked raised an exception
    that is not a :exc:`CommandError`.

    This inherits from :exc:`CommandError`.

    Attributes
    -----------
    original: :exc:`Exception`
        The original exception that was raised. You can also get this via
        the ``__cause__`` attribute.
    """

    def __init__(self, e: Exception) -> None:
        self.original = e
        super().__init__(f"Command raised an exception: {e.__class__.__name__}: {e}")


class UserInputError(CommandError):
    """The base exception type for errors that involve errors
    regarding user input.

    This inherits from :exc:`CommandError`.
    """

    exit_code = 2


class MissingRequiredArgument(UserInputError):
    """Exception raised when parsing a command and a parameter
    that is required is not encountered.

    This inherits from :exc:`UserInputError`

    Attributes
    -----------
    param: :class:`inspect.Parameter`
        The argument that is missing.
    """

    def __init__(self, param: Parameter):
        self.param = param
        super().__init__(f"{param.name} is a required argument that is missing.")


class TooManyArguments(UserInputError):
    """Exception raised when the command was passed more words than it
    has positional parameters.

    This inherits from :exc:`UserInputError`
    """

    pass


class BadArgument(UserInputError):
    """Exception raised when a parsing or conversion failure is encountered
    on an argument to pass into a command.

    This inherits from :exc:`UserInputError`
    """

    pass


class BadBoolArgument(BadArgument):
    """Exception raised when a boolean argument was not convertable.

    This inherits from :exc:`BadArgument`

    Attributes
    -----------
    argument: :class:`str`
        The boolean argument supplied by the caller that is not in the predefined list
    """

    def __init__(self, argument: str) -> None:
        self.argument = argument
        super().__init__(f"{argument} is not a recognised boolean option")


class BadLiteralArgument(UserInputError):
    """Exception raised when a :data:`typing.Literal` converter fails for all
    its associated values.

    This inherits from :exc:`UserInputError`

    Attributes
    -----------
    param: :class:`inspect.Parameter`
        The parameter that failed being converted.
    literals: Tuple[Any, ...]
        A tuple of values compared against in conversion, in order of failure.
    errors: List[:class:`CommandError`]
        A list of errors that were caught from failing the conversion.
    """

    def __init__(
        self, param: Parameter, literals: Tuple[Any, ...], errors: List[CommandError]
    ) -> None:
        self.param = param
        self.literals = literals
        self.errors = errors

        choices = _either([repr(value) for value in literals])
        super().__init__(f'Could not convert "{param.name}" into the literal {choices}.')


class BadUnionArgument(UserInputError):
    """Exception raised when a :data:`typing.Union` converter fails for all
    its associated types.

    This inherits from :exc:`UserInputError`

    Attributes
    -----------
    param: :class:`inspect.Parameter`
        The parameter that failed being converted.
    converters: Tuple[Type, ``...``]
        A tuple of converters attempted in conversion, in order of failure.
    errors: List[:class:`CommandError`]
        A list of errors that were caught from failing the conversion.
    """

    def __init__(
        self, param: Parameter, converters: Tuple[Any, ...], errors: List[CommandError]
    ) -> None:
        self.param = param
        self.converters = converters
        self.errors = errors

        names = [getattr(c, "__name__", None) or repr(c) for c in converters]
        super().__init__(f'Could not convert "{param.name}" into {_either(names)}.')


class ConversionError(BadArgument):
    """Exception raised when a Converter class raises non-CommandError.

    This inherits from :exc:`BadArgument`.

    Attributes
    ----------
    converter: Any
        The converter that failed.
    original: :exc:`Exception`
        The original exception that was raised. You can also get this via
        the ``__cause__`` attribute.
    """

    def __init__(self, converter: Any, original: Exception):
        self.converter = converter
        self.original = original
        super().__init__(str(original))


class ConfigError(UserInputError):
    """Exception raised when a configuration file or flag holds an
    invalid value.

    This inherits from :exc:`UserInputError`

    Attributes
    -----------
    field: Optional[:class:`str`]
        The configuration field at fault, if known.
    """

    exit_code = 2

    def __init__(self, message: str, field: str = None):
        self.field = field
        super().__init__(message)


class DataError(CommandError):
    """Exception raised when a dataset, model or report file cannot be
    read or does not fit the command it was handed to.

    This inherits from :exc:`CommandError`

    Attributes
    -----------
    column: Optional[:class:`str`]
        The offending CSV column, if the failure is tied to one.
    """

    exit_code = 3

    def __init__(self, message: str, column: str = None):
        self.column = column
        super().__init__(message)


class DivergedRunsError(CommandError):
    """Exception raised by ``discover`` when no run survived.

    This inherits from :exc:`CommandError`

    Attributes
    -----------
    original: :exc:`AllRunsDivergedError`
        The error raised by the trainer.
    """

    exit_code = 4

    def __init__(self, original: AllRunsDivergedError):
        self.original = original
        super().__init__(str(original))
