from __future__ import annotations

from typing import TYPE_CHECKING, Any, ClassVar, Dict, List

from .core import Command

if TYPE_CHECKING:
    from .console import Console

__all__ = ("CogMeta", "Cog")


class CogMeta(type):
    """Collects the :class:`.Command` attributes of a cog class, base classes first.

    The cog is named after the class unless ``name`` is passed as a class keyword.
    """

    __cog_commands__: List[Command]

    def __new__(mcs, *args: Any, **kwargs: Any) -> CogMeta:
        name, bases, attrs = args
        attrs["__cog_name__"] = kwargs.pop("name", name)
        new_cls = super().__new__(mcs, name, bases, attrs, **kwargs)

        commands: Dict[str, Command] = {}
        for base in reversed(new_cls.__mro__):
            for attr, value in base.__dict__.items():
                commands.pop(attr, None)
                if isinstance(value, staticmethod) and isinstance(value.__func__, Command):
                    raise TypeError(f"Command {base.__name__}.{attr} must not be a staticmethod.")
                if isinstance(value, Command):
                    commands[attr] = value
        new_cls.__cog_commands__ = list(commands.values())
        return new_cls

    def __init__(cls, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args)

    @property
    def qualified_name(cls) -> str:
        return cls.__cog_name__


class Cog(metaclass=CogMeta):
    """A group of related commands sharing state.

    Every instance binds its own copies of the class's commands.
    """

    __cog_name__: ClassVar[str]
    __cog_commands__: ClassVar[List[Command]]

    def __new__(cls, *args: Any, **kwargs: Any):
        self = super().__new__(cls)
        self.__cog_commands__ = tuple(c.copy() for c in cls.__cog_commands__)
        for command in self.__cog_commands__:
            setattr(self, command.callback.__name__, command)
        return self

    @property
    def qualified_name(self) -> str:
        return self.__cog_name__

    def _inject(self, console: Console) -> Cog:
        added: List[str] = []
        try:
            for command in self.__cog_commands__:
                command.cog = self
                console.add_command(command)
                added.append(command.name)
        except Exception:
            for name in added:
                console.remove_command(name)
            raise
        return self
