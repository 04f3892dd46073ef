from __future__ import annotations

from typing import TYPE_CHECKING, Any, Dict, List, Optional

from . import abc

if TYPE_CHECKING:
    from .console import Console
    from .core import Command
    from .view import ArgumentView


class Context(abc.ConsoleMessageable):
    """One invocation: the tokens, the parsed view and arguments, and the exit code."""

    def __init__(self, **attrs):
        self.message: Optional[str] = attrs.pop("message", None)
        self.console: Console = attrs.pop("console", None)
        self.tokens: List[str] = attrs.pop("tokens", [])
        self.args: List[Any] = attrs.pop("args", [])
        self.kwargs: Dict[str, Any] = attrs.pop("kwargs", {})
        self.command: Optional[Command] = attrs.pop("command", None)
        self.view: Optional[ArgumentView] = attrs.pop("view", None)
        self.invoked_with: Optional[str] = attrs.pop("invoked_with", None)
        self.command_failed: bool = attrs.pop("command_failed", False)
        self.exit_code: int = attrs.pop("exit_code", 0)

    def __repr__(self) -> str:
        return f"<Context message={self.message!r}>"

