from __future__ import annotations

import shlex
from typing import Dict, Iterable, List, Optional, Union

import re2

from .errors import BadArgument

__all__ = ("ArgumentView", "split_line", "flag_name")


_FLAG_REGEX = re2.compile(r"--([A-Za-z][A-Za-z0-9_-]*)(?:=(.*))?$")


def flag_name(name: str) -> str:
    """``--lambda-grid`` and ``--lambda_grid`` both name ``lambda_grid``."""
    return name.replace("-", "_").lower()


def split_line(line: str) -> List[str]:
    """Splits a console line the way a POSIX shell would."""
    try:
        return shlex.split(line)
    except ValueError as exc:
        raise BadArgument(f"Could not parse the line: {exc}") from exc


class ArgumentView:
    """The words and ``--flag`` options of one command invocation.

    Words are consumed in order through :meth:`get_word`; flags are looked
    up by name. A flag takes the following word as its value unless it is
    written ``--name=value`` or is one of ``switches``, which take no value.

    Parameters
    -----------
    tokens: Iterable[:class:`str`]
        The already split arguments, without the command name.
    switches: Iterable[:class:`str`]
        Flag names that never consume the following word.
    """

    def __init__(self, tokens: Union[str, Iterable[str]], switches: Iterable[str] = ()):
        if isinstance(tokens, str):
            tokens = split_line(tokens)
        tokens = list(tokens)
        switches = {flag_name(s) for s in switches}

        self.words: List[str] = []
        self.flags: Dict[str, Optional[str]] = {}
        i = 0
        while i < len(tokens):
            token = tokens[i]
            match = _FLAG_REGEX.match(token)
            if match is None:
                self.words.append(token)
                i += 1
                continue
            name = flag_name(match.group(1))
            value = match.group(2)
            if value is None and name not in switches and i + 1 < len(tokens):
                if _FLAG_REGEX.match(tokens[i + 1]) is None:
                    value = tokens[i + 1]
                    i += 1
            if name in self.flags:
                raise BadArgument(f"--{name} was given more than once.")
            self.flags[name] = value
            i += 1

        self.index = 0
        self.previous = 0

    def __repr__(self) -> str:
        return f"<ArgumentView words={self.words!r} flags={self.flags!r} index={self.index}>"

    @property
    def eof(self) -> bool:
        return self.index >= len(self.words)

    def get_word(self) -> Optional[str]:
        if self.eof:
            return None
        self.previous = self.index
        word = self.words[self.index]
        self.index += 1
        return word

    def undo(self) -> None:
        self.index = self.previous

    def read_rest(self) -> List[str]:
        rest = self.words[self.index :]
        self.previous = self.index
        self.index = len(self.words)
        return rest

    def pop_flag(self, name: str, default: Optional[str] = None) -> Optional[str]:
        return self.flags.pop(flag_name(name), default)

    def has_flag(self, name: str) -> bool:
        return flag_name(name) in self.flags
