import abc
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .console import Console


class ConsoleMessageable(metaclass=abc.ABCMeta):
    """An ABC for things command output can be sent to.

    The following implement this ABC:

        * :class:`~mathoNet.context.Context`
    """

    def __init__(self, *, console: "Console"):
        self.console = console

    async def send(
        self,
        content: str,
    ) -> str:
        """|coro|

        Writes a line to the console's output stream.

        Parameters
        -----------
        content: :class:`str`
            The text to write.
        """
        out = self.console.out
        out.write(content + "\n")
        out.flush()
        return content
