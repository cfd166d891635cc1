from __future__ import annotations

import os
import sys
from os import PathLike

from loguru import logger

NO_COLOR = bool(os.environ.get("NO_COLOR", False))
PACKAGE = "sparsebench"


def color_tag(text: str, color: str):
    return f"<{color}>{text}</{color}>"


class LoguruFormatter:
    time = color_tag("{time:YYYY-MM-DD HH:mm:ss}", "green")
    level = color_tag("{level: <8}", "level")
    msg = color_tag("{message:<24}", "level")
    name = color_tag("{name}", "light-blue")
    func = color_tag("{function}", "light-blue")
    lineno = color_tag("{line}", "light-blue")
    extra_key_skips = ["title"]
    extra_key_name_color = "white"

    def extras(self, record: dict) -> str:
        keys = [key for key in record["extra"] if key not in self.extra_key_skips]
        return ", ".join(
            color_tag(key, self.extra_key_name_color) + "={extra[" + key + "]}" for key in keys
        )

    def format(self, record: dict) -> str:
        """
        Render ``logger.bind(...)`` extras as ``key=value`` pairs after the message.

        Example:
            ```python
            >>> import sys
            >>> from loguru import logger
            >>> logger.remove()
            >>> logger.add(sys.stderr, level="DEBUG", format=loguru_formatter)
            ```
        """
        extras = self.extras(record)
        if title := record["extra"].get("title"):
            return f"{self.time} | {self.level} | [ {title} ] {self.name}:{self.func}:{self.lineno} - {self.msg} {extras}\n"
        return f"{self.time} | {self.level} | {self.name}:{self.func}:{self.lineno} - {self.msg} {extras}\n"


class SimpleLoguruFormatter(LoguruFormatter):
    def format(self, record: dict) -> str:
        return f"{self.level} - {self.msg} {self.extras(record)}\n"


loguru_formatter = LoguruFormatter().format
simple_loguru_formatter = SimpleLoguruFormatter().format


def setup_logging(
    level: str = "INFO",
    filename: str | PathLike | None = None,
    simple: bool = False,
    rotation: str = "10 MB",
) -> None:
    """
    Enable the package logger and route it to stderr (and optionally a rotating file).

    The library is silent until this is called.

    Args:
        level (str, optional): Minimum level for both sinks. Defaults to "INFO".
        filename (str | PathLike, optional): Also write plain (uncolored) records to this file.
        simple (bool, optional): Use the short ``level - message`` format on stderr.
        rotation (str, optional): Loguru rotation policy of the file sink.
    """
    logger.remove()
    logger.enable(PACKAGE)
    logger.add(
        sys.stderr,
        level=level.upper(),
        format=simple_loguru_formatter if simple else loguru_formatter,
        colorize=not NO_COLOR,
    )
    if filename:
        logger.add(
            os.fspath(filename),
            level=level.upper(),
            format=loguru_formatter,
            colorize=False,
            rotation=rotation,
        )


__all__ = [
    "LoguruFormatter",
    "SimpleLoguruFormatter",
    "loguru_formatter",
    "simple_loguru_formatter",
    "setup_logging",
]
