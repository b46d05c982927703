from __future__ import annotations

"""Exception hierarchy shared by the placement pipeline."""

from pathlib import Path
from typing import Any, Optional


class PlacementError(Exception):
    """Base class for every error raised by the package."""


class NetlistError(PlacementError):
    """Invalid netlist content: unresolvable pins, bad ids or geometry."""


class BookshelfParseError(NetlistError):
    """Malformed or inconsistent Bookshelf input, located by file and line."""

    def __init__(self, path: Path | str, line: Optional[int], message: str) -> None:
        self.path = Path(path)
        self.line = line
        self.message = message
        where = f"{self.path}:{line}" if line is not None else str(self.path)
        super().__init__(f"{where}: {message}")


class ConfigError(PlacementError):
    """Unknown key, type mismatch or violated parameter constraint."""


class GraphError(PlacementError):
    """Graph operator cannot be formed (e.g. zero degree with sigma = 0)."""


class DivergenceError(PlacementError):
    """The global placement objective became non-finite."""

    def __init__(self, message: str, trace: Any = None) -> None:
        super().__init__(message)
        self.trace = trace


class StageError(PlacementError):
    """A pipeline stage failed; ``report`` holds what was measured before it."""

    def __init__(self, stage: str, cause: BaseException, report: Any = None) -> None:
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.report = report
