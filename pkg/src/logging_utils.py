from __future__ import annotations

"""Logging setup for CLI runs: one package logger, a run log file and the console."""

import logging
from pathlib import Path
from typing import Optional

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
NOISY_LOGGERS = ("matplotlib", "PIL")


def get_logger(
    name: str,
    workdir: Optional[Path] = None,
    *,
    verbose: bool = False,
    log_name: str = "placer.log",
) -> logging.Logger:
    """Configure and return the logger ``name``.

    Parameters
    ----------
    name:
        The CLI passes the package name ``src`` so that every module logger
        (``logging.getLogger(__name__)``) propagates here.
    workdir:
        Run directory; DEBUG records go to ``workdir / "logs" / log_name``.
        ``None`` logs to the console only.
    verbose:
        Echo DEBUG records to the console as well.

    Repeated calls return the already configured logger unchanged.
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger
    logger.setLevel(logging.DEBUG)
    fmt = logging.Formatter(LOG_FORMAT)

    if workdir is not None:
        logs_dir = Path(workdir) / "logs"
        logs_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(logs_dir / log_name, encoding="utf-8")
        file_handler.setFormatter(fmt)
        file_handler.setLevel(logging.DEBUG)
        logger.addHandler(file_handler)

    console = logging.StreamHandler()
    console.setFormatter(fmt)
    console.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.addHandler(console)

    for noisy in NOISY_LOGGERS:
        logging.getLogger(noisy).setLevel(logging.WARNING)
    return logger
