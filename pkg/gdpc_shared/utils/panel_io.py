"""CSV reader/writer for panels — header row of series names, one row per time point."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from gdpc_shared.errors import BenchmarkIOError, InvalidPanelError
from gdpc_shared.timeseries import PanelMatrix

logger = logging.getLogger("gdpc.panel_io")

FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


def read_panel(path: PathLike) -> PanelMatrix:
    """Read a UTF-8 comma-separated panel without index column."""
    try:
        frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except FileNotFoundError as e:
        raise BenchmarkIOError(str(path), "file not found") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InvalidPanelError(f"Could not parse {path}", details=str(e)) from e
    try:
        values = frame.to_numpy(dtype=np.float64)
    except ValueError as e:
        raise InvalidPanelError(f"Non-numeric entries in {path}", details=str(e)) from e
    logger.info("Read panel %s: T=%d m=%d", path, *values.shape)
    return PanelMatrix(values, names=[str(c) for c in frame.columns])


def write_panel(
    path: PathLike,
    values: Union[PanelMatrix, np.ndarray],
    names: Optional[list[str]] = None,
) -> None:
    """Write a panel with 17 significant digits."""
    panel = values if isinstance(values, PanelMatrix) else PanelMatrix(values, names=names or [])
    frame = pd.DataFrame(panel.values, columns=panel.names)
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8")
    except OSError as e:
        raise BenchmarkIOError(str(path), f"cannot write panel: {e}") from e
    logger.info("Wrote panel %s: T=%d m=%d", path, panel.T, panel.m)


def write_vector(path: PathLike, values: np.ndarray, name: str) -> None:
    """Write a single named column (e.g. a factor path)."""
    frame = pd.DataFrame({name: np.asarray(values, dtype=np.float64)})
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8")
    except OSError as e:
        raise BenchmarkIOError(str(path), f"cannot write vector: {e}") from e
