"""
On-disk formats: dataset CSV with a JSON sidecar, model / Bayesian state /
report JSON, and the plot-ready history, trajectory and band CSVs.

Floats are written with :func:`repr`, so values read back are identical.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import re2

from .bayes import RegState
from .benchmarks import Dataset
from .errors import DataError, StructuralError
from .network import FlatModel
from .trainer import CycleRecord, DiscoveryReport, model_from_dict
from .validation import Trajectory, UncertaintyBand

__all__ = (
    "sidecar_path",
    "write_json",
    "read_json",
    "write_dataset",
    "read_dataset",
    "save_model",
    "load_model",
    "save_reg",
    "load_reg",
    "save_report",
    "load_report",
    "write_history",
    "write_trajectory",
    "write_band",
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_COLUMN_REGEX = re2.compile(r"([xy])([1-9][0-9]*)$")

HISTORY_COLUMNS = (
    "cycle",
    "term_count",
    "nested_term_count",
    "active_connections",
    "nonzero_weights",
    "train_mse",
    "val_mse",
    "sigma2",
    "elapsed",
    "expression",
)


def _number(value: float) -> str:
    return repr(float(value))


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def write_json(data: Any, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf8")
    return path


def read_json(path: PathLike, what: str = "file") -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf8"))
    except FileNotFoundError:
        raise DataError(f"The {what} {path} does not exist.") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"The {what} {path} is not valid JSON: {exc}") from exc


# datasets


def write_dataset(data: Dataset, path: PathLike) -> Path:
    """Writes ``x1..xn, y1..ym`` rows and the metadata sidecar next to them."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf8") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(data.columns)
        for x, y in zip(data.X, data.Y):
            writer.writerow([_number(v) for v in x] + [_number(v) for v in y])
    write_json(dict(data.meta, noise_sigma=data.noise_sigma), sidecar_path(path))
    logger.debug("Wrote %d rows to %s", len(data), path)
    return path


def _check_header(header: Sequence[str]) -> tuple:
    """Returns ``(n_inputs, n_outputs)`` for a ``x1..xn, y1..ym`` header."""
    n_x = n_y = 0
    for column in header:
        match = _COLUMN_REGEX.match(column.strip())
        if match is None:
            raise DataError(f"Unexpected column {column!r}; expected x1..xn then y1..ym.", column)
        kind, index = match.group(1), int(match.group(2))
        if kind == "x":
            if n_y or index != n_x + 1:
                raise DataError(f"Column {column!r} is out of order.", column)
            n_x += 1
        else:
            if not n_x or index != n_y + 1:
                raise DataError(f"Column {column!r} is out of order.", column)
            n_y += 1
    if not n_x or not n_y:
        raise DataError("A dataset needs at least one x and one y column.")
    return n_x, n_y


def read_dataset(path: PathLike) -> Dataset:
    """Reads a dataset CSV and, if present, its sidecar.

    Raises
    -------
    DataError
        The file is missing, the header is malformed or a value is not a number.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf8") as fp:
            rows = list(csv.reader(fp))
    except FileNotFoundError:
        raise DataError(f"The dataset {path} does not exist.") from None
    if not rows:
        raise DataError(f"The dataset {path} is empty.")

    header = rows[0]
    n_x, n_y = _check_header(header)
    if len(rows) == 1:
        raise DataError(f"The dataset {path} has a header but no rows.")
    values = np.empty((len(rows) - 1, n_x + n_y))
    for r, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise DataError(f"Row {r + 1} has {len(row)} values, expected {len(header)}.")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise DataError(
                    f"Row {r + 1}, column {header[c]!r}: {cell!r} is not a number.", header[c]
                ) from None

    meta: Dict[str, Any] = {}
    if sidecar_path(path).exists():
        meta = read_json(sidecar_path(path), "dataset metadata")
    noise_sigma = float(meta.pop("noise_sigma", 0.0))
    try:
        return Dataset(values[:, :n_x], values[:, n_x:], noise_sigma, meta)
    except StructuralError as exc:
        raise DataError(f"The dataset {path} is invalid: {exc}") from exc


# models and states


def save_model(model: FlatModel, path: PathLike) -> Path:
    return write_json(model.to_dict(), path)


def load_model(path: PathLike) -> FlatModel:
    data = read_json(path, "model file")
    try:
        return model_from_dict(data)
    except StructuralError as exc:
        raise DataError(f"The model file {path} is invalid: {exc}") from exc


def save_reg(reg: RegState, path: PathLike) -> Path:
    return write_json(reg.to_dict(), path)


def load_reg(path: PathLike) -> RegState:
    data = read_json(path, "Bayesian state file")
    try:
        return RegState.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"The Bayesian state file {path} is invalid: {exc!r}") from exc


def save_report(report: DiscoveryReport, path: PathLike) -> Path:
    return write_json(report.to_dict(), path)


def load_report(path: PathLike) -> DiscoveryReport:
    data = read_json(path, "report")
    try:
        return DiscoveryReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"The report {path} is invalid: {exc!r}") from exc


# plot-ready tables


def _write_rows(path: PathLike, header: Sequence[str], rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf8") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_history(records: Sequence[CycleRecord], path: PathLike) -> Path:
    rows = []
    for record in records:
        data = record.to_dict()
        rows.append(
            [
                _number(data[c]) if isinstance(data[c], float) else data[c]
                for c in HISTORY_COLUMNS
            ]
        )
    return _write_rows(path, HISTORY_COLUMNS, rows)


def write_trajectory(
    traj: Trajectory, path: PathLike, names: Optional[List[str]] = None
) -> Path:
    names = names or [f"x{i + 1}" for i in range(traj.states.shape[1])]
    rows = (
        [_number(t)] + [_number(v) for v in state] for t, state in zip(traj.t, traj.states)
    )
    return _write_rows(path, ["t", *names], rows)


def write_band(band: UncertaintyBand, path: PathLike) -> Path:
    rows = (
        [i, _number(m), _number(v)] for i, (m, v) in enumerate(zip(band.mean, band.variance))
    )
    return _write_rows(path, ["index", "mean", "variance"], rows)
