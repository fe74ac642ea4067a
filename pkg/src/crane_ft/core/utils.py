"""Utility functions."""

import csv
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray


def signed_power(x: ArrayLike, p: float) -> NDArray[np.float64] | float:
    """Signed power |x|^p sgn(x), with the value 0 at x = 0."""
    arr = np.asarray(x, dtype=float)
    out = np.sign(arr) * np.abs(arr) ** p
    if out.ndim == 0:
        return float(out)
    return out


def format_float(value: Any) -> str:
    """Shortest round-trip text for a float; other values via str."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_csv(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    """Write a CSV file with one header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) for v in row])
    return path


def read_profile(path: Path) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Read a two-column (s, value) CSV profile, header optional."""
    s_vals: list[float] = []
    y_vals: list[float] = []
    with Path(path).open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                s, y = float(row[0]), float(row[1])
            except ValueError:
                # header line
                continue
            s_vals.append(s)
            y_vals.append(y)
    return np.asarray(s_vals), np.asarray(y_vals)
