"""Delimiter-separated numeric text files and output formatting."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import ConfigError

_HEADER = re.compile(r"^\s*#\s*(\d+)\s+(\d+)\s*$")


def fmt(x: float) -> str:
    """12 significant digits, no trailing zeros."""
    return f"{float(x):.12g}"


def fmt_exact(x: float) -> str:
    """Shortest repr that round-trips."""
    return repr(float(x))


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in re.split(r"[,\s]+", text.strip()) if t], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"cannot parse numeric list {text!r}: {exc}") from None


def load_matrix(path) -> np.ndarray:
    """Row-major numeric text; comma or whitespace separated; optional ``# rows cols`` header."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    shape = None
    rows = []
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            hm = _HEADER.match(s)
            if hm and shape is None and not rows:
                shape = (int(hm.group(1)), int(hm.group(2)))
            continue
        try:
            rows.append([float(t) for t in re.split(r"[,\s]+", s) if t])
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: non-numeric entry in {s!r}") from None
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"{path}: ragged rows (widths {sorted(widths)})")
    M = np.array(rows, dtype=float)
    if shape is not None and M.shape != shape:
        raise ConfigError(f"{path}: header declares {shape[0]}x{shape[1]} but data is {M.shape[0]}x{M.shape[1]}")
    return M


def load_vector(path) -> np.ndarray:
    M = load_matrix(path)
    if min(M.shape) != 1:
        raise ConfigError(f"{path}: expected a vector, got a {M.shape[0]}x{M.shape[1]} matrix")
    return M.reshape(-1)


def save_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"# {M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(",".join(fmt_exact(v) for v in row) + "\n")
