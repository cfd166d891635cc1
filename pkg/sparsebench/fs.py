from __future__ import annotations

import os
from os import PathLike
from typing import Any

import numpy as np
import toml
import yaml
from numpy.typing import NDArray

from sparsebench.errors import DimensionError, ExportError, ValidationError

MATRIX_HEADER = "rows,cols,field"
MATRIX_FIELDS = ("real", "complex")


def yaml_load(
    path: str | PathLike, encoding: str = "utf-8"
) -> dict[Any, Any] | list[dict[Any, Any]]:
    """
    Load a YAML file from the given path.

    Args:
        path (str | PathLike): The path of the YAML file to load.
        encoding (str, optional): The encoding of the file. Defaults to "utf-8".

    Returns:
        dict | list[dict]: The YAML data loaded from the file.
    """
    with open(path, "r", encoding=encoding) as f:
        return yaml.safe_load(f)


def toml_load(path: str | PathLike, encoding: str = "utf-8"):
    with open(path, "r", encoding=encoding) as f:
        return toml.load(f)


def config_load(path: str | PathLike) -> dict[str, Any]:
    """Load a YAML (``.yaml``/``.yml``) or TOML (``.toml``) mapping, chosen by file extension."""
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext in (".yaml", ".yml"):
        data = yaml_load(path)
    elif ext == ".toml":
        data = toml_load(path)
    else:
        raise ValidationError(f"Unsupported config format '{ext}', use .yaml, .yml or .toml")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValidationError(f"Config file '{path}' must contain a mapping")
    return data


def mkdir(path: str | PathLike, mode: int = 511, exist_ok: bool = True) -> None:
    """
    Creates a directory.

    Args:
        path (str | PathLike): The path of the directory to create.
        exist_ok (bool, optional): Whether to raise an exception if the directory already exists. Defaults to True.
    """
    os.makedirs(os.fspath(path), exist_ok=exist_ok, mode=mode)


def ensure_parent(path: str | PathLike) -> None:
    parent = os.path.dirname(os.path.abspath(os.fspath(path)))
    mkdir(parent)


def write_text(path: str | PathLike, text: str, encoding: str = "utf-8") -> None:
    """Write ``text`` to ``path``, creating parent directories. I/O failures become `ExportError`."""
    try:
        ensure_parent(path)
        with open(os.fspath(path), "w", encoding=encoding, newline="") as f:
            f.write(text)
    except OSError as e:
        raise ExportError(os.fspath(path), e.strerror or str(e)) from e


def format_complex(value: complex) -> str:
    """``a+bi`` with both parts in ``repr`` precision."""
    re, im = float(value.real), float(value.imag)
    sign = "" if str(im).startswith("-") else "+"
    return f"{re!r}{sign}{im!r}i"


def parse_complex(text: str) -> complex:
    return complex(text.strip().replace(" ", "").replace("i", "j"))


def matrix_dump(M: NDArray, path: str | PathLike) -> None:
    """
    Write a dense matrix as CSV with the header line ``rows,cols,field`` followed by
    ``<rows>,<cols>,<real|complex>`` and one line per row. Complex entries are written ``a+bi``.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise DimensionError(M.shape, "a 2-D matrix")
    is_complex = np.iscomplexobj(M)
    fmt = format_complex if is_complex else (lambda v: repr(float(v)))
    lines = [MATRIX_HEADER, f"{M.shape[0]},{M.shape[1]},{'complex' if is_complex else 'real'}"]
    lines.extend(",".join(fmt(v) for v in row) for row in M)
    write_text(path, "\n".join(lines) + "\n")


def matrix_load(path: str | PathLike) -> NDArray:
    """
    Read a matrix written by `matrix_dump`.

    Raises:
        ValidationError: on a malformed header or field.
        DimensionError: if the entry count does not match the declared shape.
    """
    with open(os.fspath(path), "r", encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]
    if len(lines) < 2 or lines[0].replace(" ", "") != MATRIX_HEADER:
        raise ValidationError(f"'{path}' does not start with the header '{MATRIX_HEADER}'")
    try:
        rows_s, cols_s, field = (part.strip() for part in lines[1].split(","))
        rows, cols = int(rows_s), int(cols_s)
    except ValueError as e:
        raise ValidationError(f"Malformed shape line in '{path}': {lines[1]!r}") from e
    if field not in MATRIX_FIELDS:
        raise ValidationError(f"Field must be one of {MATRIX_FIELDS}, got '{field}'")

    parse = parse_complex if field == "complex" else float
    body = [[parse(v) for v in line.split(",")] for line in lines[2:]]
    if len(body) != rows or any(len(row) != cols for row in body):
        raise DimensionError((len(body), len(body[0]) if body else 0), f"({rows}, {cols})")
    M = np.array(body, dtype=complex if field == "complex" else float).reshape(rows, cols)
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"'{path}' contains non-finite entries")
    return M


__all__ = [
    "yaml_load",
    "toml_load",
    "config_load",
    "mkdir",
    "ensure_parent",
    "write_text",
    "format_complex",
    "parse_complex",
    "matrix_dump",
    "matrix_load",
]
