"""Crossbar tile parameters and the flat ``key=value`` / CSV text formats."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass(frozen=True)
class CrossbarParams:
    """Physical description of one MxN crossbar tile.

    Resistances are in ohms, conductances in siemens. ``r_row`` and ``r_col``
    are per wire segment between adjacent cells. The defaults are stand-ins
    for an unpublished technology table, not measured values.
    """

    rows: int = 64
    cols: int = 64
    r_row: float = 2.5
    r_col: float = 2.5
    R_sense: float = 20.0
    R_driver: float = 10.0
    G_min: float = 5e-6
    G_max: float = 50e-6
    device_bits: int = 6
    v_read: float = 0.2

    def __post_init__(self):
        if int(self.rows) != self.rows or self.rows < 1:
            raise ConfigError(f"rows must be a positive integer, got {self.rows}")
        if int(self.cols) != self.cols or self.cols < 1:
            raise ConfigError(f"cols must be a positive integer, got {self.cols}")
        for name in ("r_row", "r_col", "R_sense", "R_driver"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")
        if not (0 < self.G_min < self.G_max) or not math.isfinite(self.G_max):
            raise ConfigError(f"need 0 < G_min < G_max, got {self.G_min}, {self.G_max}")
        if int(self.device_bits) != self.device_bits or self.device_bits < 1:
            raise ConfigError(f"device_bits must be an integer >= 1, got {self.device_bits}")
        if not math.isfinite(self.v_read) or self.v_read <= 0:
            raise ConfigError(f"v_read must be > 0, got {self.v_read}")

    @property
    def levels(self) -> int:
        return 2 ** int(self.device_bits)

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.rows), int(self.cols))

    def replace(self, **changes) -> "CrossbarParams":
        return dataclasses.replace(self, **changes)

    def ideal(self) -> "CrossbarParams":
        """Same tile with every parasitic resistance set to zero."""
        return self.replace(r_row=0.0, r_col=0.0, R_sense=0.0, R_driver=0.0)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _coerce(value: str, kind: type) -> Any:
    if kind is bool:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    return kind(value)


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def format_kv(values: Mapping[str, Any]) -> str:
    lines = []
    for k, v in values.items():
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def dataclass_from_kv(cls, text_or_map, **overrides):
    """Build a dataclass from ``key=value`` text, rejecting unknown keys."""
    raw = parse_kv(text_or_map) if isinstance(text_or_map, str) else dict(text_or_map)
    known = {f.name: f for f in fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} for {cls.__name__}; "
                              f"expected one of {sorted(known)}")
        default = known[key].default
        kind = type(default) if default is not dataclasses.MISSING and default is not None else float
        try:
            kwargs[key] = _coerce(value, kind) if isinstance(value, str) else value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None
    kwargs.update(overrides)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_params(path: str | Path, **overrides) -> CrossbarParams:
    return dataclass_from_kv(CrossbarParams, Path(path).read_text(), **overrides)


def save_params(params: CrossbarParams, path: str | Path) -> None:
    Path(path).write_text(format_kv(params.to_dict()))


def save_matrix_csv(matrix: np.ndarray, path: str | Path) -> None:
    """Row-major CSV, one matrix row per line, full float64 precision."""
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", newline="\n") as fh:
        for row in m:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def load_matrix_csv(path: str | Path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(x) for x in line.split(",")])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ConfigError(f"{path}: empty matrix")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)
