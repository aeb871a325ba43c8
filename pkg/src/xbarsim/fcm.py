"""Fast crossbar model: exact reduction of the tile network to a port matrix.

The reduction runs once per programmed state. Column-side nodes are
eliminated first, one column at a time (each column is an independent
tridiagonal system), which leaves a block-tridiagonal system over the
row-side nodes with one dense MxM block per column. That system is then
eliminated column by column from the far end toward the input column, whose
nodes are the M ports. Every evaluation afterwards is a single
vector-matrix product.

The driver resistance is not part of the reduced matrix; it sits in series
with the DAC (see :mod:`xbarsim.converters`), so the ports are the first
row-side node of every row.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .oracle import check_conductances
from .params import CrossbarParams, save_matrix_csv

LOAD_MODES = ("exact", "row_sum")


class EliminationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class NonIdealCrossbar:
    g_non_ideal: np.ndarray
    g_load: np.ndarray
    params: CrossbarParams
    g_ideal_ref: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.g_non_ideal.shape


def _tridiag_solve(diag: np.ndarray, off: float, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric tridiagonal system with constant off-diagonal ``-off``."""
    n = diag.size
    if n == 1:
        return rhs / diag[0]
    ab = np.zeros((2, n))
    ab[0] = diag
    ab[1, :-1] = -off
    try:
        return scipy.linalg.solveh_banded(ab, rhs, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise EliminationError(f"column system not positive definite: {exc}") from None


def column_admittance(gcol: np.ndarray, r_col: float, r_sense: float):
    """Reduce one column onto its row-side nodes.

    Returns ``(Y, w)``: ``Y`` is the MxM admittance the column presents to the
    row-side nodes ``a[:, j]`` and ``w`` gives the sense current as
    ``w @ Va[:, j]``.
    """
    m = gcol.size
    d = np.diag(gcol)
    if r_col == 0:
        total = gcol.sum()
        if r_sense == 0:
            return d, gcol.copy()
        # single merged column node
        denom = total + 1.0 / r_sense
        return d - np.outer(gcol, gcol) / denom, gcol / (denom * r_sense)

    gc = 1.0 / r_col
    if r_sense == 0:
        # b[M-1] is grounded; free column nodes are 0..M-2
        y = d.copy()
        w = np.zeros(m)
        w[m - 1] = gcol[m - 1]
        if m > 1:
            k = m - 1
            diag = gcol[:k] + 2 * gc
            diag[0] -= gc
            # Vb_free = T^-1 diag(g_free) Va_free
            tinv_d = _tridiag_solve(diag, gc, np.diag(gcol[:k]))
            y[:k, :k] -= gcol[:k, None] * tinv_d
            w[:k] += gc * tinv_d[k - 1]
        return y, w

    diag = gcol + 2 * gc
    diag[0] -= gc
    diag[m - 1] += 1.0 / r_sense - gc
    tinv_d = _tridiag_solve(diag, gc, d)
    y = d - gcol[:, None] * tinv_d
    w = tinv_d[m - 1] / r_sense
    return y, w


def reduce_ports(columns, r_row: float):
    """Eliminate row-side nodes beyond the input column.

    ``columns`` is the list of ``(Y_j, w_j)`` pairs. Returns the port matrix
    (sense currents per unit port voltage, MxN) and the MxM port admittance.
    """
    n = len(columns)
    m = columns[0][0].shape[0]
    eye = np.eye(m)
    if r_row == 0 or n == 1:
        # every row-side node of a row sits at the port voltage
        g_ni = np.stack([w for _, w in columns], axis=1)
        y_port = sum(y for y, _ in columns)
        return g_ni, y_port

    gr = 1.0 / r_row
    # Schur complements S_j of columns j..N-1, built from the far end
    s_inv = [None] * n
    s = columns[n - 1][0] + gr * eye
    for j in range(n - 1, 0, -1):
        try:
            cf = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise EliminationError(f"row block {j} not positive definite: {exc}") from None
        s_inv[j] = scipy.linalg.cho_solve(cf, eye, check_finite=False)
        if j > 1:
            s = columns[j - 1][0] + 2 * gr * eye - gr * gr * s_inv[j]
    y_port = columns[0][0] + gr * eye - gr * gr * s_inv[1]

    # port-to-node transfer P_j (Va[:, j] = P_j @ vin), then G[:, j] = P_j^T w_j
    g_ni = np.empty((m, n))
    p = eye
    g_ni[:, 0] = columns[0][1]
    for j in range(1, n):
        p = gr * (s_inv[j] @ p)
        g_ni[:, j] = p.T @ columns[j][1]
    return g_ni, y_port


def port_model(g, params: CrossbarParams, *, analysis: bool = False):
    """Exact port description of a tile: ``(g_non_ideal, y_port)``.

    ``y_port`` is the full MxM admittance seen at the row inputs; its diagonal
    is the driving-point conductance of each row.
    """
    g = check_conductances(params, g, analysis=analysis)
    if params.r_row == params.r_col == params.R_sense == 0:
        return g.copy(), np.diag(g.sum(axis=1))
    columns = [column_admittance(g[:, j], params.r_col, params.R_sense)
               for j in range(params.cols)]
    return reduce_ports(columns, params.r_row)


def build_nonideal(g, params: CrossbarParams, *, load_mode: str = "exact",
                   analysis: bool = False) -> NonIdealCrossbar:
    """Reduce a programmed tile to its non-ideal conductance matrix.

    ``load_mode="exact"`` records the true driving-point conductance of each
    port (other ports at 0 V); ``"row_sum"`` stores the row sums of the
    reduced matrix instead.
    """
    if load_mode not in LOAD_MODES:
        raise ValueError(f"load_mode must be one of {LOAD_MODES}")
    g = check_conductances(params, g, analysis=analysis)
    g_ni, y_port = port_model(g, params, analysis=analysis)
    if not np.all(np.isfinite(g_ni)) or not np.all(np.isfinite(y_port)):
        raise EliminationError("non-finite entries after elimination")
    g_load = np.diag(y_port).copy() if load_mode == "exact" else g_ni.sum(axis=1)
    g_ni.setflags(write=False)
    g_load.setflags(write=False)
    ref = g.copy()
    ref.setflags(write=False)
    return NonIdealCrossbar(g_non_ideal=g_ni, g_load=g_load, params=params, g_ideal_ref=ref)


def row_load(xbar: NonIdealCrossbar, load_mode: str) -> np.ndarray:
    """Per-row DAC load: stored driving-point value or row sums of the matrix."""
    if load_mode == "exact":
        return xbar.g_load
    if load_mode == "row_sum":
        return xbar.g_non_ideal.sum(axis=1)
    raise ValueError(f"load_mode must be one of {LOAD_MODES}")


def evaluate(xbar: NonIdealCrossbar, vin) -> np.ndarray:
    """Sense currents for port voltages ``vin`` (shape (M,) or (batch, M))."""
    vin = np.asarray(vin)
    if vin.shape[-1] != xbar.g_non_ideal.shape[0]:
        raise ValueError(f"vin has {vin.shape[-1]} rows, crossbar has {xbar.g_non_ideal.shape[0]}")
    return vin @ xbar.g_non_ideal


def evaluate_ideal(g, vin) -> np.ndarray:
    g = np.asarray(g)
    vin = np.asarray(vin)
    if vin.shape[-1] != g.shape[0]:
        raise ValueError(f"vin has {vin.shape[-1]} rows, matrix has {g.shape[0]}")
    return vin @ g


# --- serialization -------------------------------------------------------

MAGIC = b"XBFCM\0\0\0"
VERSION = 1
_PARAM_ORDER = ("rows", "cols", "r_row", "r_col", "R_sense", "R_driver",
                "G_min", "G_max", "device_bits", "v_read")
_HEADER = struct.Struct("<8sIII")
_PARAMS = struct.Struct("<ii6dId")


def to_bytes(xbar: NonIdealCrossbar) -> bytes:
    """Binary container: magic, version, M, N, params, then row-major float64
    blocks ``g_non_ideal`` (MxN), ``g_load`` (M), ``g_ideal_ref`` (MxN)."""
    p = xbar.params
    m, n = p.shape
    head = _HEADER.pack(MAGIC, VERSION, m, n)
    pvals = _PARAMS.pack(*(getattr(p, k) for k in _PARAM_ORDER))
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                    for a in (xbar.g_non_ideal, xbar.g_load, xbar.g_ideal_ref))
    return head + pvals + body


def from_bytes(data: bytes) -> NonIdealCrossbar:
    if len(data) < _HEADER.size + _PARAMS.size:
        raise ValueError("truncated crossbar container")
    magic, version, m, n = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError("not a crossbar container (bad magic)")
    if version != VERSION:
        raise ValueError(f"unsupported crossbar container version {version}")
    pvals = _PARAMS.unpack_from(data, _HEADER.size)
    params = CrossbarParams(**dict(zip(_PARAM_ORDER, pvals)))
    if params.shape != (m, n):
        raise ValueError("header dimensions disagree with stored parameters")
    off = _HEADER.size + _PARAMS.size
    need = 8 * (2 * m * n + m)
    if len(data) - off != need:
        raise ValueError(f"crossbar container body is {len(data) - off} bytes, expected {need}")
    arr = np.frombuffer(data, dtype="<f8", offset=off).astype(np.float64)
    g_ni = arr[: m * n].reshape(m, n)
    g_load = arr[m * n: m * n + m]
    ref = arr[m * n + m:].reshape(m, n)
    for a in (g_ni, g_load, ref):
        a.setflags(write=False)
    return NonIdealCrossbar(g_non_ideal=g_ni, g_load=g_load, params=params, g_ideal_ref=ref)


def save(xbar: NonIdealCrossbar, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(xbar))


def load(path: str | Path) -> NonIdealCrossbar:
    return from_bytes(Path(path).read_bytes())


def save_csv(xbar: NonIdealCrossbar, path: str | Path) -> None:
    """Inspection dump of ``g_non_ideal``; ``g_load`` goes to a sibling file."""
    path = Path(path)
    save_matrix_csv(xbar.g_non_ideal, path)
    save_matrix_csv(xbar.g_load[None, :], path.with_name(path.stem + "_load.csv"))
