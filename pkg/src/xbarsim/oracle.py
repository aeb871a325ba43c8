"""Exact nodal model of a resistive crossbar with wire, sense and driver resistance.

Network for an MxN tile (0-based indices here)::

    src_i --R_driver-- a[i,0] --r_row-- a[i,1] ... a[i,N-1]
    a[i,j] --1/G[i,j]-- b[i,j]
    b[0,j] --r_col-- b[1,j] ... b[M-1,j] --R_sense-- ground

Node numbering is fixed: row-side nodes ``a[i,j] -> i*N + j`` (row-major),
then column-side nodes ``b[i,j] -> M*N + j*M + i`` (column-major).

Zero-resistance wire segments are merged into one node before stamping. A
zero driver ties the row input to its source; a zero sense resistor grounds
the column bottom, and the output current is then the KCL balance at that
grounded node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .params import CrossbarParams

# below this many free nodes the dense Cholesky path is used
DENSE_LIMIT = 32 * 32

FREE, SOURCE, GROUND = 0, 1, 2


class SingularSystemError(np.linalg.LinAlgError):
    def __init__(self, msg: str, cond_estimate: float = float("inf")):
        super().__init__(f"{msg} (condition estimate {cond_estimate:.3e})")
        self.cond_estimate = cond_estimate


def check_conductances(params: CrossbarParams, g, analysis: bool = False) -> np.ndarray:
    """Validate a conductance matrix against a tile.

    Physical states must lie in [G_min, G_max]; ``analysis=True`` only
    requires nonnegative finite entries.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != params.shape:
        raise ValueError(f"conductance matrix has shape {g.shape}, tile is {params.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("conductance matrix contains non-finite entries")
    if analysis:
        if np.any(g < 0):
            raise ValueError("negative conductance")
    else:
        tol = 1e-12 * params.G_max
        if np.any(g < params.G_min - tol) or np.any(g > params.G_max + tol):
            raise ValueError("conductance outside [G_min, G_max]; pass analysis=True to allow")
    return g


@dataclass(frozen=True, eq=False)
class NodalSystem:
    """KCL system ``laplacian @ x = source_coupling @ vin`` over the free nodes."""

    params: CrossbarParams
    g: np.ndarray
    r_driver: np.ndarray
    laplacian: sp.csc_matrix
    source_coupling: sp.csc_matrix
    # per physical node: kind (FREE/SOURCE/GROUND) and free index or source row
    node_kind: np.ndarray
    node_index: np.ndarray
    # two-terminal elements between physical nodes, used for current readout
    edges: np.ndarray
    edge_g: np.ndarray
    _factor: list = field(default_factory=list, repr=False)

    @property
    def n_free(self) -> int:
        return self.laplacian.shape[0]

    def a_node(self, i, j):
        return np.asarray(i) * self.params.cols + np.asarray(j)

    def b_node(self, i, j):
        m, n = self.params.shape
        return m * n + np.asarray(j) * m + np.asarray(i)

    def rhs(self, vin) -> np.ndarray:
        return self.source_coupling @ np.asarray(vin, dtype=np.float64)

    def factorize(self):
        """Factorization of the Laplacian, cached on the (immutable) system."""
        if not self._factor:
            self._factor.append(_Factor(self.laplacian))
        return self._factor[0]


@dataclass(frozen=True)
class SolveResult:
    node_voltages: np.ndarray
    i_out: np.ndarray
    i_in: np.ndarray
    residual: float


class _Factor:
    def __init__(self, lap: sp.csc_matrix):
        self.n = lap.shape[0]
        self.lap = lap
        if self.n == 0:
            self.kind = "empty"
            return
        try:
            if self.n <= DENSE_LIMIT:
                self.kind = "dense"
                self.cho = scipy.linalg.cho_factor(lap.toarray(), lower=True, check_finite=False)
            else:
                self.kind = "sparse"
                self.lu = spla.splu(lap.tocsc(), permc_spec="MMD_AT_PLUS_A")
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            raise SingularSystemError(f"nodal Laplacian is singular: {exc}",
                                      _cond_estimate(lap)) from None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.kind == "empty":
            return np.zeros((0,) + rhs.shape[1:])
        if self.kind == "dense":
            return scipy.linalg.cho_solve(self.cho, rhs, check_finite=False)
        return self.lu.solve(np.ascontiguousarray(rhs))

    def cond_estimate(self) -> float:
        if self.kind == "empty":
            return 1.0
        if self.kind == "dense":
            return float(np.linalg.cond(self.lap.toarray(), 1))
        inv = spla.LinearOperator(self.lap.shape, matvec=self.lu.solve,
                                  rmatvec=lambda x: self.lu.solve(x, trans="T"))
        return float(spla.onenormest(self.lap) * spla.onenormest(inv))


def _cond_estimate(lap) -> float:
    if lap.shape[0] <= DENSE_LIMIT:
        return float(np.linalg.cond(lap.toarray(), 1))
    return float("inf")


def _driver_vector(params: CrossbarParams, r_driver) -> np.ndarray:
    m = params.rows
    if r_driver is None:
        return np.full(m, float(params.R_driver))
    r = np.broadcast_to(np.asarray(r_driver, dtype=np.float64), (m,)).copy()
    if np.any(~np.isfinite(r)) or np.any(r < 0):
        raise ValueError("driver resistances must be finite and >= 0")
    return r


def assemble(params: CrossbarParams, g, *, r_driver=None, analysis: bool = False) -> NodalSystem:
    """Stamp the crossbar network into a sparse SPD nodal system.

    ``r_driver`` optionally overrides ``params.R_driver`` per row (used to
    place a DAC's Thevenin resistance in series with each row).
    """
    g = check_conductances(params, g, analysis=analysis)
    m, n = params.shape
    rd = _driver_vector(params, r_driver)
    n_nodes = 2 * m * n
    ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    a = ii * n + jj
    b = m * n + jj * m + ii

    # merge zero-resistance wires: representative node per physical node
    rep = np.arange(n_nodes)
    if params.r_row == 0:
        rep[a] = a[:, :1]
    if params.r_col == 0:
        rep[b] = b[:1, :]

    kind = np.full(n_nodes, FREE, dtype=np.int8)
    src_row = np.full(n_nodes, -1)
    tied = rd == 0
    for i in np.flatnonzero(tied):
        members = rep == rep[a[i, 0]]
        kind[members] = SOURCE
        src_row[members] = i
    if params.R_sense == 0:
        for j in range(n):
            kind[rep == rep[b[m - 1, j]]] = GROUND

    # free classes numbered in order of their representative's node id
    free_reps = np.unique(rep[kind == FREE])
    cls_of_rep = np.full(n_nodes, -1)
    cls_of_rep[free_reps] = np.arange(free_reps.size)
    node_index = np.where(kind == FREE, cls_of_rep[rep], src_row)
    node_index[kind == GROUND] = -1

    # two-terminal elements between physical nodes
    e_u, e_v, e_g = [], [], []
    if params.r_row > 0 and n > 1:
        e_u.append(a[:, :-1].ravel()); e_v.append(a[:, 1:].ravel())
        e_g.append(np.full(m * (n - 1), 1.0 / params.r_row))
    if params.r_col > 0 and m > 1:
        e_u.append(b[:-1, :].T.ravel()); e_v.append(b[1:, :].T.ravel())
        e_g.append(np.full((m - 1) * n, 1.0 / params.r_col))
    e_u.append(a.ravel()); e_v.append(b.ravel()); e_g.append(g.ravel())
    edges = np.stack([np.concatenate(e_u), np.concatenate(e_v)], axis=1)
    edge_g = np.concatenate(e_g)
    keep = (edge_g != 0) & (rep[edges[:, 0]] != rep[edges[:, 1]])
    edges, edge_g = edges[keep], edge_g[keep]

    nf = free_reps.size
    rows, cols, vals = [], [], []
    src_r, src_c, src_v = [], [], []
    ku, kv = kind[edges[:, 0]], kind[edges[:, 1]]
    xu, xv = node_index[edges[:, 0]], node_index[edges[:, 1]]
    # free-free
    ff = (ku == FREE) & (kv == FREE)
    gf = edge_g[ff]
    rows += [xu[ff], xv[ff], xu[ff], xv[ff]]
    cols += [xu[ff], xv[ff], xv[ff], xu[ff]]
    vals += [gf, gf, -gf, -gf]
    # free to fixed node (source or ground); both orientations
    for x_f, k_f, x_o, k_o in ((xu, ku, xv, kv), (xv, kv, xu, ku)):
        sel = (k_f == FREE) & (k_o != FREE)
        rows.append(x_f[sel]); cols.append(x_f[sel]); vals.append(edge_g[sel])
        to_src = sel & (k_o == SOURCE)
        src_r.append(x_f[to_src]); src_c.append(x_o[to_src]); src_v.append(edge_g[to_src])
    # driver branches (source -> a[i,0]) for rows with a series driver
    for i in np.flatnonzero(~tied):
        node = a[i, 0]
        if kind[node] == FREE:
            x = node_index[node]
            rows.append([x]); cols.append([x]); vals.append([1.0 / rd[i]])
            src_r.append([x]); src_c.append([i]); src_v.append([1.0 / rd[i]])
    # sense branches (b[M-1,j] -> ground)
    if params.R_sense > 0:
        x = node_index[b[m - 1, :]]
        rows.append(x); cols.append(x); vals.append(np.full(n, 1.0 / params.R_sense))

    lap = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(nf, nf)).tocsc()
    lap.sum_duplicates()
    coupling = sp.coo_matrix((np.concatenate(src_v) if src_v else [],
                              (np.concatenate(src_r).astype(int) if src_r else [],
                               np.concatenate(src_c).astype(int) if src_c else [])),
                             shape=(nf, m)).tocsc()
    return NodalSystem(params=params, g=g, r_driver=rd, laplacian=lap,
                       source_coupling=coupling, node_kind=kind,
                       node_index=node_index, edges=edges, edge_g=edge_g)


def _node_voltages(sys: NodalSystem, x: np.ndarray, vin: np.ndarray) -> np.ndarray:
    """Expand free-node solution(s) to all 2*M*N physical nodes."""
    shape = (sys.node_kind.size,) + x.shape[1:]
    v = np.zeros(shape)
    free = sys.node_kind == FREE
    v[free] = x[sys.node_index[free]]
    src = sys.node_kind == SOURCE
    v[src] = vin[sys.node_index[src]]
    return v


def _port_currents(sys: NodalSystem, v: np.ndarray, vin: np.ndarray):
    """Sense and source currents from physical node voltages (columns = drives)."""
    p = sys.params
    m, n = p.shape
    b_last = sys.b_node(m - 1, np.arange(n))
    # net current flowing into each physical node through the internal elements
    u, w = sys.edges[:, 0], sys.edges[:, 1]
    cur = sys.edge_g.reshape((-1,) + (1,) * (v.ndim - 1)) * (v[u] - v[w])
    inflow = np.zeros_like(v)
    np.add.at(inflow, w, cur)
    np.add.at(inflow, u, -cur)

    if p.R_sense > 0:
        i_out = v[b_last] / p.R_sense
    else:
        i_out = np.zeros((n,) + v.shape[1:])
        col_nodes = sys.b_node(np.arange(m)[:, None], np.arange(n)[None, :])
        for j in range(n):
            members = col_nodes[:, j] if p.r_col == 0 else [b_last[j]]
            i_out[j] = inflow[members].sum(axis=0)

    i_in = np.zeros((m,) + v.shape[1:])
    for i in range(m):
        first = sys.a_node(i, 0)
        if sys.r_driver[i] > 0:
            i_in[i] = (vin[i] - v[first]) / sys.r_driver[i]
        else:
            members = sys.a_node(i, np.arange(n)) if p.r_row == 0 else [first]
            i_in[i] = -inflow[members].sum(axis=0)
    return i_out, i_in


def _residual(lap, x, rhs) -> float:
    scale = np.max(np.abs(rhs)) if rhs.size else 0.0
    if scale == 0:
        return float(np.max(np.abs(lap @ x))) if x.size else 0.0
    return float(np.max(np.abs(lap @ x - rhs)) / scale)


def solve(sys: NodalSystem, vin, *, tol: float = 1e-10, reuse_factor: bool = False) -> SolveResult:
    """Solve the network for source voltages ``vin`` (length M).

    Each call factorizes the system afresh, like an independent circuit
    simulation, unless ``reuse_factor`` is set.
    """
    vin = np.asarray(vin, dtype=np.float64)
    if vin.shape != (sys.params.rows,):
        raise ValueError(f"vin must have shape ({sys.params.rows},), got {vin.shape}")
    if not np.all(np.isfinite(vin)):
        raise ValueError("vin contains non-finite values")
    fac = sys.factorize() if reuse_factor else _Factor(sys.laplacian)
    rhs = sys.rhs(vin)
    x = fac.solve(rhs)
    res = _residual(sys.laplacian, x, rhs)
    if not np.isfinite(res) or res > tol:
        raise SingularSystemError(f"solve residual {res:.3e} exceeds {tol:.1e}",
                                  fac.cond_estimate())
    v = _node_voltages(sys, x, vin)
    i_out, i_in = _port_currents(sys, v, vin)
    return SolveResult(node_voltages=v, i_out=i_out, i_in=i_in, residual=res)


def branch_currents(sys: NodalSystem, result: SolveResult) -> np.ndarray:
    """Device currents ``G[i,j] * (Va[i,j] - Vb[i,j])``; negative means reversed flow."""
    m, n = sys.params.shape
    v = result.node_voltages
    va = v[: m * n].reshape(m, n)
    vb = v[m * n:].reshape(n, m).T
    return sys.g * (va - vb)


def port_conductance(params: CrossbarParams, g, *, r_driver=None,
                     analysis: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Effective conductance matrix and per-row driving-point conductance.

    Row i of ``G_eff`` is the sense-current vector for a unit source on row i
    with every other source at 0 V (held through its driver). ``G_load[i]``
    is the source current of row i under that same drive.
    """
    sys = assemble(params, g, r_driver=r_driver, analysis=analysis)
    m = params.rows
    fac = sys.factorize()
    eye = np.eye(m)
    rhs = sys.source_coupling @ eye
    x = fac.solve(np.asarray(rhs))
    res = _residual(sys.laplacian, x, rhs)
    if not np.isfinite(res) or res > 1e-10:
        raise SingularSystemError(f"port solve residual {res:.3e}", fac.cond_estimate())
    v = _node_voltages(sys, x, eye)
    i_out, i_in = _port_currents(sys, v, eye)
    return i_out.T.copy(), np.diag(i_in).copy()
