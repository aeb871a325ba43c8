"""Independent reference computations used as test oracles.

Nothing here imports the code under test's solvers: the crossbar is solved
by writing out every resistor of the full netlist (sources and ground
included) and eliminating the fixed nodes with a dense solve.
"""

import numpy as np


def netlist(params, g):
    """Resistor list ``(node_u, node_v, conductance)`` of a tile.

    Node names: ("a", i, j), ("b", i, j), ("src", i), "gnd". Every parasitic
    must be strictly positive here.
    """
    m, n = params.shape
    out = []
    for i in range(m):
        out.append((("src", i), ("a", i, 0), 1.0 / params.R_driver))
        for j in range(n - 1):
            out.append((("a", i, j), ("a", i, j + 1), 1.0 / params.r_row))
        for j in range(n):
            out.append((("a", i, j), ("b", i, j), g[i, j]))
    for j in range(n):
        for i in range(m - 1):
            out.append((("b", i, j), ("b", i + 1, j), 1.0 / params.r_col))
        out.append((("b", m - 1, j), "gnd", 1.0 / params.R_sense))
    return out


def dense_solve(params, g, vin):
    """Node voltages (dict) and sense currents of the full netlist."""
    m, n = params.shape
    res = netlist(params, np.asarray(g, dtype=float))
    nodes = sorted({u for u, _, _ in res} | {v for _, v, _ in res}, key=str)
    idx = {nd: k for k, nd in enumerate(nodes)}
    full = np.zeros((len(nodes), len(nodes)))
    for u, v, c in res:
        a, b = idx[u], idx[v]
        full[a, a] += c
        full[b, b] += c
        full[a, b] -= c
        full[b, a] -= c
    fixed = {("src", i): vin[i] for i in range(m)}
    fixed["gnd"] = 0.0
    fk = [idx[k] for k in fixed]
    fv = np.array(list(fixed.values()))
    free = [k for k in range(len(nodes)) if k not in set(fk)]
    x = np.linalg.solve(full[np.ix_(free, free)], -full[np.ix_(free, fk)] @ fv)
    volt = dict(zip(fixed, fv))
    volt.update({nodes[k]: x[t] for t, k in enumerate(free)})
    i_out = np.array([volt[("b", m - 1, j)] / params.R_sense for j in range(n)])
    return volt, i_out


def naive_conv(x, w, stride=1, pad=0):
    """Direct nested-loop convolution; ``w`` has shape (out, in, k, k)."""
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - k) // stride + 1
    ow = (wd + 2 * pad - k) // stride + 1
    y = np.zeros((n, o, oh, ow))
    for b in range(n):
        for f in range(o):
            for i in range(oh):
                for j in range(ow):
                    patch = xp[b, :, i * stride:i * stride + k, j * stride:j * stride + k]
                    y[b, f, i, j] = np.sum(patch * w[f])
    return y


def finite_difference(fun, arr, eps=1e-6):
    """Central differences of scalar ``fun()`` with respect to ``arr`` (in place)."""
    grad = np.zeros_like(arr, dtype=float)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        k = it.multi_index
        old = arr[k]
        arr[k] = old + eps
        up = fun()
        arr[k] = old - eps
        down = fun()
        arr[k] = old
        grad[k] = (up - down) / (2 * eps)
    return grad
