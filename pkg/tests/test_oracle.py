"""Nodal-analysis oracle: assembly, solves, branch currents, port conductance."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reference import dense_solve
from xbarsim import oracle
from xbarsim.params import CrossbarParams


def random_g(params, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(params.G_min, params.G_max, params.shape)


class TestAssemble:
    def test_fig3b_crossbar_has_twelve_nodes(self):
        p = CrossbarParams(rows=3, cols=2)
        sys = oracle.assemble(p, np.full((3, 2), 1 / 20e3))
        assert sys.n_free == 12
        assert sys.laplacian.shape == (12, 12)

    def test_laplacian_is_exactly_symmetric(self):
        p = CrossbarParams(rows=7, cols=5)
        lap = oracle.assemble(p, random_g(p, 1)).laplacian.toarray()
        np.testing.assert_array_equal(lap, lap.T)
        assert np.all(np.linalg.eigvalsh(lap) > 0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            oracle.assemble(CrossbarParams(rows=3, cols=2), np.full((2, 3), 1e-5))

    def test_out_of_range_conductance_needs_analysis_mode(self):
        p = CrossbarParams(rows=2, cols=2)
        g = np.full((2, 2), 1e-3)
        with pytest.raises(ValueError, match="G_min"):
            oracle.assemble(p, g)
        oracle.assemble(p, g, analysis=True)

    def test_nonfinite_conductance(self):
        p = CrossbarParams(rows=2, cols=2)
        g = np.full((2, 2), 1e-5)
        g[0, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            oracle.assemble(p, g)

    def test_merged_wires_shrink_the_system(self):
        p = CrossbarParams(rows=4, cols=3, r_row=0.0, r_col=0.0)
        sys = oracle.assemble(p, random_g(p, 0))
        # one row node per row, one column node per column
        assert sys.n_free == 4 + 3


class TestSolve:
    def test_matches_independent_dense_netlist(self):
        p = CrossbarParams(rows=6, cols=5, r_row=3.0, r_col=4.0, R_sense=50.0, R_driver=30.0)
        g = random_g(p, 2)
        vin = np.random.default_rng(3).uniform(0, 0.2, 6)
        res = oracle.solve(oracle.assemble(p, g), vin)
        volt, i_ref = dense_solve(p, g, vin)
        np.testing.assert_allclose(res.i_out, i_ref, rtol=1e-10)
        sys = oracle.assemble(p, g)
        assert res.node_voltages[sys.a_node(2, 3)] == pytest.approx(volt[("a", 2, 3)], rel=1e-10)
        assert res.node_voltages[sys.b_node(4, 1)] == pytest.approx(volt[("b", 4, 1)], rel=1e-10)

    def test_zero_input_gives_zero(self):
        p = CrossbarParams(rows=4, cols=4)
        res = oracle.solve(oracle.assemble(p, random_g(p, 0)), np.zeros(4))
        assert np.all(res.node_voltages == 0)
        assert np.all(res.i_out == 0)

    def test_ideal_limit_reproduces_vmm(self):
        p = CrossbarParams(rows=5, cols=7).ideal()
        g = random_g(p, 4)
        vin = np.linspace(0.01, 0.2, 5)
        res = oracle.solve(oracle.assemble(p, g), vin)
        np.testing.assert_allclose(res.i_out, vin @ g, rtol=1e-12)

    def test_single_divider(self):
        p = CrossbarParams(rows=1, cols=1, r_row=0.0, r_col=0.0, R_driver=0.0, R_sense=1e3)
        g = np.array([[40e-6]])
        res = oracle.solve(oracle.assemble(p, g), [0.2])
        assert res.i_out[0] == pytest.approx(0.2 * 40e-6 / (1 + 40e-6 * 1e3), rel=1e-12)

    def test_conservation(self):
        p = CrossbarParams(rows=16, cols=16)
        res = oracle.solve(oracle.assemble(p, random_g(p, 5)),
                           np.random.default_rng(6).uniform(0, 0.2, 16))
        assert res.i_in.sum() == pytest.approx(res.i_out.sum(), rel=1e-9)

    def test_ideal_limit_convergence(self):
        base = CrossbarParams(rows=8, cols=8)
        tiny = base.replace(r_row=1e-6, r_col=1e-6, R_sense=1e-6, R_driver=1e-6)
        g = random_g(base, 7)
        vin = np.random.default_rng(8).uniform(0, 0.2, 8)
        res = oracle.solve(oracle.assemble(tiny, g), vin)
        np.testing.assert_allclose(res.i_out, vin @ g, rtol=1e-4)

    @pytest.mark.parametrize("zeros", [
        {"r_row": 0.0}, {"r_col": 0.0}, {"R_sense": 0.0}, {"R_driver": 0.0},
        {"r_col": 0.0, "R_sense": 0.0}, {"r_row": 0.0, "R_driver": 0.0},
    ])
    def test_zero_resistances_are_the_limit_of_small_ones(self, zeros):
        p = CrossbarParams(rows=5, cols=4, r_row=3.0, r_col=3.0, R_sense=40.0, R_driver=20.0)
        near = p.replace(**{k: 1e-4 for k in zeros})
        exact = p.replace(**zeros)
        g = random_g(p, 9)
        vin = np.random.default_rng(10).uniform(0, 0.2, 5)
        a = oracle.solve(oracle.assemble(exact, g), vin)
        b = oracle.solve(oracle.assemble(near, g), vin)
        np.testing.assert_allclose(a.i_out, b.i_out, rtol=1e-6)
        np.testing.assert_allclose(a.i_in, b.i_in, rtol=1e-6)
        assert a.i_in.sum() == pytest.approx(a.i_out.sum(), rel=1e-9)

    def test_second_factorization_agrees(self):
        p = CrossbarParams()
        g = random_g(p, 11)
        vin = np.random.default_rng(12).uniform(0, 0.2, 64)
        sys = oracle.assemble(p, g)
        res = oracle.solve(sys, vin)
        dense = np.linalg.solve(sys.laplacian.toarray(), sys.rhs(vin))
        m, n = p.shape
        vb_last = dense[[sys.node_index[sys.b_node(m - 1, j)] for j in range(n)]]
        np.testing.assert_allclose(res.i_out, vb_last / p.R_sense, rtol=1e-10)

    def test_bad_vin(self):
        p = CrossbarParams(rows=3, cols=2)
        sys = oracle.assemble(p, random_g(p, 0))
        with pytest.raises(ValueError):
            oracle.solve(sys, [0.1, 0.2])
        with pytest.raises(ValueError):
            oracle.solve(sys, [0.1, np.inf, 0.0])


class TestBranchCurrents:
    def test_sneak_current_fixture(self):
        # all devices 20 kOhm, rows at 0.2 / 0.01 / 0.2 V; at 1 kOhm sense and
        # driver resistance the (2, 2) device conducts backwards
        p = CrossbarParams(rows=3, cols=2, r_row=2.5, r_col=2.5, R_sense=1e3, R_driver=1e3)
        sys = oracle.assemble(p, np.full((3, 2), 1 / 20e3))
        cur = oracle.branch_currents(sys, oracle.solve(sys, [0.2, 0.01, 0.2]))
        assert cur[1, 1] == pytest.approx(-2.9159627126386206e-07, rel=1e-9)
        assert cur[1, 1] < 0
        assert np.all(cur[[0, 2]] > 0)

    def test_no_sneak_current_at_default_sense_resistance(self):
        p = CrossbarParams(rows=3, cols=2)
        sys = oracle.assemble(p, np.full((3, 2), 1 / 20e3))
        cur = oracle.branch_currents(sys, oracle.solve(sys, [0.2, 0.01, 0.2]))
        assert cur[1, 1] > 0

    def test_ideal_limit_currents_are_nonnegative(self):
        p = CrossbarParams(rows=4, cols=3).ideal()
        sys = oracle.assemble(p, random_g(p, 1))
        cur = oracle.branch_currents(sys, oracle.solve(sys, [0.2, 0.0, 0.1, 0.05]))
        assert np.all(cur >= 0)

    def test_column_sum_is_sense_current(self):
        p = CrossbarParams(rows=6, cols=4)
        sys = oracle.assemble(p, random_g(p, 2))
        res = oracle.solve(sys, np.full(6, 0.1))
        np.testing.assert_allclose(oracle.branch_currents(sys, res).sum(axis=0), res.i_out, rtol=1e-9)


class TestPortConductance:
    def test_superposition(self):
        p = CrossbarParams(rows=16, cols=16)
        g = random_g(p, 3)
        g_eff, g_load = oracle.port_conductance(p, g)
        sys = oracle.assemble(p, g)
        for i in (0, 7, 15):
            e = np.zeros(16)
            e[i] = 1.0
            res = oracle.solve(sys, e)
            np.testing.assert_allclose(g_eff[i], res.i_out, rtol=1e-9)
            assert g_load[i] == pytest.approx(res.i_in[i], rel=1e-9)
        vin = np.random.default_rng(4).uniform(0, 0.2, 16)
        np.testing.assert_allclose(oracle.solve(sys, vin).i_out, vin @ g_eff, rtol=1e-9)

    def test_ideal_limit(self):
        p = CrossbarParams(rows=4, cols=6).ideal()
        g = random_g(p, 5)
        g_eff, g_load = oracle.port_conductance(p, g)
        np.testing.assert_allclose(g_eff, g, rtol=1e-12)
        np.testing.assert_allclose(g_load, g.sum(axis=1), rtol=1e-12)

    def test_scaling_all_conductances(self):
        p = CrossbarParams(rows=5, cols=5)
        k = 3.0
        g = random_g(p, 6)
        scaled = p.replace(r_row=p.r_row / k, r_col=p.r_col / k, R_sense=p.R_sense / k,
                           R_driver=p.R_driver / k)
        a, _ = oracle.port_conductance(p, g)
        b, _ = oracle.port_conductance(scaled, k * g, analysis=True)
        np.testing.assert_allclose(b, k * a, rtol=1e-10)


class TestProperties:
    @settings(max_examples=25, deadline=None)
    @given(m=st.integers(1, 6), n=st.integers(1, 6), seed=st.integers(0, 2**31),
           cell=st.integers(0, 35), bump=st.floats(1.05, 4.0))
    def test_monotone_loading(self, m, n, seed, cell, bump):
        p = CrossbarParams(rows=m, cols=n, R_sense=100.0, R_driver=50.0)
        g = random_g(p, seed) / 4
        vin = np.random.default_rng(seed + 1).uniform(0, 0.2, m)
        before = oracle.solve(oracle.assemble(p, g, analysis=True), vin).i_out.sum()
        i, j = divmod(cell % (m * n), n)
        g[i, j] *= bump
        after = oracle.solve(oracle.assemble(p, g, analysis=True), vin).i_out.sum()
        assert after >= before * (1 - 1e-12)

    @settings(max_examples=25, deadline=None)
    @given(m=st.integers(1, 8), n=st.integers(1, 8), seed=st.integers(0, 2**31),
           zero_mask=st.integers(0, 15))
    def test_conservation_any_topology(self, m, n, seed, zero_mask):
        names = ("r_row", "r_col", "R_sense", "R_driver")
        p = CrossbarParams(rows=m, cols=n, R_sense=30.0, R_driver=15.0)
        p = p.replace(**{k: 0.0 for b, k in enumerate(names) if zero_mask >> b & 1})
        vin = np.random.default_rng(seed).uniform(0, 0.2, m)
        res = oracle.solve(oracle.assemble(p, random_g(p, seed)), vin)
        assert res.i_in.sum() == pytest.approx(res.i_out.sum(), rel=1e-9)
