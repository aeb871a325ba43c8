"""Error sweeps and the fidelity comparison (small sizes for speed)."""

import numpy as np
import pytest

from xbarsim import characterize as ch
from xbarsim import converters as cv
from xbarsim import fcm, oracle


@pytest.fixture(scope="module")
def setup():
    return ch.Setup()


class TestErrorMetric:
    def test_relative_and_full_scale_fallback(self):
        eps = ch.error_percent([1.0, 1e-6, -2.0], [0.9, 0.0, -1.0], 1.0)
        np.testing.assert_allclose(eps, [10.0, 1e-4, 50.0])


class TestExactCurrents:
    @pytest.mark.parametrize("mask", list(ch.MASKS))
    def test_matches_oracle(self, setup, mask):
        s = setup.resized(8)
        rng = np.random.default_rng(0)
        g = ch.random_state(s.params, rng)
        codes = ch.random_codes(s.dac, 8, rng)
        np.testing.assert_allclose(ch.exact_currents(g, codes, s, mask),
                                   ch.oracle_currents(g, codes, s, mask), rtol=1e-9)

    def test_ideal_mask_is_error_free(self, setup):
        s = setup.resized(16)
        g = ch.random_state(s.params, np.random.default_rng(1))
        codes = ch.random_codes(s.dac, 16, np.random.default_rng(2))
        np.testing.assert_allclose(ch.column_error(g, codes, s, "IDEAL"), 0, atol=1e-9)


class TestSweeps:
    def test_dimension_ideal_mask(self, setup):
        rows = ch.sweep_dimension(setup, sizes=(8, 16), masks=("IDEAL",))
        assert all(abs(r["error_last"]) < 1e-9 for r in rows)

    def test_dimension_wire_matches_oracle(self, setup):
        (row,) = ch.sweep_dimension(setup, sizes=(8,), states=("all_Gmax",), masks=("WIRE",))
        s = setup.resized(8)
        g = ch.uniform_state(s.params, "all_Gmax")
        codes = np.full(8, s.dac.max_code)
        i_or = ch.oracle_currents(g, codes, s, "WIRE")
        eps = ch.error_percent(ch.ideal_currents(g, codes, s), i_or, s.i_full_scale)
        assert row["error_last"] == pytest.approx(eps[-1], rel=1e-9)

    def test_gmax_error_exceeds_gmin(self, setup):
        rows = ch.sweep_dimension(setup, sizes=(16, 32), masks=("ALL",))
        by = {(r["size"], r["state"]): r["error_last"] for r in rows}
        for size in (16, 32):
            assert by[size, "all_Gmax"] >= by[size, "all_Gmin"]

    def test_single_state_stats_collapse(self, setup):
        res = ch.sweep_states(setup, size=8, n_states=1)
        np.testing.assert_array_equal(res["max"], res["min"])
        np.testing.assert_array_equal(res["avg"], res["sample"])

    def test_states_reproducible(self, setup):
        a = ch.sweep_states(setup, size=8, n_states=5, seed=3)
        b = ch.sweep_states(setup, size=8, n_states=5, seed=3)
        np.testing.assert_array_equal(a["errors"], b["errors"])

    def test_constant_inputs_have_no_spread(self, setup):
        s = setup.resized(8)
        g = ch.random_state(s.params, np.random.default_rng(0))
        codes = np.tile(ch.random_codes(s.dac, 8, np.random.default_rng(1)), (5, 1))
        eps = ch.error_percent(ch.ideal_currents(g, codes, s), ch.exact_currents(g, codes, s),
                               s.i_full_scale)
        assert np.ptp(eps, axis=0).max() == 0

    def test_input_sweep_matches_oracle(self, setup):
        res = ch.sweep_inputs(setup, size=8, n_inputs=3, seed=4)
        s = setup.resized(8)
        rng = np.random.default_rng(4)
        g = ch.random_state(s.params, rng)
        np.testing.assert_array_equal(g, res["state"])
        r = ch.trial_rngs(5, 3)[1]
        codes = ch.random_codes(s.dac, 8, r)
        i_or = ch.oracle_currents(g, codes, s)
        eps = ch.error_percent(ch.ideal_currents(g, codes, s), i_or, s.i_full_scale)
        np.testing.assert_allclose(res["errors"][1], eps, rtol=1e-9)

    def test_zero_variation_has_no_spread(self, setup):
        res = ch.monte_carlo_variation(setup, size=8, n_samples=4, cfg=cv.VariationConfig(0.0))
        np.testing.assert_array_equal(res["max"], res["min"])

    def test_variation_spread_grows(self, setup):
        spread = []
        for sigma in (0.05, 0.10, 0.20):
            r = ch.monte_carlo_variation(setup, size=16, n_samples=200,
                                         cfg=cv.VariationConfig(sigma, seed=7))
            spread.append(np.mean(r["max"] - r["min"]))
        assert spread[0] < spread[1] < spread[2]


class TestFidelity:
    def test_array_path_is_exact(self):
        assert ch.array_fidelity(ch.Setup().params.replace(rows=16, cols=16), trials=3) <= 1e-7

    def test_fcm_beats_constant_baseline(self, setup):
        res = ch.fidelity_compare(setup, size=16, trials=10, seed=1)
        assert res["fcm_max_dev"] < res["baseline_max_dev"]
        assert 0 <= res["baseline_k"] < 1

    def test_fcm_pipeline_is_exact_without_dac_load(self, setup):
        # with an ideal DAC the only difference from the oracle is gone
        s = setup.resized(8)
        arr, _ = s.masked("WIRE+SENSE")
        g = ch.random_state(s.params, np.random.default_rng(0))
        codes = ch.random_codes(s.dac, 8, np.random.default_rng(1))
        xbar = fcm.build_nonideal(g, arr)
        v = s.dac.ideal_voltage(codes)
        np.testing.assert_allclose(ch.fcm_currents(xbar, codes, s, "WIRE+SENSE"),
                                   oracle.solve(oracle.assemble(arr, g), v).i_out, rtol=1e-9)
