"""DAC/ADC transfer functions, device mapping and variation sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xbarsim import converters as cv
from xbarsim.params import CrossbarParams


class TestDac:
    def test_ladder_is_linear_when_unloaded(self):
        cfg = cv.DacConfig(include_driver=False)
        codes = np.arange(cfg.max_code + 1)
        np.testing.assert_allclose(cv.dac_convert(codes, 0.0, cfg), cfg.ideal_voltage(codes),
                                   rtol=1e-12, atol=1e-15)

    def test_zero_series_resistance_gives_vdd(self):
        cfg = cv.DacConfig(include_driver=False)
        assert cv.dac_convert(cfg.max_code, 1e-3, cfg) == pytest.approx(cfg.vdd)

    def test_unloaded_divider(self):
        cfg = cv.DacConfig(r_driver=10.0)
        s = cfg.series[20]
        assert cv.dac_convert(20, 0.0, cfg) == pytest.approx(cfg.vdd * cfg.r_pd / (s + cfg.r_pd))

    def test_heavier_load_is_lower(self):
        cfg = cv.DacConfig(r_pd=1e3)
        light = cv.dac_convert(40, 1 / 32e3, cfg)
        heavy = cv.dac_convert(40, 1 / 3.2e3, cfg)
        assert heavy < light

    def test_code_zero_is_zero(self):
        assert cv.dac_convert(0, 1e-4, cv.DacConfig()) == 0.0

    @pytest.mark.parametrize("code", [-1, 64, 2.5])
    def test_bad_codes(self, code):
        with pytest.raises(ValueError):
            cv.dac_convert(code, 1e-4, cv.DacConfig())

    def test_level_validation(self):
        with pytest.raises(ValueError):
            cv.DacConfig(bits=2, r_dac_levels=(1.0, 2.0, 3.0, 4.0))
        with pytest.raises(ValueError):
            cv.DacConfig(bits=2, r_dac_levels=(3.0, 2.0, 1.0))

    def test_thevenin_matches_divider(self):
        cfg = cv.DacConfig()
        codes = np.arange(1, 64)
        g_load = 3e-4
        v_th, r_th = cv.thevenin(codes, cfg)
        np.testing.assert_allclose(v_th / (1 + r_th * g_load), cv.dac_convert(codes, g_load, cfg),
                                   rtol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(code=st.integers(0, 62), g1=st.floats(0, 1e-2), g2=st.floats(0, 1e-2))
    def test_monotone(self, code, g1, g2):
        cfg = cv.DacConfig()
        assert cv.dac_convert(code + 1, g1, cfg) >= cv.dac_convert(code, g1, cfg)
        lo, hi = sorted((g1, g2))
        assert cv.dac_convert(code, hi, cfg) <= cv.dac_convert(code, lo, cfg)


class TestAdc:
    def test_rails(self):
        cfg = cv.AdcConfig(bits=6, i_full_scale=2.0, offset=-1.0)
        assert cv.adc_convert(-1.0, cfg) == 0
        assert cv.adc_convert(1.0, cfg) == 63
        assert cv.adc_convert(-5.0, cfg) == 0
        assert cv.adc_convert(5.0, cfg) == 63

    def test_half_scale_rounds_away(self):
        cfg = cv.AdcConfig(bits=6, i_full_scale=1.0)
        assert cv.adc_convert(0.5, cfg) == 32

    def test_default_full_scale(self):
        p = CrossbarParams(rows=32)
        assert cv.AdcConfig.for_params(p).i_full_scale == pytest.approx(0.2 * 50e-6 * 32)

    def test_nonfinite(self):
        with pytest.raises(ValueError):
            cv.adc_convert(np.nan, cv.AdcConfig())

    @settings(max_examples=100, deadline=None)
    @given(x=st.floats(-3, 3), y=st.floats(-3, 3), bits=st.integers(1, 12))
    def test_monotone_and_idempotent(self, x, y, bits):
        cfg = cv.AdcConfig.bipolar(1.5, bits)
        lo, hi = sorted((x, y))
        assert cv.adc_convert(lo, cfg) <= cv.adc_convert(hi, cfg)
        code = cv.adc_convert(x, cfg)
        assert cv.adc_convert(cv.adc_reconstruct(code, cfg), cfg) == code


class TestWeightMapping:
    dev = CrossbarParams()

    def test_zero_and_full_scale(self):
        assert cv.weight_to_conductance(0.0, 1.0, self.dev) == (self.dev.G_min, self.dev.G_min)
        gp, gm = cv.weight_to_conductance(2.0, 2.0, self.dev)
        assert (gp, gm) == (pytest.approx(self.dev.G_max), self.dev.G_min)

    def test_inverse_examples(self):
        d = self.dev
        assert cv.conductance_to_weight(d.G_min, d.G_min, 3.0, d) == 0
        assert cv.conductance_to_weight(d.G_max, d.G_min, 3.0, d) == pytest.approx(3.0)
        assert cv.conductance_to_weight(d.G_min, d.G_max, 3.0, d) == pytest.approx(-3.0)

    def test_round_trip_is_nearest_level(self):
        rng = np.random.default_rng(0)
        w = rng.uniform(-1, 1, 10_000)
        back = cv.conductance_to_weight(*cv.weight_to_conductance(w, 1.0, self.dev), 1.0, self.dev)
        # brute force over every representable magnitude
        levels = np.arange(self.dev.levels) / (self.dev.levels - 1)
        mag = levels[np.abs(np.abs(w)[:, None] - levels[None, :]).argmin(axis=1)]
        np.testing.assert_allclose(back, np.sign(w) * mag, atol=1e-12)

    def test_odd_symmetry(self):
        w = np.linspace(-1, 1, 101)
        gp, gm = cv.weight_to_conductance(w, 1.0, self.dev)
        np.testing.assert_array_equal(cv.weight_to_conductance(-w, 1.0, self.dev), (gm, gp))

    def test_errors(self):
        with pytest.raises(ValueError):
            cv.weight_to_conductance(np.inf, 1.0, self.dev)
        with pytest.raises(ValueError):
            cv.weight_to_conductance(2.0, 1.0, self.dev)
        with pytest.raises(ValueError):
            cv.weight_to_conductance(0.5, 0.0, self.dev)


class TestVariation:
    dev = CrossbarParams()

    def test_zero_sigma_is_identity(self):
        g = np.full((4, 4), 2e-5)
        np.testing.assert_array_equal(cv.apply_variation(g, cv.VariationConfig(0.0), self.dev), g)

    def test_deterministic(self):
        g = np.full((8, 8), 2e-5)
        cfg = cv.VariationConfig(0.1, seed=42)
        np.testing.assert_array_equal(cv.apply_variation(g, cfg, self.dev),
                                      cv.apply_variation(g, cfg, self.dev))

    def test_sample_spread(self):
        g = np.full(100_000, 2e-5)
        out = cv.apply_variation(g, cv.VariationConfig(0.1, clamp=False, seed=1))
        ratio = out.std() / out.mean()
        # a normal cut at 3 sigma keeps 98.7% of its standard deviation
        assert ratio == pytest.approx(0.10, abs=0.005)
        assert np.all(np.abs(out / 2e-5 - 1) <= 0.3 + 1e-12)

    def test_clamp(self):
        g = np.full((50, 50), self.dev.G_max)
        out = cv.apply_variation(g, cv.VariationConfig(0.2, seed=3), self.dev)
        assert out.max() <= self.dev.G_max and out.min() >= self.dev.G_min

    def test_clamp_needs_params(self):
        with pytest.raises(ValueError):
            cv.apply_variation(np.ones(3), cv.VariationConfig(0.1))
