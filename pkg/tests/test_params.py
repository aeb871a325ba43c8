"""Parameter validation and the key=value / CSV text formats."""

import numpy as np
import pytest

from xbarsim.params import (ConfigError, CrossbarParams, dataclass_from_kv, format_kv,
                            load_matrix_csv, load_params, parse_kv, save_matrix_csv,
                            save_params)


class TestCrossbarParams:
    def test_defaults_are_valid(self):
        p = CrossbarParams()
        assert p.shape == (64, 64)
        assert p.levels == 64

    @pytest.mark.parametrize("kw", [
        {"rows": 0}, {"cols": -1}, {"r_row": -1.0}, {"R_sense": float("nan")},
        {"G_min": 0.0}, {"G_min": 60e-6}, {"device_bits": 0}, {"v_read": 0.0},
    ])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ConfigError):
            CrossbarParams(**kw)

    def test_ideal_zeroes_parasitics_only(self):
        p = CrossbarParams(rows=8, cols=4).ideal()
        assert (p.r_row, p.r_col, p.R_sense, p.R_driver) == (0, 0, 0, 0)
        assert p.shape == (8, 4)


class TestKeyValue:
    def test_parse_skips_comments_and_blanks(self):
        text = "# header\nrows = 8\n\ncols=4  # trailing\n"
        assert parse_kv(text) == {"rows": "8", "cols": "4"}

    @pytest.mark.parametrize("text", ["rows\n", "=3\n", "rows=1\nrows=2\n"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            parse_kv(text)

    def test_unknown_key_is_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            dataclass_from_kv(CrossbarParams, "rowz=3\n")

    def test_bad_value_is_rejected(self):
        with pytest.raises(ConfigError, match="bad value"):
            dataclass_from_kv(CrossbarParams, "rows=abc\n")

    def test_round_trip(self, tmp_path):
        p = CrossbarParams(rows=16, cols=32, r_row=1.25, G_min=1e-6 / 3)
        save_params(p, tmp_path / "p.cfg")
        assert load_params(tmp_path / "p.cfg") == p

    def test_format_uses_repr_for_floats(self):
        assert format_kv({"x": 0.1 + 0.2}) == "x=0.30000000000000004\n"


class TestMatrixCsv:
    def test_round_trip_is_exact(self, tmp_path):
        m = np.random.default_rng(0).random((5, 3)) * 1e-5
        save_matrix_csv(m, tmp_path / "m.csv")
        np.testing.assert_array_equal(load_matrix_csv(tmp_path / "m.csv"), m)

    def test_ragged_rows(self, tmp_path):
        (tmp_path / "m.csv").write_text("1,2\n3\n")
        with pytest.raises(ConfigError):
            load_matrix_csv(tmp_path / "m.csv")

    def test_empty(self, tmp_path):
        (tmp_path / "m.csv").write_text("\n")
        with pytest.raises(ConfigError):
            load_matrix_csv(tmp_path / "m.csv")
