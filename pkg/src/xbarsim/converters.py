"""DAC and ADC models, weight/conductance mapping and device variation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import CrossbarParams


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class DacConfig:
    """Resistive-divider DAC: ``vdd --R_DAC(code)[+R_driver]-- out --R_PD-- gnd``.

    The crossbar row hangs off ``out`` as a load. ``r_dac_levels[code]`` is
    the series resistance for each code; ``inf`` (code 0 of the default
    ladder) means the series branch is open.
    """

    bits: int = 6
    vdd: float = 0.2
    r_pd: float = 100.0
    r_dac_levels: tuple = field(default=None)
    include_driver: bool = True
    r_driver: float = 10.0

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("DAC bits must be >= 1")
        if self.r_dac_levels is None:
            object.__setattr__(self, "r_dac_levels", tuple(linear_ladder(self.bits, self.r_pd)))
        levels = np.asarray(self.r_dac_levels, dtype=np.float64)
        if levels.shape != (2 ** self.bits,):
            raise ValueError(f"need exactly {2 ** self.bits} DAC levels, got {levels.size}")
        if np.any(~(levels >= 0)):
            raise ValueError("DAC level resistances must be >= 0")
        if np.any(np.diff(levels) > 0):
            raise ValueError("DAC level resistances must be non-increasing in the code")
        if self.r_pd <= 0 or self.vdd <= 0 or self.r_driver < 0:
            raise ValueError("need r_pd > 0, vdd > 0, r_driver >= 0")

    @property
    def max_code(self) -> int:
        return 2 ** self.bits - 1

    @property
    def series(self) -> np.ndarray:
        """Series resistance per code, driver included when configured."""
        extra = self.r_driver if self.include_driver else 0.0
        return np.asarray(self.r_dac_levels, dtype=np.float64) + extra

    def ideal_voltage(self, code):
        """Unloaded, driverless output for a code."""
        return self.vdd * np.asarray(code, dtype=np.float64) / self.max_code

    @classmethod
    def for_params(cls, params: CrossbarParams, bits: int = 6, r_pd: float = 100.0,
                   include_driver: bool = True) -> "DacConfig":
        return cls(bits=bits, vdd=params.v_read, r_pd=r_pd, include_driver=include_driver,
                   r_driver=params.R_driver)


def linear_ladder(bits: int, r_pd: float) -> np.ndarray:
    """Series resistances that make the unloaded output linear in the code."""
    top = 2 ** bits - 1
    codes = np.arange(top + 1, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return r_pd * (top / codes - 1.0)


def thevenin(code, cfg: DacConfig):
    """Open-circuit voltage and source resistance seen by the crossbar row.

    Same divider as :func:`dac_convert`, with the row load removed.
    """
    code = _check_codes(code, cfg)
    series = cfg.series[code]
    with np.errstate(invalid="ignore"):
        v_th = np.where(np.isinf(series), 0.0, cfg.vdd * cfg.r_pd / (series + cfg.r_pd))
        r_th = np.where(np.isinf(series), cfg.r_pd, series * cfg.r_pd / (series + cfg.r_pd))
    return v_th, r_th


def _check_codes(code, cfg: DacConfig) -> np.ndarray:
    code = np.asarray(code)
    if not np.issubdtype(code.dtype, np.integer):
        if np.any(code != np.round(code)):
            raise ValueError("DAC codes must be integers")
        code = code.astype(np.int64)
    if np.any(code < 0) or np.any(code > cfg.max_code):
        raise ValueError(f"DAC code out of range [0, {cfg.max_code}]")
    return code


def dac_convert(din, g_load_row, cfg: DacConfig):
    """Loaded divider output; broadcasts over codes and row loads.

    ``out = vdd * P / (R_series + P)`` with ``P = R_PD || (1 / g_load_row)``.
    """
    din = _check_codes(din, cfg)
    g_load_row = np.asarray(g_load_row, dtype=np.float64)
    if np.any(g_load_row < 0):
        raise ValueError("load conductance must be >= 0")
    series = cfg.series[din]
    # P = 1 / (1/r_pd + g_load); written in conductances so g_load = 0 is the unloaded case
    p = 1.0 / (1.0 / cfg.r_pd + g_load_row)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(series), 0.0, cfg.vdd * p / (series + p))
    return out


@dataclass(frozen=True)
class AdcConfig:
    bits: int = 8
    i_full_scale: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("ADC bits must be >= 1")
        if not self.i_full_scale > 0:
            raise ValueError("i_full_scale must be > 0")

    @property
    def max_code(self) -> int:
        return 2 ** self.bits - 1

    @property
    def lsb(self) -> float:
        return self.i_full_scale / self.max_code

    @classmethod
    def for_params(cls, params: CrossbarParams, bits: int = 8) -> "AdcConfig":
        """Worst-case single-column current as full scale."""
        return cls(bits=bits, i_full_scale=params.v_read * params.G_max * params.rows)

    @classmethod
    def bipolar(cls, i_range: float, bits: int = 8) -> "AdcConfig":
        """Range ``[-i_range, i_range - lsb]`` for differential outputs.

        Laid out like two's complement so that zero current is exactly code
        ``2**(bits-1)``.
        """
        half = 2 ** (bits - 1)
        lsb = i_range / half
        return cls(bits=bits, i_full_scale=(2 * half - 1) * lsb, offset=-i_range)


def adc_convert(i_out, cfg: AdcConfig) -> np.ndarray:
    """Uniform saturating quantizer, round-half-away-from-zero."""
    i_out = np.asarray(i_out, dtype=np.float64)
    if not np.all(np.isfinite(i_out)):
        raise ValueError("ADC input contains non-finite values")
    x = (i_out - cfg.offset) / cfg.i_full_scale * cfg.max_code
    return np.clip(round_half_away(x), 0, cfg.max_code).astype(np.int64)


def adc_reconstruct(code, cfg: AdcConfig) -> np.ndarray:
    return cfg.offset + np.asarray(code, dtype=np.float64) * cfg.lsb


def quantize_conductance(g, params: CrossbarParams) -> np.ndarray:
    span = params.G_max - params.G_min
    top = params.levels - 1
    level = np.clip(round_half_away((np.asarray(g) - params.G_min) / span * top), 0, top)
    return params.G_min + level / top * span


def weight_to_conductance(w, w_scale: float, device: CrossbarParams):
    """Differential mapping: positive part on ``g_plus``, negative on ``g_minus``."""
    w = np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError("non-finite weight")
    if not w_scale > 0:
        raise ValueError("w_scale must be > 0")
    if np.any(np.abs(w) > w_scale * (1 + 1e-12)):
        raise ValueError("|w| exceeds w_scale")
    span = device.G_max - device.G_min
    g_plus = quantize_conductance(device.G_min + np.maximum(w, 0) / w_scale * span, device)
    g_minus = quantize_conductance(device.G_min + np.maximum(-w, 0) / w_scale * span, device)
    return g_plus, g_minus


def conductance_to_weight(g_plus, g_minus, w_scale: float, device: CrossbarParams):
    span = device.G_max - device.G_min
    return (np.asarray(g_plus) - np.asarray(g_minus)) / span * w_scale


@dataclass(frozen=True)
class VariationConfig:
    sigma_over_mu: float = 0.10
    clamp: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.sigma_over_mu < 0:
            raise ValueError("sigma_over_mu must be >= 0")


def truncated_normal(rng: np.random.Generator, shape, limit: float = 3.0) -> np.ndarray:
    """Standard normal draws restricted to ``[-limit, limit]`` by resampling."""
    z = rng.standard_normal(shape)
    bad = np.abs(z) > limit
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > limit
    return z


def apply_variation(g, cfg: VariationConfig, params: CrossbarParams | None = None,
                    rng: np.random.Generator | None = None) -> np.ndarray:
    """Multiply each device by an independent ``N(1, sigma/mu)`` factor (cut at 3 sigma).

    Draws come from ``rng`` when given, else from a fresh generator seeded
    with ``cfg.seed``. Clamping needs ``params`` for the device range.
    """
    g = np.asarray(g, dtype=np.float64)
    if cfg.sigma_over_mu == 0:
        return g.copy()
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    out = g * (1.0 + cfg.sigma_over_mu * truncated_normal(rng, g.shape))
    if cfg.clamp:
        if params is None:
            raise ValueError("clamping needs the device range (params)")
        out = np.clip(out, params.G_min, params.G_max)
    return out
