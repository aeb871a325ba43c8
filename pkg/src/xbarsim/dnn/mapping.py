"""Tiling of mappable layers onto crossbars and the crossbar forward pass.

Each logical weight column occupies two adjacent physical columns: ``2k``
holds the positive part and ``2k + 1`` the negative part, so a tile of
``N`` physical columns carries ``N // 2`` logical columns. Crossbar outputs
are dequantized back into weight units, so the floating-point backward pass
applies to them unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .. import converters as cv
from .. import fcm, kernels
from ..energy import EnergyLedger
from ..params import ConfigError, CrossbarParams
from . import network as nw

DAC_MODELS = ("divider", "ideal")


@dataclass(frozen=True)
class EngineConfig:
    """Peripheral and calibration settings for crossbar inference.

    ``dac_bits=None`` / ``adc_bits=None`` mean unquantized inputs/outputs
    (only valid with the ideal DAC model).
    """

    params: CrossbarParams = field(default_factory=CrossbarParams)
    dac_bits: int | None = 6
    adc_bits: int | None = 8
    r_pd: float = 100.0
    dac_model: str = "divider"
    load_mode: str = "row_sum"
    a_percentile: float = 99.9
    adc_percentile: float = 99.99
    max_tiles: int = 100_000

    def __post_init__(self):
        if self.dac_model not in DAC_MODELS:
            raise ConfigError(f"dac_model must be one of {DAC_MODELS}")
        if self.dac_bits is None and self.dac_model != "ideal":
            raise ConfigError("an unquantized DAC needs dac_model='ideal'")
        if self.load_mode not in fcm.LOAD_MODES:
            raise ConfigError(f"load_mode must be one of {fcm.LOAD_MODES}")
        if self.params.cols % 2:
            raise ConfigError("differential mapping needs an even number of columns")
        if not (0 < self.a_percentile <= 100 and 0 < self.adc_percentile <= 100):
            raise ConfigError("percentiles must lie in (0, 100]")

    @property
    def logical_cols(self) -> int:
        return self.params.cols // 2

    def dac(self) -> cv.DacConfig | None:
        if self.dac_bits is None:
            return None
        return cv.DacConfig.for_params(self.params, bits=self.dac_bits, r_pd=self.r_pd)

    def with_tile(self, size: int) -> "EngineConfig":
        return replace(self, params=self.params.replace(rows=size, cols=size))

    @classmethod
    def ideal_limit(cls, params: CrossbarParams | None = None, **kw) -> "EngineConfig":
        """No parasitics and an unloaded, driverless DAC."""
        params = (params or CrossbarParams()).ideal()
        return cls(params=params, dac_model="ideal", **kw)


@dataclass
class MappedLayer:
    index: int
    weights: np.ndarray  # shadow W used at programming time, (R, C)
    w_scale: float
    a_scale: float
    adc_range: float
    row_blocks: list  # [(r0, r1)]
    col_blocks: list  # [(c0, c1)] in logical columns
    programmed: dict  # (rt, ct) -> quantized conductances before variation
    tiles: dict  # (rt, ct) -> NonIdealCrossbar

    @property
    def n_tiles(self) -> int:
        return len(self.row_blocks) * len(self.col_blocks)


@dataclass
class MappedNetwork:
    net: nw.Network
    config: EngineConfig
    layers: dict  # layer index -> MappedLayer
    variation: cv.VariationConfig | None = None

    @property
    def n_tiles(self) -> int:
        return sum(m.n_tiles for m in self.layers.values())


def tile_count(rows: int, cols: int, params: CrossbarParams) -> int:
    return -(-rows // params.rows) * -(-cols // (params.cols // 2))


def _blocks(n: int, step: int) -> list:
    return [(s, min(s + step, n)) for s in range(0, n, step)]


def program_tile(w_block: np.ndarray, w_scale: float, params: CrossbarParams) -> np.ndarray:
    """Quantized conductances for one tile; unmapped cells sit at (G_min, G_min)."""
    g = np.full(params.shape, params.G_min)
    gp, gm = cv.weight_to_conductance(w_block, w_scale, params)
    r, c = w_block.shape
    g[:r, 0:2 * c:2] = gp
    g[:r, 1:2 * c:2] = gm
    return g


def tile_weights(g: np.ndarray, shape, w_scale: float, params: CrossbarParams) -> np.ndarray:
    r, c = shape
    return cv.conductance_to_weight(g[:r, 0:2 * c:2], g[:r, 1:2 * c:2], w_scale, params)


def quantize_weights(w: np.ndarray, params: CrossbarParams) -> np.ndarray:
    """What the tiles can represent: ``W`` after conductance quantization."""
    w_scale = float(np.max(np.abs(w))) or 1.0
    gp, gm = cv.weight_to_conductance(w, w_scale, params)
    return cv.conductance_to_weight(gp, gm, w_scale, params)


def reconstruct_weights(layer: MappedLayer, params: CrossbarParams) -> np.ndarray:
    out = np.empty(layer.weights.shape)
    for rt, (r0, r1) in enumerate(layer.row_blocks):
        for ct, (c0, c1) in enumerate(layer.col_blocks):
            out[r0:r1, c0:c1] = tile_weights(layer.programmed[rt, ct], (r1 - r0, c1 - c0),
                                             layer.w_scale, params)
    return out


def _tile_rng(variation: cv.VariationConfig, layer: int, rt: int, ct: int):
    return np.random.default_rng([variation.seed, layer, rt, ct])


def _program_layer(i, w, cfg: EngineConfig, variation, a_scale, adc_range) -> MappedLayer:
    p = cfg.params
    w = np.asarray(w, dtype=np.float64)
    w_scale = float(np.max(np.abs(w))) or 1.0
    rows, cols = _blocks(w.shape[0], p.rows), _blocks(w.shape[1], cfg.logical_cols)
    programmed, tiles = {}, {}
    for rt, (r0, r1) in enumerate(rows):
        for ct, (c0, c1) in enumerate(cols):
            g = program_tile(w[r0:r1, c0:c1], w_scale, p)
            programmed[rt, ct] = g
            if variation is not None and variation.sigma_over_mu > 0:
                g = cv.apply_variation(g, variation, p, _tile_rng(variation, i, rt, ct))
            tiles[rt, ct] = fcm.build_nonideal(g, p, load_mode="exact")
    return MappedLayer(i, w, w_scale, a_scale, adc_range, rows, cols, programmed, tiles)


def calibrate(net: nw.Network, x_cal, cfg: EngineConfig, batch: int = 256) -> dict:
    """Per-layer ``(a_scale, adc_range)`` from floating-point passes.

    ``a_scale`` is a percentile of the layer's input magnitudes; ``adc_range``
    a percentile of the ideal differential tile currents for those inputs.
    """
    p = cfg.params
    span = p.G_max - p.G_min
    acts = {i: [] for i in net.mappable}

    def grab(i, a):
        acts[i].append(np.abs(a).ravel())
        return a @ net.weights[i][0]

    for s in range(0, len(x_cal), batch):
        nw.forward(net, x_cal[s:s + batch], grab)
    a_scales = {i: float(np.percentile(np.concatenate(acts[i]), cfg.a_percentile)) or 1.0
                for i in net.mappable}
    currents = {i: [] for i in net.mappable}

    def tile_currents(i, a):
        w = np.asarray(net.weights[i][0], dtype=np.float64)
        w_scale = float(np.max(np.abs(w))) or 1.0
        xin = np.clip(np.abs(a), 0, a_scales[i]).astype(np.float64)
        to_current = span * p.v_read / (w_scale * a_scales[i])
        for r0, r1 in _blocks(w.shape[0], p.rows):
            currents[i].append(np.abs(xin[:, r0:r1] @ w[r0:r1]).ravel() * to_current)
        return a @ net.weights[i][0]

    for s in range(0, len(x_cal), batch):
        nw.forward(net, x_cal[s:s + batch], tile_currents)
    out = {}
    for i in net.mappable:
        rng = float(np.percentile(np.concatenate(currents[i]), cfg.adc_percentile))
        out[i] = (a_scales[i], rng or p.v_read * p.G_max)
    return out


def map_network(net: nw.Network, cfg: EngineConfig, calibration,
                variation: cv.VariationConfig | None = None) -> MappedNetwork:
    """Program every mappable layer onto tiles and reduce each tile.

    ``calibration`` is either the output of :func:`calibrate` or a batch of
    inputs to calibrate on.
    """
    net.check_weights()
    if not isinstance(calibration, dict):
        calibration = calibrate(net, calibration, cfg)
    total = sum(tile_count(*net.weight_shape(i), cfg.params) for i in net.mappable)
    if total > cfg.max_tiles:
        raise ConfigError(f"mapping needs {total} tiles, budget is {cfg.max_tiles}")
    layers = {i: _program_layer(i, net.weights[i][0], cfg, variation, *calibration[i])
              for i in net.mappable}
    return MappedNetwork(net, cfg, layers, variation)


def refresh(mapped: MappedNetwork, shadow: nw.Network) -> MappedNetwork:
    """Re-program all tiles from updated shadow weights, keeping calibration."""
    cfg = mapped.config
    layers = {i: _program_layer(i, shadow.weights[i][0], cfg, mapped.variation,
                                m.a_scale, m.adc_range)
              for i, m in mapped.layers.items()}
    return MappedNetwork(shadow, cfg, layers, mapped.variation)


# --- evaluation ----------------------------------------------------------------

def _layer_matmul(layer: MappedLayer, x, cfg: EngineConfig, ideal: bool,
                  ledger: EnergyLedger | None):
    """Crossbar replacement for ``x @ W`` of one layer (inputs must be >= 0)."""
    p = cfg.params
    m, half = p.rows, cfg.logical_cols
    n = x.shape[0]
    x = np.asarray(x, dtype=np.float64)
    dac = cfg.dac()
    if dac is None:
        frac = np.clip(x / layer.a_scale, 0.0, 1.0)
        codes = None
    else:
        codes = np.clip(cv.round_half_away(x / layer.a_scale * dac.max_code), 0, dac.max_code).astype(np.int64)
    adc = None if cfg.adc_bits is None else cv.AdcConfig.bipolar(layer.adc_range, cfg.adc_bits)
    span = p.G_max - p.G_min
    acc = np.zeros((n, layer.weights.shape[1]))
    for rt, (r0, r1) in enumerate(layer.row_blocks):
        if codes is not None:
            cblock = np.zeros((n, m), dtype=np.int64)
            cblock[:, : r1 - r0] = codes[:, r0:r1]
        for ct, (c0, c1) in enumerate(layer.col_blocks):
            if ideal:
                g = layer.programmed[rt, ct]
            else:
                g = layer.tiles[rt, ct].g_non_ideal
            if codes is None:
                v = np.zeros((n, m))
                v[:, : r1 - r0] = frac[:, r0:r1] * p.v_read
            elif ideal or cfg.dac_model == "ideal":
                v = dac.ideal_voltage(cblock)
            else:
                load = fcm.row_load(layer.tiles[rt, ct], cfg.load_mode)
                p_row = 1.0 / (1.0 / dac.r_pd + load)
                v = kernels.dac_apply(cblock, dac.series, p_row, dac.vdd)
            cur = v @ g
            if adc is None:
                diff = cur[:, 0::2] - cur[:, 1::2]
            else:
                diff = kernels.adc_diff(cur, adc.offset, adc.i_full_scale, adc.bits)
            acc[:, c0:c1] += diff[:, : c1 - c0]
            if ledger is not None:
                ledger.record_tile(m, n, half, read_bytes=n * (r1 - r0),
                                   write_bytes=2 * n * (c1 - c0))
    return acc * (layer.w_scale * layer.a_scale / (span * p.v_read))


def crossbar_matmul(mapped: MappedNetwork, ideal: bool = False, ledger=None):
    """Hook for :func:`network.forward` evaluating mappable layers on tiles."""
    cfg = mapped.config

    def matmul(i, x):
        layer = mapped.layers[i]
        if np.any(x < 0):
            pos = _layer_matmul(layer, np.maximum(x, 0), cfg, ideal, ledger)
            y = pos - _layer_matmul(layer, np.maximum(-x, 0), cfg, ideal, ledger)
        else:
            y = _layer_matmul(layer, x, cfg, ideal, ledger)
        return y.astype(x.dtype)

    return matmul


def forward_nonideal(mapped: MappedNetwork, x, ledger: EnergyLedger | None = None, keep=False):
    return nw.forward(mapped.net, x, crossbar_matmul(mapped, False, ledger), keep=keep)


def forward_ideal_quantized(mapped: MappedNetwork, x, ledger: EnergyLedger | None = None, keep=False):
    return nw.forward(mapped.net, x, crossbar_matmul(mapped, True, ledger), keep=keep)


def layer_outputs(mapped: MappedNetwork, x, ideal: bool = False) -> dict:
    """Pre-activation outputs of every mappable layer, keyed by layer index."""
    hook = crossbar_matmul(mapped, ideal)
    out = {}

    def grab(i, a):
        y = hook(i, a)
        out[i] = y + mapped.net.weights[i][1]
        return y

    nw.forward(mapped.net, x, grab)
    return out


def evaluate(mapped: MappedNetwork, data, mode: str = "nonideal", batch: int = 256,
             ledger: EnergyLedger | None = None) -> float:
    """Top-1 accuracy under ``mode`` in {"fp32", "ideal", "nonideal"}."""
    if mode == "fp32":
        hook = None
    elif mode in ("ideal", "nonideal"):
        hook = crossbar_matmul(mapped, mode == "ideal", ledger)
    else:
        raise ConfigError("mode must be fp32, ideal or nonideal")
    return nw.accuracy(mapped.net, data.x, data.y, batch, hook)


def vectors_per_sample(net: nw.Network, i: int) -> int:
    """Input vectors one sample presents to mappable layer ``i``."""
    if net.layers[i].kind == "conv":
        _, oh, ow = net.shapes[i + 1]
        return oh * ow
    return 1


def layer_ledger(rows: int, cols: int, params: CrossbarParams, n_vectors: int = 1,
                 ledger: EnergyLedger | None = None) -> EnergyLedger:
    """Events for ``n_vectors`` products with a ``rows x cols`` weight matrix,
    counted the same way as the crossbar forward pass."""
    ledger = ledger if ledger is not None else EnergyLedger()
    half = params.cols // 2
    for r0, r1 in _blocks(rows, params.rows):
        for c0, c1 in _blocks(cols, half):
            ledger.record_tile(params.rows, n_vectors, half, read_bytes=n_vectors * (r1 - r0),
                               write_bytes=2 * n_vectors * (c1 - c0))
    return ledger


def inference_ledger(net: nw.Network, params: CrossbarParams, n_samples: int = 1) -> EnergyLedger:
    """Events for ``n_samples`` inferences with non-negative network inputs."""
    ledger = EnergyLedger()
    for i in net.mappable:
        layer_ledger(*net.weight_shape(i), params, n_samples * vectors_per_sample(net, i), ledger)
    return ledger
