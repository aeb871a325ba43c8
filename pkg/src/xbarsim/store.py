"""On-disk layout of mapped networks and run manifests."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, fcm, kernels
from .converters import VariationConfig
from .dnn import mapping as mp
from .dnn import network as nw
from .params import ConfigError, CrossbarParams, dataclass_from_kv, format_kv, parse_kv

ENGINE_KEYS = ("dac_bits", "adc_bits", "r_pd", "dac_model", "load_mode",
               "a_percentile", "adc_percentile", "max_tiles")


def engine_to_kv(cfg: mp.EngineConfig) -> str:
    vals = {k: ("none" if getattr(cfg, k) is None else getattr(cfg, k)) for k in ENGINE_KEYS}
    return format_kv(vals)


def engine_from_kv(text: str, params: CrossbarParams) -> mp.EngineConfig:
    raw = parse_kv(text)
    kw = {}
    for k, v in raw.items():
        if k not in ENGINE_KEYS:
            raise ConfigError(f"unknown engine key {k!r}; expected one of {list(ENGINE_KEYS)}")
        try:
            if k in ("dac_bits", "adc_bits"):
                kw[k] = None if v.lower() in ("none", "inf") else int(v)
            elif k in ("dac_model", "load_mode"):
                kw[k] = v
            elif k == "max_tiles":
                kw[k] = int(v)
            else:
                kw[k] = float(v)
        except ValueError:
            raise ConfigError(f"bad value for {k!r}: {v!r}") from None
    return mp.EngineConfig(params=params, **kw)


def variation_to_kv(v: VariationConfig) -> str:
    return format_kv(dataclasses.asdict(v))


def load_variation(path: str | Path) -> VariationConfig:
    return dataclass_from_kv(VariationConfig, read_text(path, "variation config"))


def read_text(path: str | Path, what: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise ConfigError(f"{what} not found: {path}") from None


def _tile_name(i: int, rt: int, ct: int) -> str:
    return f"L{i:02d}_r{rt:03d}_c{ct:03d}.xbf"


def save_mapped(mapped: mp.MappedNetwork, root: str | Path) -> None:
    """Directory with the network, shadow weights, configs, calibration and
    one FCM container per tile."""
    root = Path(root)
    (root / "tiles").mkdir(parents=True, exist_ok=True)
    (root / "network.txt").write_text(nw.format_network(mapped.net))
    nw.save_weights(mapped.net, root / "weights.bin")
    (root / "params.cfg").write_text(format_kv(mapped.config.params.to_dict()))
    (root / "engine.cfg").write_text(engine_to_kv(mapped.config))
    if mapped.variation is not None:
        (root / "variation.cfg").write_text(variation_to_kv(mapped.variation))
    calib = {str(i): {"a_scale": m.a_scale, "adc_range": m.adc_range}
             for i, m in mapped.layers.items()}
    (root / "calibration.json").write_text(json.dumps(calib, indent=2) + "\n")
    for i, m in mapped.layers.items():
        for (rt, ct), xbar in m.tiles.items():
            fcm.save(xbar, root / "tiles" / _tile_name(i, rt, ct))


def load_mapped(root: str | Path) -> mp.MappedNetwork:
    root = Path(root)
    if not (root / "network.txt").exists():
        raise ConfigError(f"{root} does not hold a mapped network (no network.txt)")
    net = nw.load_network(root / "network.txt")
    net = nw.load_weights(root / "weights.bin", net)
    params = dataclass_from_kv(CrossbarParams, read_text(root / "params.cfg", "params"))
    cfg = engine_from_kv(read_text(root / "engine.cfg", "engine config"), params)
    variation = load_variation(root / "variation.cfg") if (root / "variation.cfg").exists() else None
    calib = json.loads(read_text(root / "calibration.json", "calibration"))
    layers = {}
    for i in net.mappable:
        c = calib.get(str(i))
        if c is None:
            raise ConfigError(f"calibration.json has no entry for layer {i}")
        w = np.asarray(net.weights[i][0], dtype=np.float64)
        w_scale = float(np.max(np.abs(w))) or 1.0
        rows = mp._blocks(w.shape[0], params.rows)
        cols = mp._blocks(w.shape[1], cfg.logical_cols)
        programmed, tiles = {}, {}
        for rt, (r0, r1) in enumerate(rows):
            for ct, (c0, c1) in enumerate(cols):
                path = root / "tiles" / _tile_name(i, rt, ct)
                if not path.exists():
                    raise ConfigError(f"missing tile file {path}")
                try:
                    xbar = fcm.load(path)
                except ValueError as exc:
                    raise ConfigError(f"{path}: {exc}") from None
                if xbar.params != params:
                    raise ConfigError(f"{path}: tile parameters differ from params.cfg")
                tiles[rt, ct] = xbar
                programmed[rt, ct] = mp.program_tile(w[r0:r1, c0:c1], w_scale, params)
        layers[i] = mp.MappedLayer(i, w, w_scale, c["a_scale"], c["adc_range"], rows, cols,
                                   programmed, tiles)
    return mp.MappedNetwork(net, cfg, layers, variation)


# --- manifests ----------------------------------------------------------------

def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    p = Path(path)
    files = sorted(f for f in p.rglob("*") if f.is_file()) if p.is_dir() else [p]
    for f in files:
        if p.is_dir():
            h.update(str(f.relative_to(p)).encode() + b"\0")
        h.update(f.read_bytes())
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    argv: list
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)  # path -> sha256
    results: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    code_version: dict = field(default_factory=lambda: {
        "xbarsim": __version__, "kernels": kernels.BACKEND, "numpy": np.__version__,
        "python": platform.python_version()})
    created: float = field(default_factory=time.time)

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True,
                                         default=_json_default) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        try:
            d = json.loads(read_text(path, "manifest"))
            return cls(**d)
        except (json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"malformed manifest {path}: {exc}") from None

    def changed_inputs(self) -> list:
        return [p for p, dig in self.inputs.items()
                if not Path(p).exists() or file_digest(p) != dig]


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    return str(o)


