"""Layer specs, the network text format, and the floating-point graph.

Mappable layers (conv, fully_connected) keep their weights in crossbar
orientation: a ``(fan_in, fan_out)`` matrix ``W`` plus a bias vector. For a
convolution the fan-in index runs over ``(in_channel, ky, kx)``, matching the
column order of :func:`xbarsim.kernels.im2col`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import kernels
from ..params import ConfigError

KINDS = ("conv", "fully_connected", "relu", "maxpool", "flatten", "softmax_loss")
MAPPABLE = ("conv", "fully_connected")
_ALIASES = {"fc": "fully_connected", "pool": "maxpool", "softmax": "softmax_loss"}
_KEYS = {
    "conv": {"out", "kernel", "stride", "pad"},
    "fully_connected": {"out"},
    "maxpool": {"kernel", "stride"},
    "relu": set(), "flatten": set(), "softmax_loss": set(),
}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out: int = 0
    kernel: int = 1
    stride: int = 1
    pad: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in MAPPABLE and self.out < 1:
            raise ConfigError(f"{self.kind} needs out >= 1")
        if self.kernel < 1 or self.stride < 1 or self.pad < 0:
            raise ConfigError(f"bad hyperparameters for {self.kind}: kernel/stride >= 1, pad >= 0")

    @property
    def mappable(self) -> bool:
        return self.kind in MAPPABLE

    def to_line(self) -> str:
        keys = sorted(_KEYS[self.kind])
        return " ".join([self.kind] + [f"{k}={getattr(self, k)}" for k in keys])


def out_shape(spec: LayerSpec, shape: tuple) -> tuple:
    """Per-sample output shape of a layer; raises ConfigError on mismatch."""
    if spec.kind in ("conv", "maxpool"):
        if len(shape) != 3:
            raise ConfigError(f"{spec.kind} expects (C, H, W) input, got {shape}")
        c, h, w = shape
        pad = spec.pad if spec.kind == "conv" else 0
        oh = (h + 2 * pad - spec.kernel) // spec.stride + 1
        ow = (w + 2 * pad - spec.kernel) // spec.stride + 1
        if oh < 1 or ow < 1:
            raise ConfigError(f"{spec.kind} kernel {spec.kernel} does not fit input {shape}")
        return (spec.out if spec.kind == "conv" else c, oh, ow)
    if spec.kind == "flatten":
        return (int(np.prod(shape)),)
    if spec.kind == "fully_connected":
        if len(shape) != 1:
            raise ConfigError(f"fully_connected expects flat input, got {shape}; add a flatten layer")
        return (spec.out,)
    return shape


def fan_in(spec: LayerSpec, shape: tuple) -> int:
    if spec.kind == "conv":
        return shape[0] * spec.kernel * spec.kernel
    return shape[0]


@dataclass
class Network:
    input_shape: tuple
    layers: list
    weights: dict = field(default_factory=dict)  # layer index -> [W, b]

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        shape = self.input_shape
        self.shapes = [shape]
        for i, spec in enumerate(self.layers):
            if spec.kind == "softmax_loss" and i != len(self.layers) - 1:
                raise ConfigError("softmax_loss must be the last layer")
            shape = out_shape(spec, shape)
            self.shapes.append(shape)

    @property
    def mappable(self) -> list[int]:
        return [i for i, s in enumerate(self.layers) if s.mappable]

    def weight_shape(self, i: int) -> tuple[int, int]:
        spec = self.layers[i]
        return fan_in(spec, self.shapes[i]), spec.out

    def init_weights(self, seed: int = 0, dtype=np.float32) -> "Network":
        rng = np.random.default_rng(seed)
        for i in self.mappable:
            r, c = self.weight_shape(i)
            w = rng.standard_normal((r, c)) * np.sqrt(2.0 / r)
            self.weights[i] = [w.astype(dtype), np.zeros(c, dtype=dtype)]
        return self

    def copy(self) -> "Network":
        net = Network(self.input_shape, list(self.layers))
        net.weights = {i: [w.copy(), b.copy()] for i, (w, b) in self.weights.items()}
        return net

    def check_weights(self) -> None:
        for i in self.mappable:
            if i not in self.weights:
                raise ConfigError(f"layer {i} ({self.layers[i].kind}) has no weights")
            w, b = self.weights[i]
            if w.shape != self.weight_shape(i) or b.shape != (self.layers[i].out,):
                raise ConfigError(f"layer {i}: weight shape {w.shape}/{b.shape}, "
                                  f"expected {self.weight_shape(i)}/({self.layers[i].out},)")


# --- text format ---------------------------------------------------------

def parse_network(text: str) -> Network:
    """Parse the line format: an ``input C H W`` (or ``input D``) header, then
    one layer per line as ``kind key=value ...``. ``#`` starts a comment."""
    input_shape = None
    layers = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "input":
            try:
                input_shape = tuple(int(t) for t in rest)
            except ValueError:
                raise ConfigError(f"line {lineno}: input dims must be integers") from None
            if not input_shape or min(input_shape) < 1:
                raise ConfigError(f"line {lineno}: bad input shape")
            continue
        kind = _ALIASES.get(head, head)
        if kind not in KINDS:
            raise ConfigError(f"line {lineno}: unknown layer kind {head!r}")
        kw = {}
        for tok in rest:
            key, sep, val = tok.partition("=")
            if not sep or key not in _KEYS[kind]:
                raise ConfigError(f"line {lineno}: unexpected token {tok!r} for {kind}")
            try:
                kw[key] = int(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be an integer") from None
        if kind == "maxpool" and "stride" not in kw:
            kw["stride"] = kw.get("kernel", 1)
        layers.append(LayerSpec(kind, **kw))
    if input_shape is None:
        raise ConfigError("network description has no 'input' line")
    return Network(input_shape, layers)


def format_network(net: Network) -> str:
    lines = ["input " + " ".join(str(s) for s in net.input_shape)]
    lines += [s.to_line() for s in net.layers]
    return "\n".join(lines) + "\n"


def load_network(path: str | Path) -> Network:
    try:
        return parse_network(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"network file not found: {path}") from None


# --- weights container ---------------------------------------------------

WEIGHTS_MAGIC = b"XBWT"
_WHEAD = struct.Struct("<4sII")  # magic, version, number of layers
_WLAYER = struct.Struct("<III")  # layer index, rows, cols


def weights_to_bytes(net: Network) -> bytes:
    """Per mappable layer: index/rows/cols header, then row-major float32
    ``W`` followed by the float32 bias. All little-endian."""
    net.check_weights()
    parts = [_WHEAD.pack(WEIGHTS_MAGIC, 1, len(net.mappable))]
    for i in net.mappable:
        w, b = net.weights[i]
        parts.append(_WLAYER.pack(i, *w.shape))
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return b"".join(parts)


def weights_from_bytes(data: bytes, net: Network) -> Network:
    if len(data) < _WHEAD.size:
        raise ConfigError("weights file truncated")
    magic, version, count = _WHEAD.unpack_from(data, 0)
    if magic != WEIGHTS_MAGIC or version != 1:
        raise ConfigError("not a weights container (bad magic or version)")
    off = _WHEAD.size
    out = net.copy()
    out.weights = {}
    for _ in range(count):
        if len(data) < off + _WLAYER.size:
            raise ConfigError("weights file truncated")
        i, r, c = _WLAYER.unpack_from(data, off)
        off += _WLAYER.size
        n = 4 * (r * c + c)
        if len(data) < off + n:
            raise ConfigError("weights file truncated")
        arr = np.frombuffer(data, dtype="<f4", count=r * c + c, offset=off).astype(np.float32)
        off += n
        out.weights[i] = [arr[: r * c].reshape(r, c), arr[r * c:]]
    if off != len(data):
        raise ConfigError("trailing bytes in weights container")
    out.check_weights()
    return out


def save_weights(net: Network, path: str | Path) -> None:
    Path(path).write_bytes(weights_to_bytes(net))


def load_weights(path: str | Path, net: Network) -> Network:
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise ConfigError(f"weights file not found: {path}") from None
    return weights_from_bytes(data, net)


# --- floating-point graph --------------------------------------------------

def _float_matmul(i, x, w, b):
    with np.errstate(over="ignore", invalid="ignore"):
        return x @ w


def forward(net: Network, x, matmul=None, keep=False):
    """Run the graph; returns class scores (pre-softmax) and, with ``keep``,
    the per-layer caches needed by :func:`backward`.

    ``matmul(i, X)`` replaces the ``X @ W`` product of mappable layer ``i``
    (X is the patch/feature matrix); this is where crossbar evaluation hooks in.
    """
    matmul = matmul or (lambda i, a: _float_matmul(i, a, *net.weights[i]))
    x = np.asarray(x)
    if x.shape[1:] != net.input_shape:
        raise ConfigError(f"input shape {x.shape[1:]} does not match network {net.input_shape}")
    caches = []
    for i, spec in enumerate(net.layers):
        cache = None
        if spec.kind == "conv":
            n = x.shape[0]
            cols = kernels.im2col(x, spec.kernel, spec.kernel, spec.stride, spec.pad)
            y = matmul(i, cols) + net.weights[i][1]
            _, oh, ow = net.shapes[i + 1]
            cache = (cols, x.shape)
            x = y.reshape(n, oh, ow, spec.out).transpose(0, 3, 1, 2)
        elif spec.kind == "fully_connected":
            cache = x
            x = matmul(i, x) + net.weights[i][1]
        elif spec.kind == "relu":
            cache = x > 0
            x = x * cache
        elif spec.kind == "maxpool":
            n, c, h, w = x.shape
            cols = kernels.im2col(x.reshape(n * c, 1, h, w), spec.kernel, spec.kernel, spec.stride, 0)
            arg = cols.argmax(axis=1)
            _, oh, ow = net.shapes[i + 1]
            cache = (arg, cols.shape, x.shape)
            x = cols[np.arange(cols.shape[0]), arg].reshape(n, c, oh, ow)
        elif spec.kind == "flatten":
            cache = x.shape
            x = x.reshape(x.shape[0], -1)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite activations after layer {i} ({spec.kind})")
        caches.append(cache)
    return (x, caches) if keep else x


def softmax_loss(scores, labels):
    """Mean cross-entropy and its gradient with respect to the scores."""
    z = scores - scores.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    n = scores.shape[0]
    loss = -np.log(np.maximum(p[np.arange(n), labels], 1e-30)).mean()
    grad = p
    grad[np.arange(n), labels] -= 1
    return float(loss), grad / n


def backward(net: Network, caches, dscores):
    """Backprop through the float graph. Returns ``{i: (dW, db)}``."""
    grads = {}
    d = dscores
    for i in range(len(net.layers) - 1, -1, -1):
        spec, cache = net.layers[i], caches[i]
        if spec.kind == "conv":
            cols, xshape = cache
            dy = d.transpose(0, 2, 3, 1).reshape(-1, spec.out)
            w = net.weights[i][0]
            grads[i] = (cols.T @ dy, dy.sum(axis=0))
            if i > 0:
                d = kernels.col2im((dy @ w.T).astype(cols.dtype), xshape, spec.kernel,
                                   spec.kernel, spec.stride, spec.pad)
        elif spec.kind == "fully_connected":
            w = net.weights[i][0]
            grads[i] = (cache.T @ d, d.sum(axis=0))
            d = d @ w.T
        elif spec.kind == "relu":
            d = d * cache
        elif spec.kind == "maxpool":
            arg, cshape, xshape = cache
            dcols = np.zeros(cshape, dtype=d.dtype)
            dcols[np.arange(cshape[0]), arg] = d.reshape(-1)
            n, c, h, w = xshape
            d = kernels.col2im(dcols, (n * c, 1, h, w), spec.kernel, spec.kernel,
                               spec.stride, 0).reshape(xshape)
        elif spec.kind == "flatten":
            d = d.reshape(cache)
    return grads


def predict(net: Network, x, batch: int = 256, matmul=None) -> np.ndarray:
    return np.concatenate([forward(net, x[s:s + batch], matmul).argmax(axis=1)
                           for s in range(0, len(x), batch)])


def accuracy(net: Network, x, y, batch: int = 256, matmul=None) -> float:
    return float((predict(net, x, batch, matmul) == y).mean())


