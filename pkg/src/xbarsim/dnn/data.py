"""Dataset readers (MNIST IDX, CIFAR-10 binary) and offline stand-ins."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..params import ConfigError

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801
CIFAR_RECORD = 1 + 3 * 32 * 32


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray  # (n, C, H, W) float32 in [0, 1]
    y: np.ndarray  # (n,) int64
    name: str = ""

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx], self.name)


def _read(path: Path) -> bytes:
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise ConfigError(f"dataset file not found: {path}") from None
    return gzip.decompress(raw) if path.suffix == ".gz" else raw


def read_idx(path: str | Path) -> np.ndarray:
    """Read an IDX file (big-endian header, unsigned-byte payload)."""
    data = _read(Path(path))
    if len(data) < 8:
        raise ConfigError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack_from(">I", data, 0)
    if magic == IDX_IMAGES:
        if len(data) < 16:
            raise ConfigError(f"{path}: truncated IDX header")
        n, rows, cols = struct.unpack_from(">III", data, 4)
        shape, off = (n, rows, cols), 16
    elif magic == IDX_LABELS:
        (n,) = struct.unpack_from(">I", data, 4)
        shape, off = (n,), 8
    else:
        raise ConfigError(f"{path}: bad IDX magic 0x{magic:08x} (wrong file or byte order)")
    need = int(np.prod(shape))
    if len(data) - off != need:
        raise ConfigError(f"{path}: payload is {len(data) - off} bytes, header implies {need}")
    return np.frombuffer(data, dtype=np.uint8, offset=off).reshape(shape)


def write_idx(path: str | Path, array: np.ndarray) -> None:
    a = np.ascontiguousarray(array, dtype=np.uint8)
    if a.ndim == 3:
        head = struct.pack(">IIII", IDX_IMAGES, *a.shape)
    elif a.ndim == 1:
        head = struct.pack(">II", IDX_LABELS, a.shape[0])
    else:
        raise ValueError("IDX writer takes (n, rows, cols) images or (n,) labels")
    Path(path).write_bytes(head + a.tobytes())


def _find(root: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
        if (root / name).exists():
            return root / name
    raise ConfigError(f"no {stem}[.gz] under {root}")


def load_mnist(path: str | Path, split: str = "train") -> Dataset:
    """Load MNIST from a directory holding the standard IDX files."""
    prefix = {"train": "train", "test": "t10k"}.get(split)
    if prefix is None:
        raise ConfigError("split must be 'train' or 'test'")
    root = Path(path)
    images = read_idx(_find(root, f"{prefix}-images-idx3-ubyte"))
    labels = read_idx(_find(root, f"{prefix}-labels-idx1-ubyte"))
    if images.ndim != 3 or labels.ndim != 1 or len(images) != len(labels):
        raise ConfigError(f"MNIST {split}: image/label counts disagree")
    x = (images.astype(np.float32) / 255.0)[:, None]
    return Dataset(x, labels.astype(np.int64), f"mnist-{split}")


def read_cifar_batch(path: str | Path):
    data = _read(Path(path))
    if len(data) == 0 or len(data) % CIFAR_RECORD:
        raise ConfigError(f"{path}: size {len(data)} is not a multiple of {CIFAR_RECORD}-byte records")
    rec = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise ConfigError(f"{path}: label byte above 9")
    return rec[:, 1:].reshape(-1, 3, 32, 32), labels


def write_cifar_batch(path: str | Path, images: np.ndarray, labels: np.ndarray) -> None:
    images = np.ascontiguousarray(images, dtype=np.uint8).reshape(len(labels), -1)
    rec = np.concatenate([np.asarray(labels, dtype=np.uint8)[:, None], images], axis=1)
    Path(path).write_bytes(rec.tobytes())


def load_cifar10(path: str | Path, split: str = "train") -> Dataset:
    """Load CIFAR-10 from a directory of binary batches (data_batch_*.bin, test_batch.bin)."""
    root = Path(path)
    if split == "train":
        files = sorted(root.glob("data_batch_*.bin"))
    elif split == "test":
        files = [root / "test_batch.bin"]
    else:
        raise ConfigError("split must be 'train' or 'test'")
    if not files or not all(f.exists() for f in files):
        raise ConfigError(f"no CIFAR-10 {split} batches under {root}")
    parts = [read_cifar_batch(f) for f in files]
    x = np.concatenate([p[0] for p in parts]).astype(np.float32) / 255.0
    y = np.concatenate([p[1] for p in parts])
    return Dataset(x, y, f"cifar10-{split}")


# --- offline stand-ins ------------------------------------------------------

def digits(split: str = "train", test_fraction: float = 0.35, seed: int = 0) -> Dataset:
    """scikit-learn's 8x8 handwritten digits, split deterministically."""
    from sklearn.datasets import load_digits

    d = load_digits()
    x = (d.images.astype(np.float32) / 16.0)[:, None]
    y = d.target.astype(np.int64)
    order = np.random.default_rng(seed).permutation(len(y))
    n_test = int(round(test_fraction * len(y)))
    idx = order[:n_test] if split == "test" else order[n_test:]
    return Dataset(x[idx], y[idx], f"digits-{split}")


def _shape_mask(kind: int, yy, xx, cy, cx, r, angle):
    dy, dx = yy - cy, xx - cx
    c, s = np.cos(angle), np.sin(angle)
    u, v = c * dx + s * dy, -s * dx + c * dy
    if kind == 0:  # disk
        return u * u + v * v <= r * r
    if kind == 1:  # square
        return np.maximum(np.abs(u), np.abs(v)) <= 0.8 * r
    if kind == 2:  # triangle
        return (v <= 0.7 * r) & (v >= 1.7 * np.abs(u) - r)
    if kind == 3:  # cross
        a, b = np.abs(u), np.abs(v)
        return ((a <= 0.3 * r) & (b <= r)) | ((b <= 0.3 * r) & (a <= r))
    rr = u * u + v * v  # ring
    return (rr <= r * r) & (rr >= (0.55 * r) ** 2)


def shapes10(n: int, seed: int = 0, size: int = 16, noise: float = 0.12) -> Dataset:
    """Synthetic 3-channel 10-class image set used in place of CIFAR-10.

    Class = one of five shapes times a warm or cool palette. Position, scale,
    rotation, hue, background and a distractor blob vary per sample, and
    Gaussian pixel noise is added.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    x = np.empty((n, 3, size, size), dtype=np.float32)
    y = rng.integers(0, 10, n)
    warm = np.array([[0.9, 0.35, 0.15], [0.85, 0.7, 0.1], [0.8, 0.2, 0.45]])
    cool = np.array([[0.15, 0.35, 0.9], [0.1, 0.7, 0.6], [0.45, 0.25, 0.85]])
    for k in range(n):
        shape, pal = divmod(int(y[k]), 2)
        bg = rng.uniform(0.15, 0.6, 3)
        img = np.broadcast_to(bg[:, None, None], (3, size, size)).copy()
        img += 0.15 * (xx / size - 0.5) * rng.uniform(-1, 1, 3)[:, None, None]
        # distractor
        m = _shape_mask(rng.integers(0, 5), yy, xx, *rng.uniform(0, size, 2),
                        rng.uniform(1.5, 2.5), rng.uniform(0, np.pi))
        img[:, m] = rng.uniform(0.2, 0.8, 3)[:, None]
        color = (warm if pal == 0 else cool)[rng.integers(0, 3)] + rng.normal(0, 0.08, 3)
        r = rng.uniform(0.22, 0.36) * size
        cy, cx = rng.uniform(r, size - r, 2)
        m = _shape_mask(shape, yy, xx, cy, cx, r, rng.uniform(0, 2 * np.pi))
        img[:, m] = color[:, None]
        img += rng.normal(0, noise, img.shape)
        x[k] = np.clip(img, 0, 1)
    return Dataset(x, y.astype(np.int64), "shapes10")
