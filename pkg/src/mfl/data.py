"""Datasets: MNIST IDX ingestion, parity labels, node partitions, synthetic quadratics."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import DomainError, StructuralError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

SCHEMES = ("svm_linear", "logistic")


class FormatError(ValueError):
    """Malformed IDX file."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


@dataclass(frozen=True)
class Dataset:
    """Rows of ``X`` are samples, ``y`` their labels.

    ``curv`` is only used by the quadratic model: per-sample diagonal
    curvature weights (``None`` means all ones).
    """

    X: np.ndarray
    y: np.ndarray
    curv: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise StructuralError(f"X must be 2-D, got shape {X.shape}")
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise StructuralError("X and y disagree on sample count")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.curv is not None:
            curv = np.asarray(self.curv, dtype=np.float64)
            if curv.shape != X.shape:
                raise StructuralError("curv must match X in shape")
            curv.flags.writeable = False
            object.__setattr__(self, "curv", curv)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        curv = None if self.curv is None else self.curv[idx]
        return Dataset(self.X[idx], self.y[idx], curv)


@dataclass(frozen=True)
class RawDigits:
    images: np.ndarray  # (n, rows*cols) in [0, 1]
    labels: np.ndarray  # digits 0..9

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Partition:
    node_data: tuple[Dataset, ...]
    indices: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        if len(self.node_data) < 1:
            raise DomainError("a partition needs at least one node")
        dims = {d.dim for d in self.node_data}
        if len(dims) != 1:
            raise StructuralError(f"node datasets disagree on dim: {sorted(dims)}")

    @property
    def N(self) -> int:
        return len(self.node_data)

    @property
    def sizes(self) -> list[int]:
        return [len(d) for d in self.node_data]

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def dim(self) -> int:
        return self.node_data[0].dim

    @property
    def global_dataset(self) -> Dataset:
        # cached by hand; frozen dataclass
        cached = self.__dict__.get("_global")
        if cached is None:
            parts = self.node_data
            curv = None
            if any(d.curv is not None for d in parts):
                curv = np.concatenate([np.ones_like(d.X) if d.curv is None else d.curv for d in parts])
            cached = Dataset(
                np.concatenate([d.X for d in parts]),
                np.concatenate([d.y for d in parts]),
                curv,
            )
            object.__setattr__(self, "_global", cached)
        return cached


# --------------------------------------------------------------------------
# IDX files


def _read_maybe_gzip(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _header(buf: bytes, n_fields: int, magic: int, what: str) -> tuple[int, ...]:
    need = 4 * (1 + n_fields)
    if len(buf) < need:
        raise FormatError(f"{what} file too short for header", len(buf))
    fields = struct.unpack(f">{1 + n_fields}I", buf[:need])
    if fields[0] != magic:
        raise FormatError(f"bad {what} magic 0x{fields[0]:08x}, expected 0x{magic:08x}", 0)
    return fields[1:]


def read_idx_images(path) -> np.ndarray:
    buf = _read_maybe_gzip(path)
    count, rows, cols = _header(buf, 3, IMAGES_MAGIC, "images")
    body = buf[16:]
    need = count * rows * cols
    if len(body) < need:
        raise FormatError(f"images file truncated: expected {need} pixel bytes", len(buf))
    return np.frombuffer(body, dtype=np.uint8, count=need).reshape(count, rows * cols)


def read_idx_labels(path) -> np.ndarray:
    buf = _read_maybe_gzip(path)
    (count,) = _header(buf, 1, LABELS_MAGIC, "labels")
    body = buf[8:]
    if len(body) < count:
        raise FormatError(f"labels file truncated: expected {count} label bytes", len(buf))
    labels = np.frombuffer(body, dtype=np.uint8, count=count)
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise FormatError(f"label {labels[bad]} is not a digit", 8 + bad)
    return labels


def load_idx(images_path, labels_path) -> RawDigits:
    """Read an IDX image/label pair (raw or gzip) and scale pixels by 1/255."""
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(pixels) != len(labels):
        raise FormatError(f"image count {len(pixels)} != label count {len(labels)}", 4)
    return RawDigits(pixels.astype(np.float64) / 255.0, labels.astype(np.int64))


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray, rows: int = 28, cols: int = 28):
    """Write uint8 images ``(n, rows*cols)`` and labels as uncompressed IDX."""
    images = np.asarray(images, dtype=np.uint8).reshape(-1, rows * cols)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    Path(images_path).write_bytes(struct.pack(">4I", IMAGES_MAGIC, len(images), rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", LABELS_MAGIC, len(labels)) + labels.tobytes())


# --------------------------------------------------------------------------
# labels and MNIST subsets


def binarize(digit: int, scheme: str = "svm_linear") -> float:
    """Parity label: even digits are the positive class."""
    if scheme not in SCHEMES:
        raise DomainError(f"unknown label scheme {scheme!r}")
    if not 0 <= int(digit) <= 9:
        raise DomainError(f"digit {digit} outside 0..9")
    even = int(digit) % 2 == 0
    if scheme == "svm_linear":
        return 1.0 if even else -1.0
    return 1.0 if even else 0.0


def to_dataset(raw: RawDigits, scheme: str = "svm_linear") -> Dataset:
    """Append the constant bias feature and binarize labels."""
    if scheme not in SCHEMES:
        raise DomainError(f"unknown label scheme {scheme!r}")
    even = raw.labels % 2 == 0
    y = np.where(even, 1.0, -1.0 if scheme == "svm_linear" else 0.0)
    X = np.hstack([raw.images, np.ones((len(raw), 1))])
    return Dataset(X, y)


def take_subset(raw: RawDigits, n: int, seed: int) -> RawDigits:
    """First ``n`` samples of a seeded shuffle."""
    if n > len(raw):
        raise DomainError(f"requested {n} samples from {len(raw)}")
    order = np.random.default_rng(seed).permutation(len(raw))[:n]
    return RawDigits(raw.images[order], raw.labels[order])


def load_mnist(images_path, labels_path, n: int | None = 5000, scheme: str = "svm_linear", seed: int = 0) -> Dataset:
    raw = load_idx(images_path, labels_path)
    if n is not None:
        raw = take_subset(raw, n, seed)
    return to_dataset(raw, scheme)


# --------------------------------------------------------------------------
# partitions


def partition_uniform(dataset: Dataset, N: int, seed: int) -> Partition:
    """Seeded shuffle, then contiguous near-equal blocks (sizes differ by at most one)."""
    if N < 1:
        raise DomainError("N must be >= 1")
    if N > len(dataset):
        raise DomainError(f"cannot split {len(dataset)} samples across {N} nodes")
    order = np.random.default_rng(seed).permutation(len(dataset))
    blocks = tuple(np.array_split(order, N))
    return Partition(tuple(dataset.subset(b) for b in blocks), blocks)


def partition_replicated(dataset: Dataset, N: int) -> Partition:
    """Every node holds the whole dataset (zero gradient divergence)."""
    if N < 1:
        raise DomainError("N must be >= 1")
    idx = np.arange(len(dataset))
    return Partition(tuple(dataset for _ in range(N)), tuple(idx for _ in range(N)))


# --------------------------------------------------------------------------
# synthetic quadratic problems


@dataclass(frozen=True)
class SyntheticProblem:
    """Node losses ``F_i(w) = 1/2 sum_l H_il (w_l - c_il)^2`` with known constants.

    With unit curvature ``beta = 1``, ``delta_i = ||c_bar - c_i||`` exactly and
    ``w* = c_bar``.  With heterogeneous curvature the gradient divergence is
    unbounded on the whole space, so ``delta_i`` is a valid bound only inside
    the ball of radius ``region_radius`` around the origin.
    """

    partition: Partition
    centers: np.ndarray
    curvatures: np.ndarray
    beta: float
    delta_i: np.ndarray
    delta: float
    w_star: np.ndarray
    region_radius: float | None = None

    def in_region(self, points) -> bool:
        if self.region_radius is None:
            return True
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return bool(np.all(np.linalg.norm(pts, axis=1) <= self.region_radius))

    def global_grad(self, w) -> np.ndarray:
        sizes = np.asarray(self.partition.sizes, dtype=np.float64)
        wts = sizes / sizes.sum()
        H = self.curvatures
        return (wts[:, None] * H * (np.asarray(w)[None, :] - self.centers)).sum(axis=0)

    def lipschitz_on(self, points) -> float:
        """Exact Lipschitz constant of the global loss on the hull of ``points``.

        The gradient is affine, so its norm is convex and peaks at a vertex.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return max(float(np.linalg.norm(self.global_grad(p))) for p in pts)


def _ball_points(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    direction = rng.standard_normal((n, dim))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = radius * rng.random((n, 1)) ** (1.0 / dim)
    return direction / norms * r


def synthetic_from_centers(
    centers,
    sizes: Sequence[int] | None = None,
    curvatures=None,
    region_radius: float | None = None,
) -> SyntheticProblem:
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    N, dim = centers.shape
    sizes = [1] * N if sizes is None else [int(s) for s in sizes]
    if len(sizes) != N or min(sizes) < 1:
        raise DomainError("need one positive size per center")
    H = np.ones_like(centers) if curvatures is None else np.asarray(curvatures, dtype=np.float64).reshape(N, dim)
    if np.any(H <= 0):
        raise DomainError("curvatures must be positive")
    heterogeneous = not np.all(H == H[0])
    if heterogeneous and region_radius is None:
        raise DomainError("heterogeneous curvature needs a region_radius for delta")

    wts = np.asarray(sizes, dtype=np.float64) / sum(sizes)
    H_bar = (wts[:, None] * H).sum(axis=0)
    b_bar = (wts[:, None] * H * centers).sum(axis=0)
    w_star = b_bar / H_bar
    # grad F - grad F_i = (H_bar - H_i) w - (b_bar - H_i c_i)
    offsets = b_bar[None, :] - H * centers
    delta_i = np.linalg.norm(offsets, axis=1)
    if heterogeneous:
        delta_i = delta_i + np.abs(H_bar[None, :] - H).max(axis=1) * region_radius
    nodes = tuple(
        Dataset(np.repeat(centers[i : i + 1], s, axis=0), np.zeros(s), np.repeat(H[i : i + 1], s, axis=0))
        for i, s in enumerate(sizes)
    )
    idx, start = [], 0
    for s in sizes:
        idx.append(np.arange(start, start + s))
        start += s
    return SyntheticProblem(
        partition=Partition(nodes, tuple(idx)),
        centers=centers,
        curvatures=H,
        beta=float(H.max()),
        delta_i=delta_i,
        delta=float(np.dot(wts, delta_i)),
        w_star=w_star,
        region_radius=region_radius if heterogeneous else None,
    )


def make_synthetic(
    dim: int,
    N: int,
    seed: int,
    spread: float,
    samples_per_node: int | Sequence[int] = 10,
    curvature_spread: float = 0.0,
    region_radius: float | None = None,
) -> SyntheticProblem:
    """Random node centers within ``spread`` of the origin.

    ``curvature_spread`` in ``[0, 1)`` draws per-node diagonal curvatures from
    ``[1 - curvature_spread, 1]`` (the largest entry is pinned to 1 so
    ``beta == 1``).  In that case ``region_radius`` defaults to
    ``2 * spread + 1``.
    """
    if dim < 1 or N < 1:
        raise DomainError("dim and N must be >= 1")
    if spread < 0:
        raise DomainError("spread must be nonnegative")
    if not 0 <= curvature_spread < 1:
        raise DomainError("curvature_spread must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    if spread == 0:
        centers = np.repeat(_ball_points(rng, 1, dim, 1.0), N, axis=0)
    else:
        centers = _ball_points(rng, N, dim, spread)
    sizes = [samples_per_node] * N if np.isscalar(samples_per_node) else list(samples_per_node)
    curv = None
    if curvature_spread > 0:
        curv = 1.0 - curvature_spread * rng.random((N, dim))
        curv.flat[0] = 1.0
        if region_radius is None:
            region_radius = 2.0 * spread + 1.0
    return synthetic_from_centers(centers, sizes, curv, region_radius)
