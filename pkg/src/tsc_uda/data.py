"""Seeded synthetic source/target tasks, named RNG streams and epoch-based batching."""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

KINDS = ("two-moons-rotation", "gaussian-blobs-shift")


def stream_seed(seed: int, name: str) -> np.random.SeedSequence:
    """Independent seed sequence for consumer ``name`` under a master seed."""
    return np.random.SeedSequence([int(seed) & (2**64 - 1), zlib.crc32(name.encode())])


def rng_stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(stream_seed(seed, name))


def derive_seed(seed: int, name: str) -> int:
    return int(stream_seed(seed, name).generate_state(1, np.uint64)[0])


@dataclass
class Domain:
    xs: np.ndarray
    ys: np.ndarray | None
    name: str

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=np.float64)
        if self.ys is not None:
            self.ys = np.asarray(self.ys, dtype=np.int64)
            if self.ys.shape != (len(self.xs),):
                raise ValueError(f"{self.name}: {len(self.xs)} samples but labels shape {self.ys.shape}")

    def __len__(self):
        return len(self.xs)

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def unlabeled(self) -> "Domain":
        """Copy with labels removed; this is the only view training code receives for the target."""
        return Domain(self.xs, None, self.name)


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "two-moons-rotation"
    n_source: int = 500
    n_target: int = 500
    shift: float = 35.0      # rotation in degrees, or translation magnitude for blobs
    noise: float = 0.1
    classes: int = 2
    seed: int | None = None  # None: derived from the experiment seed

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"dataset.kind must be one of {KINDS}, got {self.kind!r}")
        if self.n_source <= 0 or self.n_target <= 0:
            raise ValueError(f"dataset sizes must be positive, got {self.n_source}/{self.n_target}")
        if self.noise < 0:
            raise ValueError(f"dataset.noise must be >= 0, got {self.noise}")
        if self.classes < 2:
            raise ValueError(f"dataset.classes must be >= 2, got {self.classes}")
        if self.kind == "two-moons-rotation" and self.classes != 2:
            raise ValueError("two-moons-rotation has exactly 2 classes")
        if min(self.n_source, self.n_target) < self.classes:
            raise ValueError("each domain needs at least one sample per class")


def _balanced_labels(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(np.arange(n) % k)


def _moons(n: int, noise: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    y = _balanced_labels(n, 2, rng)
    t = rng.uniform(0.0, np.pi, n)
    x = np.where(y == 0, np.cos(t), 1.0 - np.cos(t))
    z = np.where(y == 0, np.sin(t), 0.5 - np.sin(t))
    pts = np.stack([x, z], axis=1) + noise * rng.standard_normal((n, 2))
    return pts, y


MOONS_CENTER = np.array([0.5, 0.25])


def _rotate(pts: np.ndarray, degrees: float) -> np.ndarray:
    a = np.deg2rad(degrees)
    rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    return (pts - MOONS_CENTER) @ rot.T + MOONS_CENTER


def _blobs(n: int, k: int, noise: float, offset: np.ndarray, rng: np.random.Generator):
    angles = 2 * np.pi * np.arange(k) / k
    centers = 2.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    y = _balanced_labels(n, k, rng)
    pts = centers[y] + offset + noise * rng.standard_normal((n, 2))
    return pts, y


def generate(spec: DatasetSpec) -> tuple[Domain, Domain]:
    """Draw a labeled source domain and a shifted target domain.

    Two moons: the target is rotated by ``shift`` degrees about the moons'
    centre.  Blobs: K gaussian clusters on a circle; the target is translated
    by ``shift`` along the diagonal.  Labels are balanced (``n mod K`` extra
    samples go to the lowest classes) so every class is present.
    """
    if spec.seed is None:
        raise ValueError("dataset seed unresolved; pass an explicit seed")
    rng = rng_stream(spec.seed, "generation")
    if spec.kind == "two-moons-rotation":
        xs, ys = _moons(spec.n_source, spec.noise, rng)
        xt, yt = _moons(spec.n_target, spec.noise, rng)
        xt = _rotate(xt, spec.shift)
    else:
        offset = spec.shift * np.ones(2) / np.sqrt(2)
        xs, ys = _blobs(spec.n_source, spec.classes, spec.noise, np.zeros(2), rng)
        xt, yt = _blobs(spec.n_target, spec.classes, spec.noise, offset, rng)
    return Domain(xs, ys, "source"), Domain(xt, yt, "target")


class BatchSampler:
    """Shuffled, without-replacement minibatches; reshuffles at each epoch.

    The last batch of an epoch may be short so that every index is drawn
    exactly once per epoch.
    """

    def __init__(self, domain: Domain, batch_size: int, rng: np.random.Generator):
        if not 0 < batch_size <= len(domain):
            raise ValueError(f"batch size {batch_size} must be in [1, {len(domain)}]")
        self.domain = domain
        self.batch_size = batch_size
        self.rng = rng
        self.epoch = 0
        self._order = rng.permutation(len(domain))
        self._pos = 0

    def next_batch(self) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        if self._pos >= len(self._order):
            self._order = self.rng.permutation(len(self.domain))
            self._pos = 0
            self.epoch += 1
        idx = self._order[self._pos:self._pos + self.batch_size]
        self._pos += len(idx)
        ys = None if self.domain.ys is None else self.domain.ys[idx]
        return idx, self.domain.xs[idx], ys

    def __iter__(self):
        while True:
            yield self.next_batch()


def sample_batch(sampler: BatchSampler):
    return sampler.next_batch()


# ---------------------------------------------------------------------------
# CSV exchange: x0..x{d-1}, label, domain


def write_csv(path, source: Domain, target: Domain) -> None:
    path = Path(path)
    d = source.dim
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(d)] + ["label", "domain"])
        for dom in (source, target):
            ys = dom.ys if dom.ys is not None else [None] * len(dom)
            for row, y in zip(dom.xs, ys):
                w.writerow([repr(float(v)) for v in row] + ["" if y is None else int(y), dom.name])


def read_csv(path) -> tuple[Domain, Domain]:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[-2:] != ["label", "domain"]:
        raise ValueError(f"{path}: header must end with label,domain, got {header}")
    d = len(header) - 2
    out = {}
    for name in ("source", "target"):
        sel = [r for r in body if r[-1] == name]
        xs = np.array([[float(v) for v in r[:d]] for r in sel]).reshape(len(sel), d)
        labels = [r[d] for r in sel]
        ys = None if any(v == "" for v in labels) else np.array([int(v) for v in labels])
        out[name] = Domain(xs, ys, name)
    return out["source"], out["target"]


def with_seed(spec: DatasetSpec, seed: int) -> DatasetSpec:
    return replace(spec, seed=seed)
