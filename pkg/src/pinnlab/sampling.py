"""Sobol collocation sampling and the validation-triggered resampling policy.

The Sobol generator is built from 32-bit direction numbers (dimension 1:
v_j = 2^(32-j); dimension 2: primitive polynomial x+1, m = (1)).  Streams are
randomized by a digital shift (per-dimension XOR mask) drawn from the run
seed, so an unshifted stream reproduces the canonical sequence exactly.
Streams skip the initial origin point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StructuralError

SUPPORTED_COUNTS = (256, 512, 1024)
RESAMPLE_FACTOR = 1.1
_BITS = 32
_SCALE = float(2 ** _BITS)


def _direction_numbers(dim: int) -> np.ndarray:
    """32-bit direction integers for dimensions 1 and 2."""
    if dim not in (1, 2):
        raise ConfigurationError("only 1-D and 2-D Sobol streams are needed here")
    v = np.zeros((dim, _BITS), dtype=np.uint64)
    for k in range(_BITS):
        v[0, k] = 1 << (_BITS - 1 - k)
    if dim == 2:
        v[1, 0] = 1 << (_BITS - 1)
        for k in range(1, _BITS):
            prev = int(v[1, k - 1])
            v[1, k] = prev ^ (prev >> 1)
    return v


class SobolStream:
    """Deterministic low-discrepancy stream over [0,1)^dim.

    ``shift`` is a per-dimension digital-shift mask (None = canonical
    sequence).  Point n is reconstructed directly from the Gray code of n, so
    arbitrary blocks can be generated vectorized.
    """

    def __init__(self, dim: int, shift: np.ndarray | None = None):
        self.dim = dim
        self._v = _direction_numbers(dim)
        if shift is None:
            shift = np.zeros(dim, dtype=np.uint64)
        self._shift = np.asarray(shift, dtype=np.uint64)
        if self._shift.shape != (dim,):
            raise ConfigurationError("digital shift must provide one mask per dimension")
        self._index = 1  # index 0 is the origin, skipped

    def take(self, count: int) -> np.ndarray:
        """Next ``count`` points as a (count, dim) array."""
        n = np.arange(self._index, self._index + count, dtype=np.uint64)
        self._index += count
        gray = n ^ (n >> np.uint64(1))
        x = np.zeros((count, self.dim), dtype=np.uint64)
        for k in range(_BITS):
            bit = (gray >> np.uint64(k)) & np.uint64(1)
            for d in range(self.dim):
                x[:, d] ^= self._v[d, k] * bit
        x ^= self._shift[None, :]
        return x.astype(np.float64) / _SCALE

    def next(self) -> np.ndarray:
        """Next single point."""
        return self.take(1)[0]


@dataclass(frozen=True)
class CollocationSet:
    """Interior / initial / spatial-boundary point sets of equal size."""

    interior: np.ndarray  # (n, 2) points in (0,T) x (x_lo, x_hi)
    initial: np.ndarray  # (n, 2) points (0, x)
    boundary: np.ndarray  # (n, 2) points (t, x in {x_lo, x_hi}), wall-interleaved

    @property
    def n(self) -> int:
        return self.interior.shape[0]


def _draw_shift(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.integers(0, 2 ** _BITS, size=dim, dtype=np.uint64)


def _interior_points(stream: SobolStream, n: int, domain) -> np.ndarray:
    pts = np.empty((0, 2))
    while pts.shape[0] < n:
        raw = stream.take(n + 16)
        keep = (raw[:, 0] > 0.0) & (raw[:, 1] > 0.0)
        pts = np.concatenate([pts, raw[keep]])
    pts = pts[:n]
    out = np.empty_like(pts)
    out[:, 0] = domain.t_max * pts[:, 0]
    out[:, 1] = domain.x_lo + (domain.x_hi - domain.x_lo) * pts[:, 1]
    return out


def _one_set(rng: np.random.Generator, n: int, domain) -> CollocationSet:
    interior = _interior_points(SobolStream(2, _draw_shift(rng, 2)), n, domain)
    xs = SobolStream(1, _draw_shift(rng, 1)).take(n)[:, 0]
    initial = np.column_stack([np.zeros(n), domain.x_lo + (domain.x_hi - domain.x_lo) * xs])
    ts = domain.t_max * SobolStream(1, _draw_shift(rng, 1)).take(n)[:, 0]
    walls = np.where(np.arange(n) % 2 == 0, domain.x_lo, domain.x_hi)
    boundary = np.column_stack([ts, walls])
    return CollocationSet(interior, initial, boundary)


class CollocationSampler:
    """Owns the Sobol streams of one training run; resampling draws fresh
    digital shifts from the run's seed sequence."""

    def __init__(self, n: int, seed, domain):
        if n not in SUPPORTED_COUNTS:
            raise ConfigurationError(
                f"collocation count {n} not in supported set {SUPPORTED_COUNTS}")
        self.n = n
        self.domain = domain
        self._rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.train, self.validation = self._fresh()

    def _fresh(self) -> tuple[CollocationSet, CollocationSet]:
        return _one_set(self._rng, self.n, self.domain), \
            _one_set(self._rng, self.n, self.domain)

    def resample(self) -> tuple[CollocationSet, CollocationSet]:
        self.train, self.validation = self._fresh()
        return self.train, self.validation


def sample_sets(n: int, seed, domain) -> tuple[CollocationSet, CollocationSet]:
    """One-shot (train, validation) pair; both sets share shape, not shifts."""
    sampler = CollocationSampler(n, seed, domain)
    return sampler.train, sampler.validation


def should_resample(train_loss: float, val_loss: float) -> bool:
    """Overfitting trigger: validation loss above 1.1x the training loss."""
    if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
        raise StructuralError("resample check needs finite losses")
    if train_loss < 0 or val_loss < 0:
        raise StructuralError("losses must be non-negative")
    return val_loss > RESAMPLE_FACTOR * train_loss
