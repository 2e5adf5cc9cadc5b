"""Coarse trajectory discretization.

Each resampled point is assigned to an enlarged per-key "pixel" region and
the resulting region index sequence is encoded one-hot (T x 26) for the
neural decoder. Regions deliberately overlap (default ratio 2) so that a
noisy trajectory still lands in the intended key's region.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import EncodedTrajectory, Key, KeyboardLayout

N_REGIONS = 26


class RegionShape(str, Enum):
    SQUARE = "square"
    ELLIPSE = "ellipse"


class IndexEncoding(str, Enum):
    ONE_HOT = "one_hot"
    INTEGER = "integer"


@dataclass(frozen=True)
class DiscretizerConfig:
    region_shape: RegionShape = RegionShape.SQUARE
    ratio: float = 2.0
    encoding: IndexEncoding = IndexEncoding.ONE_HOT

    def __post_init__(self):
        if self.ratio <= 0:
            raise ValueError("region ratio must be positive")
        object.__setattr__(self, "region_shape", RegionShape(self.region_shape))
        object.__setattr__(self, "encoding", IndexEncoding(self.encoding))


@dataclass(frozen=True)
class DiscretizedTrajectory:
    """Per-timestep region indices in [0, 25] plus their one-hot matrix."""

    indices: np.ndarray
    one_hot: np.ndarray | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).copy()
        if idx.ndim != 1:
            raise ValueError("indices must be one-dimensional")
        if idx.size and (idx.min() < 0 or idx.max() >= N_REGIONS):
            raise ValueError("region indices must lie in [0, 25]")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        if self.one_hot is not None:
            oh = np.asarray(self.one_hot, dtype=np.float64).copy()
            if oh.shape != (len(idx), N_REGIONS):
                raise ValueError("one_hot must have shape (T, 26)")
            rows_ok = (oh.sum(axis=1) == 1.0).all() and np.isin(oh, (0.0, 1.0)).all()
            if not rows_ok or not (oh.argmax(axis=1) == idx).all():
                raise ValueError("one_hot rows must be unit vectors matching indices")
            oh.flags.writeable = False
            object.__setattr__(self, "one_hot", oh)

    def __len__(self) -> int:
        return len(self.indices)


def region_contains(point, key: Key, cfg: DiscretizerConfig) -> bool:
    """Whether a point falls in the key's enlarged region (boundary inclusive).

    Square: half-extents ratio*w/2 and ratio*h/2 (region side = ratio x key
    dimension). Ellipse: semi-axes ratio*w and ratio*h.
    """
    dx = point[0] - key.cx
    dy = point[1] - key.cy
    if cfg.region_shape is RegionShape.SQUARE:
        return abs(dx) <= cfg.ratio * key.width / 2 and abs(dy) <= cfg.ratio * key.height / 2
    a = cfg.ratio * key.width
    b = cfg.ratio * key.height
    return (dx / a) ** 2 + (dy / b) ** 2 <= 1.0


def discretize(
    enc: EncodedTrajectory, layout: KeyboardLayout, cfg: DiscretizerConfig | None = None
) -> DiscretizedTrajectory:
    """Map each point to a region index (alphabetical order, a=0 .. z=25).

    A point inside one or more regions gets the containing key with the
    nearest center; a point outside every region gets the nearest key
    overall. Distance ties break alphabetically.
    """
    cfg = cfg or DiscretizerConfig()
    pts = enc.points
    cx = np.array([k.cx for k in layout.keys])
    cy = np.array([k.cy for k in layout.keys])
    w = np.array([k.width for k in layout.keys])
    h = np.array([k.height for k in layout.keys])

    dx = pts[:, 0:1] - cx[None, :]
    dy = pts[:, 1:2] - cy[None, :]
    dist2 = dx * dx + dy * dy

    if cfg.region_shape is RegionShape.SQUARE:
        inside = (np.abs(dx) <= cfg.ratio * w[None, :] / 2) & (
            np.abs(dy) <= cfg.ratio * h[None, :] / 2
        )
    else:
        inside = (dx / (cfg.ratio * w[None, :])) ** 2 + (dy / (cfg.ratio * h[None, :])) ** 2 <= 1.0

    # argmin takes the first (alphabetically smallest) column on exact ties
    masked = np.where(inside, dist2, np.inf)
    indices = np.where(inside.any(axis=1), masked.argmin(axis=1), dist2.argmin(axis=1))

    one_hot = encode_one_hot(indices) if cfg.encoding is IndexEncoding.ONE_HOT else None
    return DiscretizedTrajectory(indices=indices, one_hot=one_hot)


def encode_one_hot(indices) -> np.ndarray:
    """(T, 26) matrix with a single 1 per row at the region index."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= N_REGIONS):
        raise ValueError("region indices must lie in [0, 25]")
    out = np.zeros((len(idx), N_REGIONS), dtype=np.float64)
    out[np.arange(len(idx)), idx] = 1.0
    return out


def encode_integer(indices) -> list[int]:
    """Ablation encoding: a -> 1, b -> 2, ... z -> 26."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= N_REGIONS):
        raise ValueError("region indices must lie in [0, 25]")
    return [int(i) + 1 for i in idx]
