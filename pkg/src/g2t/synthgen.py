"""Synthetic word-gesture generator for desk-scale training sets.

Samples are built by jittering the word's letter-center waypoints with
isotropic Gaussian noise, linearly interpolating between them, and
applying a centered moving average. Each sample draws from its own seed
stream derived from (seed, word, index), so generation order and
parallelism cannot change the output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geometry import KeyboardLayout, Trajectory


@dataclass(frozen=True)
class SynthConfig:
    noise_sigma: float = 0.25  # key-widths
    smoothing_window: int = 5  # samples; must be odd
    points_per_segment: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be odd and >= 1")
        if self.points_per_segment < 1:
            raise ValueError("points_per_segment must be >= 1")


def _sample_rng(cfg: SynthConfig, word: str, index: int) -> np.random.Generator:
    entropy = [cfg.seed, index] + [ord(c) for c in word]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _smooth(points: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with a symmetrically shrinking window at the
    edges, so the first and last points are returned unchanged."""
    if window == 1 or len(points) < 3:
        return points
    half = window // 2
    n = len(points)
    csum = np.vstack([np.zeros(2), np.cumsum(points, axis=0)])
    out = np.empty_like(points)
    for i in range(n):
        m = min(half, i, n - 1 - i)
        out[i] = (csum[i + m + 1] - csum[i - m]) / (2 * m + 1)
    return out


def generate(word: str, layout: KeyboardLayout, cfg: SynthConfig, count: int) -> list[Trajectory]:
    """`count` synthetic gestures for one word, labeled with the word."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if not word or not (word.isascii() and word.isalpha() and word.islower()):
        raise DataError(f"cannot synthesize word {word!r}: letters must be lowercase a-z")
    try:
        waypoints = np.array([layout.center(c) for c in word], dtype=np.float64)
    except KeyError as e:
        raise DataError(f"word {word!r} uses a letter missing from layout {layout.name!r}") from e

    pps = cfg.points_per_segment
    samples = []
    for index in range(count):
        rng = _sample_rng(cfg, word, index)
        jittered = waypoints + rng.normal(0.0, cfg.noise_sigma, size=waypoints.shape)
        if len(jittered) == 1:
            pts = np.tile(jittered[0], (pps + 1, 1))
        else:
            fractions = np.arange(1, pps + 1) / pps
            parts = [jittered[:1]]
            for a, b in zip(jittered[:-1], jittered[1:]):
                parts.append(a + fractions[:, None] * (b - a))
            pts = np.vstack(parts)
        samples.append(Trajectory(points=_smooth(pts, cfg.smoothing_window), word=word))
    return samples


def generate_dataset(words, layout: KeyboardLayout, cfg: SynthConfig, count_per_word: int):
    """Samples for every word, ordered word-by-word."""
    out = []
    for word in words:
        out.extend(generate(word, layout, cfg, count_per_word))
    return out
