"""SHARK2-style template matching over a word lexicon.

Each lexicon word gets an ideal path through its letter centers, resampled
to a fixed resolution. Candidates are scored on two channels: shape (mean
pointwise distance after centroid translation and bounding-box scaling)
and location (mean pointwise distance in place), combined linearly.
Start/end pruning discards templates whose endpoints are far from the
gesture's endpoints before any scoring happens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geometry import EncodedTrajectory, KeyboardLayout, Trajectory, resample

DEFAULT_RESOLUTION = 100
DEFAULT_PRUNE_RADIUS = 2.0  # key-widths


@dataclass(frozen=True)
class WordTemplate:
    word: str
    ideal_path: EncodedTrajectory
    start_key: str
    end_key: str


def construct_template(word: str, layout: KeyboardLayout, n: int = DEFAULT_RESOLUTION) -> WordTemplate:
    """Ideal path through the word's letter centers, resampled to n points.

    Consecutive duplicate letters contribute a single vertex; single-letter
    words yield n copies of the key center.
    """
    if not word:
        raise ValueError("word must be non-empty")
    if n < 2:
        raise ValueError("template resolution must be >= 2")
    letters = [c for i, c in enumerate(word) if i == 0 or c != word[i - 1]]
    try:
        centers = np.array([layout.center(c) for c in letters], dtype=np.float64)
    except KeyError as e:
        raise DataError(f"word {word!r} uses a letter missing from layout {layout.name!r}") from e
    if len(centers) == 1:
        centers = np.vstack([centers, centers])
    path = resample(Trajectory(centers), step=1.0, clamp=(n, n))
    return WordTemplate(word=word, ideal_path=path, start_key=word[0], end_key=word[-1])


def _shape_normalize(points: np.ndarray) -> np.ndarray:
    """Translate to centroid origin; scale so the larger bbox side is 1.

    Zero-extent point sets are only translated.
    """
    centered = points - points.mean(axis=0)
    extent = centered.max(axis=0) - centered.min(axis=0)
    side = extent.max()
    return centered / side if side > 0 else centered


def _has_extent(points: np.ndarray) -> bool:
    return bool((points.max(axis=0) - points.min(axis=0)).max() > 0)


def similarity(
    enc: EncodedTrajectory,
    template: WordTemplate,
    shape_weight: float = 0.5,
    location_weight: float = 0.5,
) -> float:
    """Negated weighted channel distance; 0 is a perfect match.

    When either curve has zero extent the shape channel is undefined and
    the score falls back to the location channel alone.
    """
    a = enc.points
    b = template.ideal_path.points
    if len(a) != len(b):
        raise ValueError(f"length mismatch: trajectory {len(a)} vs template {len(b)}")
    d_loc = float(np.hypot(*(a - b).T).mean())
    if not (_has_extent(a) and _has_extent(b)):
        return -d_loc
    d_shape = float(np.hypot(*(_shape_normalize(a) - _shape_normalize(b)).T).mean())
    return -(shape_weight * d_shape + location_weight * d_loc)


@dataclass(frozen=True)
class TemplateSet:
    """Immutable per-lexicon template collection plus matching parameters."""

    templates: tuple[WordTemplate, ...]
    resolution: int = DEFAULT_RESOLUTION
    shape_weight: float = 0.5
    location_weight: float = 0.5
    prune_radius: float = DEFAULT_PRUNE_RADIUS

    def __post_init__(self):
        if not self.templates:
            raise ValueError("template set must be non-empty")
        words = [t.word for t in self.templates]
        if len(set(words)) != len(words):
            raise ValueError("template words must be unique")
        if abs(self.shape_weight + self.location_weight - 1.0) > 1e-12:
            raise ValueError("channel weights must sum to 1")
        if self.prune_radius < 0:
            raise ValueError("prune_radius must be >= 0")
        object.__setattr__(self, "templates", tuple(sorted(self.templates, key=lambda t: t.word)))

    @classmethod
    def build(
        cls,
        lexicon,
        layout: KeyboardLayout,
        resolution: int = DEFAULT_RESOLUTION,
        shape_weight: float = 0.5,
        location_weight: float = 0.5,
        prune_radius: float = DEFAULT_PRUNE_RADIUS,
    ) -> TemplateSet:
        words = sorted(set(lexicon))
        templates = tuple(construct_template(w, layout, resolution) for w in words)
        return cls(templates, resolution, shape_weight, location_weight, prune_radius)


def decode_topk(traj: Trajectory, tset: TemplateSet, k: int = 4) -> list[tuple[str, float]]:
    """Rank lexicon words against a gesture; returns (word, score) descending.

    The trajectory must be in the same coordinate frame the templates were
    built in. Templates whose start/end points lie farther than
    prune_radius from the gesture endpoints are skipped; if that removes
    everything, pruning is bypassed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    enc = resample(traj, step=1.0, clamp=(tset.resolution, tset.resolution))

    start = traj.points[0]
    end = traj.points[-1]
    survivors = [
        t
        for t in tset.templates
        if np.hypot(*(t.ideal_path.points[0] - start)) <= tset.prune_radius
        and np.hypot(*(t.ideal_path.points[-1] - end)) <= tset.prune_radius
    ]
    if not survivors:
        survivors = list(tset.templates)

    scored = [
        (t.word, similarity(enc, t, tset.shape_weight, tset.location_weight)) for t in survivors
    ]
    scored.sort(key=lambda ws: (-ws[1], ws[0]))
    return scored[:k]


def load_lexicon(path) -> list[str]:
    """One lowercase a-z word per line; blank lines are ignored."""
    words = []
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, start=1):
            word = line.strip()
            if not word:
                continue
            if not word.isascii() or not word.isalpha() or not word.islower():
                raise DataError(f"{path}:{ln}: lexicon word must be lowercase a-z, got {word!r}")
            words.append(word)
    if not words:
        raise DataError(f"{path}: lexicon file is empty")
    return words
