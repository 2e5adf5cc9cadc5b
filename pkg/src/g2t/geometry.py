"""Keyboard layouts, gesture trajectories, and arc-length resampling.

Coordinate convention: x grows rightward, y grows downward, origin at the
top-left corner of the top-left key. Layout coordinates are in key-width
units; `normalize` rescales to a unit-width keyboard (total width = 1).
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

QWERTY_ROWS = ("qwertyuiop", "asdfghjkl", "zxcvbnm")
QWERTY_ROW_OFFSETS = (0.0, 0.25, 0.75)

DEFAULT_RESAMPLE_STEP = 0.25  # key-widths
DEFAULT_CLAMP = (8, 256)


@dataclass(frozen=True)
class Key:
    label: str
    cx: float
    cy: float
    width: float = 1.0
    height: float = 1.0


@dataclass(frozen=True)
class KeyboardLayout:
    """A 26-key keyboard. Keys are stored in alphabetical label order."""

    name: str
    keys: tuple[Key, ...]

    def __post_init__(self):
        labels = sorted(k.label for k in self.keys)
        if labels != list(string.ascii_lowercase):
            raise ValueError("layout must contain each key a-z exactly once")
        if any(k.width <= 0 or k.height <= 0 for k in self.keys):
            raise ValueError("key widths and heights must be strictly positive")
        if len({(k.cx, k.cy) for k in self.keys}) != 26:
            raise ValueError("key centers must be pairwise distinct")
        object.__setattr__(self, "keys", tuple(sorted(self.keys, key=lambda k: k.label)))

    def key(self, label: str) -> Key:
        i = ord(label) - ord("a")
        if not 0 <= i < 26:
            raise KeyError(f"no such key: {label!r}")
        return self.keys[i]

    def center(self, label: str) -> tuple[float, float]:
        k = self.key(label)
        return (k.cx, k.cy)

    def centers(self) -> np.ndarray:
        """(26, 2) array of key centers in alphabetical order."""
        return np.array([[k.cx, k.cy] for k in self.keys], dtype=np.float64)

    @property
    def width(self) -> float:
        """Total keyboard width: max key right edge minus min key left edge."""
        right = max(k.cx + k.width / 2 for k in self.keys)
        left = min(k.cx - k.width / 2 for k in self.keys)
        return right - left

    def scaled(self, factor: float) -> KeyboardLayout:
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        keys = tuple(
            Key(k.label, k.cx * factor, k.cy * factor, k.width * factor, k.height * factor)
            for k in self.keys
        )
        return KeyboardLayout(self.name, keys)

    def normalized(self) -> KeyboardLayout:
        """The same layout rescaled to total width 1."""
        w = self.width
        if w <= 0:
            raise DataError(f"layout {self.name!r} has degenerate width {w}")
        return self.scaled(1.0 / w)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "keys": [
                {"label": k.label, "cx": k.cx, "cy": k.cy, "w": k.width, "h": k.height}
                for k in self.keys
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> KeyboardLayout:
        try:
            keys = tuple(
                Key(k["label"], float(k["cx"]), float(k["cy"]), float(k["w"]), float(k["h"]))
                for k in obj["keys"]
            )
            return cls(str(obj["name"]), keys)
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"bad layout JSON: {e}") from e


def load_layout(path) -> KeyboardLayout:
    with open(path, "r", encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"layout file {path} is not valid JSON: {e}") from e
    return KeyboardLayout.from_json(obj)


def default_qwerty() -> KeyboardLayout:
    """Canonical QWERTY: unit keys, row y-centers 0.5/1.5/2.5, row offsets 0/0.25/0.75."""
    keys = []
    for row, offset, y in zip(QWERTY_ROWS, QWERTY_ROW_OFFSETS, (0.5, 1.5, 2.5)):
        for i, label in enumerate(row):
            keys.append(Key(label, offset + i + 0.5, y))
    return KeyboardLayout("qwerty-default", tuple(keys))


def _as_point_array(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must be an (n, 2) array, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Trajectory:
    """A raw word-gesture path: (n, 2) points, optional per-point seconds."""

    points: np.ndarray
    times: np.ndarray | None = None
    word: str | None = None
    user_id: str | None = None

    def __post_init__(self):
        pts = _as_point_array(self.points)
        if len(pts) < 2:
            raise ValueError("a trajectory needs at least 2 points")
        if not np.isfinite(pts).all():
            raise ValueError("trajectory points must be finite")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.times is not None:
            ts = np.asarray(self.times, dtype=np.float64).copy()
            if ts.shape != (len(pts),):
                raise ValueError("times must have one entry per point")
            if np.any(np.diff(ts) < 0):
                raise ValueError("timestamps must be non-decreasing")
            ts.flags.writeable = False
            object.__setattr__(self, "times", ts)

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_list(cls, rows, word=None, user_id=None) -> Trajectory:
        """Build from [[x, y], ...] or [[x, y, t], ...] rows (uniform arity)."""
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] not in (2, 3):
            raise ValueError("each point must be [x, y] or [x, y, t]")
        times = arr[:, 2] if arr.shape[1] == 3 else None
        return cls(points=arr[:, :2], times=times, word=word, user_id=user_id)


@dataclass(frozen=True)
class EncodedTrajectory:
    """Fixed-length arc-length-uniform resampling of a trajectory."""

    points: np.ndarray

    def __post_init__(self):
        pts = _as_point_array(self.points).copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def length(self) -> int:
        return len(self.points)

    def __len__(self) -> int:
        return len(self.points)


def normalize(traj: Trajectory, layout: KeyboardLayout) -> Trajectory:
    """Rescale a trajectory to unit-keyboard-width coordinates.

    Both x and y are divided by the layout's total width, so the result is
    scale-free: geometrically similar trajectory/layout pairs map to the
    same point set regardless of device size.
    """
    w = layout.width
    if w <= 0:
        raise DataError(f"layout {layout.name!r} has degenerate width {w}")
    return Trajectory(
        points=traj.points / w, times=traj.times, word=traj.word, user_id=traj.user_id
    )


def resample(
    traj: Trajectory,
    step: float = DEFAULT_RESAMPLE_STEP,
    clamp: tuple[int, int] = DEFAULT_CLAMP,
) -> EncodedTrajectory:
    """Resample a polyline at uniform arc-length spacing.

    T = max(t_min, min(t_max, floor(path_length / step) + 1)); the output
    spacing is path_length / (T - 1), which equals `step` whenever the
    length divides evenly and the clamp does not bind. First and last
    output points equal the input endpoints. A zero-length path yields
    t_min copies of the point.
    """
    if step <= 0:
        raise ValueError("resample step must be positive")
    t_min, t_max = clamp
    if not (2 <= t_min <= t_max):
        raise ValueError("clamp must satisfy 2 <= t_min <= t_max")

    pts = traj.points
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    if total == 0.0:
        return EncodedTrajectory(np.tile(pts[0], (t_min, 1)))

    t = int(max(t_min, min(t_max, np.floor(total / step) + 1)))
    targets = np.linspace(0.0, total, t)

    # np.interp needs strictly increasing sample positions; drop zero-length segments
    keep = np.concatenate([[True], seg_len > 0])
    cum_u, pts_u = cum[keep], pts[keep]
    out = np.column_stack(
        [np.interp(targets, cum_u, pts_u[:, 0]), np.interp(targets, cum_u, pts_u[:, 1])]
    )
    return EncodedTrajectory(out)


def arc_lengths(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex of a polyline, starting at 0."""
    seg = np.diff(np.asarray(points, dtype=np.float64), axis=0)
    return np.concatenate([[0.0], np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))])
