"""Gesture dataset ingestion, serialization, and splitting.

File format is JSONL: a mandatory first header line {"layout": name},
then one sample per line: {"word": str, "user": str, "points": [[x, y]
or [x, y, t], ...]}. Coordinates stay in raw layout units; normalization
belongs to the decoding pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DatasetFormatError
from .geometry import Trajectory


@dataclass(frozen=True)
class GestureDataset:
    samples: tuple[Trajectory, ...]
    layout_name: str
    source: str = ""

    def __post_init__(self):
        for s in self.samples:
            if not s.word or not (s.word.isascii() and s.word.isalpha() and s.word.islower()):
                raise ValueError(f"sample word must be lowercase a-z, got {s.word!r}")
        object.__setattr__(self, "samples", tuple(self.samples))

    def __len__(self) -> int:
        return len(self.samples)

    def words(self) -> list[str]:
        return sorted({s.word for s in self.samples})

    def user_ids(self) -> list[str]:
        return sorted({s.user_id for s in self.samples if s.user_id is not None})


def load_jsonl(path) -> GestureDataset:
    """Parse a dataset file, rejecting malformed lines with their location."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetFormatError("dataset file is empty", path=path)

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"header is not valid JSON: {e}", path=path, line=1) from e
    if not isinstance(header, dict) or "layout" not in header:
        raise DatasetFormatError('missing {"layout": ...} header line', path=path, line=1)

    samples = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"invalid JSON: {e}", path=path, line=ln) from e
        if not isinstance(obj, dict):
            raise DatasetFormatError("sample line must be a JSON object", path=path, line=ln)
        word = obj.get("word")
        user = obj.get("user")
        points = obj.get("points")
        if not isinstance(word, str) or not word or not (
            word.isascii() and word.isalpha() and word.islower()
        ):
            raise DatasetFormatError(f"word must be lowercase a-z, got {word!r}", path=path, line=ln)
        if not isinstance(points, list) or len(points) < 2:
            raise DatasetFormatError("points must list at least 2 entries", path=path, line=ln)
        arities = {len(p) if isinstance(p, list) else -1 for p in points}
        if not arities <= {2, 3} or len(arities) != 1:
            raise DatasetFormatError(
                "points must be uniformly [x, y] or [x, y, t]", path=path, line=ln
            )
        try:
            traj = Trajectory.from_list(points, word=word, user_id=user)
        except ValueError as e:
            raise DatasetFormatError(str(e), path=path, line=ln) from e
        samples.append(traj)
    if not samples:
        raise DatasetFormatError("dataset has a header but no samples", path=path)
    return GestureDataset(tuple(samples), layout_name=str(header["layout"]), source=str(path))


def save_jsonl(ds: GestureDataset, path):
    """Inverse of load_jsonl; floats keep full round-trip precision."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"layout": ds.layout_name}) + "\n")
        for s in ds.samples:
            if s.times is not None:
                pts = [[x, y, t] for (x, y), t in zip(s.points.tolist(), s.times.tolist())]
            else:
                pts = s.points.tolist()
            row = {"word": s.word, "user": s.user_id, "points": pts}
            f.write(json.dumps(row) + "\n")


def loso_splits(ds: GestureDataset) -> list[tuple[GestureDataset, GestureDataset]]:
    """Leave-one-subject-out: one (train, test) pair per user, user-ordered."""
    if any(s.user_id is None for s in ds.samples):
        raise ValueError("every sample needs a user_id for leave-one-subject-out splits")
    users = ds.user_ids()
    if len(users) < 2:
        raise ValueError(f"leave-one-subject-out needs >= 2 users, found {len(users)}")
    splits = []
    for user in users:
        test = tuple(s for s in ds.samples if s.user_id == user)
        train = tuple(s for s in ds.samples if s.user_id != user)
        splits.append(
            (
                GestureDataset(train, ds.layout_name, ds.source),
                GestureDataset(test, ds.layout_name, ds.source),
            )
        )
    return splits


def random_split(ds: GestureDataset, train_fraction: float, seed: int = 0):
    """Seeded shuffle-and-cut; no word stratification."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(ds.samples)
    n_train = int(round(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise ValueError(f"train_fraction {train_fraction} leaves an empty side for {n} samples")
    order = np.random.default_rng(seed).permutation(n)
    train = tuple(ds.samples[i] for i in order[:n_train])
    test = tuple(ds.samples[i] for i in order[n_train:])
    return (
        GestureDataset(train, ds.layout_name, ds.source),
        GestureDataset(test, ds.layout_name, ds.source),
    )
