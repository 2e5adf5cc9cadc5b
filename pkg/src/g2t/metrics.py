"""Evaluation and gesture-analysis measures.

Top-k word accuracy, character error rate, per-key touch-point statistics
(ADKC / AMAL), and local trajectory curvature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import EncodedTrajectory, KeyboardLayout


def topk_accuracy(predictions, truths, k: int) -> float:
    """Fraction of samples whose truth appears in the first k predictions."""
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths must have equal length")
    if not truths:
        raise ValueError("need at least one sample")
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for preds, truth in zip(predictions, truths) if truth in list(preds)[:k])
    return hits / len(truths)


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def cer(hypothesis: str, reference: str) -> float:
    """Character error rate: edit distance divided by the reference length."""
    if not reference:
        raise ValueError("reference must be non-empty")
    return levenshtein(hypothesis, reference) / len(reference)


@dataclass(frozen=True)
class KeyTouchStats:
    key: str
    center: tuple[float, float]  # sample mean of the touch points
    eigenvalues: tuple[float, float]  # covariance eigenvalues, (min, max)
    n_points: int


@dataclass(frozen=True)
class TouchPointStats:
    adkc: float
    amal: float
    per_key: tuple[KeyTouchStats, ...]
    skipped: tuple[tuple[str, int], ...]  # keys excluded for having < 2 samples


def touch_point_stats(samples, layout: KeyboardLayout) -> TouchPointStats:
    """Per-key touch bias and dispersion from (key_label, (x, y)) samples.

    ADKC averages the distance from each key's touch centroid to the key
    center; AMAL averages 2*sqrt(lambda_max) of each key's unbiased sample
    covariance. Keys with fewer than two samples are excluded from both
    averages and reported in `skipped`.
    """
    by_key: dict[str, list] = {}
    for label, point in samples:
        by_key.setdefault(label, []).append(point)

    per_key = []
    skipped = []
    for label in sorted(by_key):
        pts = np.asarray(by_key[label], dtype=np.float64)
        if len(pts) < 2:
            skipped.append((label, len(pts)))
            continue
        mean = pts.mean(axis=0)
        cov = np.cov(pts.T, ddof=1)
        eig = np.linalg.eigvalsh(cov)
        eig = np.maximum(eig, 0.0)  # clamp rounding noise
        per_key.append(
            KeyTouchStats(
                key=label,
                center=(float(mean[0]), float(mean[1])),
                eigenvalues=(float(eig[0]), float(eig[1])),
                n_points=len(pts),
            )
        )
    if not per_key:
        raise ValueError("no key has the two or more touch points needed for covariance")

    dists = [
        float(np.hypot(s.center[0] - layout.key(s.key).cx, s.center[1] - layout.key(s.key).cy))
        for s in per_key
    ]
    majors = [2.0 * float(np.sqrt(s.eigenvalues[1])) for s in per_key]
    return TouchPointStats(
        adkc=float(np.mean(dists)),
        amal=float(np.mean(majors)),
        per_key=tuple(per_key),
        skipped=tuple(skipped),
    )


def curvature(enc: EncodedTrajectory) -> np.ndarray:
    """Unsigned curvature at each interior point of an arc-length-uniform path.

    Central finite differences over the sample index; points with zero
    velocity get curvature 0. Returns T-2 values (endpoints excluded).
    """
    pts = enc.points
    if len(pts) < 3:
        raise ValueError("curvature needs at least 3 points")
    d1 = (pts[2:] - pts[:-2]) / 2.0
    d2 = pts[2:] - 2.0 * pts[1:-1] + pts[:-2]
    num = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    speed2 = d1[:, 0] ** 2 + d1[:, 1] ** 2
    out = np.zeros(len(pts) - 2)
    moving = speed2 > 0
    out[moving] = num[moving] / speed2[moving] ** 1.5
    return out


def summarize(values) -> dict:
    """Mean, median, and quartiles of a value list (for curvature reports)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return {"n": 0, "mean": 0.0, "median": 0.0, "q1": 0.0, "q3": 0.0}
    return {
        "n": int(arr.size),
        "mean": float(arr.mean()),
        "median": float(np.median(arr)),
        "q1": float(np.percentile(arr, 25)),
        "q3": float(np.percentile(arr, 75)),
    }
